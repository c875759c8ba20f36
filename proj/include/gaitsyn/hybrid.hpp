#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "gaitsyn/dynamics.hpp"

namespace gaitsyn {

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IntegratorConfig {
  double abs_tol = 1e-9;
  double rel_tol = 1e-8;
  double h_init = 1e-3;
  double h_min = 1e-12;
  double h_max = 0.02;
};

struct GuardConfig {
  double T_p = 0.7;        // step period (phase clock)
  double grf_min = 0.0;    // minimum vertical GRF, N
  double tau_gate = 0.5;   // GRF branch is armed only past this phase
  double tau_max = 1.0;    // timeout branch

  static GuardConfig for_model(const RigidBodyModel& model, double T_p = 0.7) {
    GuardConfig cfg;
    cfg.T_p = T_p;
    cfg.grf_min = 0.05 * model.total_weight();
    return cfg;
  }
  void validate() const {
    if (!(tau_gate > 0.0 && tau_gate < tau_max)) throw SimulationError("guard: need 0 < tau_gate < tau_max");
    if (!(grf_min > 0.0)) throw SimulationError("guard: grf_min must be positive");
    if (!(T_p > 0.0)) throw SimulationError("guard: T_p must be positive");
  }
};

// tau = (t - t0)/T_p, the normalized step phase.
double phase_tau(double t, double t0, double T_p);

// (GRF_swing > GRF_min and tau > tau_gate) or tau > tau_max.
bool guard_check(double tau, double grf_swing_z, const GuardConfig& cfg);

class Controller {
 public:
  virtual ~Controller() = default;
  virtual VecX torque(const RigidBodyModel& model, const SystemState& state, double t) const = 0;
  // Desired actuated-joint positions, when the control law defines them
  // (used for tracking-error metrics).
  virtual std::optional<VecX> desired_actuated(const RigidBodyModel&, const SystemState&,
                                               double) const {
    return std::nullopt;
  }
};

// Generalized external force (dimension nq) injected into the dynamics.
using Forcing = std::function<VecX(double t, const SystemState& state)>;

struct TraceSample {
  double t;
  VecX q, dq, u;
  Vec3 F;  // stance wrench (F_x, F_z, M_y)
  StanceLeg stance;
  double tau;
};

struct GuardEvent {
  enum class Type { Grf, Timeout };
  double t = 0.0;
  Type type = Type::Timeout;
  double tau = 0.0;
};

struct PhaseTrace {
  std::vector<TraceSample> samples;  // stance-at-origin coordinates
  GuardEvent event;
  double duration = 0.0;
  double avg_hip_velocity = 0.0;  // world frame
  double world_offset = 0.0;      // add to base_x for world coordinates
  double impulse_norm = 0.0;      // contact impulse magnitude at the reset
};

struct ExecutionTrace {
  std::vector<PhaseTrace> steps;
  int nq = 0, nu = 0;
  std::vector<std::string> coord_names;
  std::vector<std::string> actuator_names;

  // World-frame physical-joint view of a sample (un-relabels right-stance steps).
  TraceSample physical(const RigidBodyModel& model, int step, int sample) const;
  std::string to_csv(const RigidBodyModel& model) const;
};

struct StepResult {
  PhaseTrace trace;
  SystemState x_plus;       // re-zeroed, relabeled, stance leg flipped
  double base_shift = 0.0;  // world x removed by the reset re-zeroing
};

// Integrates one swing phase under the controller, locates the guard by
// bisection (1e-9 s), applies the plastic impact and relabels the legs.
// The timeout branch fires at tau == tau_max exactly.
StepResult simulate_step(const RigidBodyModel& model, const SystemState& x0,
                         const Controller& controller, const GuardConfig& guard,
                         const IntegratorConfig& integ = {}, const Forcing& forcing = {});

ExecutionTrace run_walk(const RigidBodyModel& model, const SystemState& x0,
                        const Controller& controller, int n_steps, const GuardConfig& guard,
                        const IntegratorConfig& integ = {}, const Forcing& forcing = {});

// --- Generic integration utilities -----------------------------------------

using OdeFn = std::function<VecX(double t, const VecX& x)>;
// Called after each accepted step; may mutate the state (e.g. constraint
// re-projection), and the mutation feeds back into the integration.
using StepCallback = std::function<void(double t, VecX& x)>;

// Adaptive Dormand-Prince 4(5); hits t1 exactly.
VecX integrate_ode(const OdeFn& f, double t0, VecX x0, double t1, const IntegratorConfig& cfg,
                   const StepCallback& on_step = {});

struct GuardHit {
  double t;
  VecX x;
  bool timeout = false;
};

// Flows until predicate(t, x) flips to true (bisected to time_tol) or t_max.
GuardHit flow_to_guard(const OdeFn& f, const std::function<bool(double, const VecX&)>& predicate,
                       double t0, VecX x0, double t_max, const IntegratorConfig& cfg,
                       double time_tol = 1e-9, const StepCallback& on_step = {});

}  // namespace gaitsyn
