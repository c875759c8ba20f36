#pragma once

#include "gaitsyn/hybrid.hpp"
#include "gaitsyn/io.hpp"

namespace gaitsyn {

struct VcError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bernstein-basis curve evaluation with value and first two s-derivatives.
// Outside [0, 1] the curve extends linearly with the endpoint slope, so a
// late guard keeps desired velocities bounded.
struct BezierEval {
  VecX value, d1, d2;
};
BezierEval bezier_eval(const MatX& coeffs, double s);

// Output selection: one velocity-regulating output (forward hip velocity)
// and posture outputs for every actuated joint except the sagittal stance
// ankle. Point-foot models have no ankle and run posture-only (y2) control.
struct OutputSpec {
  std::vector<std::string> posture_joints;
  bool has_velocity_output = true;

  static OutputSpec for_model(const RigidBodyModel& model, StanceLeg stance = StanceLeg::Left);
  // Selector matrix picking the posture coordinates out of q.
  MatX selector(const RigidBodyModel& model) const;
  int ny2() const { return static_cast<int>(posture_joints.size()); }
  void validate(const RigidBodyModel& model) const;

  Json to_json() const;
  static OutputSpec from_json(const Json& j);
};

struct Outputs {
  double y1 = 0.0;  // meaningful only when the spec has a velocity output
  VecX y2, dy2;
};

// y1 = hip forward velocity - v_des; y2 = S q - bezier(tau); the dy2 chain
// rule carries the 1/T_p phase rate.
Outputs eval_outputs(const RigidBodyModel& model, const VecX& x, const MatX& alpha, double tau,
                     const OutputSpec& spec, double T_p, double v_des);

struct IoControlResult {
  VecX u;
  double min_sigma_A = 0.0;  // smallest singular value of the decoupling matrix
  Outputs outputs;
};

// Input-output linearization: u = -A^{-1}(Lf terms + gain-weighted outputs),
// with closed-loop targets dy1 = -y1/eps and ddy2 = -(2/eps) dy2 - y2/eps^2.
// feedback_sign = -1 flips the output-feedback terms (destabilization hook
// for the stability certification tests).
IoControlResult io_control(const RigidBodyModel& model, const VecX& x, const MatX& alpha,
                           double tau, const OutputSpec& spec, double T_p, double v_des,
                           double eps, int stance_frame, double feedback_sign = 1.0);

// --- Gait artifact ----------------------------------------------------------

struct ConstraintReport {
  std::vector<std::pair<std::string, double>> max_violation;  // per constraint class
  double feasibility = 0.0;   // solver feasibility at acceptance
  double objective = 0.0;
  double min_sigma_A = 0.0;   // decoupling-matrix margin along the orbit
  double fixed_point_residual = 0.0;  // simulation re-validation
};

struct GaitArtifact {
  std::string model_name;
  MatX alpha;              // posture Bézier coefficients, one row per output
  int bezier_degree = 5;
  double T_p = 0.7;
  double v_des = 0.0;
  double eps = 0.1;
  OutputSpec outputs;
  VecX x_star;             // post-impact fixed point, left stance, foot at origin
  VecX orbit_t;
  MatX orbit_x;            // columns are states at orbit_t
  MatX orbit_u;
  ConstraintReport report;
  Provenance prov;

  Json to_json() const;
  static GaitArtifact from_json(const Json& j);
  void save(const std::string& path) const;
  static GaitArtifact load(const std::string& path);
};

// PHZD tracking controller around one optimized gait.
class PhzdController : public Controller {
 public:
  PhzdController(GaitArtifact gait, double eps, double feedback_sign = 1.0)
      : gait_(std::move(gait)), eps_(eps), feedback_sign_(feedback_sign) {
    if (eps_ <= 0.0) throw VcError("PhzdController: eps must be positive");
  }

  VecX torque(const RigidBodyModel& model, const SystemState& state, double t) const override;
  std::optional<VecX> desired_actuated(const RigidBodyModel& model, const SystemState& state,
                                       double t) const override;
  const GaitArtifact& gait() const { return gait_; }
  double eps() const { return eps_; }

 private:
  GaitArtifact gait_;
  double eps_;
  double feedback_sign_;
};

}  // namespace gaitsyn
