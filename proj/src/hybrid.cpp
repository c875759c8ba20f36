#include "gaitsyn/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gaitsyn {

double phase_tau(double t, double t0, double T_p) {
  if (T_p <= 0.0) throw SimulationError("phase_tau: T_p must be positive");
  if (t < t0 - 1e-12) throw SimulationError("phase_tau: t before step start");
  return (t - t0) / T_p;
}

bool guard_check(double tau, double grf_swing_z, const GuardConfig& cfg) {
  if (!std::isfinite(tau) || !std::isfinite(grf_swing_z))
    throw SimulationError("guard_check: non-finite input");
  return (grf_swing_z > cfg.grf_min && tau > cfg.tau_gate) || tau > cfg.tau_max;
}

// --- Dormand-Prince 4(5) ----------------------------------------------------

namespace {

struct Rk45Step {
  VecX x5;
  double err;
};

Rk45Step dp_step(const OdeFn& f, double t, const VecX& x, double h, const IntegratorConfig& cfg) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                      a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                      a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                      b6 = 11.0 / 84;
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  const VecX k1 = f(t, x);
  const VecX k2 = f(t + c2 * h, x + h * (a21 * k1));
  const VecX k3 = f(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
  const VecX k4 = f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const VecX k5 = f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const VecX k6 = f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  Rk45Step out;
  out.x5 = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  const VecX k7 = f(t + h, out.x5);
  const VecX e = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  double acc = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x(i)), std::abs(out.x5(i)));
    acc += (e(i) / sc) * (e(i) / sc);
  }
  out.err = std::sqrt(acc / x.size());
  return out;
}

// Shared adaptive loop; on_step may mutate the accepted state.
template <typename OnAccept>
void adaptive_flow(const OdeFn& f, double t0, VecX& x, double t1, const IntegratorConfig& cfg,
                   OnAccept&& on_accept) {
  double t = t0;
  double h = std::min(cfg.h_init, t1 - t0);
  while (t < t1 - 1e-15) {
    h = std::min(h, t1 - t);
    auto step = dp_step(f, t, x, h, cfg);
    if (step.err <= 1.0 || h <= cfg.h_min) {
      const double t_new = t + h;
      if (!step.x5.allFinite()) throw SimulationError("integrate: state diverged");
      const bool keep_going = on_accept(t_new, step.x5);
      if (!keep_going) return;
      t = t_new;
      x = std::move(step.x5);
      const double grow = step.err > 0 ? 0.9 * std::pow(step.err, -0.2) : 5.0;
      h = std::min(cfg.h_max, h * std::clamp(grow, 0.2, 5.0));
    } else {
      h = std::max(cfg.h_min, h * std::clamp(0.9 * std::pow(step.err, -0.2), 0.1, 1.0));
    }
  }
}

}  // namespace

VecX integrate_ode(const OdeFn& f, double t0, VecX x0, double t1, const IntegratorConfig& cfg,
                   const StepCallback& on_step) {
  if (t1 <= t0) return x0;
  VecX x = std::move(x0);
  adaptive_flow(f, t0, x, t1, cfg, [&](double t, VecX& xs) {
    if (on_step) on_step(t, xs);
    return true;
  });
  return x;
}

GuardHit flow_to_guard(const OdeFn& f, const std::function<bool(double, const VecX&)>& predicate,
                       double t0, VecX x0, double t_max, const IntegratorConfig& cfg,
                       double time_tol, const StepCallback& on_step) {
  GuardHit hit;
  double t_lo = t0;
  VecX x_lo = x0;
  double t_hi = t0;
  bool found = false;

  VecX x = std::move(x0);
  adaptive_flow(f, t0, x, t_max, cfg, [&](double t, VecX& xs) {
    if (predicate(t, xs)) {
      t_hi = t;
      found = true;
      return false;
    }
    if (on_step) on_step(t, xs);
    t_lo = t;
    x_lo = xs;
    return true;
  });

  if (!found) {
    hit.timeout = true;
    hit.t = t_max;
    hit.x = (t_lo < t_max) ? integrate_ode(f, t_lo, x_lo, t_max, cfg) : x_lo;
    return hit;
  }
  // Bisect [t_lo, t_hi] by re-integration from the last pre-guard state.
  while (t_hi - t_lo > time_tol) {
    const double mid = 0.5 * (t_lo + t_hi);
    const VecX xm = integrate_ode(f, t_lo, x_lo, mid, cfg);
    if (predicate(mid, xm)) {
      t_hi = mid;
    } else {
      t_lo = mid;
      x_lo = xm;
    }
  }
  hit.t = t_hi;
  hit.x = integrate_ode(f, t_lo, x_lo, t_hi, cfg);
  hit.timeout = false;
  return hit;
}

// --- Biped step -------------------------------------------------------------

namespace {

int stance_frame_of(const RigidBodyModel& model, StanceLeg leg) {
  return model.frame_index(leg == StanceLeg::Left ? "left_sole" : "right_sole");
}

}  // namespace

StepResult simulate_step(const RigidBodyModel& model, const SystemState& x0,
                         const Controller& controller, const GuardConfig& guard,
                         const IntegratorConfig& integ, const Forcing& forcing) {
  guard.validate();
  if (guard.tau_max > 2.0) throw SimulationError("simulate_step: tau_max beyond runaway limit 2");
  const int n = model.nq();
  const int stance_frame = stance_frame_of(model, x0.stance_leg);
  const int swing_frame = model.mirror_frame(stance_frame);

  StepResult out;

  auto controller_torque = [&](double t, const VecX& x) {
    SystemState st = SystemState::unpack(x, x0.stance_leg, x0.t0);
    VecX u = controller.torque(model, st, t);
    if (!u.allFinite())
      throw SimulationError("simulate_step: controller returned non-finite torque");
    for (int a = 0; a < model.nu(); ++a)
      u(a) = std::clamp(u(a), -model.u_limit()(a), model.u_limit()(a));
    return u;
  };

  auto eval = [&](double t, const VecX& x, Vec3* F_out) {
    SystemState st = SystemState::unpack(x, x0.stance_leg, x0.t0);
    const VecX u = controller_torque(t, x);
    VecX tau_ext;
    if (forcing) tau_ext = forcing(t, st);
    VecX ddq, lambda;
    auto res = constrained_accel(model, st.q, st.dq, u, stance_frame, tau_ext);
    if (F_out) *F_out = Vec3(res.wrench.fx(), res.wrench.fz(), res.wrench.my());
    VecX xdot(2 * n);
    xdot << st.dq, res.ddq;
    return xdot;
  };

  auto ode = [&](double t, const VecX& x) { return eval(t, x, nullptr); };

  auto swing_height = [&](const VecX& x) {
    return frame_kinematics(model, x.head(n), x.tail(n), swing_frame).pose.y();
  };

  auto predicate = [&](double t, const VecX& x) {
    const double tau = phase_tau(t, x0.t0, guard.T_p);
    const double grf = swing_height(x) <= 0.0 ? 2.0 * guard.grf_min : 0.0;
    return guard_check(std::min(tau, guard.tau_max), grf, guard);
  };

  auto project = [&](VecX& xs) {
    const MatX J = contact_jacobian(model, xs.head(n), stance_frame);
    const VecX drift = J * xs.tail(n);
    if (drift.norm() > 1e-8)
      xs.tail(n) -= J.completeOrthogonalDecomposition().solve(drift);
  };

  auto record = [&](double t, const VecX& xs) {
    Vec3 F = Vec3::Zero();
    eval(t, xs, &F);
    SystemState st = SystemState::unpack(xs, x0.stance_leg, x0.t0);
    out.trace.samples.push_back(
        {t, st.q, st.dq, controller_torque(t, xs), F, x0.stance_leg,
         phase_tau(t, x0.t0, guard.T_p)});
  };

  VecX x = x0.packed();
  {
    const MatX J = contact_jacobian(model, x0.q, stance_frame);
    if ((J * x0.dq).norm() > 1e-3)
      throw SimulationError("simulate_step: initial state violates the stance constraint");
  }
  project(x);
  record(x0.t0, x);

  const double t_end = x0.t0 + guard.tau_max * guard.T_p;
  auto hit = flow_to_guard(ode, predicate, x0.t0, x, t_end, integ, 1e-9,
                           [&](double t, VecX& xs) {
                             project(xs);
                             record(t, xs);
                           });

  GuardEvent ev;
  ev.t = hit.t;
  if (hit.timeout) {
    ev.type = GuardEvent::Type::Timeout;
    ev.tau = guard.tau_max;
  } else {
    ev.type = GuardEvent::Type::Grf;
    ev.tau = phase_tau(hit.t, x0.t0, guard.T_p);
  }
  if (out.trace.samples.empty() || std::abs(out.trace.samples.back().t - hit.t) > 1e-12)
    record(hit.t, hit.x);
  out.trace.event = ev;
  out.trace.duration = hit.t - x0.t0;

  const int bx = model.base_x_coord();
  if (bx >= 0 && out.trace.duration > 0.0)
    out.trace.avg_hip_velocity = (hit.x(bx) - x0.q(bx)) / out.trace.duration;

  auto reset = impact_reset(model, hit.x.head(n), hit.x.tail(n), swing_frame);
  out.trace.impulse_norm = reset.impulse.norm();
  out.base_shift = reset.base_shift;
  out.x_plus.q = reset.q_plus;
  out.x_plus.dq = reset.dq_plus;
  out.x_plus.stance_leg = other_leg(x0.stance_leg);
  out.x_plus.t0 = hit.t;
  return out;
}

ExecutionTrace run_walk(const RigidBodyModel& model, const SystemState& x0,
                        const Controller& controller, int n_steps, const GuardConfig& guard,
                        const IntegratorConfig& integ, const Forcing& forcing) {
  ExecutionTrace trace;
  trace.nq = model.nq();
  trace.nu = model.nu();
  for (const auto& c : model.coords()) trace.coord_names.push_back(c.name);
  for (const auto& a : model.spec().actuated) trace.actuator_names.push_back(a);

  SystemState state = x0;
  double offset = 0.0;
  for (int k = 0; k < n_steps; ++k) {
    Forcing shifted;
    if (forcing) {
      const double off = offset;
      shifted = [&forcing, &model, off](double t, const SystemState& st) {
        SystemState world = st;
        if (model.base_x_coord() >= 0) world.q(model.base_x_coord()) += off;
        return forcing(t, world);
      };
    }
    auto step = simulate_step(model, state, controller, guard, integ, shifted);
    step.trace.world_offset = offset;
    trace.steps.push_back(step.trace);
    offset += step.base_shift;
    state = step.x_plus;
  }
  return trace;
}

TraceSample ExecutionTrace::physical(const RigidBodyModel& model, int step, int sample) const {
  TraceSample s = steps[step].samples[sample];
  if (s.stance == StanceLeg::Right) {
    s.q = model.relabel(s.q);
    s.dq = model.relabel(s.dq);
    VecX u_full = model.relabel(model.B() * s.u);
    s.u = model.B().transpose() * u_full;
  }
  if (model.base_x_coord() >= 0) s.q(model.base_x_coord()) += steps[step].world_offset;
  return s;
}

std::string ExecutionTrace::to_csv(const RigidBodyModel& model) const {
  std::ostringstream os;
  os.precision(12);
  os << "t";
  for (const auto& n : coord_names) os << ",q_" << n;
  for (const auto& n : coord_names) os << ",dq_" << n;
  for (const auto& n : actuator_names) os << ",u_" << n;
  os << ",F_x,F_z,M_y,stance,tau\n";
  for (int st = 0; st < static_cast<int>(steps.size()); ++st) {
    for (int k = 0; k < static_cast<int>(steps[st].samples.size()); ++k) {
      const TraceSample s = physical(model, st, k);
      os << s.t;
      for (int i = 0; i < s.q.size(); ++i) os << "," << s.q(i);
      for (int i = 0; i < s.dq.size(); ++i) os << "," << s.dq(i);
      for (int i = 0; i < s.u.size(); ++i) os << "," << s.u(i);
      os << "," << s.F.x() << "," << s.F.y() << "," << s.F.z() << ","
         << (s.stance == StanceLeg::Left ? "left" : "right") << "," << s.tau << "\n";
    }
  }
  return os.str();
}

}  // namespace gaitsyn
