#include <cmath>

#include "doctest.h"
#include "gaitsyn/hybrid.hpp"
#include "test_util.hpp"

using namespace gaitsyn;
using namespace gaitsyn::testutil;

namespace {

struct ConstantController : Controller {
  VecX u;
  explicit ConstantController(VecX u_) : u(std::move(u_)) {}
  VecX torque(const RigidBodyModel&, const SystemState&, double) const override { return u; }
};

struct NanController : Controller {
  VecX torque(const RigidBodyModel& m, const SystemState&, double) const override {
    return VecX::Constant(m.nu(), std::nan(""));
  }
};

SystemState lifted_stance_state(const RigidBodyModel& model) {
  // Left sole flat at the origin, right knee flexed so the swing foot clears
  // the ground; statically consistent velocities (zero).
  VecX q = VecX::Zero(model.nq());
  q(model.coord_index("right_knee")) = 0.6;
  q(model.coord_index("right_hip")) = 0.3;
  q(model.coord_index("base_z")) = 1.0;
  auto fk = frame_kinematics(model, q, VecX::Zero(model.nq()), "left_sole");
  q(model.coord_index("base_z")) -= fk.pose.y();
  q(model.coord_index("base_x")) -= fk.pose.x();
  SystemState st;
  st.q = q;
  st.dq = VecX::Zero(model.nq());
  st.stance_leg = StanceLeg::Left;
  st.t0 = 0.0;
  return st;
}

}  // namespace

TEST_CASE("phase_tau") {
  CHECK(phase_tau(0.35, 0.0, 0.7) == doctest::Approx(0.5));
  CHECK(phase_tau(3.0, 3.0, 0.7) == doctest::Approx(0.0));
  GuardConfig cfg;
  CHECK(cfg.T_p == doctest::Approx(0.7));  // paper step period default
  CHECK_THROWS_AS(phase_tau(1.0, 0.0, 0.0), SimulationError);
}

TEST_CASE("guard_check truth table") {
  GuardConfig cfg;
  cfg.grf_min = 20.0;
  CHECK(guard_check(0.6, 40.0, cfg));
  CHECK(guard_check(1.01, 0.0, cfg));
  CHECK_FALSE(guard_check(0.4, 200.0, cfg));
  CHECK_FALSE(guard_check(0.6, 10.0, cfg));
  CHECK_THROWS_AS(guard_check(std::nan(""), 0.0, cfg), SimulationError);
}

TEST_CASE("free fall conserves energy to 1e-6 relative per second") {
  auto model = load_model(five_link_spec());
  const int n = model.nq();
  VecX q(n), dq(n);
  q << 0.0, 2.0, 0.1, 0.2, 0.3, -0.1, 0.4;
  dq << 0.3, 0.1, -0.2, 0.5, -0.4, 0.2, 0.1;
  const double E0 = kinetic_energy(model, q, dq) + potential_energy(model, q);
  OdeFn f = [&](double, const VecX& x) {
    VecX xdot(2 * n);
    xdot << x.tail(n), unconstrained_accel(model, x.head(n), x.tail(n), VecX());
    return xdot;
  };
  VecX x0(2 * n);
  x0 << q, dq;
  const VecX x1 = integrate_ode(f, 0.0, x0, 1.0, IntegratorConfig{});
  const double E1 = kinetic_energy(model, x1.head(n), x1.tail(n)) + potential_energy(model, x1.head(n));
  CHECK(std::abs(E1 - E0) / std::max(std::abs(E0), 1.0) < 1e-6);
}

TEST_CASE("integrator tolerance halving convergence sanity") {
  OdeFn f = [](double, const VecX& x) {
    VecX d(2);
    d << x(1), -9.81 * std::sin(x(0));
    return d;
  };
  VecX x0(2);
  x0 << 1.0, 0.0;
  IntegratorConfig a, b;
  b.abs_tol = a.abs_tol / 2;
  b.rel_tol = a.rel_tol / 2;
  const VecX xa = integrate_ode(f, 0, x0, 2.0, a);
  const VecX xb = integrate_ode(f, 0, x0, 2.0, b);
  CHECK((xa - xb).cwiseAbs().maxCoeff() < 10.0 * (a.abs_tol + a.rel_tol * xa.cwiseAbs().maxCoeff()));
}

TEST_CASE("simulate_step: timeout branch on a balanced pose") {
  auto model = load_model(seven_link_spec());
  auto state = lifted_stance_state(model);
  ConstantController hold(static_torque(model, state.q, "left_sole"));
  auto guard = GuardConfig::for_model(model);

  auto res = simulate_step(model, state, hold, guard);
  CHECK(res.trace.event.type == GuardEvent::Type::Timeout);
  CHECK(res.trace.event.tau == doctest::Approx(1.0));
  CHECK(res.trace.duration == doctest::Approx(guard.T_p));
  CHECK(res.x_plus.stance_leg == StanceLeg::Right);

  // Trace invariants: strictly increasing times, exactly one event.
  for (size_t i = 1; i < res.trace.samples.size(); ++i)
    CHECK(res.trace.samples[i].t > res.trace.samples[i - 1].t);

  // Determinism: identical inputs give bit-identical traces.
  auto res2 = simulate_step(model, state, hold, guard);
  REQUIRE(res2.trace.samples.size() == res.trace.samples.size());
  for (size_t i = 0; i < res.trace.samples.size(); ++i) {
    CHECK(res2.trace.samples[i].t == res.trace.samples[i].t);
    CHECK((res2.trace.samples[i].q - res.trace.samples[i].q).cwiseAbs().maxCoeff() == 0.0);
    CHECK((res2.trace.samples[i].dq - res.trace.samples[i].dq).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((res2.x_plus.q - res.x_plus.q).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate_step error paths") {
  auto model = load_model(seven_link_spec());
  auto state = lifted_stance_state(model);
  auto guard = GuardConfig::for_model(model);

  NanController bad;
  CHECK_THROWS_AS(simulate_step(model, state, bad, guard), SimulationError);

  GuardConfig runaway = guard;
  runaway.tau_max = 2.5;
  ConstantController hold(static_torque(model, state.q, "left_sole"));
  CHECK_THROWS_AS(simulate_step(model, state, hold, runaway), SimulationError);

  GuardConfig badcfg = guard;
  badcfg.grf_min = 0.0;
  CHECK_THROWS_AS(simulate_step(model, state, hold, badcfg), SimulationError);

  // Initial state violating the stance constraint is rejected.
  SystemState off = state;
  off.dq(model.coord_index("base_z")) = 1.0;
  CHECK_THROWS_AS(simulate_step(model, off, hold, guard), SimulationError);
}

TEST_CASE("run_walk: empty and trace csv shape") {
  auto model = load_model(seven_link_spec());
  auto state = lifted_stance_state(model);
  ConstantController hold(static_torque(model, state.q, "left_sole"));
  auto guard = GuardConfig::for_model(model);

  auto empty = run_walk(model, state, hold, 0, guard);
  CHECK(empty.steps.empty());

  auto two = run_walk(model, state, hold, 2, guard);
  CHECK(two.steps.size() == 2);
  const std::string csv = two.to_csv(model);
  // Header + at least a couple of samples per step.
  CHECK(csv.rfind("t,q_base_x", 0) == 0);
  CHECK(csv.find(",stance,tau") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') >
        static_cast<long>(two.steps[0].samples.size()));
}

TEST_CASE("flow_to_guard bisection brackets the predicate flip") {
  // Scalar clock: x' = 1, guard at x >= 1.
  OdeFn f = [](double, const VecX&) { return VecX::Ones(1); };
  auto pred = [](double, const VecX& x) { return x(0) >= 1.0; };
  VecX x0 = VecX::Zero(1);
  auto hit = flow_to_guard(f, pred, 0.0, x0, 5.0, IntegratorConfig{}, 1e-9);
  CHECK_FALSE(hit.timeout);
  CHECK(hit.t == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(hit.x(0) == doctest::Approx(1.0).epsilon(1e-7));
}
