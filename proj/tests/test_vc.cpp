#include <cmath>

#include "doctest.h"
#include "gaitsyn/vc.hpp"
#include "test_util.hpp"

using namespace gaitsyn;
using namespace gaitsyn::testutil;

namespace {

SystemState lifted_state(const RigidBodyModel& model) {
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
  return st;
}

GaitArtifact hold_gait(const RigidBodyModel& model, const VecX& q, int degree = 5) {
  GaitArtifact g;
  g.model_name = model.name();
  g.outputs = OutputSpec::for_model(model, StanceLeg::Left);
  g.bezier_degree = degree;
  const MatX S = g.outputs.selector(model);
  const VecX target = S * q;
  g.alpha = target.replicate(1, degree + 1);
  g.T_p = 0.7;
  g.v_des = 0.0;
  g.x_star = VecX::Zero(2 * model.nq());
  g.x_star.head(model.nq()) = q;
  return g;
}

// Pointwise residual of the closed-loop output ODEs along a trace sample.
std::pair<double, double> output_ode_residual(const RigidBodyModel& model, const GaitArtifact& g,
                                              double eps, const TraceSample& s) {
  auto res = constrained_accel(model, s.q, s.dq, s.u, "left_sole");
  VecX x(2 * model.nq());
  x << s.q, s.dq;
  auto outs = eval_outputs(model, x, g.alpha, s.tau, g.outputs, g.T_p, g.v_des);
  const double dy1 = res.ddq(model.base_x_coord());
  const double r1 = dy1 + outs.y1 / eps;
  const auto bez = bezier_eval(g.alpha, s.tau);
  const MatX S = g.outputs.selector(model);
  const VecX ddy2 = S * res.ddq - bez.d2 / (g.T_p * g.T_p);
  const VecX r2 = ddy2 + (2.0 / eps) * outs.dy2 + (1.0 / (eps * eps)) * outs.y2;
  return {std::abs(r1), r2.cwiseAbs().maxCoeff()};
}

}  // namespace

TEST_CASE("bezier basics") {
  MatX c(2, 6);
  c.row(0).setConstant(1.5);
  c.row(1).setConstant(-0.3);
  for (double s : {0.0, 0.21, 0.77, 1.0}) {
    auto e = bezier_eval(c, s);
    CHECK(e.value(0) == doctest::Approx(1.5));
    CHECK(e.value(1) == doctest::Approx(-0.3));
    CHECK(e.d1.norm() < 1e-12);
    CHECK(e.d2.norm() < 1e-12);
  }

  std::mt19937_64 rng(2);
  MatX a(3, 6);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = random_vec(rng, 1, 1.0)(0);
  CHECK((bezier_eval(a, 0.0).value - a.col(0)).norm() < 1e-12);
  CHECK((bezier_eval(a, 1.0).value - a.col(5)).norm() < 1e-12);

  const double h = 1e-6;
  for (double s : {0.1, 0.5, 0.9}) {
    auto e = bezier_eval(a, s);
    auto ep = bezier_eval(a, s + h);
    auto em = bezier_eval(a, s - h);
    CHECK(((ep.value - em.value) / (2 * h) - e.d1).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(((ep.d1 - em.d1) / (2 * h) - e.d2).cwiseAbs().maxCoeff() < 1e-5);
  }

  // Linear extension beyond [0,1] with frozen slope.
  auto edge = bezier_eval(a, 1.0);
  auto past = bezier_eval(a, 1.2);
  CHECK((past.value - (edge.value + 0.2 * edge.d1)).norm() < 1e-12);
  CHECK((past.d1 - edge.d1).norm() < 1e-12);
  CHECK(past.d2.norm() == 0.0);

  CHECK_THROWS_AS(bezier_eval(MatX(0, 0), 0.5), VcError);
}

TEST_CASE("eval_outputs zero cases and selector linearity") {
  auto model = load_model(seven_link_spec());
  auto st = lifted_state(model);
  auto g = hold_gait(model, st.q);

  auto outs = eval_outputs(model, st.packed(), g.alpha, 0.3, g.outputs, g.T_p, g.v_des);
  CHECK(std::abs(outs.y1) < 1e-12);
  CHECK(outs.y2.norm() < 1e-12);
  CHECK(outs.dy2.norm() < 1e-12);

  // Perturbing one posture joint moves exactly that output component.
  const double delta = 0.0321;
  VecX q2 = st.q;
  q2(model.coord_index("right_knee")) += delta;
  VecX x2(2 * model.nq());
  x2 << q2, st.dq;
  auto outs2 = eval_outputs(model, x2, g.alpha, 0.3, g.outputs, g.T_p, g.v_des);
  for (int r = 0; r < outs2.y2.size(); ++r) {
    if (g.outputs.posture_joints[r] == "right_knee")
      CHECK(outs2.y2(r) == doctest::Approx(delta));
    else
      CHECK(outs2.y2(r) == doctest::Approx(0.0));
  }
}

TEST_CASE("output spec validation") {
  auto model = load_model(seven_link_spec());
  auto spec = OutputSpec::for_model(model, StanceLeg::Left);
  CHECK(spec.ny2() == 5);
  CHECK(spec.has_velocity_output);
  spec.validate(model);

  auto dup = spec;
  dup.posture_joints[0] = dup.posture_joints[1];
  CHECK_THROWS_AS(dup.validate(model), VcError);

  auto five = load_model(five_link_spec());
  auto spec5 = OutputSpec::for_model(five, StanceLeg::Left);
  CHECK_FALSE(spec5.has_velocity_output);
  CHECK(spec5.ny2() == 4);
  spec5.validate(five);

  auto wrong = spec;
  wrong.posture_joints.pop_back();
  CHECK_THROWS_AS(wrong.validate(model), VcError);
}

TEST_CASE("io_control holds the zero-dynamics and decays outputs per the ODE") {
  auto model = load_model(seven_link_spec());
  auto st = lifted_state(model);
  auto gait = hold_gait(model, st.q);
  const double eps = 0.1;
  auto guard = GuardConfig::for_model(model);

  // On the surface: y = 0, dy = 0 -> u is pure feedforward and outputs stay
  // below 1e-6 across a full step.
  PhzdController ctrl(gait, eps);
  auto res = simulate_step(model, st, ctrl, guard);
  CHECK(res.trace.event.type == GuardEvent::Type::Timeout);
  for (const auto& s : res.trace.samples) {
    VecX x(2 * model.nq());
    x << s.q, s.dq;
    auto outs = eval_outputs(model, x, gait.alpha, s.tau, gait.outputs, gait.T_p, gait.v_des);
    CHECK(std::abs(outs.y1) < 1e-6);
    CHECK(outs.y2.cwiseAbs().maxCoeff() < 1e-6);
  }

  // Off-orbit start: pointwise output-ODE residuals stay at solver precision
  // and y1 decays like exp(-t/eps).
  SystemState off = st;
  off.q(model.coord_index("left_hip")) += 0.03;
  off.dq(model.coord_index("base_x")) = 0.08;  // y1(0) = 0.08
  {
    const MatX J = contact_jacobian(model, off.q, model.frame_index("left_sole"));
    off.dq -= J.completeOrthogonalDecomposition().solve(J * off.dq);
  }
  auto res_off = simulate_step(model, off, ctrl, guard);
  std::vector<double> ts, ly1;
  for (const auto& s : res_off.trace.samples) {
    auto [r1, r2] = output_ode_residual(model, gait, eps, s);
    CHECK(r1 < 1e-7);
    CHECK(r2 < 1e-7);
    VecX x(2 * model.nq());
    x << s.q, s.dq;
    auto outs = eval_outputs(model, x, gait.alpha, s.tau, gait.outputs, gait.T_p, gait.v_des);
    if (s.t < 0.25 && std::abs(outs.y1) > 1e-9) {
      ts.push_back(s.t);
      ly1.push_back(std::log(std::abs(outs.y1)));
    }
  }
  REQUIRE(ts.size() >= 5);
  // Least-squares slope of log|y1|.
  auto fit_rate = [](const std::vector<double>& t, const std::vector<double>& y) {
    double st = 0, sy = 0, stt = 0, sty = 0;
    const int n = static_cast<int>(t.size());
    for (int i = 0; i < n; ++i) {
      st += t[i];
      sy += y[i];
      stt += t[i] * t[i];
      sty += t[i] * y[i];
    }
    return (n * sty - st * sy) / (n * stt - st * st);
  };
  const double rate1 = -fit_rate(ts, ly1);
  CHECK(rate1 == doctest::Approx(1.0 / eps).epsilon(0.10));

  // Halving eps doubles the decay rate (within 10%).
  PhzdController fast(gait, eps / 2);
  auto res_fast = simulate_step(model, off, fast, guard);
  ts.clear();
  ly1.clear();
  for (const auto& s : res_fast.trace.samples) {
    VecX x(2 * model.nq());
    x << s.q, s.dq;
    auto outs = eval_outputs(model, x, gait.alpha, s.tau, gait.outputs, gait.T_p, gait.v_des);
    if (s.t < 0.125 && std::abs(outs.y1) > 1e-9) {
      ts.push_back(s.t);
      ly1.push_back(std::log(std::abs(outs.y1)));
    }
  }
  const double rate2 = -fit_rate(ts, ly1);
  CHECK(rate2 == doctest::Approx(2.0 / eps).epsilon(0.10));
}

TEST_CASE("io_control error paths") {
  auto model = load_model(seven_link_spec());
  auto st = lifted_state(model);
  auto gait = hold_gait(model, st.q);
  CHECK_THROWS_AS(PhzdController(gait, 0.0), VcError);
  CHECK_THROWS_AS(io_control(model, st.packed(), gait.alpha, 0.1, gait.outputs, gait.T_p,
                             gait.v_des, -0.1, model.frame_index("left_sole")),
                  VcError);
}

TEST_CASE("gait artifact json round trip") {
  auto model = load_model(seven_link_spec());
  auto st = lifted_state(model);
  auto g = hold_gait(model, st.q);
  g.report.max_violation = {{"friction", 1.2e-9}, {"zmp", 3.4e-8}};
  g.report.feasibility = 5.6e-9;
  g.prov = Provenance::make("auglag", 12345, 42);
  auto j = g.to_json();
  auto back = GaitArtifact::from_json(j);
  CHECK((back.alpha - g.alpha).norm() == 0.0);
  CHECK(back.T_p == g.T_p);
  CHECK(back.outputs.posture_joints == g.outputs.posture_joints);
  CHECK((back.x_star - g.x_star).norm() == 0.0);
  CHECK(back.report.max_violation.size() == 2);
  CHECK(back.prov.config_hash == 12345);
  CHECK(back.to_json() == j);  // stable serialization
}
