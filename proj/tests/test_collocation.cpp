#include <cmath>

#include "doctest.h"
#include "gaitsyn/collocation.hpp"

using namespace gaitsyn;

namespace {

// Exponential decay OCP: xdot = -x, x(0) = 1, no inputs.
Transcription decay_problem(int N) {
  Ocp ocp;
  ocp.nx = 1;
  ocp.nu = 0;
  ocp.dynamics = [](const VecX& x, const VecX&, bool) {
    OcpDynEval ev;
    ev.xdot = -x;
    ev.dxdot_dx = -MatX::Identity(1, 1);
    ev.dxdot_du = MatX::Zero(1, 0);
    return ev;
  };
  auto tr = transcribe(ocp, Mesh(N, 1.0));
  tr.nlp.add_linear(Block::Kind::Eq, "initial", {tr.x_index(0)}, MatX::Identity(1, 1),
                    -VecX::Ones(1));
  for (int i = 0; i < tr.mesh.nodes(); ++i) {
    tr.nlp.x0(tr.x_index(i)) = 1.0 - 0.5 * tr.mesh.time(i);
    tr.nlp.x0(tr.xdot_index(i)) = -1.0 + 0.5 * tr.mesh.time(i);
  }
  return tr;
}

}  // namespace

TEST_CASE("mesh validation and Simpson weights") {
  CHECK_THROWS_AS(Mesh(3, 1.0), CollocationError);
  CHECK_THROWS_AS(Mesh(0, 1.0), CollocationError);
  CHECK_THROWS_AS(Mesh(4, -1.0), CollocationError);

  // Simpson quadrature integrates t^3 on [0,1] exactly for N >= 2.
  for (int N : {2, 4, 10}) {
    Mesh mesh(N, 1.0);
    const VecX w = mesh.simpson_weights();
    double acc = 0.0;
    for (int i = 0; i < mesh.nodes(); ++i) acc += w(i) * std::pow(mesh.time(i), 3);
    CHECK(acc == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("collocation residuals vanish on cubics") {
  // x(t) = 2t^3 - t^2 + 0.5t - 3 with consistent slopes is reproduced exactly
  // by the Hermite-Simpson interpolant, so both residuals are zero.
  Ocp ocp;
  ocp.nx = 1;
  ocp.nu = 0;
  ocp.dynamics = [](const VecX& x, const VecX&, bool) {
    OcpDynEval ev;
    ev.xdot = x;  // irrelevant; only the collocation blocks are evaluated
    ev.dxdot_dx = MatX::Identity(1, 1);
    ev.dxdot_du = MatX::Zero(1, 0);
    return ev;
  };
  Mesh mesh(6, 1.2);
  auto tr = transcribe(ocp, mesh);
  VecX z = VecX::Zero(tr.nlp.n);
  auto poly = [](double t) { return 2 * t * t * t - t * t + 0.5 * t - 3.0; };
  auto dpoly = [](double t) { return 6 * t * t - 2 * t + 0.5; };
  for (int i = 0; i < mesh.nodes(); ++i) {
    z(tr.x_index(i)) = poly(mesh.time(i));
    z(tr.xdot_index(i)) = dpoly(mesh.time(i));
  }
  for (const auto& b : tr.nlp.blocks) {
    if (b.tag != "collocation") continue;
    VecX xs(b.vars.size());
    for (size_t k = 0; k < b.vars.size(); ++k) xs(static_cast<int>(k)) = z(b.vars[k]);
    CHECK(b.eval(xs).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("simple bound and equality QPs") {
  // min (x-3)^2 s.t. x >= 5  ->  x = 5.
  NlpProblem p;
  p.init(1);
  p.lb(0) = 5.0;
  p.x0(0) = 8.0;
  p.add_quadratic_cost("obj", {0}, MatX::Identity(1, 1), VecX::Constant(1, 3.0));
  auto sol = solve_nlp(p);
  CHECK(sol.converged);
  CHECK(sol.x(0) == doctest::Approx(5.0).epsilon(1e-9));

  // min 1/2 x'Px - q'x  s.t.  a'x = b, hand-solved via its KKT system.
  MatX P(2, 2);
  P << 2.0, 0.4, 0.4, 1.0;
  VecX q(2);
  q << 1.0, -1.0;
  VecX a(2);
  a << 1.0, 2.0;
  const double b = 3.0;
  MatX K(3, 3);
  K << P(0, 0), P(0, 1), a(0), P(1, 0), P(1, 1), a(1), a(0), a(1), 0.0;
  VecX rhs(3);
  rhs << q(0), q(1), b;
  const VecX xan = K.fullPivLu().solve(rhs).head(2);

  NlpProblem p2;
  p2.init(2);
  p2.add_cost(
      "obj", {0, 1}, [&](const VecX& xs) { return 0.5 * xs.dot(P * xs) - q.dot(xs); },
      [&](const VecX& xs) { return VecX(P * xs - q); }, [&](const VecX&) { return P; });
  p2.add_linear(Block::Kind::Eq, "lin", {0, 1}, a.transpose(), -VecX::Constant(1, b));
  SolverConfig tight;
  tight.tol_feas = 1e-11;
  tight.tol_stat = 1e-10;
  auto sol2 = solve_nlp(p2, tight);
  CHECK(sol2.converged);
  CHECK((sol2.x - xan).cwiseAbs().maxCoeff() < 1e-8);

  // Deterministic: same problem, same answer bit for bit.
  auto sol3 = solve_nlp(p2, tight);
  CHECK((sol3.x - sol2.x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("infeasible certificate") {
  NlpProblem p;
  p.init(1);
  p.x0(0) = 0.5;
  p.add_linear(Block::Kind::Ineq, "le0", {0}, -MatX::Identity(1, 1), VecX::Zero(1));   // -x >= 0
  p.add_linear(Block::Kind::Ineq, "ge1", {0}, MatX::Identity(1, 1), -VecX::Ones(1));   // x-1 >= 0
  SolverConfig cfg;
  cfg.max_outer = 30;
  bool threw = false;
  try {
    solve_nlp(p, cfg);
  } catch (const InfeasibleError& e) {
    threw = true;
    CHECK(!e.violations.empty());
  } catch (const SolverError&) {
    threw = true;  // max-iteration escape also reports the violation level
  }
  CHECK(threw);
}

TEST_CASE("transcribed decay ODE reproduces exp(-1) at fourth order") {
  std::vector<double> errs;
  for (int N : {4, 8, 16, 32}) {
    auto tr = decay_problem(N);
    auto sol = solve_nlp(tr.nlp);
    CHECK(sol.converged);
    errs.push_back(std::abs(sol.x(tr.x_index(tr.mesh.N)) - std::exp(-1.0)));
  }
  CHECK(errs.front() < 1e-4);
  CHECK(errs.back() < 1e-8);
  // Observed order from successive refinements: 4 +- 0.5.
  for (size_t k = 0; k + 1 < errs.size(); ++k) {
    const double slope = std::log2(errs[k] / errs[k + 1]);
    CHECK(slope == doctest::Approx(4.0).epsilon(0.125));
  }
}

TEST_CASE("N=2 fixed consistent endpoints is feasible with zero cost") {
  // Endpoints consistent with the *discrete* dynamics: take the terminal
  // value from an initial-value solve, then pin both ends.
  auto probe = decay_problem(2);
  const double x_end = solve_nlp(probe.nlp).x(probe.x_index(2));

  auto tr = decay_problem(2);
  tr.nlp.add_linear(Block::Kind::Eq, "terminal", {tr.x_index(2)}, MatX::Identity(1, 1),
                    -VecX::Constant(1, x_end));
  auto sol = solve_nlp(tr.nlp);
  CHECK(sol.converged);
  CHECK(sol.objective == doctest::Approx(0.0));
  CHECK(sol.feasibility < 1e-6);
  CHECK(x_end == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
}
