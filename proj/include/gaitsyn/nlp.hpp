#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gaitsyn/linalg.hpp"

namespace gaitsyn {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConstraintViolation {
  std::string tag;
  double value = 0.0;
};

struct InfeasibleError : SolverError {
  std::vector<ConstraintViolation> violations;
  explicit InfeasibleError(const std::string& what, std::vector<ConstraintViolation> v = {})
      : SolverError(what), violations(std::move(v)) {}
};

// Residual block over a subset of the decision variables. Inequalities use
// the convention r(x) >= 0.
struct Block {
  enum class Kind { Eq, Ineq };
  Kind kind = Kind::Eq;
  int dim = 0;
  std::vector<int> vars;
  std::function<VecX(const VecX&)> eval;  // argument: gathered sub-vector
  std::function<MatX(const VecX&)> jac;   // dim x vars.size()
  std::string tag;
};

struct CostBlock {
  std::vector<int> vars;
  std::function<double(const VecX&)> eval;
  std::function<VecX(const VecX&)> grad;
  std::function<MatX(const VecX&)> hess;  // PSD local Gauss-Newton approximation
  std::string tag;
};

struct NlpProblem {
  int n = 0;
  VecX lb, ub, x0, scale;
  std::vector<Block> blocks;
  std::vector<CostBlock> cost;

  void init(int n_vars);
  void add_eq(std::string tag, std::vector<int> vars, int dim,
              std::function<VecX(const VecX&)> eval, std::function<MatX(const VecX&)> jac);
  void add_ineq(std::string tag, std::vector<int> vars, int dim,
                std::function<VecX(const VecX&)> eval, std::function<MatX(const VecX&)> jac);
  // Linear block r = A xs + b.
  void add_linear(Block::Kind kind, std::string tag, std::vector<int> vars, MatX A, VecX b);
  void add_cost(std::string tag, std::vector<int> vars, std::function<double(const VecX&)> eval,
                std::function<VecX(const VecX&)> grad, std::function<MatX(const VecX&)> hess);
  // Quadratic cost w * ||xs - ref||_W^2 with constant PSD weight W.
  void add_quadratic_cost(std::string tag, std::vector<int> vars, MatX W, VecX ref);

  int eq_rows() const;
  int ineq_rows() const;
};

struct SolverConfig {
  double tol_feas = 1e-6;
  double tol_stat = 1e-4;
  int max_outer = 60;
  int max_inner = 250;
  double rho0 = 10.0;
  double rho_grow = 10.0;
  double rho_max = 1e12;
  double lm_min = 1e-10;
  bool verbose = false;
};

struct Solution {
  VecX x;
  bool converged = false;
  double feasibility = 0.0;
  double stationarity = 0.0;
  double objective = 0.0;
  int outer_iters = 0;
  int inner_iters = 0;
  std::vector<ConstraintViolation> violations;  // max per tag at x
  std::string message;
};

// Augmented-Lagrangian outer loop with damped projected Gauss-Newton inner
// solves on the bound-constrained subproblems. Deterministic for fixed inputs.
Solution solve_nlp(const NlpProblem& p, const SolverConfig& cfg = {});

// Per-tag max violations at a point (for reports).
std::vector<ConstraintViolation> constraint_violations(const NlpProblem& p, const VecX& x);

}  // namespace gaitsyn
