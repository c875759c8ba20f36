#pragma once

#include "gaitsyn/nlp.hpp"

namespace gaitsyn {

struct CollocationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Uniform Hermite-Simpson mesh: N+1 nodes, cardinal nodes at even indices,
// interior nodes at odd indices, Delta-t between cardinal pairs.
struct Mesh {
  int N = 2;
  double T = 1.0;

  Mesh(int N_, double T_) : N(N_), T(T_) {
    if (N < 2 || N % 2 != 0) throw CollocationError("mesh: N must be even and >= 2");
    if (!(T > 0.0)) throw CollocationError("mesh: T must be positive");
  }
  int nodes() const { return N + 1; }
  double h() const { return T / N; }
  double dt() const { return 2.0 * h(); }
  double time(int i) const { return i * h(); }
  bool is_interior(int i) const { return i % 2 == 1; }
  // Simpson quadrature weights per node: (dt/6) * (1:4:2:...:4:1).
  VecX simpson_weights() const;
};

struct OcpDynEval {
  VecX xdot, aux;
  MatX dxdot_dx, dxdot_du, daux_dx, daux_du;
};

// Optimal-control problem over states x, inputs u, per-node auxiliary
// variables (e.g. contact wrenches, tied by equality to the dynamics), and
// global parameters.
struct Ocp {
  int nx = 0, nu = 0, naux = 0, nparams = 0;
  std::function<OcpDynEval(const VecX& x, const VecX& u, bool with_jac)> dynamics;
  MatX R;  // Simpson-weighted running cost u' R u (empty: no input cost)

  VecX x_lb, x_ub, u_lb, u_ub, aux_lb, aux_ub, param_lb, param_ub;
  VecX x_scale, u_scale, aux_scale, xdot_scale, param_scale;

  void default_bounds_and_scales();
};

// Variable layout: per node [x, xdot, u, aux], parameters at the tail.
struct Transcription {
  Mesh mesh;
  int nx = 0, nu = 0, naux = 0, nparams = 0;
  NlpProblem nlp;

  int node_stride() const { return 2 * nx + nu + naux; }
  int x_index(int node, int k = 0) const { return node * node_stride() + k; }
  int xdot_index(int node, int k = 0) const { return node * node_stride() + nx + k; }
  int u_index(int node, int k = 0) const { return node * node_stride() + 2 * nx + k; }
  int aux_index(int node, int k = 0) const { return node * node_stride() + 2 * nx + nu + k; }
  int param_index(int k = 0) const { return mesh.nodes() * node_stride() + k; }

  std::vector<int> x_vars(int node) const;
  std::vector<int> xdot_vars(int node) const;
  std::vector<int> u_vars(int node) const;
  std::vector<int> aux_vars(int node) const;
  std::vector<int> param_vars() const;

  MatX states(const VecX& sol) const;
  MatX inputs(const VecX& sol) const;
  MatX auxes(const VecX& sol) const;
  VecX params(const VecX& sol) const;

  void set_state_guess(const MatX& xs, const MatX& us);
};

// Emits the dynamics equalities at every node, the two Hermite-Simpson
// collocation residuals at every interior node, and the Simpson-weighted
// input cost.
Transcription transcribe(const Ocp& ocp, const Mesh& mesh);

}  // namespace gaitsyn
