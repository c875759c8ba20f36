#include "gaitsyn/collocation.hpp"

namespace gaitsyn {

VecX Mesh::simpson_weights() const {
  VecX w(nodes());
  const double base = h() / 3.0;
  for (int i = 0; i <= N; ++i) {
    if (i == 0 || i == N)
      w(i) = base;
    else if (i % 2 == 1)
      w(i) = 4.0 * base;
    else
      w(i) = 2.0 * base;
  }
  return w;
}

void Ocp::default_bounds_and_scales() {
  auto fill = [](VecX& v, int n, double val) {
    if (v.size() == 0) v = VecX::Constant(n, val);
    if (v.size() != n) throw CollocationError("ocp: bound/scale dimension mismatch");
  };
  const double inf = std::numeric_limits<double>::infinity();
  fill(x_lb, nx, -inf);
  fill(x_ub, nx, inf);
  fill(u_lb, nu, -inf);
  fill(u_ub, nu, inf);
  fill(aux_lb, naux, -inf);
  fill(aux_ub, naux, inf);
  fill(param_lb, nparams, -inf);
  fill(param_ub, nparams, inf);
  fill(x_scale, nx, 1.0);
  fill(u_scale, nu, 1.0);
  fill(aux_scale, naux, 1.0);
  fill(xdot_scale, nx, 1.0);
  fill(param_scale, nparams, 1.0);
}

std::vector<int> Transcription::x_vars(int node) const {
  std::vector<int> v(nx);
  for (int k = 0; k < nx; ++k) v[k] = x_index(node, k);
  return v;
}
std::vector<int> Transcription::xdot_vars(int node) const {
  std::vector<int> v(nx);
  for (int k = 0; k < nx; ++k) v[k] = xdot_index(node, k);
  return v;
}
std::vector<int> Transcription::u_vars(int node) const {
  std::vector<int> v(nu);
  for (int k = 0; k < nu; ++k) v[k] = u_index(node, k);
  return v;
}
std::vector<int> Transcription::aux_vars(int node) const {
  std::vector<int> v(naux);
  for (int k = 0; k < naux; ++k) v[k] = aux_index(node, k);
  return v;
}
std::vector<int> Transcription::param_vars() const {
  std::vector<int> v(nparams);
  for (int k = 0; k < nparams; ++k) v[k] = param_index(k);
  return v;
}

MatX Transcription::states(const VecX& sol) const {
  MatX out(nx, mesh.nodes());
  for (int i = 0; i < mesh.nodes(); ++i)
    for (int k = 0; k < nx; ++k) out(k, i) = sol(x_index(i, k));
  return out;
}
MatX Transcription::inputs(const VecX& sol) const {
  MatX out(nu, mesh.nodes());
  for (int i = 0; i < mesh.nodes(); ++i)
    for (int k = 0; k < nu; ++k) out(k, i) = sol(u_index(i, k));
  return out;
}
MatX Transcription::auxes(const VecX& sol) const {
  MatX out(naux, mesh.nodes());
  for (int i = 0; i < mesh.nodes(); ++i)
    for (int k = 0; k < naux; ++k) out(k, i) = sol(aux_index(i, k));
  return out;
}
VecX Transcription::params(const VecX& sol) const {
  VecX out(nparams);
  for (int k = 0; k < nparams; ++k) out(k) = sol(param_index(k));
  return out;
}

void Transcription::set_state_guess(const MatX& xs, const MatX& us) {
  if (xs.cols() != mesh.nodes() || xs.rows() != nx)
    throw CollocationError("set_state_guess: state guess shape mismatch");
  for (int i = 0; i < mesh.nodes(); ++i) {
    for (int k = 0; k < nx; ++k) nlp.x0(x_index(i, k)) = xs(k, i);
    if (us.size())
      for (int k = 0; k < nu; ++k) nlp.x0(u_index(i, k)) = us(k, i);
  }
  // Slope guess by central differences of the state guess.
  const double h = mesh.h();
  for (int i = 0; i < mesh.nodes(); ++i) {
    const int lo = std::max(0, i - 1), hi = std::min(mesh.N, i + 1);
    const VecX d = (xs.col(hi) - xs.col(lo)) / ((hi - lo) * h);
    for (int k = 0; k < nx; ++k) nlp.x0(xdot_index(i, k)) = d(k);
  }
}

Transcription transcribe(const Ocp& ocp_in, const Mesh& mesh) {
  Ocp ocp = ocp_in;
  ocp.default_bounds_and_scales();
  if (!ocp.dynamics) throw CollocationError("transcribe: dynamics callback required");
  if (ocp.nx <= 0) throw CollocationError("transcribe: nx must be positive");

  Transcription tr{mesh};
  tr.nx = ocp.nx;
  tr.nu = ocp.nu;
  tr.naux = ocp.naux;
  tr.nparams = ocp.nparams;
  const int nodes = mesh.nodes();
  tr.nlp.init(nodes * tr.node_stride() + ocp.nparams);

  for (int i = 0; i < nodes; ++i) {
    for (int k = 0; k < ocp.nx; ++k) {
      tr.nlp.lb(tr.x_index(i, k)) = ocp.x_lb(k);
      tr.nlp.ub(tr.x_index(i, k)) = ocp.x_ub(k);
      tr.nlp.scale(tr.x_index(i, k)) = ocp.x_scale(k);
      tr.nlp.scale(tr.xdot_index(i, k)) = ocp.xdot_scale(k);
    }
    for (int k = 0; k < ocp.nu; ++k) {
      tr.nlp.lb(tr.u_index(i, k)) = ocp.u_lb(k);
      tr.nlp.ub(tr.u_index(i, k)) = ocp.u_ub(k);
      tr.nlp.scale(tr.u_index(i, k)) = ocp.u_scale(k);
    }
    for (int k = 0; k < ocp.naux; ++k) {
      tr.nlp.lb(tr.aux_index(i, k)) = ocp.aux_lb(k);
      tr.nlp.ub(tr.aux_index(i, k)) = ocp.aux_ub(k);
      tr.nlp.scale(tr.aux_index(i, k)) = ocp.aux_scale(k);
    }
  }
  for (int k = 0; k < ocp.nparams; ++k) {
    tr.nlp.lb(tr.param_index(k)) = ocp.param_lb(k);
    tr.nlp.ub(tr.param_index(k)) = ocp.param_ub(k);
    tr.nlp.scale(tr.param_index(k)) = ocp.param_scale(k);
  }

  // Dynamics (and auxiliary) equalities at every node.
  const int nx = ocp.nx, nu = ocp.nu, na = ocp.naux;
  for (int i = 0; i < nodes; ++i) {
    std::vector<int> vars;
    for (int k = 0; k < nx; ++k) vars.push_back(tr.x_index(i, k));
    for (int k = 0; k < nx; ++k) vars.push_back(tr.xdot_index(i, k));
    for (int k = 0; k < nu; ++k) vars.push_back(tr.u_index(i, k));
    for (int k = 0; k < na; ++k) vars.push_back(tr.aux_index(i, k));
    auto dyn = ocp.dynamics;
    tr.nlp.add_eq(
        "dynamics", vars, nx + na,
        [dyn, nx, nu, na](const VecX& xs) {
          const VecX x = xs.head(nx);
          const VecX xdot = xs.segment(nx, nx);
          const VecX u = xs.segment(2 * nx, nu);
          auto ev = dyn(x, u, false);
          VecX r(nx + na);
          r.head(nx) = xdot - ev.xdot;
          if (na) r.tail(na) = xs.tail(na) - ev.aux;
          return r;
        },
        [dyn, nx, nu, na](const VecX& xs) {
          const VecX x = xs.head(nx);
          const VecX u = xs.segment(2 * nx, nu);
          auto ev = dyn(x, u, true);
          MatX J = MatX::Zero(nx + na, 2 * nx + nu + na);
          J.topLeftCorner(nx, nx) = -ev.dxdot_dx;
          J.block(0, nx, nx, nx).setIdentity();
          if (nu) J.block(0, 2 * nx, nx, nu) = -ev.dxdot_du;
          if (na) {
            J.bottomLeftCorner(na, nx) = -ev.daux_dx;
            if (nu) J.block(nx, 2 * nx, na, nu) = -ev.daux_du;
            J.bottomRightCorner(na, na).setIdentity();
          }
          return J;
        });
  }

  // The two Hermite-Simpson collocation residuals at each interior node.
  const double dt = mesh.dt();
  const MatX I = MatX::Identity(nx, nx);
  for (int i = 1; i < nodes - 1; i += 2) {
    std::vector<int> vars;
    for (int node : {i - 1, i, i + 1})
      for (int k = 0; k < nx; ++k) vars.push_back(tr.x_index(node, k));
    for (int node : {i - 1, i, i + 1})
      for (int k = 0; k < nx; ++k) vars.push_back(tr.xdot_index(node, k));

    MatX A1 = MatX::Zero(nx, 6 * nx);
    A1.block(0, 0 * nx, nx, nx) = 3.0 / (2.0 * dt) * I;       // x_{i-1}
    A1.block(0, 2 * nx, nx, nx) = -3.0 / (2.0 * dt) * I;      // x_{i+1}
    A1.block(0, 3 * nx, nx, nx) = 0.25 * I;                   // xdot_{i-1}
    A1.block(0, 4 * nx, nx, nx) = I;                          // xdot_i
    A1.block(0, 5 * nx, nx, nx) = 0.25 * I;                   // xdot_{i+1}
    tr.nlp.add_linear(Block::Kind::Eq, "collocation", vars, A1, VecX::Zero(nx));

    MatX A2 = MatX::Zero(nx, 6 * nx);
    A2.block(0, 0 * nx, nx, nx) = -0.5 * I;                   // x_{i-1}
    A2.block(0, 1 * nx, nx, nx) = I;                          // x_i
    A2.block(0, 2 * nx, nx, nx) = -0.5 * I;                   // x_{i+1}
    A2.block(0, 3 * nx, nx, nx) = -dt / 8.0 * I;              // xdot_{i-1}
    A2.block(0, 5 * nx, nx, nx) = dt / 8.0 * I;               // xdot_{i+1}
    tr.nlp.add_linear(Block::Kind::Eq, "collocation", vars, A2, VecX::Zero(nx));
  }

  // Simpson-weighted input cost.
  if (ocp.R.size() && ocp.nu > 0) {
    if (ocp.R.rows() != nu || ocp.R.cols() != nu)
      throw CollocationError("transcribe: R must be nu x nu");
    const VecX w = mesh.simpson_weights();
    for (int i = 0; i < nodes; ++i)
      tr.nlp.add_quadratic_cost("input_cost", tr.u_vars(i), w(i) * ocp.R, VecX::Zero(nu));
  }
  return tr;
}

}  // namespace gaitsyn
