#pragma once

// Planar kinematics core, templated on the scalar so forward-mode Dual passes
// produce exact Jacobians of everything downstream (including through the
// KKT solves via the templated LU).
//
// Closed forms used throughout, for a point p on link l and rotational
// ancestor coordinates i, k with world anchors a_i, a_k:
//   dp/dq_i      = ax_i * rot90(p - a_i)
//   d2p/dq_i dq_k = -ax_i*ax_k * (p - a_deeper(i,k))
// Translation coordinates contribute constant columns and vanish from all
// second derivatives.

#include <vector>

#include "gaitsyn/dynamics.hpp"
#include "gaitsyn/linalg.hpp"

namespace gaitsyn::detail {

template <typename S>
Vec2S<S> rot90(const Vec2S<S>& v) {
  Vec2S<S> out;
  out(0) = -v(1);
  out(1) = v(0);
  return out;
}

template <typename S>
struct Fk {
  std::vector<Vec2S<S>> link_p;
  std::vector<S> link_c, link_s;  // cos/sin of absolute link angle
  std::vector<S> link_th;
  std::vector<Vec2S<S>> anchor;   // per coordinate (rot coords only)
};

template <typename S>
Vec2S<S> rotated(const S& c, const S& s, const Vec2& v) {
  Vec2S<S> out;
  out(0) = c * v.x() - s * v.y();
  out(1) = s * v.x() + c * v.y();
  return out;
}

template <typename S>
Fk<S> forward_kin(const RigidBodyModel& m, const VecS<S>& q) {
  using std::cos;
  using std::sin;
  Fk<S> fk;
  const auto& joints = m.joints();
  const auto& coords = m.coords();
  fk.link_p.resize(m.links().size());
  fk.link_c.resize(m.links().size());
  fk.link_s.resize(m.links().size());
  fk.link_th.resize(m.links().size());
  fk.anchor.resize(m.nq());
  for (const auto& j : joints) {
    S th;
    Vec2S<S> p;
    if (j.spec.type == JointType::PlanarFloat) {
      p(0) = q(j.q_start + 0);
      p(1) = q(j.q_start + 1);
      th = q(j.q_start + 2);
      if (j.parent_link != -1)
        throw ModelError("planar-float joints are only supported at the root");
      fk.anchor[j.q_start + 2] = p;
    } else {
      if (j.parent_link == -1) {
        p(0) = S(j.spec.origin.x());
        p(1) = S(j.spec.origin.y());
        th = S(j.spec.axis) * q(j.q_start);
      } else {
        const auto& pc = fk.link_c[j.parent_link];
        const auto& ps = fk.link_s[j.parent_link];
        p = fk.link_p[j.parent_link] + rotated(pc, ps, j.spec.origin);
        th = fk.link_th[j.parent_link] + S(j.spec.axis) * q(j.q_start);
      }
      fk.anchor[j.q_start] = p;
    }
    fk.link_p[j.child_link] = p;
    fk.link_th[j.child_link] = th;
    fk.link_c[j.child_link] = cos(th);
    fk.link_s[j.child_link] = sin(th);
  }
  (void)coords;
  return fk;
}

template <typename S>
Vec2S<S> point_world(const RigidBodyModel&, const Fk<S>& fk, int link, const Vec2& offset) {
  return fk.link_p[link] + rotated(fk.link_c[link], fk.link_s[link], offset);
}

// Dense 2 x nq point Jacobian (zeros outside the ancestor chain).
template <typename S>
Eigen::Matrix<S, 2, Eigen::Dynamic> point_jacobian(const RigidBodyModel& m, const Fk<S>& fk,
                                                   int link, const Vec2S<S>& pw) {
  Eigen::Matrix<S, 2, Eigen::Dynamic> J(2, m.nq());
  for (int c = 0; c < m.nq(); ++c) { J(0, c) = S(0.0); J(1, c) = S(0.0); }
  const auto& coords = m.coords();
  for (int k : m.links()[link].coords) {
    switch (coords[k].kind) {
      case CoordKind::TransX: J(0, k) = S(1.0); break;
      case CoordKind::TransZ: J(1, k) = S(1.0); break;
      case CoordKind::Rot: {
        const Vec2S<S> col = rot90<S>(pw - fk.anchor[k]);
        J(0, k) = S(coords[k].axis) * col(0);
        J(1, k) = S(coords[k].axis) * col(1);
        break;
      }
    }
  }
  return J;
}

// d(J dq) dq term for a point: rows are dq^T H dq with the closed-form Hessian.
template <typename S>
Vec2S<S> point_jdot_dq(const RigidBodyModel& m, const Fk<S>& fk, int link, const Vec2S<S>& pw,
                       const VecS<S>& dq) {
  Vec2S<S> out;
  out(0) = S(0.0);
  out(1) = S(0.0);
  const auto& chain = m.links()[link].coords;
  const auto& coords = m.coords();
  for (size_t ii = 0; ii < chain.size(); ++ii) {
    const int i = chain[ii];
    if (coords[i].kind != CoordKind::Rot) continue;
    for (size_t kk = 0; kk < chain.size(); ++kk) {
      const int k = chain[kk];
      if (coords[k].kind != CoordKind::Rot) continue;
      const int deeper = chain[std::max(ii, kk)];
      const S w = S(coords[i].axis * coords[k].axis) * dq(i) * dq(k);
      out -= w * (pw - fk.anchor[deeper]);
    }
  }
  return out;
}

template <typename S>
struct Terms {
  MatS<S> D;
  std::vector<MatS<S>> dD;  // dD[k](i,j) = dD_ij/dq_k
  VecS<S> G;
};

template <typename S>
Terms<S> mass_terms(const RigidBodyModel& m, const Fk<S>& fk, bool with_partials) {
  const int n = m.nq();
  Terms<S> t;
  t.D = MatS<S>::Constant(n, n, S(0.0));
  t.G = VecS<S>::Constant(n, S(0.0));
  if (with_partials) t.dD.assign(n, MatS<S>::Constant(n, n, S(0.0)));
  const auto& coords = m.coords();
  const Vec2 g = m.gravity();

  for (size_t li = 0; li < m.links().size(); ++li) {
    const auto& link = m.links()[li];
    const Vec2S<S> pcom = point_world(m, fk, static_cast<int>(li), link.com);
    const auto& chain = link.coords;
    const size_t nc = chain.size();

    // Columns of the CoM Jacobian restricted to the chain.
    std::vector<Vec2S<S>> Jv(nc);
    std::vector<double> w(nc, 0.0);  // angular rows (constant)
    for (size_t ii = 0; ii < nc; ++ii) {
      const int i = chain[ii];
      switch (coords[i].kind) {
        case CoordKind::TransX: Jv[ii] << S(1.0), S(0.0); break;
        case CoordKind::TransZ: Jv[ii] << S(0.0), S(1.0); break;
        case CoordKind::Rot:
          Jv[ii] = S(coords[i].axis) * rot90<S>(pcom - fk.anchor[i]);
          w[ii] = coords[i].axis;
          break;
      }
    }

    for (size_t ii = 0; ii < nc; ++ii) {
      const int i = chain[ii];
      t.G(i) -= S(link.mass) * (S(g.x()) * Jv[ii](0) + S(g.y()) * Jv[ii](1));
      for (size_t jj = ii; jj < nc; ++jj) {
        const int j = chain[jj];
        S dij = S(link.mass) * (Jv[ii](0) * Jv[jj](0) + Jv[ii](1) * Jv[jj](1)) +
                S(link.inertia * w[ii] * w[jj]);
        t.D(i, j) += dij;
        if (i != j) t.D(j, i) += dij;
      }
    }

    if (with_partials) {
      // H(ii,kk) = -ax_i ax_k (pcom - anchor_deeper), rot pairs only.
      auto hess = [&](size_t ii, size_t kk) -> Vec2S<S> {
        const int deeper = chain[std::max(ii, kk)];
        return S(-coords[chain[ii]].axis * coords[chain[kk]].axis) * (pcom - fk.anchor[deeper]);
      };
      for (size_t kk = 0; kk < nc; ++kk) {
        const int k = chain[kk];
        if (coords[k].kind != CoordKind::Rot) continue;
        for (size_t ii = 0; ii < nc; ++ii) {
          const int i = chain[ii];
          const bool rot_i = coords[i].kind == CoordKind::Rot;
          for (size_t jj = ii; jj < nc; ++jj) {
            const int j = chain[jj];
            const bool rot_j = coords[j].kind == CoordKind::Rot;
            S v = S(0.0);
            if (rot_i) {
              const Vec2S<S> Hik = hess(ii, kk);
              v += S(link.mass) * (Hik(0) * Jv[jj](0) + Hik(1) * Jv[jj](1));
            }
            if (rot_j) {
              const Vec2S<S> Hjk = hess(jj, kk);
              v += S(link.mass) * (Jv[ii](0) * Hjk(0) + Jv[ii](1) * Hjk(1));
            }
            if (value_of(v) != 0.0 || !std::is_same<S, double>::value) {
              t.dD[k](i, j) += v;
              if (i != j) t.dD[k](j, i) += v;
            }
          }
        }
      }
    }
  }
  return t;
}

// Coriolis matrix from the Christoffel symbols of dD.
template <typename S>
MatS<S> coriolis_matrix(const std::vector<MatS<S>>& dD, const VecS<S>& dq) {
  const int n = static_cast<int>(dq.size());
  MatS<S> C = MatS<S>::Constant(n, n, S(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      S acc = S(0.0);
      for (int k = 0; k < n; ++k)
        acc += (dD[k](i, j) + dD[j](i, k) - dD[i](j, k)) * dq(k);
      C(i, j) = S(0.5) * acc;
    }
  return C;
}

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> contact_jacobian_t(const RigidBodyModel& m,
                                                                    const Fk<S>& fk,
                                                                    int frame_idx) {
  const auto& fr = m.frame(frame_idx);
  const int rows = contact_rows(m, frame_idx);
  const Vec2S<S> pw = point_world(m, fk, fr.link, fr.offset);
  auto Jp = point_jacobian(m, fk, fr.link, pw);
  MatS<S> J = MatS<S>::Constant(rows, m.nq(), S(0.0));
  J.row(0) = Jp.row(0);
  J.row(1) = Jp.row(1);
  if (rows == 3) {
    const auto& coords = m.coords();
    for (int k : m.links()[fr.link].coords)
      if (coords[k].kind == CoordKind::Rot) J(2, k) = S(coords[k].axis);
  }
  return J;
}

// Index-reduced stance DAE solve; shared by the double and Dual paths.
template <typename S>
void stance_accel_t(const RigidBodyModel& m, const VecS<S>& q, const VecS<S>& dq,
                    const VecS<S>& u, int frame_idx, const VecS<S>& tau_ext, VecS<S>& ddq,
                    VecS<S>& lambda) {
  const int n = m.nq();
  const auto fk = forward_kin(m, q);
  auto terms = mass_terms(m, fk, true);
  const MatS<S> C = coriolis_matrix(terms.dD, dq);
  const auto& fr = m.frame(frame_idx);
  const int rows = contact_rows(m, frame_idx);
  const Vec2S<S> pw = point_world(m, fk, fr.link, fr.offset);
  const MatS<S> J = contact_jacobian_t(m, fk, frame_idx);
  const Vec2S<S> jdd = point_jdot_dq(m, fk, fr.link, pw, dq);

  MatS<S> K = MatS<S>::Constant(n + rows, n + rows, S(0.0));
  VecS<S> rhs = VecS<S>::Constant(n + rows, S(0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) K(i, j) = terms.D(i, j);
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < n; ++j) {
      K(n + r, j) = J(r, j);
      K(j, n + r) = -J(r, j);
    }
  VecS<S> gen = VecS<S>::Constant(n, S(0.0));
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < m.nu(); ++a)
      if (m.B()(i, a) != 0.0) gen(i) += S(m.B()(i, a)) * u(a);
    if (tau_ext.size()) gen(i) += tau_ext(i);
    S cdq = S(0.0);
    for (int j = 0; j < n; ++j) cdq += C(i, j) * dq(j);
    rhs(i) = gen(i) - cdq - terms.G(i);
  }
  rhs(n + 0) = -jdd(0);
  rhs(n + 1) = -jdd(1);
  // Angular constraint row has a constant Jacobian, so its Jdot*dq vanishes.

  VecS<S> sol = lu_solve(K, rhs);
  ddq = sol.head(n);
  lambda = sol.tail(rows);
}

template <typename S>
void impact_velocity_t(const RigidBodyModel& m, const VecS<S>& q, const VecS<S>& dq_minus,
                       int frame_idx, VecS<S>& dq_plus, VecS<S>& impulse) {
  const int n = m.nq();
  const auto fk = forward_kin(m, q);
  auto terms = mass_terms(m, fk, false);
  const MatS<S> J = contact_jacobian_t(m, fk, frame_idx);
  const int rows = static_cast<int>(J.rows());
  MatS<S> K = MatS<S>::Constant(n + rows, n + rows, S(0.0));
  VecS<S> rhs = VecS<S>::Constant(n + rows, S(0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) K(i, j) = terms.D(i, j);
    S mom = S(0.0);
    for (int j = 0; j < n; ++j) mom += terms.D(i, j) * dq_minus(j);
    rhs(i) = mom;
  }
  for (int r = 0; r < rows; ++r)
    for (int j = 0; j < n; ++j) {
      K(n + r, j) = J(r, j);
      K(j, n + r) = -J(r, j);
    }
  VecS<S> sol = lu_solve(K, rhs);
  dq_plus = sol.head(n);
  impulse = sol.tail(rows);
}

}  // namespace gaitsyn::detail
