#include "gaitsyn/dynamics.hpp"

#include <Eigen/Eigenvalues>

#include "fk_impl.hpp"

namespace gaitsyn {

using detail::forward_kin;
using detail::mass_terms;

int contact_rows(const RigidBodyModel& model, int frame_idx) {
  const auto& fr = model.frame(frame_idx);
  if (fr.contact < 0) return 3;  // generic frames pin full planar pose
  return model.spec().contacts[fr.contact].point() ? 2 : 3;
}

MatX contact_jacobian(const RigidBodyModel& model, const VecX& q, int frame_idx) {
  const auto fk = forward_kin<double>(model, q);
  return detail::contact_jacobian_t<double>(model, fk, frame_idx);
}

DynamicsTerms dynamics_terms(const RigidBodyModel& model, const VecX& q, const VecX& dq) {
  if (!q.allFinite() || !dq.allFinite()) throw DynamicsError("dynamics_terms: non-finite input");
  const auto fk = forward_kin<double>(model, q);
  auto t = mass_terms<double>(model, fk, true);
  DynamicsTerms out;
  out.D = t.D;
  out.C = detail::coriolis_matrix<double>(t.dD, dq);
  out.Cdq = out.C * dq;
  out.G = t.G;
  return out;
}

std::vector<MatX> mass_matrix_partials(const RigidBodyModel& model, const VecX& q) {
  const auto fk = forward_kin<double>(model, q);
  return mass_terms<double>(model, fk, true).dD;
}

FrameKin frame_kinematics(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                          int frame_idx) {
  const auto fk = forward_kin<double>(model, q);
  const auto& fr = model.frame(frame_idx);
  const Vec2 pw = detail::point_world<double>(model, fk, fr.link, fr.offset);
  FrameKin out;
  out.pose = Vec3(pw.x(), pw.y(), fk.link_th[fr.link]);
  auto Jp = detail::point_jacobian<double>(model, fk, fr.link, pw);
  out.J = MatX::Zero(3, model.nq());
  out.J.topRows(2) = Jp;
  for (int k : model.links()[fr.link].coords)
    if (model.coords()[k].kind == CoordKind::Rot) out.J(2, k) = model.coords()[k].axis;
  out.velocity = out.J * dq;
  const Vec2 jdd = detail::point_jdot_dq<double>(model, fk, fr.link, pw, dq);
  out.Jdot_dq = Vec3(jdd.x(), jdd.y(), 0.0);
  return out;
}

FrameKin frame_kinematics(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                          const std::string& frame) {
  return frame_kinematics(model, q, dq, model.frame_index(frame));
}

namespace {

ContactWrench wrench_from_lambda(const VecX& lambda) {
  ContactWrench w;
  w.force.x() = lambda(0);
  w.force.z() = lambda(1);
  if (lambda.size() > 2) w.moment.y() = -lambda(2);
  return w;
}

}  // namespace

ConstrainedAccel constrained_accel(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                                   const VecX& u, int frame_idx, const VecX& tau_ext) {
  if (!q.allFinite() || !dq.allFinite() || !u.allFinite())
    throw DynamicsError("constrained_accel: non-finite input");
  const MatX J = contact_jacobian(model, q, frame_idx);
  const double drift = (J * dq).norm();
  if (drift > 1e-3)
    throw DynamicsError("constrained_accel: stance constraint drift " + std::to_string(drift));
  VecX ddq, lambda;
  try {
    detail::stance_accel_t<double>(model, q, dq, u, frame_idx, tau_ext, ddq, lambda);
  } catch (const SingularMatrixError&) {
    throw DynamicsError("constrained_accel: singular KKT matrix (kinematic singularity)");
  }
  return {ddq, wrench_from_lambda(lambda)};
}

ConstrainedAccel constrained_accel(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                                   const VecX& u, const std::string& contact_frame,
                                   const VecX& tau_ext) {
  return constrained_accel(model, q, dq, u, model.frame_index(contact_frame), tau_ext);
}

VecX pinned_accel(const RigidBodyModel& model, const VecX& q, const VecX& dq, const VecX& u,
                  int frame_idx, const VecX& tau_ext) {
  const auto terms = dynamics_terms(model, q, dq);
  const MatX J = contact_jacobian(model, q, frame_idx);
  const auto frk = frame_kinematics(model, q, dq, frame_idx);
  const VecX jdd = frk.Jdot_dq.head(J.rows());

  // Motion basis of the constraint null space; the pinned model's generalized
  // coordinates are the coefficients along these directions.
  Eigen::FullPivLU<MatX> lu(J);
  const MatX N = lu.kernel();
  const VecX c0 = J.completeOrthogonalDecomposition().solve(-jdd);
  VecX rhs = model.B() * u - terms.Cdq - terms.G;
  if (tau_ext.size()) rhs += tau_ext;
  const MatX Dr = N.transpose() * terms.D * N;
  const VecX a = Dr.ldlt().solve(N.transpose() * (rhs - terms.D * c0));
  return N * a + c0;
}

VecX unconstrained_accel(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                         const VecX& u, const VecX& tau_ext) {
  const auto terms = dynamics_terms(model, q, dq);
  VecX rhs = -terms.Cdq - terms.G;
  if (u.size()) rhs += model.B() * u;
  if (tau_ext.size()) rhs += tau_ext;
  return terms.D.ldlt().solve(rhs);
}

ImpactResult impact_reset(const RigidBodyModel& model, const VecX& q, const VecX& dq_minus,
                          int frame_idx) {
  VecX dq_plus_raw, impulse;
  try {
    detail::impact_velocity_t<double>(model, q, dq_minus, frame_idx, dq_plus_raw, impulse);
  } catch (const SingularMatrixError&) {
    throw DynamicsError("impact_reset: singular impact matrix");
  }
  ImpactResult out;
  out.impulse = impulse;
  out.q_plus = model.relabel(q);
  out.dq_plus = model.relabel(dq_plus_raw);
  const int mirror = model.mirror_frame(frame_idx);
  if (model.base_x_coord() >= 0) {
    const auto fk = forward_kin<double>(model, out.q_plus);
    const auto& fr = model.frame(mirror);
    const Vec2 pw = detail::point_world<double>(model, fk, fr.link, fr.offset);
    out.base_shift = pw.x();
    out.q_plus(model.base_x_coord()) -= pw.x();
  }
  return out;
}

ImpactResult impact_reset(const RigidBodyModel& model, const VecX& q, const VecX& dq_minus,
                          const std::string& new_stance_frame) {
  return impact_reset(model, q, dq_minus, model.frame_index(new_stance_frame));
}

ZmpResult zmp_of_wrench(const ContactWrench& wrench, const ContactSpec& foot_geom,
                        const ZmpMargins& margins) {
  if (wrench.fz() <= 0.0)
    throw DynamicsError("zmp_of_wrench: F_z <= 0 (the ground cannot pull on a foot)");
  ZmpResult out;
  out.zmp = -wrench.my() / wrench.fz();
  const double lo = -foot_geom.heel + margins.heel_fraction * foot_geom.heel;
  const double hi = foot_geom.toe - margins.toe_fraction * foot_geom.toe;
  out.inside = out.zmp >= lo && out.zmp <= hi;
  return out;
}

double kinetic_energy(const RigidBodyModel& model, const VecX& q, const VecX& dq) {
  const auto fk = forward_kin<double>(model, q);
  const auto t = mass_terms<double>(model, fk, false);
  return 0.5 * dq.dot(t.D * dq);
}

double potential_energy(const RigidBodyModel& model, const VecX& q) {
  const auto fk = forward_kin<double>(model, q);
  double v = 0.0;
  for (size_t li = 0; li < model.links().size(); ++li) {
    const Vec2 p = detail::point_world<double>(model, fk, static_cast<int>(li),
                                               model.links()[li].com);
    v -= model.links()[li].mass * model.gravity().dot(p);
  }
  return v;
}

Vec2 center_of_mass(const RigidBodyModel& model, const VecX& q) {
  const auto fk = forward_kin<double>(model, q);
  Vec2 acc = Vec2::Zero();
  for (size_t li = 0; li < model.links().size(); ++li)
    acc += model.links()[li].mass *
           detail::point_world<double>(model, fk, static_cast<int>(li), model.links()[li].com);
  return acc / model.total_mass();
}

StanceDynJac stance_dynamics_jac(const RigidBodyModel& model, const VecX& x, const VecX& u,
                                 int frame_idx, bool with_jacobians) {
  const int n = model.nq();
  const int nu = model.nu();
  StanceDynJac out;
  if (!with_jacobians) {
    VecX ddq, lambda;
    detail::stance_accel_t<double>(model, x.head(n), x.tail(n), u, frame_idx, VecX(), ddq,
                                   lambda);
    out.xdot.resize(2 * n);
    out.xdot << x.tail(n), ddq;
    out.F = Vec3(lambda(0), lambda(1), lambda.size() > 2 ? -lambda(2) : 0.0);
    return out;
  }
  const int ndir = 2 * n + nu;
  VecS<Dual> q(n), dq(n), ud(nu);
  for (int i = 0; i < n; ++i) q(i) = Dual::seed(x(i), ndir, i);
  for (int i = 0; i < n; ++i) dq(i) = Dual::seed(x(n + i), ndir, n + i);
  for (int a = 0; a < nu; ++a) ud(a) = Dual::seed(u(a), ndir, 2 * n + a);
  VecS<Dual> ddq, lambda;
  detail::stance_accel_t<Dual>(model, q, dq, ud, frame_idx, VecS<Dual>(), ddq, lambda);

  out.xdot.resize(2 * n);
  out.xdot << x.tail(n), values_of(ddq);
  const int rows = static_cast<int>(lambda.size());
  out.F = Vec3(lambda(0).val, lambda(1).val, rows > 2 ? -lambda(2).val : 0.0);

  const MatX dddq = grads_of(ddq, ndir);
  out.dxdot_dx = MatX::Zero(2 * n, 2 * n);
  out.dxdot_du = MatX::Zero(2 * n, nu);
  out.dxdot_dx.topRightCorner(n, n).setIdentity();
  out.dxdot_dx.bottomRows(n) = dddq.leftCols(2 * n);
  out.dxdot_du.bottomRows(n) = dddq.rightCols(nu);
  const MatX dlam = grads_of(lambda, ndir);
  out.dF_dx = MatX::Zero(3, 2 * n);
  out.dF_du = MatX::Zero(3, nu);
  out.dF_dx.row(0) = dlam.row(0).head(2 * n);
  out.dF_dx.row(1) = dlam.row(1).head(2 * n);
  out.dF_du.row(0) = dlam.row(0).tail(nu);
  out.dF_du.row(1) = dlam.row(1).tail(nu);
  if (rows > 2) {
    out.dF_dx.row(2) = -dlam.row(2).head(2 * n);
    out.dF_du.row(2) = -dlam.row(2).tail(nu);
  }
  return out;
}

FrameMotionJac frame_motion_jac(const RigidBodyModel& model, const VecX& x, int frame_idx) {
  const int n = model.nq();
  const int ndir = 2 * n;
  VecS<Dual> q(n), dq(n);
  for (int i = 0; i < n; ++i) q(i) = Dual::seed(x(i), ndir, i);
  for (int i = 0; i < n; ++i) dq(i) = Dual::seed(x(n + i), ndir, n + i);
  const auto fk = forward_kin<Dual>(model, q);
  const auto& fr = model.frame(frame_idx);
  const auto pw = detail::point_world<Dual>(model, fk, fr.link, fr.offset);
  const auto J = detail::point_jacobian<Dual>(model, fk, fr.link, pw);
  VecS<Dual> out(6);
  out(0) = pw(0);
  out(1) = pw(1);
  out(2) = fk.link_th[fr.link];
  Dual vx(0.0), vz(0.0), w(0.0);
  for (int k = 0; k < n; ++k) {
    vx += J(0, k) * dq(k);
    vz += J(1, k) * dq(k);
  }
  for (int k : model.links()[fr.link].coords)
    if (model.coords()[k].kind == CoordKind::Rot) w += Dual(model.coords()[k].axis) * dq(k);
  out(3) = vx;
  out(4) = vz;
  out(5) = w;
  FrameMotionJac res;
  const VecX vals = values_of(out);
  const MatX grads = grads_of(out, ndir);
  res.pose = vals.head(3);
  res.vel = vals.tail(3);
  res.dpose_dx = grads.topRows(3);
  res.dvel_dx = grads.bottomRows(3);
  return res;
}

ImpactJac impact_map_jac(const RigidBodyModel& model, const VecX& x_minus, int frame_idx,
                         bool with_jacobian) {
  const int n = model.nq();
  ImpactJac out;
  if (!with_jacobian) {
    const auto r = impact_reset(model, x_minus.head(n), x_minus.tail(n), frame_idx);
    out.x_plus.resize(2 * n);
    out.x_plus << r.q_plus, r.dq_plus;
    return out;
  }
  const int ndir = 2 * n;
  VecS<Dual> q(n), dq(n);
  for (int i = 0; i < n; ++i) q(i) = Dual::seed(x_minus(i), ndir, i);
  for (int i = 0; i < n; ++i) dq(i) = Dual::seed(x_minus(n + i), ndir, n + i);
  VecS<Dual> dq_plus_raw, impulse;
  detail::impact_velocity_t<Dual>(model, q, dq, frame_idx, dq_plus_raw, impulse);

  const auto& perm = model.relabel_permutation();
  VecS<Dual> qp(n), dqp(n);
  for (int i = 0; i < n; ++i) {
    qp(i) = q(perm[i]);
    dqp(i) = dq_plus_raw(perm[i]);
  }
  const int mirror = model.mirror_frame(frame_idx);
  if (model.base_x_coord() >= 0) {
    const auto fkp = forward_kin<Dual>(model, qp);
    const auto& fr = model.frame(mirror);
    const auto pw = detail::point_world<Dual>(model, fkp, fr.link, fr.offset);
    qp(model.base_x_coord()) = qp(model.base_x_coord()) - pw(0);
  }
  VecS<Dual> xp(2 * n);
  xp << qp, dqp;
  out.x_plus = values_of(xp);
  out.dxplus_dx = grads_of(xp, ndir);
  return out;
}

}  // namespace gaitsyn
