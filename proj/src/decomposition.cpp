#include "gaitsyn/decomposition.hpp"

namespace gaitsyn {

Decomposition Decomposition::for_model(const RigidBodyModel& model) {
  Decomposition d;
  d.base_x = model.base_x_coord();
  if (d.base_x < 0) throw DynamicsError("decomposition requires a floating base");
  d.stance_frame = model.frame_index("left_sole");
  d.stance_ankle_coord = model.coord_index("left_ankle");
  for (int a = 0; a < model.nu(); ++a) {
    const std::string& j = model.spec().actuated[a];
    if (j == "left_ankle") {
      d.u1_index = a;
      continue;
    }
    d.x2a_coords.push_back(model.coord_index(j));
  }
  if (d.u1_index < 0) throw DynamicsError("decomposition requires an actuated stance ankle");
  return d;
}

VecX Decomposition::pi1(const VecX& x) const {
  const int n = static_cast<int>(x.size()) / 2;
  VecX out(2);
  out << x(base_x), x(n + base_x);
  return out;
}

VecX Decomposition::pi2(const VecX& x) const {
  const int n = static_cast<int>(x.size()) / 2;
  const int m = static_cast<int>(x2a_coords.size());
  VecX out(2 * m);
  for (int i = 0; i < m; ++i) {
    out(i) = x(x2a_coords[i]);
    out(m + i) = x(n + x2a_coords[i]);
  }
  return out;
}

VecX Decomposition::reconstruct(const RigidBodyModel& model, const VecX& x1, const VecX& x2,
                                const VecX* q_hint) const {
  const int n = model.nq();
  const int m = static_cast<int>(x2a_coords.size());
  const int bz = model.coord_index("base_z");
  const int bp = model.coord_index("base_pitch");

  VecX q = q_hint ? *q_hint : VecX::Zero(n);
  if (!q_hint) q(bz) = 0.8;
  q(base_x) = x1(0);
  for (int i = 0; i < m; ++i) q(x2a_coords[i]) = x2(i);

  // Newton on (stance ankle, base z, base pitch) to put the sole at the
  // origin, flat.
  const std::array<int, 3> unknowns{stance_ankle_coord, bz, bp};
  bool ok = false;
  for (int it = 0; it < 60; ++it) {
    auto fk = frame_kinematics(model, q, VecX::Zero(n), stance_frame);
    const Vec3 r = fk.pose;
    if (r.norm() < 1e-12) {
      ok = true;
      break;
    }
    MatX A(3, 3);
    for (int c = 0; c < 3; ++c) A.col(c) = fk.J.col(unknowns[c]);
    const Vec3 step = A.fullPivLu().solve(r);
    if (!step.allFinite()) break;
    double scale = 1.0;
    if (step.cwiseAbs().maxCoeff() > 0.5) scale = 0.5 / step.cwiseAbs().maxCoeff();
    for (int c = 0; c < 3; ++c) q(unknowns[c]) -= scale * step(c);
    if (r.norm() < 1e-10 && step.norm() < 1e-10) {
      ok = true;
      break;
    }
  }
  {
    auto fk = frame_kinematics(model, q, VecX::Zero(n), stance_frame);
    if (fk.pose.norm() > 1e-8)
      throw DynamicsError("decomposition reconstruct: stance-foot Newton did not converge");
    ok = true;
  }
  (void)ok;

  // Velocities: J dq = 0 in the three dropped slots, the rest given.
  VecX dq = VecX::Zero(n);
  dq(base_x) = x1(1);
  for (int i = 0; i < m; ++i) dq(x2a_coords[i]) = x2(m + i);
  auto fk = frame_kinematics(model, q, VecX::Zero(n), stance_frame);
  MatX A(3, 3);
  Vec3 rhs = Vec3::Zero();
  for (int c = 0; c < 3; ++c) A.col(c) = fk.J.col(unknowns[c]);
  for (int k = 0; k < n; ++k) {
    if (k == unknowns[0] || k == unknowns[1] || k == unknowns[2]) continue;
    rhs -= fk.J.col(k) * dq(k);
  }
  const Vec3 v = A.fullPivLu().solve(rhs);
  for (int c = 0; c < 3; ++c) dq(unknowns[c]) = v(c);

  VecX x(2 * n);
  x << q, dq;
  return x;
}

}  // namespace gaitsyn
