#pragma once

// Shared helpers for the test suites: canonical poses and static torques.

#include <random>

#include "gaitsyn/dynamics.hpp"
#include "gaitsyn/model.hpp"

namespace gaitsyn::testutil {

// Standing pose with the given sole flat on the ground at x = 0.
inline VecX standing_pose(const RigidBodyModel& model, const std::string& stance = "left_sole") {
  VecX q = VecX::Zero(model.nq());
  q(model.coord_index("base_z")) = 1.0;
  auto fk = frame_kinematics(model, q, VecX::Zero(model.nq()), stance);
  q(model.coord_index("base_z")) -= fk.pose.y();
  q(model.coord_index("base_x")) -= fk.pose.x();
  return q;
}

// Torques and contact force holding static equilibrium: B u + J^T F = G.
inline VecX static_torque(const RigidBodyModel& model, const VecX& q, const std::string& frame) {
  auto terms = dynamics_terms(model, q, VecX::Zero(model.nq()));
  const MatX J = contact_jacobian(model, q, model.frame_index(frame));
  MatX A(model.nq(), model.nu() + J.rows());
  A << model.B(), J.transpose();
  return A.fullPivLu().solve(terms.G).head(model.nu());
}

inline VecX random_vec(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> d(-scale, scale);
  VecX v(n);
  for (int i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

}  // namespace gaitsyn::testutil
