#pragma once

#include "gaitsyn/dynamics.hpp"

namespace gaitsyn {

// Weakly/strongly actuated state split for single support (left stance):
// x1 = (hip horizontal position, hip horizontal velocity), x2 stacks the
// non-stance-ankle joint angles over their velocities, so x2_b = d/dt x2_a.
// The dropped coordinates (base z, base pitch, stance ankle and their
// velocities) are recovered from the stance-foot constraint.
struct Decomposition {
  int n1 = 2;
  std::vector<int> x2a_coords;   // coordinate indices of the strongly actuated angles
  int base_x = 0;
  int stance_frame = -1;
  int stance_ankle_coord = -1;
  int u1_index = -1;             // stance-ankle actuator column

  static Decomposition for_model(const RigidBodyModel& model);

  int n2() const { return 2 * static_cast<int>(x2a_coords.size()); }
  VecX pi1(const VecX& x) const;  // (hip x, hip vx)
  VecX pi2(const VecX& x) const;  // (x2a; x2b)

  // Full state from (x1, x2) with the stance sole flat at the origin;
  // Newton-solves the three dropped configuration coordinates.
  VecX reconstruct(const RigidBodyModel& model, const VecX& x1, const VecX& x2,
                   const VecX* q_hint = nullptr) const;
};

// Smooth insertion-map handle gamma: x1 -> x2 used by the transition
// optimization; implementations live with the regression machinery.
struct InsertionMapFn {
  int n1 = 2, n2 = 16;
  std::function<void(const VecX& x1, VecX& x2, MatX* J)> eval;
};

}  // namespace gaitsyn
