#pragma once

#include <functional>
#include <optional>
#include <string>

#include "gaitsyn/model.hpp"

namespace gaitsyn {

struct DynamicsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class StanceLeg { Left, Right };
inline StanceLeg other_leg(StanceLeg s) { return s == StanceLeg::Left ? StanceLeg::Right : StanceLeg::Left; }
inline const char* to_string(StanceLeg s) { return s == StanceLeg::Left ? "left" : "right"; }

struct SystemState {
  VecX q;
  VecX dq;
  StanceLeg stance_leg = StanceLeg::Left;
  double t0 = 0.0;  // step start time

  VecX packed() const {
    VecX x(q.size() + dq.size());
    x << q, dq;
    return x;
  }
  static SystemState unpack(const VecX& x, StanceLeg s, double t0) {
    const int n = static_cast<int>(x.size()) / 2;
    SystemState st;
    st.q = x.head(n);
    st.dq = x.tail(n);
    st.stance_leg = s;
    st.t0 = t0;
    return st;
  }
};

struct DynamicsTerms {
  MatX D;    // inertia
  MatX C;    // Coriolis matrix (Christoffel construction)
  VecX Cdq;  // C * dq
  VecX G;    // gravity vector
};

DynamicsTerms dynamics_terms(const RigidBodyModel& model, const VecX& q, const VecX& dq);

// dD/dq_k stacked as n matrices; exact closed form from the chain geometry.
std::vector<MatX> mass_matrix_partials(const RigidBodyModel& model, const VecX& q);

struct FrameKin {
  Vec3 pose;      // (x, z, theta_ccw)
  Vec3 velocity;  // J * dq
  MatX J;         // rows (x, z, theta)
  Vec3 Jdot_dq;   // time derivative of J times dq
};

FrameKin frame_kinematics(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                          const std::string& frame);
FrameKin frame_kinematics(const RigidBodyModel& model, const VecX& q, const VecX& dq, int frame_idx);

struct ContactWrench {
  Vec3 force = Vec3::Zero();   // (F_x, F_y, F_z); planar models use F_x, F_z
  Vec3 moment = Vec3::Zero();  // (M_x, M_y, M_z); planar models use M_y
  double fx() const { return force.x(); }
  double fz() const { return force.z(); }
  double my() const { return moment.y(); }
};

// Constraint row convention: point contacts pin (x, z); flat feet also pin
// the sole pitch. Lagrange multipliers map to (F_x, F_z, -M_y).
int contact_rows(const RigidBodyModel& model, int frame_idx);
MatX contact_jacobian(const RigidBodyModel& model, const VecX& q, int frame_idx);

struct ConstrainedAccel {
  VecX ddq;
  ContactWrench wrench;
};

// Solves [D -J^T; J 0] [ddq; F] = [Bu + tau_ext - Cdq - G; -Jdot*dq].
ConstrainedAccel constrained_accel(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                                   const VecX& u, const std::string& contact_frame,
                                   const VecX& tau_ext = VecX());
ConstrainedAccel constrained_accel(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                                   const VecX& u, int frame_idx, const VecX& tau_ext = VecX());

// Same acceleration through the pinned (constraint-eliminated) route; used as
// a validation cross-check against the KKT solve.
VecX pinned_accel(const RigidBodyModel& model, const VecX& q, const VecX& dq, const VecX& u,
                  int frame_idx, const VecX& tau_ext = VecX());

VecX unconstrained_accel(const RigidBodyModel& model, const VecX& q, const VecX& dq,
                         const VecX& u, const VecX& tau_ext = VecX());

struct ImpactResult {
  VecX q_plus;    // relabeled, base x re-zeroed onto the new stance foot
  VecX dq_plus;   // relabeled post-impact velocities
  VecX impulse;   // contact impulse at the new stance frame (pre-relabel rows)
  double base_shift = 0.0;  // world-frame x removed by the re-zeroing
};

// Plastic impact at new_stance_frame followed by leg relabeling, so the
// post-impact state reuses the single-support coordinates of the mirror leg.
ImpactResult impact_reset(const RigidBodyModel& model, const VecX& q, const VecX& dq_minus,
                          const std::string& new_stance_frame);
ImpactResult impact_reset(const RigidBodyModel& model, const VecX& q, const VecX& dq_minus,
                          int frame_idx);

struct ZmpResult {
  double zmp;  // m, positive toward the toe
  bool inside;
};

struct ZmpMargins {
  double heel_fraction = 0.30;  // m_h = fraction * L_h
  double toe_fraction = 0.10;   // m_t = fraction * L_t
};

ZmpResult zmp_of_wrench(const ContactWrench& wrench, const ContactSpec& foot_geom,
                        const ZmpMargins& margins = {});

double kinetic_energy(const RigidBodyModel& model, const VecX& q, const VecX& dq);
double potential_energy(const RigidBodyModel& model, const VecX& q);
Vec2 center_of_mass(const RigidBodyModel& model, const VecX& q);

// Combined stance-dynamics evaluation with exact Jacobians (forward-mode),
// the workhorse of the collocation transcription. x = (q, dq).
struct StanceDynJac {
  VecX xdot;   // (dq, ddq)
  Vec3 F;      // (F_x, F_z, M_y); point contacts leave M_y = 0
  MatX dxdot_dx, dxdot_du;
  MatX dF_dx, dF_du;
};
StanceDynJac stance_dynamics_jac(const RigidBodyModel& model, const VecX& x, const VecX& u,
                                 int frame_idx, bool with_jacobians = true);

struct ImpactJac {
  VecX x_plus;
  MatX dxplus_dx;
};
ImpactJac impact_map_jac(const RigidBodyModel& model, const VecX& x_minus, int frame_idx,
                         bool with_jacobian = true);

// Frame pose and velocity with exact derivatives w.r.t. the full state.
struct FrameMotionJac {
  Vec3 pose, vel;
  MatX dpose_dx;  // 3 x 2n
  MatX dvel_dx;   // 3 x 2n
};
FrameMotionJac frame_motion_jac(const RigidBodyModel& model, const VecX& x, int frame_idx);

}  // namespace gaitsyn
