#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gaitsyn/linalg.hpp"

namespace gaitsyn {

struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class JointType { Revolute, PlanarFloat };

// Planar sagittal convention: x forward, z up, angles CCW in the x-z plane.
// A forward torso lean is therefore a negative pitch. Contact wrenches are
// reported with the sagittal 3D subset (F_x, F_z, M_y), M_y = -(planar CCW
// moment), so the ZMP identity zmp = -M_y/F_z puts positive zmp toward the toe.

struct LinkSpec {
  std::string name;
  double mass = 0.0;        // kg
  double inertia = 0.0;     // kg m^2 about CoM
  Vec2 com = Vec2::Zero();  // m, in link frame
  double length = 0.0;      // m, frame origin to tip along local -z
};

struct JointSpec {
  std::string name;
  JointType type = JointType::Revolute;
  std::string parent;  // link name or "world"
  std::string child;
  Vec2 origin = Vec2::Zero();  // joint position in parent link frame
  double axis = 1.0;           // rotation sign for revolute joints
  double pos_lo = -std::numeric_limits<double>::infinity();
  double pos_hi = std::numeric_limits<double>::infinity();
  double vel_limit = std::numeric_limits<double>::infinity();
  double torque_limit = std::numeric_limits<double>::infinity();
};

struct ContactSpec {
  std::string name;
  std::string link;
  Vec2 offset = Vec2::Zero();  // sole reference point in link frame
  double heel = 0.0;           // L_h: reference point to heel
  double toe = 0.0;            // L_t: reference point to toe
  double width = 0.0;          // W_f (unused by the planar dynamics)
  bool point() const { return heel == 0.0 && toe == 0.0; }
};

struct ModelSpec {
  std::string name;
  Vec2 gravity{0.0, -9.81};
  std::vector<LinkSpec> links;
  std::vector<JointSpec> joints;
  std::vector<ContactSpec> contacts;
  std::vector<std::string> actuated;  // joint names, defines B column order
};

enum class CoordKind { TransX, TransZ, Rot };

struct Coord {
  CoordKind kind;
  int joint = -1;
  double axis = 1.0;
  std::string name;
};

struct Frame {
  std::string name;
  int link = -1;
  Vec2 offset = Vec2::Zero();
  int contact = -1;  // index into spec.contacts when this frame is a contact
};

struct CompiledLink {
  std::string name;
  double mass, inertia;
  Vec2 com;
  Vec2 tip;
  int parent_joint = -1;
  std::vector<int> coords;        // ancestor coordinate indices, root to leaf
};

struct CompiledJoint {
  JointSpec spec;
  int parent_link = -1;  // -1 == world
  int child_link = -1;
  int q_start = 0;       // first coordinate index
};

class RigidBodyModel {
 public:
  static RigidBodyModel compile(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  int nq() const { return nq_; }
  int nu() const { return static_cast<int>(spec_.actuated.size()); }
  const MatX& B() const { return B_; }
  double total_mass() const { return total_mass_; }
  double total_weight() const { return total_mass_ * spec_.gravity.norm(); }
  const Vec2& gravity() const { return spec_.gravity; }

  const std::vector<CompiledLink>& links() const { return links_; }
  const std::vector<CompiledJoint>& joints() const { return joints_; }
  const std::vector<Coord>& coords() const { return coords_; }
  const std::vector<Frame>& frames() const { return frames_; }

  int frame_index(const std::string& name) const;
  int link_index(const std::string& name) const;
  int coord_index(const std::string& name) const;  // "base_x", "left_hip", ...
  const Frame& frame(int idx) const { return frames_[idx]; }

  // Index of the floating-base x coordinate, or -1 for pinned models.
  int base_x_coord() const { return base_x_coord_; }

  // Left/right coordinate swap; identity when no left_/right_ pairs exist.
  const std::vector<int>& relabel_permutation() const { return relabel_perm_; }
  VecX relabel(const VecX& v) const;
  // Contact frame index on the opposite leg, or the frame itself if unpaired.
  int mirror_frame(int frame_idx) const { return mirror_frame_[frame_idx]; }

  // Per-coordinate limits assembled from the joint specs.
  const VecX& q_lower() const { return q_lo_; }
  const VecX& q_upper() const { return q_hi_; }
  const VecX& dq_limit() const { return dq_lim_; }
  const VecX& u_limit() const { return u_lim_; }

 private:
  ModelSpec spec_;
  int nq_ = 0;
  MatX B_;
  double total_mass_ = 0.0;
  std::vector<CompiledLink> links_;
  std::vector<CompiledJoint> joints_;
  std::vector<Coord> coords_;
  std::vector<Frame> frames_;
  std::vector<int> relabel_perm_;
  std::vector<int> mirror_frame_;
  VecX q_lo_, q_hi_, dq_lim_, u_lim_;
  int base_x_coord_ = -1;
};

RigidBodyModel load_model(const ModelSpec& spec);

// Built-in planar bipeds. five_link: point feet, 7 DOF floating, 4 actuators.
// seven_link: flat feet with actuated ankles, 9 DOF floating, 6 actuators.
ModelSpec five_link_spec();
ModelSpec seven_link_spec();

// Resolves "five_link"/"seven_link" or a path to a model file.
RigidBodyModel load_model_by_name(const std::string& name_or_path);

// Mass randomization hook for robustness studies: scales each link mass
// (and inertia proportionally) by a factor uniform in [1-fraction, 1+fraction].
ModelSpec randomize_masses(const ModelSpec& spec, unsigned seed, double fraction = 0.2);

ModelSpec parse_model_text(const std::string& text);
ModelSpec parse_model_file(const std::string& path);
std::string write_model_text(const ModelSpec& spec);

}  // namespace gaitsyn
