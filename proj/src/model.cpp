#include "gaitsyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace gaitsyn {

namespace {

double deg(double d) { return d * M_PI / 180.0; }

void validate_spec(const ModelSpec& spec) {
  if (spec.links.empty()) throw ModelError("model has no links");
  std::map<std::string, int> link_count;
  for (const auto& l : spec.links) {
    if (l.mass <= 0.0) throw ModelError("link '" + l.name + "' has nonpositive mass");
    if (l.inertia < 0.0) throw ModelError("link '" + l.name + "' has negative inertia");
    link_count[l.name]++;
  }
  for (const auto& [name, cnt] : link_count)
    if (cnt > 1) throw ModelError("duplicate link name '" + name + "'");
  std::map<std::string, int> frame_names;
  for (const auto& j : spec.joints) frame_names[j.name]++;
  for (const auto& c : spec.contacts) frame_names[c.name]++;
  for (const auto& l : spec.links) frame_names[l.name]++;
  for (const auto& [name, cnt] : frame_names)
    if (cnt > 1) throw ModelError("duplicate frame name '" + name + "'");
}

}  // namespace

RigidBodyModel RigidBodyModel::compile(const ModelSpec& spec) {
  validate_spec(spec);
  RigidBodyModel m;
  m.spec_ = spec;

  std::map<std::string, int> link_idx;
  for (int i = 0; i < static_cast<int>(spec.links.size()); ++i) link_idx[spec.links[i].name] = i;

  m.links_.resize(spec.links.size());
  for (size_t i = 0; i < spec.links.size(); ++i) {
    const auto& l = spec.links[i];
    m.links_[i].name = l.name;
    m.links_[i].mass = l.mass;
    m.links_[i].inertia = l.inertia;
    m.links_[i].com = l.com;
    m.links_[i].tip = Vec2(0.0, -l.length);
    m.total_mass_ += l.mass;
  }

  // Joints in tree order from the world root, assigning coordinates.
  std::vector<int> pending(spec.joints.size());
  for (size_t i = 0; i < pending.size(); ++i) pending[i] = static_cast<int>(i);
  std::vector<bool> link_reached(spec.links.size(), false);
  int n_root = 0;
  std::vector<int> child_joint_of(spec.links.size(), -1);
  for (const auto& j : spec.joints) {
    if (link_idx.find(j.child) == link_idx.end())
      throw ModelError("joint '" + j.name + "' references unknown child link '" + j.child + "'");
    if (j.parent != "world" && link_idx.find(j.parent) == link_idx.end())
      throw ModelError("joint '" + j.name + "' references unknown parent link '" + j.parent + "'");
    if (j.parent == "world") n_root++;
    int& slot = child_joint_of[link_idx[j.child]];
    if (slot != -1) throw ModelError("kinematic loop: link '" + j.child + "' has two parent joints");
    slot = 0;  // marker only
  }
  if (n_root != 1) throw ModelError("model must have exactly one joint with parent 'world'");

  // Breadth-first attach.
  std::vector<int> order;
  while (!pending.empty()) {
    bool progress = false;
    for (auto it = pending.begin(); it != pending.end();) {
      const auto& j = spec.joints[*it];
      const bool ready = (j.parent == "world") || link_reached[link_idx[j.parent]];
      if (ready) {
        if (link_reached[link_idx[j.child]])
          throw ModelError("kinematic loop involving link '" + j.child + "'");
        link_reached[link_idx[j.child]] = true;
        order.push_back(*it);
        it = pending.erase(it);
        progress = true;
      } else {
        ++it;
      }
    }
    if (!progress) throw ModelError("kinematic loop: joints not reachable from world");
  }
  for (size_t i = 0; i < spec.links.size(); ++i)
    if (!link_reached[i]) throw ModelError("link '" + spec.links[i].name + "' not attached to the tree");

  m.joints_.resize(order.size());
  for (size_t oi = 0; oi < order.size(); ++oi) {
    const auto& js = spec.joints[order[oi]];
    CompiledJoint cj;
    cj.spec = js;
    cj.parent_link = js.parent == "world" ? -1 : link_idx[js.parent];
    cj.child_link = link_idx[js.child];
    cj.q_start = m.nq_;
    if (js.type == JointType::PlanarFloat) {
      m.coords_.push_back({CoordKind::TransX, static_cast<int>(oi), 1.0, js.name + "_x"});
      m.coords_.push_back({CoordKind::TransZ, static_cast<int>(oi), 1.0, js.name + "_z"});
      m.coords_.push_back({CoordKind::Rot, static_cast<int>(oi), 1.0, js.name + "_pitch"});
      if (js.parent == "world") m.base_x_coord_ = cj.q_start;
      m.nq_ += 3;
    } else {
      m.coords_.push_back({CoordKind::Rot, static_cast<int>(oi), js.axis, js.name});
      m.nq_ += 1;
    }
    m.links_[cj.child_link].parent_joint = static_cast<int>(oi);
    m.joints_[oi] = cj;
  }

  // Ancestor coordinate lists per link (root to leaf order).
  for (size_t li = 0; li < m.links_.size(); ++li) {
    std::vector<int> chain;
    int l = static_cast<int>(li);
    while (l != -1) {
      const auto& j = m.joints_[m.links_[l].parent_joint];
      const int width = j.spec.type == JointType::PlanarFloat ? 3 : 1;
      for (int k = width - 1; k >= 0; --k) chain.push_back(j.q_start + k);
      l = j.parent_link;
    }
    std::reverse(chain.begin(), chain.end());
    m.links_[li].coords = chain;
  }

  if (static_cast<int>(spec.actuated.size()) > m.nq_)
    throw ModelError("more actuators than degrees of freedom");
  m.B_ = MatX::Zero(m.nq_, spec.actuated.size());
  for (size_t a = 0; a < spec.actuated.size(); ++a) {
    bool found = false;
    for (const auto& cj : m.joints_) {
      if (cj.spec.name == spec.actuated[a]) {
        if (cj.spec.type != JointType::Revolute)
          throw ModelError("actuated joint '" + spec.actuated[a] + "' must be revolute");
        m.B_(cj.q_start, a) = 1.0;
        found = true;
      }
    }
    if (!found) throw ModelError("actuated joint '" + spec.actuated[a] + "' not found");
  }

  // Frames: one per link, one per link tip, one per contact.
  for (size_t li = 0; li < m.links_.size(); ++li) {
    m.frames_.push_back({m.links_[li].name, static_cast<int>(li), Vec2::Zero(), -1});
    m.frames_.push_back({m.links_[li].name + "_tip", static_cast<int>(li), m.links_[li].tip, -1});
  }
  for (size_t ci = 0; ci < spec.contacts.size(); ++ci) {
    const auto& c = spec.contacts[ci];
    if (link_idx.find(c.link) == link_idx.end())
      throw ModelError("contact '" + c.name + "' references unknown link '" + c.link + "'");
    m.frames_.push_back({c.name, link_idx[c.link], c.offset, static_cast<int>(ci)});
  }

  // Relabel permutation from left_/right_ name pairs (coordinate level).
  m.relabel_perm_.resize(m.nq_);
  for (int k = 0; k < m.nq_; ++k) m.relabel_perm_[k] = k;
  auto mirrored_name = [](const std::string& n) -> std::optional<std::string> {
    if (n.rfind("left_", 0) == 0) return "right_" + n.substr(5);
    if (n.rfind("right_", 0) == 0) return "left_" + n.substr(6);
    return std::nullopt;
  };
  for (int k = 0; k < m.nq_; ++k) {
    auto mir = mirrored_name(m.coords_[k].name);
    if (!mir) continue;
    for (int k2 = 0; k2 < m.nq_; ++k2)
      if (m.coords_[k2].name == *mir) m.relabel_perm_[k] = k2;
  }
  m.mirror_frame_.resize(m.frames_.size());
  for (size_t f = 0; f < m.frames_.size(); ++f) {
    m.mirror_frame_[f] = static_cast<int>(f);
    auto mir = mirrored_name(m.frames_[f].name);
    if (!mir) continue;
    for (size_t f2 = 0; f2 < m.frames_.size(); ++f2)
      if (m.frames_[f2].name == *mir) m.mirror_frame_[f] = static_cast<int>(f2);
  }

  m.q_lo_ = VecX::Constant(m.nq_, -std::numeric_limits<double>::infinity());
  m.q_hi_ = VecX::Constant(m.nq_, std::numeric_limits<double>::infinity());
  m.dq_lim_ = VecX::Constant(m.nq_, std::numeric_limits<double>::infinity());
  for (const auto& cj : m.joints_) {
    if (cj.spec.type != JointType::Revolute) continue;
    m.q_lo_(cj.q_start) = cj.spec.pos_lo;
    m.q_hi_(cj.q_start) = cj.spec.pos_hi;
    m.dq_lim_(cj.q_start) = cj.spec.vel_limit;
  }
  m.u_lim_ = VecX::Constant(m.nu(), std::numeric_limits<double>::infinity());
  for (int a = 0; a < m.nu(); ++a)
    for (const auto& cj : m.joints_)
      if (cj.spec.name == spec.actuated[a]) m.u_lim_(a) = cj.spec.torque_limit;

  return m;
}

int RigidBodyModel::frame_index(const std::string& name) const {
  for (size_t i = 0; i < frames_.size(); ++i)
    if (frames_[i].name == name) return static_cast<int>(i);
  throw ModelError("unknown frame '" + name + "'");
}

int RigidBodyModel::link_index(const std::string& name) const {
  for (size_t i = 0; i < links_.size(); ++i)
    if (links_[i].name == name) return static_cast<int>(i);
  throw ModelError("unknown link '" + name + "'");
}

int RigidBodyModel::coord_index(const std::string& name) const {
  for (size_t i = 0; i < coords_.size(); ++i)
    if (coords_[i].name == name) return static_cast<int>(i);
  throw ModelError("unknown coordinate '" + name + "'");
}

VecX RigidBodyModel::relabel(const VecX& v) const {
  VecX out(v.size());
  for (int k = 0; k < static_cast<int>(relabel_perm_.size()); ++k) out(k) = v(relabel_perm_[k]);
  return out;
}

RigidBodyModel load_model(const ModelSpec& spec) { return RigidBodyModel::compile(spec); }

namespace {

ModelSpec planar_biped_spec(bool with_feet) {
  ModelSpec s;
  s.name = with_feet ? "seven_link" : "five_link";
  s.gravity = Vec2(0.0, -9.81);

  const double thigh_len = 0.4, shin_len = 0.4;
  if (with_feet) {
    s.links.push_back({"torso", 20.0, 0.50, Vec2(0.0, 0.25), 0.5});
    s.links.push_back({"left_thigh", 5.0, 0.070, Vec2(0.0, -0.20), thigh_len});
    s.links.push_back({"left_shin", 3.0, 0.042, Vec2(0.0, -0.20), shin_len});
    s.links.push_back({"left_foot", 1.0, 0.006, Vec2(0.03, -0.03), 0.05});
    s.links.push_back({"right_thigh", 5.0, 0.070, Vec2(0.0, -0.20), thigh_len});
    s.links.push_back({"right_shin", 3.0, 0.042, Vec2(0.0, -0.20), shin_len});
    s.links.push_back({"right_foot", 1.0, 0.006, Vec2(0.03, -0.03), 0.05});
  } else {
    s.links.push_back({"torso", 12.0, 0.39, Vec2(0.0, 0.3125), 0.625});
    s.links.push_back({"left_thigh", 6.8, 0.091, Vec2(0.0, -0.20), thigh_len});
    s.links.push_back({"left_shin", 3.2, 0.043, Vec2(0.0, -0.20), shin_len});
    s.links.push_back({"right_thigh", 6.8, 0.091, Vec2(0.0, -0.20), thigh_len});
    s.links.push_back({"right_shin", 3.2, 0.043, Vec2(0.0, -0.20), shin_len});
  }

  JointSpec base;
  base.name = "base";
  base.type = JointType::PlanarFloat;
  base.parent = "world";
  base.child = "torso";
  s.joints.push_back(base);

  auto rev = [&](const std::string& name, const std::string& parent, const std::string& child,
                 Vec2 origin, double axis, double lo, double hi, double vel, double tq) {
    JointSpec j;
    j.name = name;
    j.type = JointType::Revolute;
    j.parent = parent;
    j.child = child;
    j.origin = origin;
    j.axis = axis;
    j.pos_lo = lo;
    j.pos_hi = hi;
    j.vel_limit = vel;
    j.torque_limit = tq;
    s.joints.push_back(j);
  };

  // Hips: positive swings the thigh forward. Knees: axis -1 so positive is
  // physiological flexion (foot moves backward). Ankles: positive tips the
  // toe up.
  const double hip_lim = deg(70), knee_lo = deg(5), knee_hi = deg(120), ankle_lim = deg(23);
  for (const std::string side : {"left", "right"}) {
    rev(side + "_hip", "torso", side + "_thigh", Vec2(0, 0), 1.0, -hip_lim, hip_lim, 12.0, 150.0);
    rev(side + "_knee", side + "_thigh", side + "_shin", Vec2(0, -thigh_len), -1.0, knee_lo,
        knee_hi, 14.0, 150.0);
    if (with_feet)
      rev(side + "_ankle", side + "_shin", side + "_foot", Vec2(0, -shin_len), 1.0, -ankle_lim,
          ankle_lim, 12.0, 120.0);
  }

  if (with_feet) {
    // Sole reference point 5 cm below the ankle; L_h/L_t/W_f per the foot plate.
    s.contacts.push_back({"left_sole", "left_foot", Vec2(0.0, -0.05), 0.07, 0.14, 0.09});
    s.contacts.push_back({"right_sole", "right_foot", Vec2(0.0, -0.05), 0.07, 0.14, 0.09});
    s.actuated = {"left_hip", "left_knee", "left_ankle", "right_hip", "right_knee", "right_ankle"};
  } else {
    s.contacts.push_back({"left_sole", "left_shin", Vec2(0.0, -shin_len), 0.0, 0.0, 0.0});
    s.contacts.push_back({"right_sole", "right_shin", Vec2(0.0, -shin_len), 0.0, 0.0, 0.0});
    s.actuated = {"left_hip", "left_knee", "right_hip", "right_knee"};
  }
  return s;
}

}  // namespace

ModelSpec five_link_spec() { return planar_biped_spec(false); }
ModelSpec seven_link_spec() { return planar_biped_spec(true); }

RigidBodyModel load_model_by_name(const std::string& name_or_path) {
  if (name_or_path == "five_link") return load_model(five_link_spec());
  if (name_or_path == "seven_link") return load_model(seven_link_spec());
  return load_model(parse_model_file(name_or_path));
}

ModelSpec randomize_masses(const ModelSpec& spec, unsigned seed, double fraction) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(1.0 - fraction, 1.0 + fraction);
  ModelSpec out = spec;
  for (auto& l : out.links) {
    const double f = dist(rng);
    l.mass *= f;
    l.inertia *= f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file format: sectioned key=value text, SI units, radians.

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream is(line);
  std::string t;
  while (is >> t) toks.push_back(t);
  return toks;
}

Vec2 parse_vec2(const std::string& s, const std::string& ctx) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ModelError("expected 'x,z' pair in " + ctx);
  return Vec2(std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1)));
}

std::pair<double, double> parse_range(const std::string& s, const std::string& ctx) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ModelError("expected 'lo,hi' pair in " + ctx);
  return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
}

}  // namespace

ModelSpec parse_model_text(const std::string& text) {
  ModelSpec spec;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    const std::string ctx = "line " + std::to_string(lineno);

    if (toks[0].back() == ':' && toks.size() == 1 &&
        (toks[0] == "links:" || toks[0] == "joints:" || toks[0] == "contacts:" ||
         toks[0] == "actuation:")) {
      section = toks[0].substr(0, toks[0].size() - 1);
      continue;
    }
    if (toks[0] == "format:") continue;
    if (toks[0] == "name:") { if (toks.size() > 1) spec.name = toks[1]; continue; }
    if (toks[0] == "gravity:") {
      if (toks.size() != 3) throw ModelError("gravity wants two components at " + ctx);
      spec.gravity = Vec2(std::stod(toks[1]), std::stod(toks[2]));
      continue;
    }

    if (section == "links") {
      LinkSpec l;
      l.name = toks[0];
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto eq = toks[i].find('=');
        if (eq == std::string::npos) throw ModelError("expected key=value at " + ctx);
        const std::string k = toks[i].substr(0, eq), v = toks[i].substr(eq + 1);
        if (k == "mass") l.mass = std::stod(v);
        else if (k == "inertia") l.inertia = std::stod(v);
        else if (k == "com") l.com = parse_vec2(v, ctx);
        else if (k == "length") l.length = std::stod(v);
        else throw ModelError("unknown link key '" + k + "' at " + ctx);
      }
      spec.links.push_back(l);
    } else if (section == "joints") {
      JointSpec j;
      j.name = toks[0];
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto eq = toks[i].find('=');
        if (eq == std::string::npos) throw ModelError("expected key=value at " + ctx);
        const std::string k = toks[i].substr(0, eq), v = toks[i].substr(eq + 1);
        if (k == "type") {
          if (v == "revolute") j.type = JointType::Revolute;
          else if (v == "planar-float") j.type = JointType::PlanarFloat;
          else throw ModelError("unknown joint type '" + v + "' at " + ctx);
        } else if (k == "parent") j.parent = v;
        else if (k == "child") j.child = v;
        else if (k == "origin") j.origin = parse_vec2(v, ctx);
        else if (k == "axis") j.axis = std::stod(v);
        else if (k == "pos") std::tie(j.pos_lo, j.pos_hi) = parse_range(v, ctx);
        else if (k == "vel") j.vel_limit = std::stod(v);
        else if (k == "torque") j.torque_limit = std::stod(v);
        else throw ModelError("unknown joint key '" + k + "' at " + ctx);
      }
      spec.joints.push_back(j);
    } else if (section == "contacts") {
      ContactSpec c;
      c.name = toks[0];
      for (size_t i = 1; i < toks.size(); ++i) {
        const auto eq = toks[i].find('=');
        if (eq == std::string::npos) throw ModelError("expected key=value at " + ctx);
        const std::string k = toks[i].substr(0, eq), v = toks[i].substr(eq + 1);
        if (k == "link") c.link = v;
        else if (k == "offset") c.offset = parse_vec2(v, ctx);
        else if (k == "heel") c.heel = std::stod(v);
        else if (k == "toe") c.toe = std::stod(v);
        else if (k == "width") c.width = std::stod(v);
        else throw ModelError("unknown contact key '" + k + "' at " + ctx);
      }
      spec.contacts.push_back(c);
    } else if (section == "actuation") {
      for (const auto& t : toks) spec.actuated.push_back(t);
    } else {
      throw ModelError("content outside any section at " + ctx);
    }
  }
  return spec;
}

ModelSpec parse_model_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ModelError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_model_text(ss.str());
}

std::string write_model_text(const ModelSpec& spec) {
  std::ostringstream os;
  os.precision(12);
  os << "format: gaitsyn-model/1\n";
  os << "name: " << spec.name << "\n";
  os << "gravity: " << spec.gravity.x() << " " << spec.gravity.y() << "\n\n";
  os << "links:\n";
  for (const auto& l : spec.links)
    os << "  " << l.name << " mass=" << l.mass << " inertia=" << l.inertia << " com=" << l.com.x()
       << "," << l.com.y() << " length=" << l.length << "\n";
  os << "\njoints:\n";
  for (const auto& j : spec.joints) {
    os << "  " << j.name << " type="
       << (j.type == JointType::Revolute ? "revolute" : "planar-float") << " parent=" << j.parent
       << " child=" << j.child << " origin=" << j.origin.x() << "," << j.origin.y();
    if (j.type == JointType::Revolute) {
      os << " axis=" << j.axis;
      if (std::isfinite(j.pos_lo) || std::isfinite(j.pos_hi))
        os << " pos=" << j.pos_lo << "," << j.pos_hi;
      if (std::isfinite(j.vel_limit)) os << " vel=" << j.vel_limit;
      if (std::isfinite(j.torque_limit)) os << " torque=" << j.torque_limit;
    }
    os << "\n";
  }
  os << "\ncontacts:\n";
  for (const auto& c : spec.contacts)
    os << "  " << c.name << " link=" << c.link << " offset=" << c.offset.x() << "," << c.offset.y()
       << " heel=" << c.heel << " toe=" << c.toe << " width=" << c.width << "\n";
  os << "\nactuation:\n  ";
  for (size_t i = 0; i < spec.actuated.size(); ++i)
    os << spec.actuated[i] << (i + 1 < spec.actuated.size() ? " " : "");
  os << "\n";
  return os.str();
}

}  // namespace gaitsyn
