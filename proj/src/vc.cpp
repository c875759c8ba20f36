#include "gaitsyn/vc.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace gaitsyn {

BezierEval bezier_eval(const MatX& coeffs, double s) {
  const int rows = static_cast<int>(coeffs.rows());
  const int M = static_cast<int>(coeffs.cols()) - 1;
  if (rows == 0 || M < 0) throw VcError("bezier_eval: empty coefficients");

  auto eval_in_range = [&](double t) {
    BezierEval e;
    e.value = VecX::Zero(rows);
    e.d1 = VecX::Zero(rows);
    e.d2 = VecX::Zero(rows);
    // Bernstein basis and its derivatives via coefficient differences.
    std::vector<double> binom(M + 1, 1.0);
    for (int k = 1; k <= M; ++k) binom[k] = binom[k - 1] * (M - k + 1) / k;
    for (int k = 0; k <= M; ++k) {
      const double b = binom[k] * std::pow(t, k) * std::pow(1.0 - t, M - k);
      e.value += b * coeffs.col(k);
    }
    for (int k = 0; k + 1 <= M; ++k) {
      double bk = 1.0;
      for (int j = 1; j <= k; ++j) bk = bk * (M - 1 - j + 1) / j;
      const double b = bk * std::pow(t, k) * std::pow(1.0 - t, M - 1 - k);
      e.d1 += M * b * (coeffs.col(k + 1) - coeffs.col(k));
    }
    for (int k = 0; k + 2 <= M; ++k) {
      double bk = 1.0;
      for (int j = 1; j <= k; ++j) bk = bk * (M - 2 - j + 1) / j;
      const double b = bk * std::pow(t, k) * std::pow(1.0 - t, M - 2 - k);
      e.d2 += M * (M - 1) * b * (coeffs.col(k + 2) - 2 * coeffs.col(k + 1) + coeffs.col(k));
    }
    return e;
  };

  if (s >= 0.0 && s <= 1.0) return eval_in_range(s);
  const double edge = s < 0.0 ? 0.0 : 1.0;
  BezierEval e = eval_in_range(edge);
  e.value += (s - edge) * e.d1;
  e.d2.setZero();
  return e;
}

OutputSpec OutputSpec::for_model(const RigidBodyModel& model, StanceLeg stance) {
  OutputSpec spec;
  const std::string stance_ankle =
      std::string(stance == StanceLeg::Left ? "left" : "right") + "_ankle";
  bool has_ankles = false;
  for (const auto& j : model.spec().actuated)
    if (j.find("ankle") != std::string::npos) has_ankles = true;
  for (const auto& j : model.spec().actuated)
    if (j != stance_ankle) spec.posture_joints.push_back(j);
  // Point-foot models are underactuated in single support; they drop the
  // velocity-regulating output and track posture only.
  spec.has_velocity_output = has_ankles;
  return spec;
}

MatX OutputSpec::selector(const RigidBodyModel& model) const {
  MatX S = MatX::Zero(posture_joints.size(), model.nq());
  for (size_t r = 0; r < posture_joints.size(); ++r)
    S(r, model.coord_index(posture_joints[r])) = 1.0;
  return S;
}

void OutputSpec::validate(const RigidBodyModel& model) const {
  const int ny = ny2() + (has_velocity_output ? 1 : 0);
  if (ny != model.nu())
    throw VcError("output rank condition: outputs (" + std::to_string(ny) +
                  ") must equal actuator count (" + std::to_string(model.nu()) + ")");
  std::vector<std::string> seen;
  for (const auto& j : posture_joints) {
    if (std::find(seen.begin(), seen.end(), j) != seen.end())
      throw VcError("output spec lists joint '" + j + "' twice");
    seen.push_back(j);
    model.coord_index(j);
  }
}

Json OutputSpec::to_json() const {
  return Json{{"posture_joints", posture_joints}, {"has_velocity_output", has_velocity_output}};
}

OutputSpec OutputSpec::from_json(const Json& j) {
  OutputSpec s;
  s.posture_joints = j.at("posture_joints").get<std::vector<std::string>>();
  s.has_velocity_output = j.value("has_velocity_output", true);
  return s;
}

Outputs eval_outputs(const RigidBodyModel& model, const VecX& x, const MatX& alpha, double tau,
                     const OutputSpec& spec, double T_p, double v_des) {
  const int n = model.nq();
  const VecX q = x.head(n), dq = x.tail(n);
  const MatX S = spec.selector(model);
  const auto bez = bezier_eval(alpha, tau);
  Outputs out;
  if (spec.has_velocity_output) out.y1 = dq(model.base_x_coord()) - v_des;
  out.y2 = S * q - bez.value;
  out.dy2 = S * dq - bez.d1 / T_p;
  return out;
}

IoControlResult io_control(const RigidBodyModel& model, const VecX& x, const MatX& alpha,
                           double tau, const OutputSpec& spec, double T_p, double v_des,
                           double eps, int stance_frame, double feedback_sign) {
  if (eps <= 0.0) throw VcError("io_control: eps must be positive");
  spec.validate(model);
  const int n = model.nq();
  const int nu = model.nu();
  const VecX q = x.head(n), dq = x.tail(n);

  // Affine acceleration decomposition: ddq = fdd + Gdd * u.
  auto base = stance_dynamics_jac(model, x, VecX::Zero(nu), stance_frame, false);
  const VecX fdd = base.xdot.tail(n);
  MatX Gdd(n, nu);
  for (int a = 0; a < nu; ++a) {
    auto col = stance_dynamics_jac(model, x, VecX::Unit(nu, a), stance_frame, false);
    Gdd.col(a) = col.xdot.tail(n) - fdd;
  }

  const MatX S = spec.selector(model);
  const auto bez = bezier_eval(alpha, tau);
  const Outputs outs = eval_outputs(model, x, alpha, tau, spec, T_p, v_des);

  MatX A(nu, nu);
  VecX lf(nu), fb(nu);
  int row = 0;
  if (spec.has_velocity_output) {
    const int bx = model.base_x_coord();
    A.row(0) = Gdd.row(bx);
    lf(0) = fdd(bx);
    fb(0) = outs.y1 / eps;
    row = 1;
  }
  A.bottomRows(nu - row) = S * Gdd;
  lf.tail(nu - row) = S * fdd - bez.d2 / (T_p * T_p);
  fb.tail(nu - row) = (2.0 / eps) * outs.dy2 + (1.0 / (eps * eps)) * outs.y2;

  Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (smin < 1e-9 * std::max(smax, 1.0))
    throw VcError("io_control: singular decoupling matrix (condition " +
                  std::to_string(smax / std::max(smin, 1e-300)) + ")");

  IoControlResult res;
  res.u = -svd.solve(lf + feedback_sign * fb);
  if (!res.u.allFinite()) throw VcError("io_control: non-finite torque");
  res.min_sigma_A = smin;
  res.outputs = outs;
  return res;
}

// --- Gait artifact ----------------------------------------------------------

Json GaitArtifact::to_json() const {
  Json j;
  j["format"] = "gaitsyn-gait/1";
  j["model"] = model_name;
  j["bezier_degree"] = bezier_degree;
  j["alpha"] = mat_to_json(alpha);
  j["T_p"] = T_p;
  j["v_des"] = v_des;
  j["eps"] = eps;
  j["outputs"] = outputs.to_json();
  j["x_star"] = vec_to_json(x_star);
  j["orbit_t"] = vec_to_json(orbit_t);
  j["orbit_x"] = mat_to_json(orbit_x);
  j["orbit_u"] = mat_to_json(orbit_u);
  Json rep;
  rep["feasibility"] = report.feasibility;
  rep["objective"] = report.objective;
  rep["min_sigma_A"] = report.min_sigma_A;
  rep["fixed_point_residual"] = report.fixed_point_residual;
  Json viol = Json::array();
  for (const auto& [k, v] : report.max_violation) viol.push_back(Json{{"constraint", k}, {"max_violation", v}});
  rep["constraints"] = viol;
  j["report"] = rep;
  j["provenance"] = gaitsyn::to_json(prov);
  return j;
}

GaitArtifact GaitArtifact::from_json(const Json& j) {
  if (j.value("format", "") != "gaitsyn-gait/1") throw IoError("not a gaitsyn gait file");
  GaitArtifact g;
  g.model_name = j.at("model").get<std::string>();
  g.bezier_degree = j.at("bezier_degree").get<int>();
  g.alpha = mat_from_json(j.at("alpha"));
  g.T_p = j.at("T_p").get<double>();
  g.v_des = j.at("v_des").get<double>();
  g.eps = j.value("eps", 0.1);
  g.outputs = OutputSpec::from_json(j.at("outputs"));
  g.x_star = vec_from_json(j.at("x_star"));
  g.orbit_t = vec_from_json(j.at("orbit_t"));
  g.orbit_x = mat_from_json(j.at("orbit_x"));
  g.orbit_u = mat_from_json(j.at("orbit_u"));
  const auto& rep = j.at("report");
  g.report.feasibility = rep.value("feasibility", 0.0);
  g.report.objective = rep.value("objective", 0.0);
  g.report.min_sigma_A = rep.value("min_sigma_A", 0.0);
  g.report.fixed_point_residual = rep.value("fixed_point_residual", 0.0);
  for (const auto& item : rep.value("constraints", Json::array()))
    g.report.max_violation.push_back(
        {item.at("constraint").get<std::string>(), item.at("max_violation").get<double>()});
  g.prov = provenance_from_json(j.at("provenance"));
  return g;
}

void GaitArtifact::save(const std::string& path) const { write_json_file(path, to_json()); }

GaitArtifact GaitArtifact::load(const std::string& path) {
  return from_json(read_json_file(path));
}

VecX PhzdController::torque(const RigidBodyModel& model, const SystemState& state,
                            double t) const {
  const double tau = phase_tau(t, state.t0, gait_.T_p);
  const int stance_frame =
      model.frame_index(state.stance_leg == StanceLeg::Left ? "left_sole" : "right_sole");
  // The gait is stored in left-stance coordinates; simulate_step relabels at
  // each reset so the controller always sees left-stance slots.
  auto res = io_control(model, state.packed(), gait_.alpha, tau, gait_.outputs, gait_.T_p,
                        gait_.v_des, eps_, stance_frame, feedback_sign_);
  return res.u;
}

std::optional<VecX> PhzdController::desired_actuated(const RigidBodyModel& model,
                                                     const SystemState& state, double t) const {
  const double tau = phase_tau(t, state.t0, gait_.T_p);
  const auto bez = bezier_eval(gait_.alpha, tau);
  VecX desired(model.nu());
  for (int a = 0; a < model.nu(); ++a) {
    const std::string& joint = model.spec().actuated[a];
    bool found = false;
    for (size_t r = 0; r < gait_.outputs.posture_joints.size(); ++r) {
      if (gait_.outputs.posture_joints[r] == joint) {
        desired(a) = bez.value(static_cast<int>(r));
        found = true;
        break;
      }
    }
    if (!found) desired(a) = state.q(model.coord_index(joint));  // stance ankle: no target
  }
  return desired;
}

}  // namespace gaitsyn
