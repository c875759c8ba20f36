#include "gaitsyn/nlp.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <memory>

namespace gaitsyn {

void NlpProblem::init(int n_vars) {
  n = n_vars;
  lb = VecX::Constant(n, -std::numeric_limits<double>::infinity());
  ub = VecX::Constant(n, std::numeric_limits<double>::infinity());
  x0 = VecX::Zero(n);
  scale = VecX::Ones(n);
}

void NlpProblem::add_eq(std::string tag, std::vector<int> vars, int dim,
                        std::function<VecX(const VecX&)> eval,
                        std::function<MatX(const VecX&)> jac) {
  blocks.push_back({Block::Kind::Eq, dim, std::move(vars), std::move(eval), std::move(jac),
                    std::move(tag)});
}

void NlpProblem::add_ineq(std::string tag, std::vector<int> vars, int dim,
                          std::function<VecX(const VecX&)> eval,
                          std::function<MatX(const VecX&)> jac) {
  blocks.push_back({Block::Kind::Ineq, dim, std::move(vars), std::move(eval), std::move(jac),
                    std::move(tag)});
}

void NlpProblem::add_linear(Block::Kind kind, std::string tag, std::vector<int> vars, MatX A,
                            VecX b) {
  const int dim = static_cast<int>(A.rows());
  auto Ashared = std::make_shared<MatX>(std::move(A));
  auto bshared = std::make_shared<VecX>(std::move(b));
  blocks.push_back({kind, dim, std::move(vars),
                    [Ashared, bshared](const VecX& xs) { return *Ashared * xs + *bshared; },
                    [Ashared](const VecX&) { return *Ashared; }, std::move(tag)});
}

void NlpProblem::add_cost(std::string tag, std::vector<int> vars,
                          std::function<double(const VecX&)> eval,
                          std::function<VecX(const VecX&)> grad,
                          std::function<MatX(const VecX&)> hess) {
  cost.push_back({std::move(vars), std::move(eval), std::move(grad), std::move(hess),
                  std::move(tag)});
}

void NlpProblem::add_quadratic_cost(std::string tag, std::vector<int> vars, MatX W, VecX ref) {
  auto Ws = std::make_shared<MatX>(std::move(W));
  auto rs = std::make_shared<VecX>(std::move(ref));
  cost.push_back({std::move(vars),
                  [Ws, rs](const VecX& xs) { return (xs - *rs).dot(*Ws * (xs - *rs)); },
                  [Ws, rs](const VecX& xs) { return VecX(2.0 * (*Ws * (xs - *rs))); },
                  [Ws](const VecX&) { return MatX(2.0 * *Ws); }, std::move(tag)});
}

int NlpProblem::eq_rows() const {
  int r = 0;
  for (const auto& b : blocks)
    if (b.kind == Block::Kind::Eq) r += b.dim;
  return r;
}

int NlpProblem::ineq_rows() const {
  int r = 0;
  for (const auto& b : blocks)
    if (b.kind == Block::Kind::Ineq) r += b.dim;
  return r;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Gathered {
  VecX xs;
};

VecX gather(const VecX& x, const std::vector<int>& vars) {
  VecX xs(vars.size());
  for (size_t i = 0; i < vars.size(); ++i) xs(static_cast<int>(i)) = x(vars[i]);
  return xs;
}

struct Workspace {
  // Residuals stacked per kind with row offsets per block.
  std::vector<int> eq_offset, ineq_offset;  // per block index (-1 if other kind)
  int me = 0, mi = 0;

  VecX ce, ci;
  SpMat Je, Ji;  // scaled variable space

  double f = 0.0;
  VecX grad_f;  // scaled space
  std::vector<Triplet> hess_f;  // scaled space
};

}  // namespace

std::vector<ConstraintViolation> constraint_violations(const NlpProblem& p, const VecX& x) {
  std::map<std::string, double> worst;
  for (const auto& b : p.blocks) {
    const VecX r = b.eval(gather(x, b.vars));
    double v = 0.0;
    if (b.kind == Block::Kind::Eq) {
      v = r.cwiseAbs().maxCoeff();
    } else {
      v = std::max(0.0, -(r.minCoeff()));
    }
    auto it = worst.find(b.tag);
    if (it == worst.end())
      worst[b.tag] = v;
    else
      it->second = std::max(it->second, v);
  }
  std::vector<ConstraintViolation> out;
  for (const auto& [tag, v] : worst) out.push_back({tag, v});
  return out;
}

Solution solve_nlp(const NlpProblem& p, const SolverConfig& cfg) {
  const int n = p.n;
  if (n <= 0) throw SolverError("solve_nlp: empty problem");
  const VecX S = p.scale;
  for (int i = 0; i < n; ++i)
    if (!(S(i) > 0.0)) throw SolverError("solve_nlp: scales must be positive");

  Workspace w;
  w.eq_offset.assign(p.blocks.size(), -1);
  w.ineq_offset.assign(p.blocks.size(), -1);
  for (size_t b = 0; b < p.blocks.size(); ++b) {
    if (p.blocks[b].kind == Block::Kind::Eq) {
      w.eq_offset[b] = w.me;
      w.me += p.blocks[b].dim;
    } else {
      w.ineq_offset[b] = w.mi;
      w.mi += p.blocks[b].dim;
    }
  }

  // Scaled-variable view: x = S .* y.
  auto to_x = [&](const VecX& y) { return VecX(S.cwiseProduct(y)); };
  VecX y = p.x0.cwiseQuotient(S);
  VecX ylb = p.lb.cwiseQuotient(S), yub = p.ub.cwiseQuotient(S);
  auto project = [&](VecX v) {
    for (int i = 0; i < n; ++i) v(i) = std::clamp(v(i), ylb(i), yub(i));
    return v;
  };
  y = project(y);

  auto eval_residuals = [&](const VecX& yv, bool with_jac) {
    const VecX x = to_x(yv);
    w.ce.resize(w.me);
    w.ci.resize(w.mi);
    std::vector<Triplet> te, ti;
    for (size_t b = 0; b < p.blocks.size(); ++b) {
      const auto& blk = p.blocks[b];
      const VecX xs = gather(x, blk.vars);
      const VecX r = blk.eval(xs);
      if (r.size() != blk.dim) throw SolverError("block '" + blk.tag + "': residual size mismatch");
      const int off = blk.kind == Block::Kind::Eq ? w.eq_offset[b] : w.ineq_offset[b];
      if (blk.kind == Block::Kind::Eq)
        w.ce.segment(off, blk.dim) = r;
      else
        w.ci.segment(off, blk.dim) = r;
      if (with_jac) {
        const MatX J = blk.jac(xs);
        for (int rr = 0; rr < blk.dim; ++rr)
          for (size_t c = 0; c < blk.vars.size(); ++c) {
            const double v = J(rr, static_cast<int>(c)) * S(blk.vars[c]);
            if (v != 0.0) {
              if (blk.kind == Block::Kind::Eq)
                te.emplace_back(off + rr, blk.vars[c], v);
              else
                ti.emplace_back(off + rr, blk.vars[c], v);
            }
          }
      }
    }
    if (with_jac) {
      w.Je.resize(w.me, n);
      w.Je.setFromTriplets(te.begin(), te.end());
      w.Ji.resize(w.mi, n);
      w.Ji.setFromTriplets(ti.begin(), ti.end());
    }
  };

  auto eval_cost = [&](const VecX& yv, bool with_derivs) {
    const VecX x = to_x(yv);
    w.f = 0.0;
    if (with_derivs) {
      w.grad_f = VecX::Zero(n);
      w.hess_f.clear();
    }
    for (const auto& cb : p.cost) {
      const VecX xs = gather(x, cb.vars);
      w.f += cb.eval(xs);
      if (with_derivs) {
        const VecX g = cb.grad(xs);
        const MatX H = cb.hess(xs);
        for (size_t i = 0; i < cb.vars.size(); ++i) {
          w.grad_f(cb.vars[i]) += g(static_cast<int>(i)) * S(cb.vars[i]);
          for (size_t j = 0; j < cb.vars.size(); ++j) {
            const double v = H(static_cast<int>(i), static_cast<int>(j)) * S(cb.vars[i]) * S(cb.vars[j]);
            if (v != 0.0) w.hess_f.emplace_back(cb.vars[i], cb.vars[j], v);
          }
        }
      }
    }
  };

  VecX lam_e = VecX::Zero(w.me);
  VecX lam_i = VecX::Zero(w.mi);
  double rho = cfg.rho0;

  auto al_value = [&](const VecX& yv) {
    eval_residuals(yv, false);
    eval_cost(yv, false);
    double al = w.f;
    al += lam_e.dot(w.ce) + 0.5 * rho * w.ce.squaredNorm();
    for (int i = 0; i < w.mi; ++i) {
      const double t = lam_i(i) - rho * w.ci(i);
      al += (std::max(0.0, t) * std::max(0.0, t) - lam_i(i) * lam_i(i)) / (2.0 * rho);
    }
    return al;
  };

  auto feasibility_of = [&]() {
    double v = w.me ? w.ce.cwiseAbs().maxCoeff() : 0.0;
    for (int i = 0; i < w.mi; ++i) v = std::max(v, -std::min(w.ci(i), 0.0));
    return v;
  };

  Solution sol;
  double omega = 1e-2;  // inner stationarity target, tightened per outer round
  double prev_feas = std::numeric_limits<double>::infinity();
  double lm = 1e-8;
  int total_inner = 0;

  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    // --- inner: minimize AL over the box ---
    for (int inner = 0; inner < cfg.max_inner; ++inner) {
      ++total_inner;
      eval_residuals(y, true);
      eval_cost(y, true);

      // Gradient of the AL in scaled space.
      VecX mult_e = lam_e + rho * w.ce;
      VecX act_i(w.mi);
      for (int i = 0; i < w.mi; ++i) act_i(i) = std::max(0.0, lam_i(i) - rho * w.ci(i));
      VecX g = w.grad_f + w.Je.transpose() * mult_e - w.Ji.transpose() * act_i;

      const double al0 = [&] {
        double al = w.f + lam_e.dot(w.ce) + 0.5 * rho * w.ce.squaredNorm();
        for (int i = 0; i < w.mi; ++i) {
          const double t = std::max(0.0, lam_i(i) - rho * w.ci(i));
          al += (t * t - lam_i(i) * lam_i(i)) / (2.0 * rho);
        }
        return al;
      }();

      // Projected-gradient stationarity.
      const VecX pg = project(y - g) - y;
      if (pg.cwiseAbs().maxCoeff() <= omega) break;

      // Gauss-Newton Hessian: Hf + rho (Je'Je + Ji_act'Ji_act) + lm I.
      std::vector<Triplet> th = w.hess_f;
      SpMat JeT = w.Je.transpose();
      SpMat H1 = (rho * JeT * w.Je).pruned();
      // Active inequality rows.
      std::vector<Triplet> ti_act;
      for (int k = 0; k < w.Ji.outerSize(); ++k)
        for (SpMat::InnerIterator it(w.Ji, k); it; ++it)
          if (act_i(it.row()) > 0.0) ti_act.emplace_back(it.row(), it.col(), it.value());
      SpMat Ji_act(w.mi, n);
      Ji_act.setFromTriplets(ti_act.begin(), ti_act.end());
      SpMat H2 = (rho * SpMat(Ji_act.transpose()) * Ji_act).pruned();

      // Free set: strictly inside, or pushing inward at a bound.
      std::vector<int> free_idx;
      free_idx.reserve(n);
      std::vector<int> pos(n, -1);
      for (int i = 0; i < n; ++i) {
        const bool at_lo = y(i) <= ylb(i) + 1e-14 && g(i) > 0;
        const bool at_hi = y(i) >= yub(i) - 1e-14 && g(i) < 0;
        if (!at_lo && !at_hi) {
          pos[i] = static_cast<int>(free_idx.size());
          free_idx.push_back(i);
        }
      }
      const int nf = static_cast<int>(free_idx.size());
      if (nf == 0) break;

      std::vector<Triplet> tf;
      auto push_block = [&](const SpMat& M) {
        for (int k = 0; k < M.outerSize(); ++k)
          for (SpMat::InnerIterator it(M, k); it; ++it)
            if (pos[it.row()] >= 0 && pos[it.col()] >= 0)
              tf.emplace_back(pos[it.row()], pos[it.col()], it.value());
      };
      for (const auto& t : th)
        if (pos[t.row()] >= 0 && pos[t.col()] >= 0)
          tf.emplace_back(pos[t.row()], pos[t.col()], t.value());
      push_block(H1);
      push_block(H2);

      bool stepped = false;
      for (int attempt = 0; attempt < 12 && !stepped; ++attempt) {
        std::vector<Triplet> tall = tf;
        for (int i = 0; i < nf; ++i) tall.emplace_back(i, i, lm);
        SpMat H(nf, nf);
        H.setFromTriplets(tall.begin(), tall.end());
        Eigen::SimplicialLDLT<SpMat> ldlt(H);
        if (ldlt.info() != Eigen::Success) {
          lm = std::max(lm * 10.0, 1e-8);
          continue;
        }
        VecX gf(nf);
        for (int i = 0; i < nf; ++i) gf(i) = g(free_idx[i]);
        const VecX df = ldlt.solve(-gf);
        if (!df.allFinite()) {
          lm = std::max(lm * 10.0, 1e-8);
          continue;
        }
        VecX d = VecX::Zero(n);
        for (int i = 0; i < nf; ++i) d(free_idx[i]) = df(i);

        const double slope = g.dot(d);
        double alpha = 1.0;
        for (int ls = 0; ls < 40; ++ls) {
          const VecX yt = project(y + alpha * d);
          const double alt = al_value(yt);
          if (alt <= al0 + 1e-4 * alpha * std::min(slope, 0.0) && std::isfinite(alt)) {
            y = yt;
            stepped = true;
            lm = alpha >= 1.0 ? std::max(lm * 0.33, cfg.lm_min) : lm * 2.0;
            break;
          }
          alpha *= 0.5;
        }
        if (!stepped) lm = std::max(lm * 10.0, 1e-6);
      }
      if (!stepped) break;  // cannot make progress at this omega
    }

    // --- outer updates ---
    eval_residuals(y, false);
    const double feas = feasibility_of();
    eval_cost(y, false);

    if (cfg.verbose)
      std::cerr << "[auglag] outer=" << outer << " feas=" << feas << " f=" << w.f
                << " rho=" << rho << " omega=" << omega << "\n";

    lam_e += rho * w.ce;
    for (int i = 0; i < w.mi; ++i) lam_i(i) = std::max(0.0, lam_i(i) - rho * w.ci(i));

    if (feas <= cfg.tol_feas && omega <= cfg.tol_stat) {
      eval_residuals(y, true);
      eval_cost(y, true);
      VecX gl = w.grad_f + w.Je.transpose() * lam_e - w.Ji.transpose() * lam_i;
      const VecX pg = project(y - gl) - y;
      sol.x = to_x(y);
      sol.converged = true;
      sol.feasibility = feas;
      sol.stationarity = pg.cwiseAbs().maxCoeff();
      sol.objective = w.f;
      sol.outer_iters = outer + 1;
      sol.inner_iters = total_inner;
      sol.violations = constraint_violations(p, sol.x);
      sol.message = "converged";
      return sol;
    }

    if (feas > 0.25 * prev_feas) {
      rho = std::min(rho * cfg.rho_grow, cfg.rho_max);
      if (rho >= cfg.rho_max && feas > 100.0 * cfg.tol_feas && feas > 0.9 * prev_feas) {
        sol.x = to_x(y);
        throw InfeasibleError("solve_nlp: infeasible (max violation " + std::to_string(feas) + ")",
                              constraint_violations(p, sol.x));
      }
    }
    prev_feas = std::min(prev_feas, feas);
    omega = std::max(omega * 0.2, std::min(cfg.tol_stat, 1e-6 + 0.1 * feas));
  }

  eval_residuals(y, false);
  sol.x = to_x(y);
  sol.feasibility = feasibility_of();
  sol.violations = constraint_violations(p, sol.x);
  throw SolverError("solve_nlp: max outer iterations (feasibility " +
                    std::to_string(sol.feasibility) + ")");
}

}  // namespace gaitsyn
