// Inner solvers for the argmin subproblems: full-batch gradient descent with
// Armijo backtracking, plus proximal / line-search SGD variants for
// interpolating streams.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "oilbench/core.hpp"

namespace oilbench {

enum class SolveMethod { ArmijoGd, ProxSgd, SlsSgd };

struct SolverConfig {
  int max_iters = 1000;
  double grad_tol = 1e-8;
  double armijo_c = 1e-4;
  double backtrack_factor = 0.5;
  double init_step = 1.0;
  SolveMethod method = SolveMethod::ArmijoGd;
  std::uint64_t rng_seed = 0;

  void validate() const {
    if (max_iters <= 0) throw std::invalid_argument("max_iters must be > 0");
    if (grad_tol <= 0) throw std::invalid_argument("grad_tol must be > 0");
    if (armijo_c <= 0 || armijo_c >= 1) throw std::invalid_argument("armijo_c in (0,1)");
    if (backtrack_factor <= 0 || backtrack_factor >= 1)
      throw std::invalid_argument("backtrack_factor in (0,1)");
    if (init_step <= 0) throw std::invalid_argument("init_step must be > 0");
  }
};

struct SolveReport {
  Vec solution;
  double final_grad_norm = 0.0;
  int iters_used = 0;
  bool converged = false;
  bool step_underflow = false;
  double objective_value = 0.0;
};

// Sum of retained losses + optional linear term + quadratic anchors
// sum_j (coeff_j/2)*||w - anchor_j||^2.
struct CompositeObjective {
  struct QuadTerm {
    double coeff = 0.0;
    Vec anchor;
  };

  std::vector<const RoundLoss*> losses;
  Vec linear;  // empty => absent
  std::vector<QuadTerm> quads;

  void add_loss(const RoundLoss& l) { losses.push_back(&l); }
  void add_linear(Vec g) { linear = std::move(g); }
  void add_quad(double coeff, Vec anchor) {
    if (coeff != 0.0) quads.push_back({coeff, std::move(anchor)});
  }

  double value(const Vec& w) const {
    double v = 0.0;
    for (const auto* l : losses) v += l->value(w);
    if (linear.size() > 0) v += linear.dot(w);
    for (const auto& q : quads) v += 0.5 * q.coeff * (w - q.anchor).squaredNorm();
    return v;
  }

  Vec gradient(const Vec& w) const {
    Vec g = Vec::Zero(w.size());
    for (const auto* l : losses) g += l->gradient(w);
    if (linear.size() > 0) g += linear;
    for (const auto& q : quads) g += q.coeff * (w - q.anchor);
    return g;
  }
};

// When every retained loss is Squared or Linear the composite is itself a
// quadratic and the unconstrained argmin comes from a d x d normal-equations
// solve (min-norm when singular). Returns nullopt when not applicable.
inline std::optional<Vec> quadratic_closed_form(const CompositeObjective& f,
                                                const Domain& dom,
                                                Eigen::Index dim) {
  if (dom.kind != Domain::Kind::Unconstrained) return std::nullopt;
  Eigen::Index k = 1, d = dim;
  for (const auto* l : f.losses) {
    if (l->kind() == LossKind::Linear) continue;
    if (l->kind() != LossKind::Squared) return std::nullopt;
    k = l->d_output();
    d = l->d_feature();
  }
  if (k * d != dim) return std::nullopt;

  Mat M = Mat::Zero(d, d);       // sum w p x x^T
  Mat B = Mat::Zero(k, d);       // sum w p y x^T
  Vec lin = Vec::Zero(dim);      // coefficient of <., w>
  double c = 0.0;
  Vec anchor_acc = Vec::Zero(dim);
  for (const auto* l : f.losses) {
    if (l->kind() == LossKind::Linear) {
      lin += l->weight() * l->slope();
      continue;
    }
    for (Eigen::Index i = 0; i < l->n_samples(); ++i) {
      double wi = l->weight() * l->sample_weights()[i];
      if (wi == 0) continue;
      Vec x = l->features().row(i).transpose();
      M.noalias() += wi * x * x.transpose();
      B.noalias() += wi * l->targets().row(i).transpose() * x.transpose();
    }
  }
  if (f.linear.size() > 0) lin += f.linear;
  for (const auto& q : f.quads) {
    c += q.coeff;
    anchor_acc += q.coeff * q.anchor;
  }
  if (c == 0.0 && f.losses.empty()) return std::nullopt;

  Mat R = B - Eigen::Map<const Mat>(lin.data(), k, d) +
          Eigen::Map<const Mat>(anchor_acc.data(), k, d);
  M.diagonal().array() += c;
  Eigen::CompleteOrthogonalDecomposition<Mat> cod(M);
  Mat Wt = cod.solve(R.transpose());  // d x k
  Mat W = Wt.transpose();
  Vec sol = Eigen::Map<const Vec>(W.data(), W.size());
  if (!sol.allFinite()) return std::nullopt;
  return sol;
}

// Exact prox of (1/(2*eta))*||. - anchor||^2 with stepsize `step`, then
// projection onto the domain.
inline Vec prox_step(const Vec& w, const Vec& anchor, double step, double eta,
                     const Domain& dom) {
  if (!(step > 0) || !(eta > 0) || !std::isfinite(step) || !std::isfinite(eta))
    throw std::invalid_argument("prox_step requires finite positive step and eta");
  double r = step / eta;
  return dom.project((w + r * anchor) / (1.0 + r));
}

namespace detail {

// Stationarity measure: plain gradient norm when unconstrained, otherwise the
// norm of the unit-step projected-gradient mapping.
inline double stationarity(const CompositeObjective& f, const Domain& dom,
                           const Vec& w, const Vec& g) {
  if (dom.kind == Domain::Kind::Unconstrained) return g.norm();
  return (w - dom.project(w - g)).norm();
}

inline SolveReport armijo_gd(const CompositeObjective& f, const Domain& dom,
                             Vec w, const SolverConfig& cfg) {
  SolveReport rep;
  double fw = f.value(w);
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    Vec g = f.gradient(w);
    rep.final_grad_norm = stationarity(f, dom, w, g);
    if (rep.final_grad_norm <= cfg.grad_tol) break;
    double gg = g.squaredNorm();
    double s = cfg.init_step;
    Vec trial;
    double ft;
    bool accepted = false;
    while (s >= 1e-20) {
      trial = dom.project(w - s * g);
      ft = f.value(trial);
      if (ft <= fw - cfg.armijo_c * s * gg) {
        accepted = true;
        break;
      }
      s *= cfg.backtrack_factor;
    }
    if (!accepted) {
      rep.step_underflow = true;
      ++it;
      break;
    }
    w = std::move(trial);
    fw = ft;
  }
  if (it >= cfg.max_iters || rep.step_underflow) {
    Vec g = f.gradient(w);
    rep.final_grad_norm = stationarity(f, dom, w, g);
  }
  rep.solution = std::move(w);
  rep.iters_used = it;
  rep.converged = rep.final_grad_norm <= cfg.grad_tol;
  rep.objective_value = fw;
  return rep;
}

// Stochastic variants. One iteration = one sampled-loss step (+ prox for the
// quadratic terms); the full objective is checked every n samples.
inline SolveReport stochastic(const CompositeObjective& f, const Domain& dom,
                              Vec w, const SolverConfig& cfg, bool line_search) {
  SolveReport rep;
  const std::size_t n = f.losses.size();
  if (n == 0) return armijo_gd(f, dom, std::move(w), cfg);
  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);

  // Aggregate quadratic terms into a single (coeff, anchor) pair for the prox.
  double qc = 0.0;
  Vec qa = Vec::Zero(w.size());
  for (const auto& q : f.quads) {
    qc += q.coeff;
    qa += q.coeff * q.anchor;
  }
  if (qc > 0) qa /= qc;

  {
    Vec g0 = f.gradient(w);
    rep.final_grad_norm = detail::stationarity(f, dom, w, g0);
    if (rep.final_grad_norm <= cfg.grad_tol) {
      rep.solution = std::move(w);
      rep.converged = true;
      rep.objective_value = f.value(rep.solution);
      return rep;
    }
  }

  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    const RoundLoss& li = *f.losses[pick(rng)];
    Vec g = li.gradient(w);
    if (f.linear.size() > 0) g += f.linear / double(n);
    double s = cfg.init_step;
    if (line_search) {
      double fi = li.value(w);
      double gg = g.squaredNorm();
      while (s >= 1e-20 && li.value(w - s * g) > fi - cfg.armijo_c * s * gg)
        s *= cfg.backtrack_factor;
      if (s < 1e-20) {
        rep.step_underflow = true;
        break;
      }
    }
    Vec next = w - s * g;
    // Prox handles the quadratic terms, scaled so that the stationary point of
    // avg-loss + (qc/n)/2*||.-qa||^2 matches the full objective's.
    if (qc > 0)
      next = prox_step(next, qa, s, double(n) / qc, dom);
    else
      next = dom.project(next);
    w = std::move(next);
    if ((it + 1) % int(n) == 0 || it + 1 == cfg.max_iters) {
      Vec gf = f.gradient(w);
      rep.final_grad_norm = detail::stationarity(f, dom, w, gf);
      if (rep.final_grad_norm <= cfg.grad_tol) {
        ++it;
        break;
      }
    }
  }
  {
    Vec gf = f.gradient(w);
    rep.final_grad_norm = detail::stationarity(f, dom, w, gf);
  }
  rep.solution = std::move(w);
  rep.iters_used = it;
  rep.converged = rep.final_grad_norm <= cfg.grad_tol;
  rep.objective_value = f.value(rep.solution);
  return rep;
}

}  // namespace detail

inline SolveReport solve(const CompositeObjective& f, const Domain& dom,
                         Vec start, const SolverConfig& cfg) {
  cfg.validate();
  require_finite(start, "solver start");
  switch (cfg.method) {
    case SolveMethod::ArmijoGd: return detail::armijo_gd(f, dom, std::move(start), cfg);
    case SolveMethod::ProxSgd: return detail::stochastic(f, dom, std::move(start), cfg, false);
    case SolveMethod::SlsSgd: return detail::stochastic(f, dom, std::move(start), cfg, true);
  }
  throw std::logic_error("unknown solve method");
}

// argmin of a single round loss over the domain (with its value). Squared
// losses on unconstrained domains use the closed form; everything else runs
// the gradient solver at tolerance 1e-10.
inline std::pair<Vec, double> exact_min(const RoundLoss& l, const Domain& dom,
                                        SolverConfig cfg = {}) {
  if (l.kind() == LossKind::Linear)
    throw std::invalid_argument("linear losses have no finite minimizer");
  if (l.kind() == LossKind::Squared && dom.kind == Domain::Kind::Unconstrained) {
    Vec w = l.least_squares_min();
    return {w, l.value(w)};
  }
  cfg.grad_tol = 1e-10;
  CompositeObjective f;
  f.add_loss(l);
  SolveReport rep = solve(f, dom, Vec::Zero(l.dim()), cfg);
  return {rep.solution, rep.objective_value};
}

}  // namespace oilbench
