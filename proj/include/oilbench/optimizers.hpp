// The six online learners: OGD, scalar AdaGrad, FTL, proximal FTRL (two
// memory-efficient reformulations), AdaFTRL, and a naive FTRL reference that
// stores all past iterates.
#pragma once

#include <cmath>
#include <vector>

#include "oilbench/core.hpp"
#include "oilbench/solvers.hpp"

namespace oilbench {

enum class Algo { OGD, AdaGrad, FTL, FTRL, AltFTRL, AdaFTRL, FTRLNaive };

inline const char* to_string(Algo a) {
  switch (a) {
    case Algo::OGD: return "ogd";
    case Algo::AdaGrad: return "adagrad";
    case Algo::FTL: return "ftl";
    case Algo::FTRL: return "ftrl";
    case Algo::AltFTRL: return "altftrl";
    case Algo::AdaFTRL: return "adaftrl";
    case Algo::FTRLNaive: return "ftrl_naive";
  }
  return "?";
}

// Step-size schedule eta_t. inv_eta(t) returns 1/eta_t; the adaptive kind
// reads the accumulated sum of squared gradient norms.
struct StepSchedule {
  enum class Kind { Constant, InverseSqrtT, AdaptiveGradNorm, Theorem2 };

  Kind kind = Kind::InverseSqrtT;
  double alpha = 1.0;        // eta for Constant, alpha otherwise
  double grad_sq_accum = 0;  // sum ||grad l_i(w_i)||^2 (adaptive kind)

  static StepSchedule constant(double eta) {
    if (eta <= 0) throw std::invalid_argument("eta must be > 0");
    return {Kind::Constant, eta, 0};
  }
  static StepSchedule inverse_sqrt_t(double alpha) {
    if (alpha <= 0) throw std::invalid_argument("alpha must be > 0");
    return {Kind::InverseSqrtT, alpha, 0};
  }
  static StepSchedule adaptive_grad_norm(double alpha) {
    if (alpha <= 0) throw std::invalid_argument("alpha must be > 0");
    return {Kind::AdaptiveGradNorm, alpha, 0};
  }
  // eta = min{ (sum eps_t^2)^{-1/2}, 1/(2L) }, constant across rounds.
  static StepSchedule theorem2(double L, double eps_sq_sum) {
    double eta = eps_sq_sum > 0 ? std::min(1.0 / std::sqrt(eps_sq_sum), 1.0 / (2 * L))
                                : 1.0 / (2 * L);
    return {Kind::Constant, eta, 0};
  }

  void accumulate(double grad_sq) { grad_sq_accum += grad_sq; }

  double inv_eta(int t) const {
    switch (kind) {
      case Kind::Constant:
      case Kind::Theorem2: return 1.0 / alpha;
      case Kind::InverseSqrtT: return std::sqrt(double(t)) / alpha;
      case Kind::AdaptiveGradNorm:
        return std::sqrt(std::max(grad_sq_accum, 1e-12)) / alpha;
    }
    return 1.0;
  }
};

struct OptimizerState {
  Algo algo = Algo::FTL;
  Vec w;
  std::vector<RoundLoss> history;       // FTL / FTRL / AltFTRL / AdaFTRL / naive
  Vec weight_carry;                     // AltFTRL: sum_i sigma_i * w_i
  std::vector<Vec> iterate_history;     // FTRLNaive only
  std::vector<double> sigma_history;    // FTRLNaive only
  StepSchedule schedule;
  int round = 0;
  double prev_inv_eta = 0.0;            // 1/eta_{t-1}, with 1/eta_0 := 0

  // Per-round diagnostics.
  double last_eta = 0.0;
  double last_sigma = 0.0;
  int last_inner_iters = 0;
  bool last_solver_converged = true;

  static OptimizerState init(Algo algo, Eigen::Index dim, StepSchedule sched) {
    OptimizerState s;
    s.algo = algo;
    s.w = Vec::Zero(dim);
    s.weight_carry = Vec::Zero(dim);
    s.schedule = sched;
    return s;
  }
};

namespace detail {

inline void apply_solve(OptimizerState& s, const CompositeObjective& f,
                        const Domain& dom, const SolverConfig& cfg) {
  if (auto w = quadratic_closed_form(f, dom, s.w.size())) {
    s.w = std::move(*w);
    s.last_inner_iters = 0;
    s.last_solver_converged = true;
    return;
  }
  SolveReport rep = solve(f, dom, s.w, cfg);
  require_finite(rep.solution, "inner solve");
  s.w = std::move(rep.solution);
  s.last_inner_iters = rep.iters_used;
  s.last_solver_converged = rep.converged;
}

// Advance the schedule to round t (= history size after appending l_t) and
// record eta_t / sigma_t. AdaFTRL and AdaGrad fold the current gradient into
// the accumulator before eta_t is computed.
inline double advance_schedule(OptimizerState& s, int t, double grad_sq) {
  if (s.schedule.kind == StepSchedule::Kind::AdaptiveGradNorm)
    s.schedule.accumulate(grad_sq);
  double inv_eta = s.schedule.inv_eta(t);
  s.last_sigma = std::max(0.0, inv_eta - s.prev_inv_eta);
  s.prev_inv_eta = inv_eta;
  s.last_eta = 1.0 / inv_eta;
  return inv_eta;
}

}  // namespace detail

// w_{t+1} = project(w_t - eta_t * grad l_t(w_t)); AdaGrad is the same update
// under the adaptive gradient-norm schedule (scalar, global-norm variant).
inline void ogd_step(OptimizerState& s, const RoundLoss& l, const Domain& dom) {
  Vec g = l.gradient(s.w);
  require_finite(g, "ogd gradient");
  int t = ++s.round;
  detail::advance_schedule(s, t, g.squaredNorm());
  s.w = dom.project(s.w - s.last_eta * g);
  s.last_inner_iters = 0;
  s.last_solver_converged = true;
}

inline void adagrad_step(OptimizerState& s, const RoundLoss& l, const Domain& dom) {
  if (s.schedule.kind != StepSchedule::Kind::AdaptiveGradNorm)
    throw std::logic_error("adagrad requires the adaptive_grad_norm schedule");
  ogd_step(s, l, dom);
}

// w_{t+1} = argmin_W sum_{i<=t} l_i(w), warm-started at w_t.
inline void ftl_step(OptimizerState& s, const RoundLoss& l, const Domain& dom,
                     const SolverConfig& cfg) {
  s.history.push_back(l);
  int t = ++s.round;
  s.last_eta = kInf;
  s.last_sigma = 0.0;
  CompositeObjective f;
  for (const auto& li : s.history) f.add_loss(li);
  detail::apply_solve(s, f, dom, cfg);
  (void)t;
}

// Memory-efficient proximal FTRL: the anchor sum_{i<t} grad l_i(w_t) is
// re-evaluated at the current iterate every round.
inline void ftrl_step(OptimizerState& s, const RoundLoss& l, const Domain& dom,
                      const SolverConfig& cfg) {
  s.history.push_back(l);
  int t = ++s.round;
  double grad_sq = 0.0;
  if (s.schedule.kind == StepSchedule::Kind::AdaptiveGradNorm)
    grad_sq = l.gradient(s.w).squaredNorm();
  double inv_eta = detail::advance_schedule(s, t, grad_sq);

  Vec anchor = Vec::Zero(s.w.size());
  for (int i = 0; i + 1 < t; ++i) anchor += s.history[size_t(i)].gradient(s.w);

  CompositeObjective f;
  for (const auto& li : s.history) f.add_loss(li);
  if (t > 1) f.add_linear(-anchor);
  f.add_quad(inv_eta, s.w);
  detail::apply_solve(s, f, dom, cfg);
}

inline void adaftrl_step(OptimizerState& s, const RoundLoss& l, const Domain& dom,
                         const SolverConfig& cfg) {
  if (s.schedule.kind != StepSchedule::Kind::AdaptiveGradNorm)
    throw std::logic_error("adaftrl requires the adaptive_grad_norm schedule");
  ftrl_step(s, l, dom, cfg);
}

// Alternative reformulation: carries sum_i sigma_i * w_i instead of gradient
// anchors.
inline void alt_ftrl_step(OptimizerState& s, const RoundLoss& l, const Domain& dom,
                          const SolverConfig& cfg) {
  s.history.push_back(l);
  int t = ++s.round;
  double inv_eta = detail::advance_schedule(s, t, 0.0);
  s.weight_carry += s.last_sigma * s.w;

  CompositeObjective f;
  for (const auto& li : s.history) f.add_loss(li);
  f.add_linear(-s.weight_carry);
  f.add_quad(inv_eta, Vec::Zero(s.w.size()));
  detail::apply_solve(s, f, dom, cfg);
  (void)t;
}

// Reference implementation storing every past iterate: O(mT) memory.
inline void ftrl_naive_step(OptimizerState& s, const RoundLoss& l, const Domain& dom,
                            const SolverConfig& cfg) {
  s.history.push_back(l);
  s.iterate_history.push_back(s.w);
  int t = ++s.round;
  detail::advance_schedule(s, t, 0.0);
  s.sigma_history.push_back(s.last_sigma);

  CompositeObjective f;
  for (const auto& li : s.history) f.add_loss(li);
  for (std::size_t i = 0; i < s.iterate_history.size(); ++i)
    f.add_quad(s.sigma_history[i], s.iterate_history[i]);
  detail::apply_solve(s, f, dom, cfg);
}

// Dispatch on the state's algorithm tag.
inline void step(OptimizerState& s, const RoundLoss& l, const Domain& dom,
                 const SolverConfig& cfg) {
  switch (s.algo) {
    case Algo::OGD: ogd_step(s, l, dom); return;
    case Algo::AdaGrad: adagrad_step(s, l, dom); return;
    case Algo::FTL: ftl_step(s, l, dom, cfg); return;
    case Algo::FTRL:
    case Algo::AdaFTRL: ftrl_step(s, l, dom, cfg); return;
    case Algo::AltFTRL: alt_ftrl_step(s, l, dom, cfg); return;
    case Algo::FTRLNaive: ftrl_naive_step(s, l, dom, cfg); return;
  }
  throw std::logic_error("unknown algorithm");
}

// Loss whose value is <grad l(anchor), w>; gradient constant in w.
inline RoundLoss linearize(const RoundLoss& l, const Vec& anchor) {
  return RoundLoss::linear(l.gradient(anchor));
}

}  // namespace oilbench
