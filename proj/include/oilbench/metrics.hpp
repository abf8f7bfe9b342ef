// Regret accounting and numeric verification of the regret bounds.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "oilbench/core.hpp"
#include "oilbench/envs.hpp"
#include "oilbench/optimizers.hpp"
#include "oilbench/solvers.hpp"

namespace oilbench {

struct RegretLedger {
  std::vector<double> per_round_loss;
  std::vector<double> per_round_reward;
  double hindsight_value = 0.0;
  Vec hindsight_point;
  std::vector<double> cumulative_regret;   // at checkpoint rounds
  std::vector<int> checkpoint_rounds;
  std::vector<double> avg_cumulative_loss;
  std::vector<double> interpolation_errors;  // eps_t^2
  std::vector<bool> solver_flags;
};

// min_w over the domain of the summed losses; warm-startable.
inline std::pair<Vec, double> hindsight(const std::vector<RoundLoss>& losses,
                                        const Domain& dom, SolverConfig cfg,
                                        const Vec* warm_start = nullptr) {
  if (losses.empty()) throw std::invalid_argument("hindsight needs >= 1 loss");
  cfg.grad_tol = std::min(cfg.grad_tol, 1e-10);
  CompositeObjective f;
  for (const auto& l : losses) f.add_loss(l);
  if (auto w = quadratic_closed_form(f, dom, losses.front().dim()))
    return {*w, f.value(*w)};
  Vec start = warm_start ? *warm_start : Vec::Zero(losses.front().dim());
  SolveReport rep = solve(f, dom, std::move(start), cfg);
  return {rep.solution, rep.objective_value};
}

// Checkpoint spacing: every round up to 250, else 50 log-spaced rounds.
inline std::vector<int> regret_checkpoints(int rounds) {
  std::vector<int> cps;
  if (rounds <= 250) {
    for (int t = 1; t <= rounds; ++t) cps.push_back(t);
    return cps;
  }
  double lo = 0.0, hi = std::log(double(rounds));
  for (int k = 0; k < 50; ++k) {
    int t = int(std::lround(std::exp(lo + (hi - lo) * k / 49.0)));
    t = std::clamp(t, 1, rounds);
    if (cps.empty() || cps.back() != t) cps.push_back(t);
  }
  if (cps.back() != rounds) cps.push_back(rounds);
  return cps;
}

// Prefix regrets R(T) = sum_{t<=T} l_t(w_t) - min_w sum_{t<=T} l_t(w) at the
// checkpoint rounds; hindsight re-solves warm-start at the previous point.
inline RegretLedger regret(const std::vector<double>& per_round_loss,
                           const std::vector<RoundLoss>& losses, const Domain& dom,
                           const SolverConfig& cfg) {
  if (per_round_loss.size() != losses.size())
    throw std::invalid_argument("loss sequences misaligned");
  RegretLedger led;
  led.per_round_loss = per_round_loss;
  const int T = int(losses.size());
  led.checkpoint_rounds = regret_checkpoints(T);
  double cum = 0.0;
  int next_cp = 0;
  Vec warm = Vec::Zero(losses.front().dim());
  std::vector<RoundLoss> prefix;
  prefix.reserve(losses.size());
  for (int t = 1; t <= T; ++t) {
    cum += per_round_loss[std::size_t(t - 1)];
    led.avg_cumulative_loss.push_back(cum / t);
    prefix.push_back(losses[std::size_t(t - 1)]);
    if (next_cp < int(led.checkpoint_rounds.size()) &&
        led.checkpoint_rounds[std::size_t(next_cp)] == t) {
      auto [pt, val] = hindsight(prefix, dom, cfg, &warm);
      warm = pt;
      led.cumulative_regret.push_back(cum - val);
      if (t == T) {
        led.hindsight_point = pt;
        led.hindsight_value = val;
      }
      ++next_cp;
    }
  }
  return led;
}

// eps_t^2 = max(0, l_t(hindsight point) - min_w l_t(w)).
inline double interpolation_error(const RoundLoss& l, const Vec& hindsight_point,
                                  const Domain& dom, const SolverConfig& cfg) {
  auto [wt, min_val] = exact_min(l, dom, cfg);
  return std::max(0.0, l.value(hindsight_point) - min_val);
}

enum class Theorem {
  Ftl,               // R(T) <= C/(1-gamma)
  FtrlRegret,        // 2 D^2 L + (D^2 + 2L) sqrt(sum eps^2)
  AdaFtrlRegret,     // 2L (a/2 + D^2/2a)^2 + sqrt(2L)(a/2 + D^2/2a) sqrt(sum eps^2)
  FtrlRegretNs,      // (sqrt(T)/2) [G^2 a + D^2/a]
  AdaFtrlRegretNs,   // (a/2 + D^2/2a) G sqrt(T)
  FtlRegretSc,       // (D L / mu)(1 + log T)
  FtlRegretScNs,     // (G^2 / 2 mu)(1 + log T)
  FtrlMainL2,        // sum 1/(2 sum(sigma_i+mu_i)) g_t^2 + (D^2/2) sum sigma_t
};

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::Ftl: return "thm_ftl";
    case Theorem::FtrlRegret: return "thm_ftrl_regret";
    case Theorem::AdaFtrlRegret: return "thm_adaftrl_regret";
    case Theorem::FtrlRegretNs: return "thm_ftrl_regret_ns";
    case Theorem::AdaFtrlRegretNs: return "thm_adaftrl_regret_ns";
    case Theorem::FtlRegretSc: return "thm_ftl_regret_sc";
    case Theorem::FtlRegretScNs: return "thm_ftl_regret_sc_ns";
    case Theorem::FtrlMainL2: return "lemma_ftrl_main_l2";
  }
  return "?";
}

struct BoundReport {
  std::string theorem;
  double lhs = 0.0;  // measured regret
  double rhs = 0.0;
  std::map<std::string, double> constants;
  bool satisfied = false;
  std::string note;

  void finalize() { satisfied = lhs <= rhs * (1 + 1e-9); }
};

// Inputs a checker may need; the run supplies what its hypotheses require.
struct BoundInputs {
  double regret_T = 0.0;
  int T = 0;
  double D = kInf;                 // domain diameter
  double L = 0.0;                  // max per-round smoothness
  double mu = 0.0;                 // min per-round strong convexity
  double G = 0.0;                  // gradient-norm bound over the domain
  double eps_sq_sum = 0.0;         // sum eps_t^2
  double alpha = 0.0;              // schedule alpha
  double gamma = 0.0;              // discount (Thm 1)
  double C = 0.0;                  // Thm 1 constant (measured via occupancy)
  std::vector<double> grad_norms;  // ||grad l_t(w_t)|| per round
  std::vector<double> sigmas;      // sigma_t per round
  std::vector<double> mus;         // mu_t per round
  StepSchedule::Kind schedule = StepSchedule::Kind::Constant;
  bool strongly_convex = false;
  bool smooth = false;
};

struct HypothesisMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline BoundReport check_bound(Theorem thm, const BoundInputs& in) {
  BoundReport rep;
  rep.theorem = to_string(thm);
  rep.lhs = in.regret_T;
  auto need = [&](bool ok, const char* what) {
    if (!ok) throw HypothesisMismatch(std::string(to_string(thm)) + ": " + what);
  };
  auto bounded = [&] { need(std::isfinite(in.D), "requires a bounded domain"); };
  switch (thm) {
    case Theorem::Ftl: {
      need(in.gamma > 0 && in.gamma < 1, "requires gamma in (0,1)");
      rep.rhs = in.C / (1.0 - in.gamma);
      rep.constants = {{"C", in.C}, {"gamma", in.gamma}};
      rep.note = "max over (tau,t) truncated at the episode horizon";
      break;
    }
    case Theorem::FtrlRegret: {
      bounded();
      need(in.smooth, "requires smooth losses");
      need(in.schedule == StepSchedule::Kind::Constant, "requires the theorem2 schedule");
      rep.rhs = 2 * in.D * in.D * in.L +
                (in.D * in.D + 2 * in.L) * std::sqrt(in.eps_sq_sum);
      rep.constants = {{"D", in.D}, {"L", in.L}, {"eps_sq_sum", in.eps_sq_sum}};
      break;
    }
    case Theorem::AdaFtrlRegret: {
      bounded();
      need(in.smooth, "requires smooth losses");
      need(in.schedule == StepSchedule::Kind::AdaptiveGradNorm,
           "requires the adaptive schedule");
      double c = in.alpha / 2 + in.D * in.D / (2 * in.alpha);
      rep.rhs = 2 * in.L * c * c + std::sqrt(2 * in.L) * c * std::sqrt(in.eps_sq_sum);
      rep.constants = {{"D", in.D}, {"L", in.L}, {"alpha", in.alpha},
                       {"eps_sq_sum", in.eps_sq_sum}};
      break;
    }
    case Theorem::FtrlRegretNs: {
      bounded();
      need(in.schedule == StepSchedule::Kind::InverseSqrtT, "requires eta_t = alpha/sqrt(t)");
      rep.rhs = std::sqrt(double(in.T)) / 2 *
                (in.G * in.G * in.alpha + in.D * in.D / in.alpha);
      rep.constants = {{"D", in.D}, {"G", in.G}, {"alpha", in.alpha}, {"T", double(in.T)}};
      break;
    }
    case Theorem::AdaFtrlRegretNs: {
      bounded();
      need(in.schedule == StepSchedule::Kind::AdaptiveGradNorm,
           "requires the adaptive schedule");
      rep.rhs = (in.alpha / 2 + in.D * in.D / (2 * in.alpha)) * in.G *
                std::sqrt(double(in.T));
      rep.constants = {{"D", in.D}, {"G", in.G}, {"alpha", in.alpha}, {"T", double(in.T)}};
      break;
    }
    case Theorem::FtlRegretSc: {
      bounded();
      need(in.strongly_convex && in.mu > 0, "requires strong convexity");
      need(in.smooth, "requires smooth losses");
      rep.rhs = in.D * in.L / in.mu * (1 + std::log(double(in.T)));
      rep.constants = {{"D", in.D}, {"L", in.L}, {"mu", in.mu}, {"T", double(in.T)}};
      break;
    }
    case Theorem::FtlRegretScNs: {
      need(in.strongly_convex && in.mu > 0, "requires strong convexity");
      rep.rhs = in.G * in.G / (2 * in.mu) * (1 + std::log(double(in.T)));
      rep.constants = {{"G", in.G}, {"mu", in.mu}, {"T", double(in.T)}};
      break;
    }
    case Theorem::FtrlMainL2: {
      bounded();
      need(in.grad_norms.size() == in.sigmas.size() &&
               (in.mus.empty() || in.mus.size() == in.sigmas.size()),
           "per-round sequences misaligned");
      double acc = 0.0, denom = 0.0, sigma_sum = 0.0;
      for (std::size_t t = 0; t < in.grad_norms.size(); ++t) {
        denom += in.sigmas[t] + (in.mus.empty() ? 0.0 : in.mus[t]);
        if (denom > 0) acc += in.grad_norms[t] * in.grad_norms[t] / (2 * denom);
        sigma_sum += in.sigmas[t];
      }
      rep.rhs = acc + in.D * in.D / 2 * sigma_sum;
      rep.constants = {{"D", in.D}, {"sigma_sum", sigma_sum}};
      break;
    }
  }
  rep.finalize();
  return rep;
}

// Thm 1 constant C: max over (tau, t) of the expected divergence under the
// exact occupancy of policy pi_t; truncated at the episode horizon.
inline double thm1_constant(const Mdp& mdp, const std::vector<Vec>& iterates,
                            LossKind kind) {
  double C = 0.0;
  for (std::size_t t = 0; t < iterates.size(); ++t) {
    int round = int(t) + 1;
    for (int tau = 0; tau < mdp.horizon; ++tau) {
      Vec p = occupancy(mdp, iterates[t], tau);
      Eigen::Map<const Mat> W(iterates[t].data(), kNumActions, mdp.n_states());
      double ed = 0.0;
      for (int s = 0; s < mdp.n_states(); ++s) {
        if (p[s] == 0) continue;
        Vec pred = W.col(s);
        Vec y = Vec::Zero(kNumActions);
        y[mdp.expert_action(s, round)] = 1.0;
        double d;
        if (kind == LossKind::Squared) {
          d = 0.5 * (pred - y).squaredNorm();
        } else if (kind == LossKind::Logistic) {
          double zmax = pred.maxCoeff();
          d = zmax + std::log((pred.array() - zmax).exp().sum()) - y.dot(pred);
        } else {
          throw HypothesisMismatch("thm1 divergence needs squared or logistic losses");
        }
        ed += p[s] * d;
      }
      C = std::max(C, ed);
    }
  }
  return C;
}

struct AdaGradProbe {
  double lhs = 0.0;    // sum g_t^2 / sqrt(sum_{i<=t} g_i^2)
  double rhs2x = 0.0;  // 2 sqrt(sum g_t^2)
  double ratio = 0.0;  // lhs / sqrt(sum g_t^2)
};

inline AdaGradProbe adagrad_inequality_probe(const std::vector<double>& grad_norms) {
  AdaGradProbe probe;
  double cum = 0.0, total = 0.0;
  for (double g : grad_norms) {
    if (g < 0) throw std::invalid_argument("gradient norms must be nonnegative");
    total += g * g;
  }
  if (total == 0.0) return probe;
  for (double g : grad_norms) {
    cum += g * g;
    probe.lhs += g * g / std::sqrt(cum);
  }
  probe.rhs2x = 2 * std::sqrt(total);
  probe.ratio = probe.lhs / std::sqrt(total);
  if (probe.lhs > probe.rhs2x * (1 + 1e-12))
    throw std::runtime_error("adagrad factor-2 inequality violated");
  return probe;
}

}  // namespace oilbench
