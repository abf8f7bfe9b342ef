// Desk-scale problem generators: the adversarial gridworld and synthetic
// online-regression streams.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "oilbench/core.hpp"

namespace oilbench {

// Actions, encoded 0..4.
enum GridAction : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kStay = 4 };
inline constexpr int kNumActions = 5;

// Deterministic splittable hash for per-(cell, round) expert coin flips and
// reproducible stream draws.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct ExpertOracle {
  enum class Kind { Alternating, Stationary, Policy };

  Kind kind = Kind::Alternating;
  std::uint64_t seed = 0;             // alternating coin flips
  bool random_choice = true;          // alternating: random vs per-cell parity pick
  std::vector<int> cell_action;      // stationary: cell -> action
  Vec weights;                        // policy: greedy over logits

  static ExpertOracle alternating(std::uint64_t seed, bool random_choice = true) {
    ExpertOracle e;
    e.kind = Kind::Alternating;
    e.seed = seed;
    e.random_choice = random_choice;
    return e;
  }
  static ExpertOracle stationary(std::vector<int> actions) {
    ExpertOracle e;
    e.kind = Kind::Stationary;
    e.cell_action = std::move(actions);
    return e;
  }
  static ExpertOracle policy(Vec w) {
    ExpertOracle e;
    e.kind = Kind::Policy;
    e.weights = std::move(w);
    return e;
  }
};

struct Mdp {
  int width = 7;
  int height = 7;
  int horizon = 5;
  double gamma = 0.9;
  ExpertOracle expert = ExpertOracle::alternating(0);

  int n_states() const { return width * height; }
  int policy_dim() const { return kNumActions * n_states(); }

  // Moving off-grid leaves the state unchanged.
  int transition(int cell, int action) const {
    int x = cell % width, y = cell / width;
    switch (action) {
      case kUp: y = std::min(y + 1, height - 1); break;
      case kDown: y = std::max(y - 1, 0); break;
      case kLeft: x = std::max(x - 1, 0); break;
      case kRight: x = std::min(x + 1, width - 1); break;
      case kStay: break;
      default: throw std::invalid_argument("bad action");
    }
    return y * width + x;
  }

  // Greedy action of the linear softmax policy; ties break to the lowest id.
  int greedy_action(const Vec& w, int cell) const {
    Eigen::Map<const Mat> W(w.data(), kNumActions, n_states());
    int best = 0;
    double best_v = W(0, cell);
    for (int a = 1; a < kNumActions; ++a)
      if (W(a, cell) > best_v) {
        best_v = W(a, cell);
        best = a;
      }
    return best;
  }

  int expert_action(int cell, int round) const {
    switch (expert.kind) {
      case ExpertOracle::Kind::Alternating: {
        bool odd = round % 2 == 1;
        int a0 = odd ? kUp : kDown;
        int a1 = odd ? kRight : kLeft;
        if (!expert.random_choice) return (cell % 2 == 0) ? a0 : a1;
        std::uint64_t h = mix64(expert.seed ^ mix64(std::uint64_t(cell) * 1315423911ULL ^
                                                    std::uint64_t(round)));
        return (h & 1) ? a1 : a0;
      }
      case ExpertOracle::Kind::Stationary:
        return expert.cell_action.at(std::size_t(cell));
      case ExpertOracle::Kind::Policy:
        return greedy_action(expert.weights, cell);
    }
    throw std::logic_error("unknown expert kind");
  }
};

enum class Behavior { Agent, Expert };

struct EpisodeBatch {
  struct Transition {
    int cell;
    int agent_action;
    int expert_action;
    double reward;  // 1 iff agent_action == expert_action
  };
  int round = 0;
  Behavior behavior = Behavior::Agent;
  std::vector<Transition> transitions;

  double total_reward() const {
    double r = 0;
    for (const auto& t : transitions) r += t.reward;
    return r;
  }
};

inline EpisodeBatch rollout(const Mdp& mdp, const Vec& policy_weights, int round,
                            int episodes, std::uint64_t seed, Behavior behavior) {
  if (policy_weights.size() != mdp.policy_dim())
    throw std::invalid_argument("policy weight dim mismatch");
  EpisodeBatch batch;
  batch.round = round;
  batch.behavior = behavior;
  batch.transitions.reserve(std::size_t(episodes) * std::size_t(mdp.horizon));
  std::mt19937_64 rng(mix64(seed ^ mix64(std::uint64_t(round))));
  std::uniform_int_distribution<int> start(0, mdp.n_states() - 1);
  for (int e = 0; e < episodes; ++e) {
    int cell = start(rng);
    for (int step = 0; step < mdp.horizon; ++step) {
      int agent_a = mdp.greedy_action(policy_weights, cell);
      int expert_a = mdp.expert_action(cell, round);
      double reward = agent_a == expert_a ? 1.0 : 0.0;
      batch.transitions.push_back({cell, agent_a, expert_a, reward});
      cell = mdp.transition(cell, behavior == Behavior::Agent ? agent_a : expert_a);
    }
  }
  return batch;
}

// Empirical round loss over the batch: one-hot state features, one-hot expert
// action targets.
inline RoundLoss build_round_loss(const EpisodeBatch& batch, LossKind kind,
                                  const Mdp& mdp) {
  if (batch.transitions.empty()) throw std::invalid_argument("empty batch");
  const Eigen::Index n = Eigen::Index(batch.transitions.size());
  Mat X = Mat::Zero(n, mdp.n_states());
  Mat Y = Mat::Zero(n, kNumActions);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& tr = batch.transitions[std::size_t(i)];
    X(i, tr.cell) = 1.0;
    Y(i, tr.expert_action) = 1.0;
  }
  return RoundLoss(std::move(X), std::move(Y), kind);
}

// Exact per-cell state distribution at step tau under the greedy policy of
// policy_weights, from the uniform start.
inline Vec occupancy(const Mdp& mdp, const Vec& policy_weights, int tau) {
  if (tau > mdp.horizon) throw std::invalid_argument("tau exceeds horizon");
  Vec p = Vec::Constant(mdp.n_states(), 1.0 / double(mdp.n_states()));
  for (int step = 0; step < tau; ++step) {
    Vec next = Vec::Zero(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) {
      if (p[s] == 0) continue;
      next[mdp.transition(s, mdp.greedy_action(policy_weights, s))] += p[s];
    }
    p = std::move(next);
  }
  return p;
}

// Exact round loss E_{s ~ d^{pi_t}} D(pi(.|s), pi_e(.|s)) for the tabular
// chain: every cell appears once per step tau < horizon, weighted by its
// occupancy under the current policy (steps averaged uniformly).
inline RoundLoss build_exact_round_loss(const Mdp& mdp, const Vec& policy_weights,
                                        int round, LossKind kind) {
  const int S = mdp.n_states();
  const int H = mdp.horizon;
  Mat X = Mat::Zero(Eigen::Index(S) * H, S);
  Mat Y = Mat::Zero(Eigen::Index(S) * H, kNumActions);
  Vec wts(Eigen::Index(S) * H);
  for (int tau = 0; tau < H; ++tau) {
    Vec p = occupancy(mdp, policy_weights, tau);
    for (int s = 0; s < S; ++s) {
      Eigen::Index i = Eigen::Index(tau) * S + s;
      X(i, s) = 1.0;
      Y(i, mdp.expert_action(s, round)) = 1.0;
      wts[i] = p[s] / double(H);
    }
  }
  RoundLoss l(std::move(X), std::move(Y), kind);
  l.set_sample_weights(std::move(wts));
  return l;
}

struct ToyStreamConfig {
  int d_feature = 10;
  int d_output = 3;
  enum class Regime { Simple, Adversarial } regime = Regime::Simple;
  LossKind loss_kind = LossKind::Squared;
  int samples_per_round = 1;
  int rounds = 250;
  std::uint64_t seed = 0;

  // Target-generating matrix W*, fixed across the stream.
  Mat target_matrix() const {
    std::mt19937_64 rng(mix64(seed ^ 0x57a6u));
    std::normal_distribution<double> normal(0.0, 1.0);
    Mat W(d_output, d_feature);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = normal(rng);
    return W;
  }
};

// Round t of the stream: Gaussian features; targets (or target classes) from
// S_t * W* * x with S_t = +1 in the simple regime and (-1)^(t+1) otherwise.
inline RoundLoss toy_round(const ToyStreamConfig& cfg, int round) {
  if (round < 1) throw std::invalid_argument("rounds start at 1");
  Mat Wstar = cfg.target_matrix();
  double sign = cfg.regime == ToyStreamConfig::Regime::Adversarial && round % 2 == 0
                    ? -1.0
                    : 1.0;
  std::mt19937_64 rng(mix64(cfg.seed ^ mix64(std::uint64_t(round) * 0x9e37u)));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = cfg.samples_per_round;
  Mat X(n, cfg.d_feature);
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = normal(rng);
  Mat Y(n, cfg.d_output);
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    Vec z = sign * (Wstar * X.row(i).transpose());
    if (cfg.loss_kind == LossKind::Logistic) {
      Eigen::Index argmax;
      z.maxCoeff(&argmax);
      Y.row(i).setZero();
      Y(i, argmax) = 1.0;
    } else {
      Y.row(i) = z.transpose();
    }
  }
  return RoundLoss(std::move(X), std::move(Y), cfg.loss_kind);
}

}  // namespace oilbench
