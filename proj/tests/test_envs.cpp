#include <set>

#include "doctest.h"
#include "oilbench/envs.hpp"
#include "oilbench/optimizers.hpp"

using namespace oilbench;

TEST_CASE("transition geometry") {
  Mdp mdp;
  // Interior cell (3,3) = 24: all five actions give distinct next cells.
  int c = 3 * 7 + 3;
  std::set<int> nexts;
  for (int a = 0; a < kNumActions; ++a) nexts.insert(mdp.transition(c, a));
  CHECK(nexts.size() == 5);
  CHECK(mdp.transition(c, kUp) == c + 7);
  CHECK(mdp.transition(c, kDown) == c - 7);
  CHECK(mdp.transition(c, kLeft) == c - 1);
  CHECK(mdp.transition(c, kRight) == c + 1);
  CHECK(mdp.transition(c, kStay) == c);

  // Corners clamp.
  CHECK(mdp.transition(0, kDown) == 0);
  CHECK(mdp.transition(0, kLeft) == 0);
  CHECK(mdp.transition(48, kUp) == 48);
  CHECK(mdp.transition(48, kRight) == 48);
  CHECK_THROWS_AS(mdp.transition(0, 9), std::invalid_argument);
}

TEST_CASE("greedy action ties break to the lowest id") {
  Mdp mdp;
  Vec w = Vec::Zero(mdp.policy_dim());
  CHECK(mdp.greedy_action(w, 0) == kUp);
  // Raise logit of action 3 at cell 10.
  w[10 * kNumActions + kRight] = 1.0;
  CHECK(mdp.greedy_action(w, 10) == kRight);
  CHECK(mdp.greedy_action(w, 11) == kUp);
}

TEST_CASE("alternating expert draws from the round's action pair") {
  Mdp mdp;
  mdp.expert = ExpertOracle::alternating(7);
  for (int round = 1; round <= 6; ++round) {
    bool odd = round % 2 == 1;
    for (int cell = 0; cell < mdp.n_states(); ++cell) {
      int a = mdp.expert_action(cell, round);
      if (odd)
        CHECK((a == kUp || a == kRight));
      else
        CHECK((a == kDown || a == kLeft));
    }
  }
  // Coin flips depend on the seed.
  Mdp other = mdp;
  other.expert = ExpertOracle::alternating(8);
  int diff = 0;
  for (int cell = 0; cell < mdp.n_states(); ++cell)
    diff += mdp.expert_action(cell, 1) != other.expert_action(cell, 1);
  CHECK(diff > 0);
}

TEST_CASE("rollout shape, rewards, and determinism") {
  Mdp mdp;
  mdp.expert = ExpertOracle::alternating(3);
  Vec w = Vec::Zero(mdp.policy_dim());
  auto b1 = rollout(mdp, w, 1, 4, 99, Behavior::Agent);
  CHECK(b1.transitions.size() == 4 * 5);
  for (const auto& tr : b1.transitions) {
    CHECK(tr.reward == ((tr.agent_action == tr.expert_action) ? 1.0 : 0.0));
    CHECK(tr.cell >= 0);
    CHECK(tr.cell < mdp.n_states());
  }
  auto b2 = rollout(mdp, w, 1, 4, 99, Behavior::Agent);
  for (std::size_t i = 0; i < b1.transitions.size(); ++i) {
    CHECK(b1.transitions[i].cell == b2.transitions[i].cell);
    CHECK(b1.transitions[i].agent_action == b2.transitions[i].agent_action);
  }
  auto b3 = rollout(mdp, w, 2, 4, 99, Behavior::Agent);
  bool same_starts = true;
  for (int e = 0; e < 4; ++e)
    same_starts &= b1.transitions[std::size_t(e) * 5].cell == b3.transitions[std::size_t(e) * 5].cell;
  CHECK_FALSE(same_starts);  // round folds into the rng stream
  CHECK_THROWS_AS(rollout(mdp, Vec::Zero(3), 1, 1, 0, Behavior::Agent),
                  std::invalid_argument);
}

TEST_CASE("expert behavior follows expert actions") {
  Mdp mdp;
  mdp.expert = ExpertOracle::stationary(std::vector<int>(49, kUp));
  Vec w = Vec::Zero(mdp.policy_dim());
  auto b = rollout(mdp, w, 1, 2, 5, Behavior::Expert);
  for (std::size_t i = 0; i < b.transitions.size(); ++i) {
    if (i % 5 == 4) continue;  // episode boundary
    CHECK(b.transitions[i + 1].cell == mdp.transition(b.transitions[i].cell, kUp));
  }
}

TEST_CASE("round loss from a batch is one-hot on both sides") {
  Mdp mdp;
  Vec w = Vec::Zero(mdp.policy_dim());
  auto b = rollout(mdp, w, 1, 2, 11, Behavior::Agent);
  auto l = build_round_loss(b, LossKind::Logistic, mdp);
  CHECK(l.n_samples() == 10);
  CHECK(l.d_feature() == 49);
  CHECK(l.d_output() == 5);
  CHECK(l.dim() == mdp.policy_dim());
  for (Eigen::Index i = 0; i < l.n_samples(); ++i) {
    CHECK(l.features().row(i).sum() == 1.0);
    CHECK(l.targets().row(i).sum() == 1.0);
  }
  CHECK(l.value(w) == doctest::Approx(std::log(5.0)));
}

TEST_CASE("occupancy is a probability vector and matches monte carlo") {
  Mdp mdp;
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  Vec w(mdp.policy_dim());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = normal(rng);
  for (int tau = 0; tau <= mdp.horizon; ++tau) {
    Vec p = occupancy(mdp, w, tau);
    CHECK(p.sum() == doctest::Approx(1.0));
    CHECK(p.minCoeff() >= 0.0);
  }
  // Monte carlo oracle at tau = 3: follow the greedy policy from uniform starts.
  Vec p3 = occupancy(mdp, w, 3);
  Vec counts = Vec::Zero(mdp.n_states());
  std::mt19937_64 sim(1234);
  std::uniform_int_distribution<int> start(0, mdp.n_states() - 1);
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    int c = start(sim);
    for (int step = 0; step < 3; ++step) c = mdp.transition(c, mdp.greedy_action(w, c));
    counts[c] += 1.0;
  }
  counts /= double(N);
  CHECK((counts - p3).lpNorm<Eigen::Infinity>() < 0.01);
}

TEST_CASE("exact round loss equals the occupancy-weighted divergence") {
  Mdp mdp;
  mdp.expert = ExpertOracle::stationary(std::vector<int>(49, kRight));
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal;
  Vec w(mdp.policy_dim());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = normal(rng);
  auto l = build_exact_round_loss(mdp, w, 1, LossKind::Squared);
  CHECK(l.sample_weights().sum() == doctest::Approx(1.0));

  // Independent oracle: average over steps of sum_s p_tau(s) * 0.5||W_col - y||^2.
  Eigen::Map<const Mat> W(w.data(), kNumActions, mdp.n_states());
  double expect = 0.0;
  for (int tau = 0; tau < mdp.horizon; ++tau) {
    Vec p = occupancy(mdp, w, tau);
    for (int s = 0; s < mdp.n_states(); ++s) {
      Vec y = Vec::Zero(kNumActions);
      y[kRight] = 1.0;
      expect += p[s] / mdp.horizon * 0.5 * (W.col(s) - y).squaredNorm();
    }
  }
  CHECK(l.value(w) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ftl on the exact stationary loss interpolates after round one") {
  Mdp mdp;
  mdp.expert = ExpertOracle::stationary(std::vector<int>(49, kUp));
  SolverConfig cfg;
  auto dom = Domain::unconstrained();
  auto s = OptimizerState::init(Algo::FTL, mdp.policy_dim(), StepSchedule::inverse_sqrt_t(1.0));
  for (int t = 1; t <= 4; ++t) {
    auto l = build_exact_round_loss(mdp, s.w, t, LossKind::Squared);
    double before = l.value(s.w);
    ftl_step(s, l, dom, cfg);
    if (t >= 2) CHECK(before <= 1e-10);  // previous solve already fits every cell
  }
}

TEST_CASE("toy stream shapes and adversarial sign flip") {
  ToyStreamConfig cfg;
  cfg.seed = 5;
  Mat Wstar = cfg.target_matrix();
  CHECK(Wstar.rows() == 3);
  CHECK(Wstar.cols() == 10);
  CHECK(cfg.target_matrix() == Wstar);  // deterministic in the seed

  auto l1 = toy_round(cfg, 1);
  CHECK(l1.n_samples() == 1);
  CHECK(l1.dim() == 30);
  // Targets realizable: W* achieves zero loss in the simple regime.
  Mat Wt = Wstar;  // d_output x d_feature, column-major flatten
  Vec wflat = Eigen::Map<const Vec>(Wt.data(), Wt.size());
  CHECK(l1.value(wflat) <= 1e-18);

  cfg.regime = ToyStreamConfig::Regime::Adversarial;
  auto l2 = toy_round(cfg, 2);
  Vec x2 = l2.features().row(0).transpose();
  Vec y2 = l2.targets().row(0).transpose();
  CHECK((y2 + Wstar * x2).norm() <= 1e-12);  // sign flipped on even rounds

  // Odd adversarial rounds match the simple regime.
  auto l3 = toy_round(cfg, 3);
  Vec x3 = l3.features().row(0).transpose();
  Vec y3 = l3.targets().row(0).transpose();
  CHECK((y3 - Wstar * x3).norm() <= 1e-12);

  cfg.loss_kind = LossKind::Logistic;
  auto lc = toy_round(cfg, 1);
  CHECK(lc.targets().row(0).sum() == 1.0);
  CHECK(lc.targets().row(0).maxCoeff() == 1.0);
  CHECK_THROWS_AS(toy_round(cfg, 0), std::invalid_argument);
}
