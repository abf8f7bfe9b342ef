#include <random>

#include "doctest.h"
#include "oilbench/metrics.hpp"

using namespace oilbench;

namespace {

RoundLoss quad1d(double c) {
  Mat x(1, 1), y(1, 1);
  x << 1;
  y << c;
  return RoundLoss(std::move(x), std::move(y), LossKind::Squared);
}

}  // namespace

TEST_CASE("hindsight on two 1-d quadratics") {
  std::vector<RoundLoss> losses{quad1d(0.0), quad1d(2.0)};
  auto [pt, val] = hindsight(losses, Domain::unconstrained(), {});
  CHECK(pt[0] == doctest::Approx(1.0));
  CHECK(val == doctest::Approx(1.0));
  CHECK_THROWS_AS(hindsight({}, Domain::unconstrained(), {}), std::invalid_argument);

  // Constrained: same stream, ball of radius 0.5 around 0.
  auto [cpt, cval] = hindsight(losses, Domain::ball(Vec::Zero(1), 0.5), {});
  CHECK(cpt[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(cval == doctest::Approx(0.5 * 0.25 + 0.5 * 2.25).epsilon(1e-6));
}

TEST_CASE("checkpoint spacing") {
  auto cps = regret_checkpoints(10);
  CHECK(cps.size() == 10);
  CHECK(cps.front() == 1);
  CHECK(cps.back() == 10);

  cps = regret_checkpoints(250);
  CHECK(cps.size() == 250);

  cps = regret_checkpoints(10000);
  CHECK(cps.size() <= 50);
  CHECK(cps.front() == 1);
  CHECK(cps.back() == 10000);
  for (std::size_t i = 1; i < cps.size(); ++i) CHECK(cps[i] > cps[i - 1]);
}

TEST_CASE("regret ledger on a hand-checked stream") {
  // Player sits at 0; l_1 targets 0, l_2 targets 2.
  std::vector<RoundLoss> losses{quad1d(0.0), quad1d(2.0)};
  Vec w0 = Vec::Zero(1);
  std::vector<double> played{losses[0].value(w0), losses[1].value(w0)};
  CHECK(played[0] == doctest::Approx(0.0));
  CHECK(played[1] == doctest::Approx(2.0));
  auto led = regret(played, losses, Domain::unconstrained(), {});
  REQUIRE(led.cumulative_regret.size() == 2);
  CHECK(led.cumulative_regret[0] == doctest::Approx(0.0));
  CHECK(led.cumulative_regret[1] == doctest::Approx(1.0));
  CHECK(led.avg_cumulative_loss[1] == doctest::Approx(1.0));
  CHECK(led.hindsight_point[0] == doctest::Approx(1.0));
  CHECK(led.hindsight_value == doctest::Approx(1.0));
  CHECK_THROWS_AS(regret({1.0}, losses, Domain::unconstrained(), {}),
                  std::invalid_argument);
}

TEST_CASE("interpolation error") {
  std::vector<RoundLoss> losses{quad1d(0.0), quad1d(2.0)};
  auto dom = Domain::unconstrained();
  Vec hp(1);
  hp << 1.0;
  CHECK(interpolation_error(losses[0], hp, dom, {}) == doctest::Approx(0.5));
  CHECK(interpolation_error(losses[1], hp, dom, {}) == doctest::Approx(0.5));
  // Realizable stream: zero error at the shared minimizer.
  Vec z = Vec::Zero(1);
  CHECK(interpolation_error(quad1d(0.0), z, dom, {}) == doctest::Approx(0.0));
}

TEST_CASE("adagrad probe example and factor") {
  auto probe = adagrad_inequality_probe({3.0, 4.0});
  CHECK(probe.lhs == doctest::Approx(6.2));
  CHECK(probe.rhs2x == doctest::Approx(10.0));
  CHECK(probe.lhs <= probe.rhs2x);
  CHECK(probe.ratio == doctest::Approx(1.24));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 5.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> gs(50);
    for (auto& g : gs) g = unif(rng);
    auto p = adagrad_inequality_probe(gs);  // throws if the factor-2 bound fails
    CHECK(p.ratio <= 2.0 + 1e-12);
  }
  CHECK(adagrad_inequality_probe({0.0, 0.0}).lhs == 0.0);
  CHECK_THROWS_AS(adagrad_inequality_probe({-1.0}), std::invalid_argument);
}

TEST_CASE("quadratic inequality: x^2 <= a(x+b) implies x <= a + sqrt(ab)") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int rep = 0; rep < 10000; ++rep) {
    double a = unif(rng), b = unif(rng);
    // Largest x satisfying the hypothesis: the upper root.
    double x = (a + std::sqrt(a * a + 4 * a * b)) / 2;
    CHECK(x * x <= a * (x + b) + 1e-9);
    CHECK(x <= a + std::sqrt(a * b) + 1e-9);
  }
}

TEST_CASE("bound checkers: formulas") {
  BoundInputs in;
  in.regret_T = 1.0;
  in.T = 100;
  in.D = 2.0;
  in.L = 3.0;
  in.G = 1.5;
  in.alpha = 0.5;
  in.eps_sq_sum = 4.0;
  in.smooth = true;

  in.schedule = StepSchedule::Kind::Constant;
  auto rep = check_bound(Theorem::FtrlRegret, in);
  CHECK(rep.rhs == doctest::Approx(2 * 4 * 3 + (4 + 6) * 2.0));  // 44
  CHECK(rep.satisfied);

  in.schedule = StepSchedule::Kind::AdaptiveGradNorm;
  rep = check_bound(Theorem::AdaFtrlRegret, in);
  double c = 0.25 + 4.0;
  CHECK(rep.rhs == doctest::Approx(6 * c * c + std::sqrt(6.0) * c * 2.0));

  rep = check_bound(Theorem::AdaFtrlRegretNs, in);
  CHECK(rep.rhs == doctest::Approx(c * 1.5 * 10.0));

  in.schedule = StepSchedule::Kind::InverseSqrtT;
  rep = check_bound(Theorem::FtrlRegretNs, in);
  CHECK(rep.rhs == doctest::Approx(5.0 * (2.25 * 0.5 + 4.0 / 0.5)));

  in.strongly_convex = true;
  in.mu = 0.25;
  rep = check_bound(Theorem::FtlRegretSc, in);
  CHECK(rep.rhs == doctest::Approx(2.0 * 3.0 / 0.25 * (1 + std::log(100.0))));

  rep = check_bound(Theorem::FtlRegretScNs, in);
  CHECK(rep.rhs == doctest::Approx(2.25 / 0.5 * (1 + std::log(100.0))));

  in.gamma = 0.9;
  in.C = 0.5;
  rep = check_bound(Theorem::Ftl, in);
  CHECK(rep.rhs == doctest::Approx(5.0));

  in.grad_norms = {1.0, 2.0};
  in.sigmas = {1.0, 1.0};
  rep = check_bound(Theorem::FtrlMainL2, in);
  CHECK(rep.rhs == doctest::Approx(0.5 + 1.0 + 2.0 * 2.0));  // 5.5
}

TEST_CASE("bound checkers refuse when hypotheses are missing") {
  BoundInputs in;
  in.T = 10;
  in.smooth = true;
  in.schedule = StepSchedule::Kind::Constant;
  CHECK_THROWS_AS(check_bound(Theorem::FtrlRegret, in), HypothesisMismatch);  // D = inf

  in.D = 1.0;
  in.smooth = false;
  CHECK_THROWS_AS(check_bound(Theorem::FtrlRegret, in), HypothesisMismatch);

  in.smooth = true;
  in.schedule = StepSchedule::Kind::InverseSqrtT;
  CHECK_THROWS_AS(check_bound(Theorem::FtrlRegret, in), HypothesisMismatch);

  CHECK_THROWS_AS(check_bound(Theorem::FtlRegretSc, in), HypothesisMismatch);  // mu = 0
  CHECK_THROWS_AS(check_bound(Theorem::Ftl, in), HypothesisMismatch);          // gamma
  in.grad_norms = {1.0};
  in.sigmas = {1.0, 2.0};
  CHECK_THROWS_AS(check_bound(Theorem::FtrlMainL2, in), HypothesisMismatch);
}

TEST_CASE("thm1 constant at the zero policy") {
  Mdp mdp;
  mdp.expert = ExpertOracle::alternating(1);
  std::vector<Vec> iterates{Vec::Zero(mdp.policy_dim())};
  // Squared divergence from any one-hot target at the zero logits is 1/2.
  CHECK(thm1_constant(mdp, iterates, LossKind::Squared) == doctest::Approx(0.5));
  // Logistic: cross entropy of the uniform softmax: log 5.
  CHECK(thm1_constant(mdp, iterates, LossKind::Logistic) == doctest::Approx(std::log(5.0)));
  CHECK_THROWS_AS(thm1_constant(mdp, iterates, LossKind::Absolute), HypothesisMismatch);
}

TEST_CASE("bound report satisfaction flag") {
  BoundInputs in;
  in.T = 4;
  in.strongly_convex = true;
  in.mu = 1.0;
  in.G = 1.0;
  in.regret_T = 0.5;
  auto rep = check_bound(Theorem::FtlRegretScNs, in);
  CHECK(rep.satisfied);
  in.regret_T = 100.0;
  rep = check_bound(Theorem::FtlRegretScNs, in);
  CHECK_FALSE(rep.satisfied);
  CHECK(rep.lhs == doctest::Approx(100.0));
}
