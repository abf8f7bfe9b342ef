// Property suites behind `oilbench verify`: reformulation equivalence,
// theorem bound conformance on hypothesis-matching streams, interpolation
// checks, and the standalone inequality probes.
#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oilbench/harness.hpp"
#include "oilbench/metrics.hpp"

namespace oilbench {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  std::map<std::string, double> data;  // enough to replay the failing case
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

namespace verify_detail {

inline RoundLoss random_round(std::mt19937_64& rng, int d, int n, LossKind kind,
                              const Mat& Wstar, double noise) {
  std::normal_distribution<double> normal;
  Mat X(n, d), Y(n, Wstar.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = normal(rng);
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    Vec z = Wstar * X.row(i).transpose();
    for (Eigen::Index c = 0; c < z.size(); ++c) z[c] += noise * normal(rng);
    Y.row(i) = z.transpose();
  }
  return RoundLoss(std::move(X), std::move(Y), kind);
}

struct StreamRun {
  std::vector<RoundLoss> losses;
  std::vector<Vec> iterates;      // w_t, t = 1..T
  std::vector<double> grad_norms;  // ||grad l_t(w_t)||
  std::vector<double> sigmas;
  double regret = 0.0;
  Vec hindsight_point;
};

// Play `algo` against a fixed loss stream over `dom` and measure R(T).
inline StreamRun play(std::vector<RoundLoss> losses, Algo algo, StepSchedule sched,
                      const Domain& dom, const SolverConfig& cfg) {
  StreamRun sr;
  sr.losses = std::move(losses);
  OptimizerState s = OptimizerState::init(algo, sr.losses.front().dim(), sched);
  double played = 0.0;
  for (const auto& l : sr.losses) {
    sr.iterates.push_back(s.w);
    sr.grad_norms.push_back(l.gradient(s.w).norm());
    played += l.value(s.w);
    step(s, l, dom, cfg);
    sr.sigmas.push_back(s.last_sigma);
  }
  auto [hp, hv] = hindsight(sr.losses, dom, cfg);
  sr.regret = played - hv;
  sr.hindsight_point = hp;
  return sr;
}

inline double sum_interp_sq(const StreamRun& sr, const Domain& dom,
                            const SolverConfig& cfg) {
  double acc = 0.0;
  for (const auto& l : sr.losses)
    acc += interpolation_error(l, sr.hindsight_point, dom, cfg);
  return acc;
}

// Gradient-norm bound for a squared loss over a ball centered at the origin:
// ||grad l(w)|| <= L * (radius + ||argmin l||).
inline double squared_grad_bound(const RoundLoss& l, double radius) {
  return l.measured_smoothness() * (radius + l.least_squares_min().norm());
}

}  // namespace verify_detail

// Criterion-style check: FTRL / Alt-FTRL / naive FTRL produce pairwise-equal
// iterates on strongly-convex quadratic streams.
inline SuiteReport verify_reformulation(std::uint64_t seed = 0, int streams = 50,
                                        int T = 20) {
  SuiteReport report;
  report.suite = "reformulation";
  auto dom = Domain::unconstrained();
  SolverConfig cfg;
  cfg.grad_tol = 1e-12;
  cfg.max_iters = 20000;
  std::mt19937_64 rng(mix64(seed ^ 0x5e0fULL));
  std::normal_distribution<double> normal;

  double worst = 0.0;
  double worst_stream = -1, worst_round = -1;
  for (int s = 0; s < streams; ++s) {
    int d = 1 + int(rng() % 5);
    auto a = OptimizerState::init(Algo::FTRL, d, StepSchedule::inverse_sqrt_t(1.0));
    auto b = OptimizerState::init(Algo::AltFTRL, d, StepSchedule::inverse_sqrt_t(1.0));
    auto c = OptimizerState::init(Algo::FTRLNaive, d, StepSchedule::inverse_sqrt_t(1.0));
    Mat Wstar(1, d);
    for (int j = 0; j < d; ++j) Wstar(0, j) = normal(rng);
    for (int t = 1; t <= T; ++t) {
      auto l = verify_detail::random_round(rng, d, d + 2, LossKind::Squared, Wstar, 0.3);
      ftrl_step(a, l, dom, cfg);
      alt_ftrl_step(b, l, dom, cfg);
      ftrl_naive_step(c, l, dom, cfg);
      double gap = std::max((a.w - c.w).lpNorm<Eigen::Infinity>(),
                            (b.w - c.w).lpNorm<Eigen::Infinity>());
      if (gap > worst) {
        worst = gap;
        worst_stream = s;
        worst_round = t;
      }
    }
  }
  CheckResult prop1;
  prop1.name = "prop1_pairwise_iterates";
  prop1.pass = worst <= 1e-8;
  prop1.data = {{"max_coord_gap", worst}, {"tolerance", 1e-8},
                {"stream", worst_stream}, {"round", worst_round},
                {"seed", double(seed)}};
  std::ostringstream os;
  os << "max per-coordinate gap " << worst << " over " << streams << " streams";
  prop1.detail = os.str();
  report.checks.push_back(prop1);

  // OGD recovery: FTRL over linearized losses with constant eta.
  double worst_ogd = 0.0;
  for (int sd = 0; sd < 20; ++sd) {
    std::mt19937_64 r2(mix64(seed ^ (0x09dULL + std::uint64_t(sd))));
    int d = 3;
    Mat Wstar(1, d);
    for (int j = 0; j < d; ++j) Wstar(0, j) = normal(r2);
    auto ogd = OptimizerState::init(Algo::OGD, d, StepSchedule::constant(0.1));
    auto ftrl = OptimizerState::init(Algo::FTRL, d, StepSchedule::constant(0.1));
    for (int t = 1; t <= 50; ++t) {
      auto l = verify_detail::random_round(r2, d, d, LossKind::Squared, Wstar, 0.3);
      auto lin = linearize(l, ftrl.w);
      ogd_step(ogd, l, dom);
      ftrl_step(ftrl, lin, dom, cfg);
      worst_ogd = std::max(worst_ogd, (ogd.w - ftrl.w).lpNorm<Eigen::Infinity>());
    }
  }
  CheckResult rec;
  rec.name = "ogd_recovery";
  rec.pass = worst_ogd <= 1e-10;
  rec.data = {{"max_coord_gap", worst_ogd}, {"tolerance", 1e-10}, {"seed", double(seed)}};
  os.str("");
  os << "max per-coordinate gap " << worst_ogd << " over 20 seeds, T=50";
  rec.detail = os.str();
  report.checks.push_back(rec);
  return report;
}

// Bound conformance: every theorem checker is fed hypothesis-matching seeded
// streams on a bounded ball and must report lhs <= rhs. `corrupt_sigma`
// deliberately shrinks the recorded sigma_t sequence to exercise the
// negative path of the main lemma.
inline SuiteReport verify_bounds(std::uint64_t seed = 0, int n_seeds = 20, int T = 100,
                                 bool corrupt_sigma = false) {
  SuiteReport report;
  report.suite = "bounds";
  const int d = 3, n = 5;
  const double radius = 2.0;
  Domain dom = Domain::ball(Vec::Zero(d), radius);
  const double D = dom.diameter();
  SolverConfig cfg;
  cfg.max_iters = 2000;
  std::normal_distribution<double> normal;

  const Theorem thms[] = {Theorem::FtrlRegret,      Theorem::AdaFtrlRegret,
                          Theorem::FtrlRegretNs,    Theorem::AdaFtrlRegretNs,
                          Theorem::FtlRegretSc,     Theorem::FtlRegretScNs,
                          Theorem::FtrlMainL2};
  for (Theorem thm : thms) {
    CheckResult cr;
    cr.name = to_string(thm);
    cr.pass = true;
    double worst_margin = kInf;  // min over seeds of rhs - lhs
    for (int sd = 0; sd < n_seeds; ++sd) {
      std::mt19937_64 rng(mix64(seed ^ mix64(0xb0d5ULL + 977 * std::uint64_t(sd))));
      Mat Wstar(1, d);
      for (int j = 0; j < d; ++j) Wstar(0, j) = 0.3 * normal(rng);
      bool lipschitz = thm == Theorem::FtrlRegretNs || thm == Theorem::AdaFtrlRegretNs;
      LossKind kind = lipschitz ? LossKind::Huber : LossKind::Squared;
      std::vector<RoundLoss> losses;
      for (int t = 1; t <= T; ++t)
        losses.push_back(verify_detail::random_round(rng, d, n, kind, Wstar, 0.2));

      BoundInputs in;
      in.T = T;
      in.D = D;
      in.alpha = D;
      for (const auto& l : losses) {
        if (kind == LossKind::Squared) {
          in.L = std::max(in.L, l.measured_smoothness());
          double mu = l.measured_strong_convexity();
          in.mu = in.mus.empty() ? mu : std::min(in.mu, mu);
          in.mus.push_back(mu);
          in.G = std::max(in.G, verify_detail::squared_grad_bound(l, radius));
        } else {
          in.G = std::max(in.G, l.lipschitz_bound());
        }
      }
      in.strongly_convex = kind == LossKind::Squared && in.mu > 0;
      in.smooth = kind == LossKind::Squared;

      Algo algo;
      StepSchedule sched = StepSchedule::inverse_sqrt_t(D);
      switch (thm) {
        case Theorem::FtrlRegret: {
          // Needs sum eps_t^2 before the (constant) schedule can be built.
          algo = Algo::FTRL;
          auto [hp, hv] = hindsight(losses, dom, cfg);
          double eps = 0.0;
          for (const auto& l : losses) eps += interpolation_error(l, hp, dom, cfg);
          in.eps_sq_sum = eps;
          sched = StepSchedule::theorem2(in.L, eps);
          in.schedule = StepSchedule::Kind::Constant;
          break;
        }
        case Theorem::AdaFtrlRegret: {
          algo = Algo::AdaFTRL;
          auto [hp, hv] = hindsight(losses, dom, cfg);
          double eps = 0.0;
          for (const auto& l : losses) eps += interpolation_error(l, hp, dom, cfg);
          in.eps_sq_sum = eps;
          sched = StepSchedule::adaptive_grad_norm(D);
          in.schedule = StepSchedule::Kind::AdaptiveGradNorm;
          break;
        }
        case Theorem::FtrlRegretNs:
          algo = Algo::FTRL;
          sched = StepSchedule::inverse_sqrt_t(D);
          in.schedule = StepSchedule::Kind::InverseSqrtT;
          break;
        case Theorem::AdaFtrlRegretNs:
          algo = Algo::AdaFTRL;
          sched = StepSchedule::adaptive_grad_norm(D);
          in.schedule = StepSchedule::Kind::AdaptiveGradNorm;
          break;
        case Theorem::FtlRegretSc:
        case Theorem::FtlRegretScNs:
          algo = Algo::FTL;
          in.schedule = StepSchedule::Kind::InverseSqrtT;
          break;
        case Theorem::FtrlMainL2:
          algo = Algo::FTRL;
          sched = StepSchedule::inverse_sqrt_t(1.0);
          in.schedule = StepSchedule::Kind::InverseSqrtT;
          break;
        default: throw std::logic_error("unreachable");
      }

      auto sr = verify_detail::play(losses, algo, sched, dom, cfg);
      in.regret_T = sr.regret;
      in.grad_norms = sr.grad_norms;
      in.sigmas = sr.sigmas;
      if (thm != Theorem::FtrlMainL2) in.mus.clear();
      if (corrupt_sigma && thm == Theorem::FtrlMainL2)
        for (auto& s : in.sigmas) s *= 1e-6;

      BoundReport br = check_bound(thm, in);
      double margin = br.rhs - br.lhs;
      if (margin < worst_margin) {
        worst_margin = margin;
        cr.data = br.constants;
        cr.data["lhs"] = br.lhs;
        cr.data["rhs"] = br.rhs;
        cr.data["seed"] = double(sd);
        cr.data["base_seed"] = double(seed);
      }
      if (!br.satisfied) cr.pass = false;
    }
    std::ostringstream os;
    os << "min margin rhs-lhs = " << worst_margin << " over " << n_seeds << " seeds";
    cr.detail = os.str();
    report.checks.push_back(cr);
  }

  // Standalone inequality probes.
  {
    std::mt19937_64 rng(mix64(seed ^ 0xabcdULL));
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    CheckResult quad;
    quad.name = "quadratic_inequality_lemma";
    quad.pass = true;
    for (int rep = 0; rep < 10000; ++rep) {
      double a = unif(rng), b = unif(rng);
      double x = (a + std::sqrt(a * a + 4 * a * b)) / 2;
      if (!(x <= a + std::sqrt(a * b) + 1e-9)) {
        quad.pass = false;
        quad.data = {{"a", a}, {"b", b}, {"x", x}};
        break;
      }
    }
    quad.detail = "x^2 <= a(x+b) => x <= a + sqrt(ab), 10^4 draws";
    report.checks.push_back(quad);

    CheckResult ada;
    ada.name = "adagrad_factor2_probe";
    ada.pass = true;
    double worst_ratio = 0.0;
    for (int rep = 0; rep < 10000 && ada.pass; ++rep) {
      std::vector<double> gs(1 + rep % 64);
      for (auto& g : gs) g = unif(rng);
      try {
        worst_ratio = std::max(worst_ratio, adagrad_inequality_probe(gs).ratio);
      } catch (const std::exception&) {
        ada.pass = false;
        ada.data = {{"rep", double(rep)}};
      }
    }
    ada.data["max_ratio"] = worst_ratio;
    std::ostringstream os;
    os << "max lhs/sqrt(sum g^2) ratio " << worst_ratio << " (factor-2 bound)";
    ada.detail = os.str();
    report.checks.push_back(ada);
  }
  return report;
}

// Interpolation checks on the realizable toy stream: vanishing eps_t^2 and
// non-growing inner-solver effort for the leader algorithms.
inline SuiteReport verify_interpolation(std::uint64_t seed = 0) {
  SuiteReport report;
  report.suite = "interpolation";
  for (Algo algo : {Algo::FTL, Algo::FTRL, Algo::AdaFTRL}) {
    ExperimentConfig cfg = preset("toy_simple");
    cfg.algo = algo;
    cfg.loss_kind = LossKind::Squared;
    if (algo == Algo::AdaFTRL) cfg.schedule = StepSchedule::adaptive_grad_norm(1.0);
    RunRecord rec = run(cfg, seed);

    double max_eps = 0.0;
    for (double e : rec.ledger.interpolation_errors) max_eps = std::max(max_eps, e);
    CheckResult eps;
    eps.name = std::string("eps_sq_vanishes_") + to_string(algo);
    eps.pass = max_eps <= 1e-10;
    eps.data = {{"max_eps_sq", max_eps}, {"tolerance", 1e-10}, {"seed", double(seed)},
                {"final_avg_loss", rec.rows.back().avg_cumulative_loss}};
    std::ostringstream os;
    os << "max_t eps_t^2 = " << max_eps;
    eps.detail = os.str();
    report.checks.push_back(eps);

    if (algo == Algo::FTL) {
      int first = rec.rows.front().inner_iters;
      int worst = 0;
      for (const auto& r : rec.rows) worst = std::max(worst, r.inner_iters);
      CheckResult flat;
      flat.name = "ftl_inner_iters_flat";
      flat.pass = worst <= std::max(2 * first, 2);
      flat.data = {{"round1_iters", double(first)}, {"max_iters", double(worst)}};
      std::ostringstream os2;
      os2 << "max inner iters " << worst << " vs round-1 " << first;
      flat.detail = os2.str();
      report.checks.push_back(flat);
    }
  }
  return report;
}

}  // namespace oilbench
