// Experiment orchestration: the interaction loop, presets, and the step-size
// grid-search protocol.
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oilbench/core.hpp"
#include "oilbench/envs.hpp"
#include "oilbench/metrics.hpp"
#include "oilbench/optimizers.hpp"
#include "oilbench/solvers.hpp"

namespace oilbench {

struct GridworldSpec {
  Mdp mdp;
  int episodes_per_round = 1;
  bool exact_loss = false;  // exact occupancy-weighted loss instead of sampled rollouts
};

struct ExperimentConfig {
  enum class EnvKind { Gridworld, Toy };

  std::string name = "custom";
  EnvKind env_kind = EnvKind::Toy;
  GridworldSpec grid;
  ToyStreamConfig toy;
  Algo algo = Algo::FTL;
  StepSchedule schedule = StepSchedule::inverse_sqrt_t(1.0);
  SolverConfig inner;
  int total_interactions = 0;  // 0 => rounds() from env defaults
  Behavior behavior = Behavior::Agent;
  LossKind loss_kind = LossKind::Logistic;
  Domain domain = Domain::unconstrained();
  bool track_interpolation = false;
  bool compute_regret = true;  // pilot runs skip the hindsight re-solves
  int rounds_override = 0;

  int interactions_per_round() const {
    return env_kind == EnvKind::Gridworld
               ? grid.episodes_per_round * grid.mdp.horizon
               : toy.samples_per_round;
  }

  int rounds() const {
    if (rounds_override > 0) return rounds_override;
    if (total_interactions > 0) {
      int m = interactions_per_round();
      if (total_interactions % m != 0)
        throw std::invalid_argument("total_interactions not divisible by M");
      return total_interactions / m;
    }
    return env_kind == EnvKind::Gridworld ? 100 : toy.rounds;
  }

  Eigen::Index param_dim() const {
    return env_kind == EnvKind::Gridworld
               ? grid.mdp.policy_dim()
               : Eigen::Index(toy.d_feature) * toy.d_output;
  }

  std::string canonical() const;
  std::uint64_t hash() const;
};

struct RunRecord {
  struct Row {
    int round;
    long env_steps;
    double loss;
    double avg_cumulative_loss;
    double cumulative_regret;
    double cumulative_reward;
    double eta_t;
    double sigma_t;
    int inner_iters;
    bool solver_converged;
  };
  std::uint64_t config_hash = 0;
  std::string config_name;
  std::uint64_t seed = 0;
  std::vector<Row> rows;
  bool complete = false;
  double wall_seconds = 0.0;

  // In-memory extras for verification (not serialized).
  std::vector<Vec> iterates;          // w_t for t = 1..T
  std::vector<RoundLoss> losses;      // l_t
  std::vector<double> grad_norms;     // ||grad l_t(w_t)||
  RegretLedger ledger;
};

inline std::string ExperimentConfig::canonical() const {
  std::ostringstream os;
  os << name << '|' << int(env_kind) << '|' << to_string(algo) << '|'
     << int(schedule.kind) << ':' << schedule.alpha << '|' << int(loss_kind) << '|'
     << int(behavior) << '|' << rounds() << '|' << interactions_per_round() << '|'
     << int(domain.kind) << ':' << domain.radius << '|' << int(inner.method) << ':'
     << inner.max_iters << ':' << inner.grad_tol;
  if (env_kind == EnvKind::Gridworld)
    os << "|grid:" << grid.mdp.width << 'x' << grid.mdp.height << ':'
       << grid.mdp.horizon << ':' << grid.mdp.gamma << ':' << int(grid.mdp.expert.kind)
       << ':' << grid.episodes_per_round << ':' << grid.exact_loss;
  else
    os << "|toy:" << toy.d_feature << ':' << toy.d_output << ':' << int(toy.regime)
       << ':' << toy.samples_per_round;
  return os.str();
}

inline std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : canonical()) h = (h ^ std::uint64_t(std::uint8_t(c))) * 0x100000001b3ULL;
  return h;
}

// One full experiment: rollout -> build loss -> optimizer step -> ledger.
// Deterministic given (cfg, seed).
inline RunRecord run(ExperimentConfig cfg, std::uint64_t seed) {
  const int T = cfg.rounds();
  const int M = cfg.interactions_per_round();
  RunRecord rec;
  rec.config_hash = cfg.hash();
  rec.config_name = cfg.name;
  rec.seed = seed;

  if (cfg.env_kind == ExperimentConfig::EnvKind::Gridworld &&
      cfg.grid.mdp.expert.kind == ExpertOracle::Kind::Alternating)
    cfg.grid.mdp.expert.seed = seed;
  if (cfg.env_kind == ExperimentConfig::EnvKind::Toy) cfg.toy.seed = seed;
  if (cfg.schedule.kind == StepSchedule::Kind::AdaptiveGradNorm &&
      cfg.schedule.alpha <= 0)
    cfg.schedule.alpha = cfg.domain.bounded() ? cfg.domain.diameter() : 1.0;

  OptimizerState state = OptimizerState::init(cfg.algo, cfg.param_dim(), cfg.schedule);
  double cum_reward = 0.0;
  double cum_loss = 0.0;

  for (int t = 1; t <= T; ++t) {
    RoundLoss l;
    double round_reward = 0.0;
    if (cfg.env_kind == ExperimentConfig::EnvKind::Gridworld) {
      const Mdp& mdp = cfg.grid.mdp;
      if (cfg.grid.exact_loss) {
        l = build_exact_round_loss(mdp, state.w, t, cfg.loss_kind);
        // Expected per-interaction agreement, scaled to M interactions.
        double agree = 0.0;
        for (int tau = 0; tau < mdp.horizon; ++tau) {
          Vec p = occupancy(mdp, state.w, tau);
          for (int s = 0; s < mdp.n_states(); ++s)
            if (mdp.greedy_action(state.w, s) == mdp.expert_action(s, t))
              agree += p[s] / mdp.horizon;
        }
        round_reward = agree * M;
      } else {
        EpisodeBatch batch = rollout(mdp, state.w, t, cfg.grid.episodes_per_round,
                                     seed, cfg.behavior);
        round_reward = batch.total_reward();
        l = build_round_loss(batch, cfg.loss_kind, mdp);
      }
    } else {
      cfg.toy.loss_kind = cfg.loss_kind;
      l = toy_round(cfg.toy, t);
    }

    double loss_t = l.value(state.w);
    rec.iterates.push_back(state.w);
    rec.losses.push_back(l);
    rec.grad_norms.push_back(l.gradient(state.w).norm());
    step(state, l, cfg.domain, cfg.inner);

    cum_reward += round_reward;
    cum_loss += loss_t;
    rec.rows.push_back({t, long(t) * M, loss_t, cum_loss / t, 0.0, cum_reward,
                        state.last_eta, state.last_sigma, state.last_inner_iters,
                        state.last_solver_converged});
  }

  if (!cfg.compute_regret) {
    rec.ledger.per_round_loss = [&] {
      std::vector<double> v;
      for (const auto& r : rec.rows) v.push_back(r.loss);
      return v;
    }();
    rec.complete = true;
    return rec;
  }
  rec.ledger = regret(
      [&] {
        std::vector<double> v;
        for (const auto& r : rec.rows) v.push_back(r.loss);
        return v;
      }(),
      rec.losses, cfg.domain, cfg.inner);

  // Carry the latest checkpointed regret value into intermediate rows.
  {
    std::size_t cp = 0;
    double latest = 0.0;
    for (auto& row : rec.rows) {
      while (cp < rec.ledger.checkpoint_rounds.size() &&
             rec.ledger.checkpoint_rounds[cp] <= row.round)
        latest = rec.ledger.cumulative_regret[cp++];
      row.cumulative_regret = latest;
    }
  }

  if (cfg.track_interpolation) {
    for (const auto& l : rec.losses)
      rec.ledger.interpolation_errors.push_back(
          interpolation_error(l, rec.ledger.hindsight_point, cfg.domain, cfg.inner));
  }
  for (const auto& row : rec.rows)
    rec.ledger.solver_flags.push_back(!row.solver_converged);
  rec.complete = true;
  return rec;
}

// Step-size grid search following the pilot-then-top-3 protocol.
struct GridSearchResult {
  std::vector<std::pair<double, double>> ranking;  // (eta, pilot avg cumulative loss)
  double selected_eta = 0.0;
  double selected_loss = 0.0;
};

inline StepSchedule schedule_for(Algo algo, StepSchedule::Kind kind, double eta) {
  switch (kind) {
    case StepSchedule::Kind::Constant: return StepSchedule::constant(eta);
    case StepSchedule::Kind::InverseSqrtT: return StepSchedule::inverse_sqrt_t(eta);
    case StepSchedule::Kind::AdaptiveGradNorm: return StepSchedule::adaptive_grad_norm(eta);
    default: throw std::invalid_argument("grid search only tunes parametric schedules");
  }
  (void)algo;
}

inline std::vector<double> default_eta_grid() {
  std::vector<double> g;
  for (int e = -5; e <= 5; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

inline GridSearchResult grid_search(const ExperimentConfig& base,
                                    const std::vector<double>& etas,
                                    int pilot_interactions, int pilot_M,
                                    std::uint64_t seed) {
  if (etas.empty()) throw std::invalid_argument("empty eta grid");
  GridSearchResult res;
  pilot_M = std::max(pilot_M, 1);
  int pilot_rounds = std::max(1, pilot_interactions / pilot_M);
  for (double eta : etas) {
    ExperimentConfig cfg = base;
    cfg.schedule = schedule_for(base.algo, base.schedule.kind, eta);
    // Pilot at batch size pilot_M per round when the horizon permits.
    if (cfg.env_kind == ExperimentConfig::EnvKind::Gridworld) {
      int h = cfg.grid.mdp.horizon;
      if (pilot_M >= h && pilot_M % h == 0) cfg.grid.episodes_per_round = pilot_M / h;
    } else {
      cfg.toy.samples_per_round = pilot_M;
    }
    cfg.total_interactions = 0;
    cfg.rounds_override = pilot_rounds;
    cfg.track_interpolation = false;
    cfg.compute_regret = false;
    double final_avg;
    try {
      RunRecord rec = run(cfg, seed);
      final_avg = rec.rows.back().avg_cumulative_loss;
      if (!std::isfinite(final_avg)) final_avg = kInf;
    } catch (const std::exception&) {
      final_avg = kInf;
    }
    res.ranking.emplace_back(eta, final_avg);
  }
  std::stable_sort(res.ranking.begin(), res.ranking.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  if (!std::isfinite(res.ranking.front().second))
    throw std::runtime_error("all pilot runs diverged");

  res.selected_loss = kInf;
  for (std::size_t k = 0; k < std::min<std::size_t>(3, res.ranking.size()); ++k) {
    ExperimentConfig cfg = base;
    cfg.schedule = schedule_for(base.algo, base.schedule.kind, res.ranking[k].first);
    cfg.track_interpolation = false;
    cfg.compute_regret = false;
    try {
      RunRecord rec = run(cfg, seed);
      double v = rec.rows.back().avg_cumulative_loss;
      if (std::isfinite(v) && v < res.selected_loss) {
        res.selected_loss = v;
        res.selected_eta = res.ranking[k].first;
      }
    } catch (const std::exception&) {
    }
  }
  if (!std::isfinite(res.selected_loss))
    throw std::runtime_error("all full-budget candidates diverged");
  return res;
}

inline std::vector<int> default_stationary_expert(const Mdp& mdp) {
  // Head toward the top-right corner, preferring up; stay once there.
  std::vector<int> acts(std::size_t(mdp.n_states()));
  for (int s = 0; s < mdp.n_states(); ++s) {
    int x = s % mdp.width, y = s / mdp.width;
    if (y < mdp.height - 1)
      acts[std::size_t(s)] = kUp;
    else if (x < mdp.width - 1)
      acts[std::size_t(s)] = kRight;
    else
      acts[std::size_t(s)] = kStay;
  }
  return acts;
}

inline ExperimentConfig preset(const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  if (name == "gridworld_adversarial" || name == "gridworld_stationary") {
    cfg.env_kind = ExperimentConfig::EnvKind::Gridworld;
    cfg.grid.mdp = Mdp{};
    cfg.grid.episodes_per_round = 1;
    cfg.loss_kind = LossKind::Logistic;
    if (name == "gridworld_stationary") {
      cfg.grid.mdp.expert = ExpertOracle::stationary(default_stationary_expert(cfg.grid.mdp));
      cfg.grid.exact_loss = true;
      cfg.loss_kind = LossKind::Squared;
    }
    cfg.algo = Algo::FTL;
    cfg.schedule = StepSchedule::inverse_sqrt_t(1.0);
  } else if (name == "toy_simple" || name == "toy_adversarial") {
    cfg.env_kind = ExperimentConfig::EnvKind::Toy;
    cfg.toy = ToyStreamConfig{};
    cfg.toy.regime = name == "toy_simple" ? ToyStreamConfig::Regime::Simple
                                          : ToyStreamConfig::Regime::Adversarial;
    cfg.loss_kind = LossKind::Squared;
    cfg.algo = Algo::FTL;
    cfg.schedule = StepSchedule::inverse_sqrt_t(1.0);
    cfg.track_interpolation = true;
  } else {
    throw std::invalid_argument("unknown preset: " + name);
  }
  return cfg;
}

// Shortest decimal representation that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline void write_csv(const RunRecord& rec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "round,env_steps,loss,avg_cumulative_loss,cumulative_regret,"
         "cumulative_reward,eta_t,sigma_t,inner_iters,solver_converged\n";
  for (const auto& r : rec.rows) {
    out << r.round << ',' << r.env_steps << ',' << format_double(r.loss) << ','
        << format_double(r.avg_cumulative_loss) << ','
        << format_double(r.cumulative_regret) << ','
        << format_double(r.cumulative_reward) << ',' << format_double(r.eta_t) << ','
        << format_double(r.sigma_t) << ',' << r.inner_iters << ','
        << (r.solver_converged ? 1 : 0) << '\n';
  }
  out.flush();
}

}  // namespace oilbench
