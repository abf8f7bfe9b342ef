// Command-line front end: run experiments, tune step sizes, verify properties.
#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "oilbench/harness.hpp"
#include "oilbench/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace oilbench;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIncomplete = 3;

Algo parse_algo(const std::string& s) {
  for (Algo a : {Algo::OGD, Algo::AdaGrad, Algo::FTL, Algo::FTRL, Algo::AltFTRL,
                 Algo::AdaFTRL, Algo::FTRLNaive})
    if (s == to_string(a)) return a;
  throw std::invalid_argument("unknown algo: " + s);
}

LossKind parse_loss(const std::string& s) {
  if (s == "l2" || s == "squared") return LossKind::Squared;
  if (s == "l1" || s == "absolute") return LossKind::Absolute;
  if (s == "logistic") return LossKind::Logistic;
  if (s == "huber") return LossKind::Huber;
  throw std::invalid_argument("unknown loss: " + s);
}

StepSchedule parse_schedule(const std::string& kind, double param) {
  if (kind == "constant") return StepSchedule::constant(param);
  if (kind == "inv_sqrt_t") return StepSchedule::inverse_sqrt_t(param);
  if (kind == "adaptive") return StepSchedule::adaptive_grad_norm(param);
  throw std::invalid_argument("unknown schedule: " + kind);
}

// Flat config document; every key maps one-to-one onto ExperimentConfig and
// unknown keys are hard errors.
ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path);
  json doc = json::parse(in);
  ExperimentConfig cfg;
  if (doc.contains("preset")) cfg = preset(doc["preset"].get<std::string>());
  double sched_param = cfg.schedule.alpha;
  std::string sched_kind;
  for (const auto& [key, val] : doc.items()) {
    if (key == "preset") continue;
    else if (key == "name") cfg.name = val.get<std::string>();
    else if (key == "env") {
      std::string e = val.get<std::string>();
      if (e == "gridworld") cfg.env_kind = ExperimentConfig::EnvKind::Gridworld;
      else if (e == "toy") cfg.env_kind = ExperimentConfig::EnvKind::Toy;
      else throw std::invalid_argument("unknown env: " + e);
    }
    else if (key == "algo") cfg.algo = parse_algo(val.get<std::string>());
    else if (key == "schedule") sched_kind = val.get<std::string>();
    else if (key == "eta" || key == "alpha") sched_param = val.get<double>();
    else if (key == "loss") cfg.loss_kind = parse_loss(val.get<std::string>());
    else if (key == "behavior") {
      std::string b = val.get<std::string>();
      if (b == "agent") cfg.behavior = Behavior::Agent;
      else if (b == "expert") cfg.behavior = Behavior::Expert;
      else throw std::invalid_argument("unknown behavior: " + b);
    }
    else if (key == "rounds") cfg.rounds_override = val.get<int>();
    else if (key == "total_interactions") cfg.total_interactions = val.get<int>();
    else if (key == "episodes_per_round") cfg.grid.episodes_per_round = val.get<int>();
    else if (key == "exact_loss") cfg.grid.exact_loss = val.get<bool>();
    else if (key == "width") cfg.grid.mdp.width = val.get<int>();
    else if (key == "height") cfg.grid.mdp.height = val.get<int>();
    else if (key == "horizon") cfg.grid.mdp.horizon = val.get<int>();
    else if (key == "gamma") cfg.grid.mdp.gamma = val.get<double>();
    else if (key == "samples_per_round") cfg.toy.samples_per_round = val.get<int>();
    else if (key == "d_feature") cfg.toy.d_feature = val.get<int>();
    else if (key == "d_output") cfg.toy.d_output = val.get<int>();
    else if (key == "regime") {
      std::string r = val.get<std::string>();
      if (r == "simple") cfg.toy.regime = ToyStreamConfig::Regime::Simple;
      else if (r == "adversarial") cfg.toy.regime = ToyStreamConfig::Regime::Adversarial;
      else throw std::invalid_argument("unknown regime: " + r);
    }
    else if (key == "ball_radius")
      cfg.domain = Domain::ball(Vec::Zero(cfg.param_dim()), val.get<double>());
    else if (key == "max_iters") cfg.inner.max_iters = val.get<int>();
    else if (key == "grad_tol") cfg.inner.grad_tol = val.get<double>();
    else if (key == "track_interpolation") cfg.track_interpolation = val.get<bool>();
    else throw std::invalid_argument("unknown config key: " + key);
  }
  if (!sched_kind.empty()) cfg.schedule = parse_schedule(sched_kind, sched_param);
  else cfg.schedule.alpha = sched_param;
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    seeds.push_back(std::stoull(tok));
  }
  if (seeds.empty()) throw std::invalid_argument("empty seed list");
  return seeds;
}

fs::path resolve_out(std::string flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("OILBENCH_OUT")) return env;
  return "oilbench_out";
}

void fsync_path(const fs::path& p) {
  int fd = ::open(p.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p.string());
  out << body;
  out.flush();
  out.close();
  fsync_path(p);
}

json config_echo(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["env"] = cfg.env_kind == ExperimentConfig::EnvKind::Gridworld ? "gridworld" : "toy";
  j["algo"] = to_string(cfg.algo);
  j["schedule_kind"] = int(cfg.schedule.kind);
  j["schedule_param"] = cfg.schedule.alpha;
  j["loss"] = to_string(cfg.loss_kind);
  j["behavior"] = cfg.behavior == Behavior::Agent ? "agent" : "expert";
  j["rounds"] = cfg.rounds();
  j["interactions_per_round"] = cfg.interactions_per_round();
  j["config_hash"] = cfg.hash();
  j["canonical"] = cfg.canonical();
  return j;
}

struct CommonArgs {
  std::string preset_name, config_path, algo, out_dir;
};

ExperimentConfig build_config(const CommonArgs& a) {
  if (a.preset_name.empty() == a.config_path.empty())
    throw std::invalid_argument("exactly one of --preset / --config is required");
  ExperimentConfig cfg = a.preset_name.empty() ? load_config_file(a.config_path)
                                               : preset(a.preset_name);
  if (!a.algo.empty()) cfg.algo = parse_algo(a.algo);
  return cfg;
}

int cmd_run(const CommonArgs& common, const std::string& seeds_csv, int rounds,
            double eta, double alpha, const std::string& loss,
            const std::string& behavior, int jobs) {
  ExperimentConfig cfg;
  std::vector<std::uint64_t> seeds;
  fs::path out;
  try {
    cfg = build_config(common);
    if (rounds > 0) cfg.rounds_override = rounds;
    if (eta > 0) cfg.schedule.alpha = eta;
    if (alpha > 0) cfg.schedule = StepSchedule::adaptive_grad_norm(alpha);
    if (!loss.empty()) cfg.loss_kind = parse_loss(loss);
    if (!behavior.empty()) {
      if (behavior == "agent") cfg.behavior = Behavior::Agent;
      else if (behavior == "expert") cfg.behavior = Behavior::Expert;
      else throw std::invalid_argument("unknown behavior: " + behavior);
    }
    (void)cfg.rounds();  // validate divisibility up front
    seeds = parse_seeds(seeds_csv);
    out = resolve_out(common.out_dir);
    fs::create_directories(out);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  struct Done {
    std::string csv, meta;
    std::uint64_t seed;
    bool ok = false;
  };
  std::vector<Done> done(seeds.size());
  std::mutex log_mu;
  std::atomic<std::size_t> next{0};
  jobs = std::max(1, jobs);
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < seeds.size(); i = next.fetch_add(1)) {
      std::uint64_t seed = seeds[i];
      std::string stem = cfg.name + "_seed" + std::to_string(seed);
      try {
        auto t0 = std::chrono::steady_clock::now();
        RunRecord rec = run(cfg, seed);
        rec.wall_seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - t0).count();
        if (!rec.complete) throw std::runtime_error("incomplete run");
        fs::path csv = out / (stem + ".csv");
        write_csv(rec, csv.string());
        fsync_path(csv);

        json meta;
        meta["config"] = config_echo(cfg);
        meta["seed"] = seed;
        meta["rounds"] = rec.rows.size();
        meta["wall_seconds"] = rec.wall_seconds;
        meta["final_loss"] = rec.rows.back().loss;
        meta["final_avg_cumulative_loss"] = rec.rows.back().avg_cumulative_loss;
        meta["final_cumulative_regret"] = rec.rows.back().cumulative_regret;
        meta["final_cumulative_reward"] = rec.rows.back().cumulative_reward;
        meta["bound_reports"] = json::array();
        if (cfg.env_kind == ExperimentConfig::EnvKind::Gridworld &&
            cfg.algo == Algo::FTL) {
          BoundInputs in;
          in.regret_T = rec.rows.back().cumulative_regret;
          in.T = int(rec.rows.size());
          in.gamma = cfg.grid.mdp.gamma;
          in.C = thm1_constant(cfg.grid.mdp, rec.iterates, cfg.loss_kind);
          BoundReport br = check_bound(Theorem::Ftl, in);
          json b;
          b["theorem"] = br.theorem;
          b["lhs"] = br.lhs;
          b["rhs"] = br.rhs;
          b["satisfied"] = br.satisfied;
          b["constants"] = br.constants;
          b["note"] = br.note;
          meta["bound_reports"].push_back(b);
        }
        fs::path mp = out / (stem + ".json");
        write_text(mp, meta.dump(2) + "\n");
        done[i] = {csv.string(), mp.string(), seed, true};
        std::lock_guard<std::mutex> lk(log_mu);
        std::cout << "wrote " << csv.string() << "\n";
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lk(log_mu);
        std::cerr << "run failed (seed " << seed << "): " << e.what() << "\n";
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs && std::size_t(j) < seeds.size(); ++j)
    pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (const auto& d : done)
    if (!d.ok) return kExitIncomplete;

  // Manifest last: its presence implies a complete bundle.
  json manifest;
  manifest["config_hash"] = cfg.hash();
  manifest["config_name"] = cfg.name;
  manifest["runs"] = json::array();
  for (const auto& d : done) {
    json r;
    r["seed"] = d.seed;
    r["csv"] = d.csv;
    r["metadata"] = d.meta;
    manifest["runs"].push_back(r);
  }
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  return 0;
}

int cmd_tune(const CommonArgs& common, int pilot_interactions, int pilot_batch,
             std::uint64_t seed) {
  ExperimentConfig cfg;
  fs::path out;
  try {
    cfg = build_config(common);
    out = resolve_out(common.out_dir);
    fs::create_directories(out);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  try {
    GridSearchResult res =
        grid_search(cfg, default_eta_grid(), pilot_interactions, pilot_batch, seed);
    json j;
    j["config"] = config_echo(cfg);
    j["seed"] = seed;
    j["pilot_interactions"] = pilot_interactions;
    j["pilot_batch"] = pilot_batch;
    j["ranking"] = json::array();
    for (const auto& [eta, loss] : res.ranking) {
      json e;
      e["eta"] = eta;
      e["pilot_avg_cumulative_loss"] =
          std::isfinite(loss) ? json(loss) : json("diverged");
      j["ranking"].push_back(e);
    }
    j["selected_eta"] = res.selected_eta;
    j["selected_avg_cumulative_loss"] = res.selected_loss;
    fs::path p = out / (cfg.name + "_" + to_string(cfg.algo) + "_tune.json");
    write_text(p, j.dump(2) + "\n");
    std::cout << "selected eta " << res.selected_eta << " (avg loss "
              << res.selected_loss << "), wrote " << p.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "tune failed: " << e.what() << "\n";
    return kExitIncomplete;
  }
}

json report_to_json(const SuiteReport& rep) {
  json j;
  j["suite"] = rep.suite;
  j["pass"] = rep.pass();
  j["checks"] = json::array();
  for (const auto& c : rep.checks) {
    json cj;
    cj["name"] = c.name;
    cj["pass"] = c.pass;
    cj["detail"] = c.detail;
    cj["data"] = c.data;
    j["checks"].push_back(cj);
  }
  return j;
}

int cmd_verify(const std::string& suite, std::uint64_t seed,
               const std::string& out_dir, bool inject_sigma_error) {
  fs::path out = resolve_out(out_dir);
  std::vector<SuiteReport> reports;
  try {
    fs::create_directories(out);
    if (suite == "reformulation" || suite == "all")
      reports.push_back(verify_reformulation(seed));
    if (suite == "bounds" || suite == "all")
      reports.push_back(verify_bounds(seed, 20, 100, inject_sigma_error));
    if (suite == "interpolation" || suite == "all")
      reports.push_back(verify_interpolation(seed));
  } catch (const std::exception& e) {
    std::cerr << "verify failed to run: " << e.what() << "\n";
    return kExitIncomplete;
  }
  if (reports.empty()) {
    std::cerr << "unknown suite: " << suite << "\n";
    return kExitConfig;
  }
  json j;
  j["seed"] = seed;
  j["suites"] = json::array();
  bool all_pass = true;
  for (const auto& rep : reports) {
    j["suites"].push_back(report_to_json(rep));
    for (const auto& c : rep.checks) {
      std::cout << (c.pass ? "[pass] " : "[FAIL] ") << rep.suite << "/" << c.name
                << ": " << c.detail << "\n";
      all_pass &= c.pass;
    }
  }
  j["pass"] = all_pass;
  write_text(out / ("verify_" + suite + ".json"), j.dump(2) + "\n");
  if (!all_pass) {
    // Echo the failing cases for replay.
    for (const auto& rep : reports)
      for (const auto& c : rep.checks)
        if (!c.pass) std::cerr << "reproducer: " << json(c.data).dump() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online imitation learning benchmark"};
  app.require_subcommand(1);

  CommonArgs run_args, tune_args;
  std::string seeds_csv = "0";
  int rounds = 0, jobs = 1;
  double eta = 0.0, alpha = 0.0;
  std::string loss, behavior;
  auto* run_cmd = app.add_subcommand("run", "execute (config x seed) runs");
  run_cmd->add_option("--preset", run_args.preset_name, "preset name");
  run_cmd->add_option("--config", run_args.config_path, "config file path");
  run_cmd->add_option("--algo", run_args.algo, "algorithm id");
  run_cmd->add_option("--seeds", seeds_csv, "comma-separated seeds");
  run_cmd->add_option("--out", run_args.out_dir, "output directory");
  run_cmd->add_option("--rounds", rounds, "round-count override");
  run_cmd->add_option("--eta", eta, "step-size parameter override");
  run_cmd->add_option("--alpha", alpha, "adaptive schedule alpha");
  run_cmd->add_option("--loss", loss, "loss kind (l2,l1,logistic,huber)");
  run_cmd->add_option("--behavior", behavior, "rollout behavior (agent,expert)");
  run_cmd->add_option("--jobs", jobs, "cross-run parallelism");

  int pilot_interactions = 2000, pilot_batch = 100;
  std::uint64_t tune_seed = 0;
  auto* tune_cmd = app.add_subcommand("tune", "grid-search the step size");
  tune_cmd->add_option("--preset", tune_args.preset_name, "preset name");
  tune_cmd->add_option("--config", tune_args.config_path, "config file path");
  tune_cmd->add_option("--algo", tune_args.algo, "algorithm id");
  tune_cmd->add_option("--pilot-interactions", pilot_interactions,
                       "pilot budget in env interactions");
  tune_cmd->add_option("--pilot-batch", pilot_batch, "pilot interactions per round");
  tune_cmd->add_option("--seed", tune_seed, "run seed");
  tune_cmd->add_option("--out", tune_args.out_dir, "output directory");

  std::string suite = "all", verify_out;
  std::uint64_t verify_seed = 0;
  bool inject_sigma_error = false;
  auto* verify_cmd = app.add_subcommand("verify", "run the property suites");
  verify_cmd->add_option("--suite", suite, "reformulation|bounds|interpolation|all");
  verify_cmd->add_option("--seeds", verify_seed, "base seed");
  verify_cmd->add_option("--out", verify_out, "output directory");
  verify_cmd->add_flag("--inject-sigma-error", inject_sigma_error,
                       "corrupt sigma_t to exercise the failure path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (run_cmd->parsed())
    return cmd_run(run_args, seeds_csv, rounds, eta, alpha, loss, behavior, jobs);
  if (tune_cmd->parsed())
    return cmd_tune(tune_args, pilot_interactions, pilot_batch, tune_seed);
  return cmd_verify(suite, verify_seed, verify_out, inject_sigma_error);
}
