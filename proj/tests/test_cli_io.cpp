#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oilbench/harness.hpp"

using namespace oilbench;

TEST_CASE("format_double round-trips") {
  CHECK(format_double(0.0) == "0");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1e-9) == "1e-09");
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> unif(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    double v = unif(rng) * std::pow(10.0, int(rng() % 25) - 12);
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("csv header and rows") {
  auto cfg = preset("toy_simple");
  cfg.rounds_override = 5;
  auto rec = run(cfg, 21);
  std::string path = "test_cli_io_out.csv";
  write_csv(rec, path);

  std::ifstream in(path);
  REQUIRE(bool(in));
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "round,env_steps,loss,avg_cumulative_loss,cumulative_regret,"
        "cumulative_reward,eta_t,sigma_t,inner_iters,solver_converged");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    int commas = 0;
    for (char c : line) commas += c == ',';
    CHECK(commas == 9);
  }
  CHECK(rows == 5);
  in.close();

  // First line reproduces the first row exactly.
  std::ifstream again(path);
  std::getline(again, header);
  std::getline(again, line);
  std::istringstream ss(line);
  std::string field;
  std::getline(ss, field, ',');
  CHECK(std::stoi(field) == rec.rows[0].round);
  std::getline(ss, field, ',');
  CHECK(std::stol(field) == rec.rows[0].env_steps);
  std::getline(ss, field, ',');
  CHECK(std::stod(field) == rec.rows[0].loss);
  std::remove(path.c_str());
}

TEST_CASE("csv write failure throws") {
  auto cfg = preset("toy_simple");
  cfg.rounds_override = 1;
  auto rec = run(cfg, 1);
  CHECK_THROWS_AS(write_csv(rec, "/nonexistent-dir/x.csv"), std::runtime_error);
}
