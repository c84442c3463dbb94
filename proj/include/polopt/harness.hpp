#pragma once

#include <cstdint>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polopt/environments.hpp"
#include "polopt/schedule.hpp"
#include "polopt/trace.hpp"

namespace polopt {

struct EnvConfig {
  // random-tabular | tabular-json | gridworld | lqr | pendulum
  std::string kind = "random-tabular";
  double gamma = 0.9;
  int n_states = 10;
  int n_actions = 3;
  double sparsity = 0.0;
  // Instance seed; the run seed when absent.
  std::optional<std::uint64_t> seed;
  std::string path;
  GridWorldSpec grid;
  double lqr_cost_cap = 1e3;
  double lqr_action_bound = 5.0;
  PendulumSpec pendulum;
};

struct GeometryConfig {
  std::string kind = "entropy";  // entropy | euclidean | tsallis
  double q = 1.5;
};

struct RegularizerConfig {
  std::string kind = "none";  // none | kl | quadratic | entropy-bonus
  double weight = 0.0;
};

struct ScheduleConfig {
  // PMD: geometric | constant | nonconvex | sqrt-horizon | inverse-t |
  //      inverse-t-weighted | continuous-nonconvex
  // PDA: geometric | linear-const | linear-poly | nonconvex
  std::string kind = "geometric";
  double eta = 1.0;
  double lambda = 0.0;
  double mu_Q = 0.0;
  double D0 = 1.0;
  double sigma2 = 0.0;
  double M_h = 0.0;
};

struct ScoringConfig {
  // auto | stationary | uniform | reset
  std::string weighting = "auto";
  bool oracle = true;
  int mc_episodes = 100;
  int mc_horizon = 100;
};

struct RunConfig {
  // pmd-exact | pmd-fa | pda-exact | pda-fa | policy-iteration | value-iteration
  std::string algorithm = "pmd-exact";
  EnvConfig environment;
  GeometryConfig geometry;
  RegularizerConfig regularizer;
  ScheduleConfig schedule;
  EvalConfig eval;
  ScoringConfig scoring;
  double exploration = 0.0;  // noise scale for continuous actions
  int k_max = 50;
  int eval_every = 1;
  int n_probes = 8;
  std::vector<std::uint64_t> seeds{0};
  std::string output = "out";
  // gridsearch only: dotted key -> list of values.
  nlohmann::json grid = nlohmann::json::object();
};

// Parses a config tree; unknown keys and type errors are collected into a
// ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
// TOML (.toml) or JSON (anything else).
RunConfig load_config(const std::string& path);
nlohmann::json config_to_json(const RunConfig& cfg);
// Cross-field checks, including schedule construction.
void validate(const RunConfig& cfg);

// Seeds given as "a..b" (inclusive) or a comma list.
std::vector<std::uint64_t> parse_seeds(const std::string& text);

struct Instance {
  std::unique_ptr<Environment> env;
  std::shared_ptr<const TabularMdp> mdp;  // when the environment is tabular
  BregmanGeometry geom = BregmanGeometry::euclidean(1);
  Regularizer reg = Regularizer::none();
  std::optional<OptimalSolution> oracle;
  Vec weighting;
};

// Environment, geometry, regularizer, oracle and weighting for one seed.
Instance build_instance(const RunConfig& cfg, std::uint64_t seed);
PmdSchedule build_pmd_schedule(const RunConfig& cfg, const Instance& inst);
PdaSchedule build_pda_schedule(const RunConfig& cfg, const Instance& inst);

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<TraceRow> rows;
  // Extra header lines (key, value).
  std::vector<std::pair<std::string, std::string>> meta;
  std::string checkpoint;
};

SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed);

struct AggregateRow {
  int iteration = 0;
  int n = 0;
  // Per metric: mean and the 95% normal band mean +- 1.96 sd / sqrt(n).
  std::vector<double> mean, lo, hi;
};

// Metric columns shared by the per-seed and aggregate files.
const std::vector<std::string>& metric_names();
std::vector<double> metric_values(const TraceRow& r);

std::vector<AggregateRow> aggregate(const std::vector<SeedResult>& seeds);

void write_seed_csv(const std::string& path, const RunConfig& cfg, const SeedResult& res);
void write_aggregate_csv(const std::string& path, const RunConfig& cfg, const std::vector<AggregateRow>& rows);
// Reads back a per-seed file.
SeedResult read_seed_csv(const std::string& path);

struct RunSummary {
  std::vector<SeedResult> seeds;
  std::vector<AggregateRow> aggregate;
};

// Runs every seed (in parallel) and, when write is set, writes
// seed_<s>.csv, aggregate.csv and config.json under cfg.output.
RunSummary run(const RunConfig& cfg, bool write = true);

struct GridPoint {
  nlohmann::json values;  // key -> value
  double final_f = 0.0;
};

struct GridResult {
  std::vector<GridPoint> table;
  std::size_t best = 0;
  RunConfig best_config;
};

// Exhaustive sweep over cfg.grid. Selection by final mean f; ties go to the
// lexicographically smallest grid point.
GridResult gridsearch(const RunConfig& cfg, bool write = true);

}  // namespace polopt
