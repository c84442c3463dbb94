#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "polopt/environments.hpp"
#include "polopt/mdp.hpp"
#include "polopt/policy_eval.hpp"

namespace polopt {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct TraceRow {
  int iteration = 0;
  double f = kNaN;
  double gap = kNaN;
  double D_to_opt = kNaN;
  double min_neg_psi = kNaN;
  double varsigma_hat = kNaN;
  double sigma2_hat = kNaN;
  double wall_ms = 0.0;
  double episode_score = kNaN;
  long long env_steps = 0;
};

// iteration, f, gap, D_to_opt, min_neg_psi, varsigma_hat, sigma2_hat, wall_ms
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& rows);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);
// Fixed-format number used in every CSV the library writes.
std::string format_number(double v);

// Options for exact (tabular) runs.
struct ExactOptions {
  // Weighting for f; defaults to the oracle's stationary distribution when an
  // oracle is given, else uniform.
  Vec weighting;
  const OptimalSolution* oracle = nullptr;
  // Weighting for D(pi_k, pi*); defaults to `weighting`.
  Vec oracle_weighting;
  std::vector<int> probes;  // empty = all states
  bool keep_history = true;
};

struct ExactTrace {
  std::vector<TraceRow> rows;
  std::vector<PolicyTable> policies;
  std::vector<Vec> values;
  // neg_psi[k](i) = -psi^{pi_k}(probe_i, pi_{k+1}(probe_i)).
  std::vector<Vec> neg_psi;
  // max over k, s of V^{pi_{k+1}}(s) - V^{pi_k}(s).
  double max_value_increase = -std::numeric_limits<double>::infinity();
  // Same with the lambda-change correction subtracted (dual averaging).
  double descent_slack = -std::numeric_limits<double>::infinity();
};

struct FeatureSpec {
  enum class Kind { Kernel, Tabular };
  Kind kind = Kind::Kernel;
  int n_anchors = 100;
  int n_frequencies = 200;
  double bandwidth = 0.0;  // <= 0: median heuristic
  double action_scale = 1.0;
  // Anchor points: the first dataset, or fresh draws from the reset
  // distribution paired with random actions (no environment steps).
  enum class Anchors { Data, Reset };
  Anchors anchors = Anchors::Data;
};

struct EvalConfig {
  enum class Targets { Sampled, Exact };
  Targets targets = Targets::Sampled;
  SamplingOptions sampling;
  FeatureSpec features;
  double ridge_lambda = 0.0;  // <= 0: 1e-3 * n_samples
  int error_refits = 0;       // > 0 runs the error diagnosis every eval
  double ridge() const {
    return ridge_lambda > 0 ? ridge_lambda : 1e-3 * sampling.n_samples;
  }
};

// What a function-approximation run needs to know about its problem.
struct FaProblem {
  const Environment* env = nullptr;
  Regularizer reg = Regularizer::none();
  // Weighting over tabular states for exact f; defaults to the reset
  // distribution.
  Vec weighting;
  const OptimalSolution* oracle = nullptr;
  Vec oracle_weighting;
  int eval_every = 1;
  // Monte Carlo estimate of f when no tabular export exists.
  int mc_episodes = 100;
  int mc_horizon = 100;
  std::uint64_t mc_seed = 0;
  // States at which stationarity residuals are tracked (continuous runs).
  std::vector<Vec> probes;
};

struct ExplorationNoise {
  // Standard deviation at iteration t (1-based) is scale * t^{-1/4}, i.e.
  // covariance scale^2 / sqrt(t) times the identity.
  double scale = 0.0;
  double std_at(int t) const;
};

struct FaTrace {
  std::vector<TraceRow> rows;
  // Per-iteration, per-probe model-based residual terms (continuous runs).
  std::vector<Vec> neg_psi;
  std::vector<Vec> div_terms;
  long long env_steps = 0;
  std::string checkpoint;  // final accumulator (dual averaging only)
};

// Materializes a state policy on every tabular state of env.
PolicyTable materialize(const Environment& env, const StatePolicy& pi);

// Exact targets: every (state, vertex) pair labelled with Q_0 of pi.
EvalDataset exact_dataset(const Environment& env, const StatePolicy& pi, const Regularizer& reg);

struct PolicyScore {
  double f = kNaN;
  double gap = kNaN;
  double D_to_opt = kNaN;
  double episode_score = kNaN;
};

// Exact evaluation through the tabular export when there is one, otherwise
// Monte Carlo with common random numbers across calls.
PolicyScore score_policy(const FaProblem& problem, const StatePolicy& pi, const BregmanGeometry& geom);

}  // namespace polopt
