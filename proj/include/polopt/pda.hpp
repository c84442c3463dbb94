#pragma once

#include <memory>
#include <string>

#include "polopt/schedule.hpp"
#include "polopt/trace.hpp"

namespace polopt {

// Exact-mode accumulator: sum_t beta_t Q_0^{pi_t} and sum_t beta_t.
struct DualAccumulator {
  Mat sum;
  double beta_sum = 0.0;
  int steps = 0;
  PolicyTable anchor;

  explicit DualAccumulator(PolicyTable pi_0);
};

struct PdaStep {
  DualAccumulator acc;
  PolicyTable pi;
};

// Adds beta_k Q_0^{pi_k} and solves
// argmin_a <acc(s), a> + (sum beta) h^a(s) + lambda_k D(pi_0(s), a).
PdaStep pda_step_exact(const TabularMdp& mdp, const DualAccumulator& acc, const ValueFunctions& vals_k,
                       const PdaSchedule& schedule, int k, const BregmanGeometry& geom, const Regularizer& reg);

ExactTrace pda_run_exact(const TabularMdp& mdp, const PolicyTable& pi_0, const BregmanGeometry& geom,
                         const Regularizer& reg, const PdaSchedule& schedule, int k_max,
                         const ExactOptions& options = {});

// Function-approximation accumulator over a feature map shared by every
// iteration, so that sum_t beta_t Q(.; theta_t) = Q(.; sum_t beta_t theta_t).
struct FaAccumulator {
  std::shared_ptr<const FeatureMap> fmap;
  Vec theta_sum;
  double beta_sum = 0.0;
  double lambda = 0.0;
  int steps = 0;
  // Constant anchor action pi_0.
  Vec anchor;
  // Weights of the most recent model, used to bootstrap after a resume.
  Vec last_theta;

  FaAccumulator() = default;
  FaAccumulator(std::shared_ptr<const FeatureMap> f, Vec anchor_action);

  // Model whose weights are the accumulated sum.
  QModel model() const;
  std::string to_json() const;
  static FaAccumulator from_json(const std::string& text);
};

// Adds beta_k theta_k and records lambda_k.
FaAccumulator pda_accumulate(const FaAccumulator& acc, const QModel& model_k, const PdaSchedule& schedule, int k);

// The policy defined by the accumulator, evaluated at one state. Pure
// function of its inputs.
Vec accumulator_policy(const FaAccumulator& acc, const BregmanGeometry& geom, const Regularizer& reg,
                       const ActionSet& set, const StatePoint& s);

// pda_accumulate followed by accumulator_policy.
Vec pda_step_fa(FaAccumulator& acc, const QModel& model_k, const PdaSchedule& schedule, int k,
                const BregmanGeometry& geom, const Regularizer& reg, const ActionSet& set, const StatePoint& s);

FaTrace pda_run_finite_fa(const FaProblem& problem, const BregmanGeometry& geom, const PdaSchedule& schedule,
                          const EvalConfig& eval, int k_max, const Rng& rng, const FaAccumulator* resume = nullptr);

FaTrace pda_run_continuous(const FaProblem& problem, const BregmanGeometry& geom, const PdaSchedule& schedule,
                           const EvalConfig& eval, int k_max, const ExplorationNoise& noise, const Rng& rng,
                           const FaAccumulator* resume = nullptr);

}  // namespace polopt
