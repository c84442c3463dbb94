#pragma once

// Pieces shared by the PMD and PDA run loops.

#include <chrono>
#include <memory>
#include <optional>

#include "polopt/trace.hpp"

namespace polopt::detail {

// Weighting for f in exact runs.
Vec exact_weighting(const TabularMdp& mdp, const ExactOptions& options);

// Fills f, gap and D_to_opt for pi with values V.
void fill_exact_row(TraceRow& row, const TabularMdp& mdp, const PolicyTable& pi, const Vec& V,
                    const BregmanGeometry& geom, const ExactOptions& options, const Vec& weighting);

// Probe states of an exact run.
std::vector<int> exact_probes(const TabularMdp& mdp, const ExactOptions& options);

// Center of the omega term: D(center, a) = omega(a) + const on the set.
Vec omega_center(const BregmanGeometry& geom, const ActionSet& set);

// Regularizer state index; states without a tabular index share row 0.
inline int reg_index(const StatePoint& s) { return s.index < 0 ? 0 : s.index; }

class Stopwatch {
 public:
  Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
  // Zero unless timing is switched on, so that reruns are byte-identical.
  double ms() const;

 private:
  std::chrono::steady_clock::time_point t0_;
};

// Dataset collection, feature maps, scoring and error diagnosis for the
// function-approximation loops.
class FaDriver {
 public:
  FaDriver(const FaProblem& problem, const BregmanGeometry& geom, const EvalConfig& eval, const Rng& rng);

  bool finite() const { return finite_; }
  int action_dim() const { return set_.dim(); }
  const ActionSet& set() const { return set_; }
  const Environment& env() const { return *problem_.env; }
  const FaProblem& problem() const { return problem_; }
  const EvalConfig& eval() const { return eval_; }

  // Dataset for pi_k. bootstrap may be empty.
  EvalDataset collect(int k, const StatePolicy& pi, const ValueEstimate& bootstrap, double noise_std);
  // Builds the feature maps from the first dataset; later calls are no-ops.
  void ensure_maps(const EvalDataset& data);
  void set_map(std::shared_ptr<const FeatureMap> fmap) { fmap_ = std::move(fmap); }
  std::shared_ptr<const FeatureMap> fmap() const { return fmap_; }
  std::shared_ptr<const FeatureMap> state_map();

  QModel fit(const EvalDataset& data) const;
  bool evaluates(int k, int k_max) const;
  // Scores pi_k into row; gap and D_to_opt need an oracle.
  void score(TraceRow& row, const StatePolicy& pi) const;
  // Exact -psi^{pi_k}(s, pi_next(s)) averaged under the weighting, when the
  // environment has a tabular export.
  std::optional<double> exact_neg_psi(const StatePolicy& pi_k, const StatePolicy& pi_next) const;
  // Refit-based error split for pi_k; needs a tabular export.
  void diagnose(TraceRow& row, int k, const StatePolicy& pi, const ValueEstimate& bootstrap);

  // Value of pi at s under the model fitted for pi.
  ValueEstimate bootstrap_from(std::shared_ptr<const QModel> model, StatePolicy pi) const;

  long long env_steps = 0;

 private:
  const FaProblem& problem_;
  const BregmanGeometry& geom_;
  const EvalConfig& eval_;
  Rng rng_;
  ActionSet set_;
  bool finite_;
  std::shared_ptr<const FeatureMap> fmap_, state_map_;
};

}  // namespace polopt::detail
