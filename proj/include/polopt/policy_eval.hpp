#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polopt/environments.hpp"
#include "polopt/geometry.hpp"
#include "polopt/rng.hpp"

namespace polopt {

// A state as seen by feature maps: the environment's embedding plus its
// tabular index when one exists.
struct StatePoint {
  Vec embed;
  int index = -1;
};

StatePoint state_point(const Environment& env, const Vec& s);

class FeatureMap {
 public:
  enum class Kind { KernelAnchors, TabularOneHot };
  // CosSin uses phi_j(z) = (cos w_j.z, sin w_j.z), which keeps every feature
  // in [-1, 1]. RandomPhase uses sqrt(2) cos(w_j.z + b_j).
  enum class Phase { CosSin, RandomPhase };

  // anchors: one input point z = (state embedding, scaled action) per row.
  static FeatureMap kernel(Mat anchors, int n_frequencies, double bandwidth, std::uint64_t seed,
                           double action_scale = 1.0, int action_dim = 0, Phase phase = Phase::CosSin);
  // One indicator per (state, action). With action_dim 0 it is one per state.
  static FeatureMap tabular(int n_states, int n_actions);

  Kind kind() const { return kind_; }
  int size() const;
  int action_dim() const { return action_dim_; }
  double bandwidth() const { return bandwidth_; }
  int n_frequencies() const { return n_freq_; }
  std::uint64_t seed() const { return seed_; }
  const Mat& anchors() const { return anchors_; }

  // Concatenates the embedding and the scaled action.
  Vec input(const StatePoint& s, const Vec& action) const;
  Vec features(const StatePoint& s, const Vec& action) const;
  Mat features_batch(const std::vector<StatePoint>& states, const std::vector<Vec>& actions) const;

  // A kernel model theta . psi(z) equals w . phi(z) with w = lift(theta);
  // evaluating through w costs O(D) instead of O(N D).
  Vec lift(const Vec& theta) const;
  Mat lift(const Mat& theta) const;
  double eval_lifted(const Vec& w, const Vec& z) const;
  Vec eval_lifted(const Mat& w, const Vec& z) const;
  // Gradient of w . phi(z) with respect to the action part of z.
  Vec action_gradient_lifted(const Vec& w, const Vec& z) const;

  std::string to_json() const;
  static FeatureMap from_json(const std::string& text);

  // Median pairwise distance among the first (up to) 256 rows.
  static double median_bandwidth(const Mat& points);

 private:
  void draw();
  Vec phi(const Vec& z) const;

  Kind kind_ = Kind::TabularOneHot;
  Phase phase_ = Phase::CosSin;
  int n_states_ = 0, n_actions_ = 0;
  int n_freq_ = 0;
  int action_dim_ = 0;
  double bandwidth_ = 1.0;
  double action_scale_ = 1.0;
  std::uint64_t seed_ = 0;
  Mat anchors_;
  Mat omega_;     // D x input_dim
  Vec phase_b_;   // D
  Mat anchor_phi_;  // rows(phi) x N
};

struct Sample {
  Vec state;   // raw environment state
  StatePoint point;
  Vec action;
  double y = 0.0;
};

struct EvalDataset {
  std::vector<Sample> samples;
  int burn_in = 0;
  int truncation = 0;
  std::string policy_id;
  long long env_steps = 0;

  std::size_t size() const { return samples.size(); }
  void dump_csv(const std::string& path) const;
  // Embeddings are recomputed through env when given.
  static EvalDataset load_csv(const std::string& path, const Environment* env = nullptr);
};

using StatePolicy = std::function<Vec(const Vec& state)>;
using ValueEstimate = std::function<double(const Vec& state)>;

struct SamplingOptions {
  int n_samples = 100;
  int burn_in = 200;
  int truncation = 50;
  // Zero-mean Gaussian noise added to continuous actions along the
  // rollout, projected back to the action set.
  double noise_std = 0.0;
  std::string policy_id;
};

// Rollout protocol: run the behavior policy burn_in steps from a reset
// (resetting again on absorption), draw a uniform action, then follow the
// policy for `truncation` steps and bootstrap the tail.
EvalDataset sample_dataset(const Environment& env, const StatePolicy& pi, const Regularizer& reg,
                           const SamplingOptions& opt, const ValueEstimate& bootstrap, const Rng& rng);

struct QModel {
  enum class Target { Q, AugmentedL };

  std::shared_ptr<const FeatureMap> fmap;
  Vec theta;
  Target target = Target::Q;
  // AugmentedL only: the omega-gradient part, one column per action
  // coordinate, over a state-only feature map.
  std::shared_ptr<const FeatureMap> state_map;
  Mat grad_theta;
  double eta = 0.0;

  QModel() = default;
  QModel(std::shared_ptr<const FeatureMap> f, Vec th);

  double value(const StatePoint& s, const Vec& a) const;
  // Model values at each vertex of the simplex.
  Vec q0(const StatePoint& s, int n_actions) const;
  Vec action_gradient(const StatePoint& s, const Vec& a) const;
  Vec grad_omega(const StatePoint& s) const;

 private:
  void cache();
  Vec lifted_;
  Mat lifted_grad_;
  friend QModel fit_augmented_L(const EvalDataset&, const StatePolicy&, const BregmanGeometry&, double,
                                std::shared_ptr<const FeatureMap>, std::shared_ptr<const FeatureMap>, double);
  friend QModel make_augmented(std::shared_ptr<const FeatureMap>, Vec, std::shared_ptr<const FeatureMap>, Mat,
                               double);
};

double evaluate_model(const QModel& model, const StatePoint& s, const Vec& a);

// Ridge solution of min ||Phi theta - Y||^2 + lambda ||theta||^2, one column
// per target. Picks the primal or dual system by shape.
Mat ridge_solve(const Mat& Phi, const Mat& Y, double lambda);

QModel fit_ridge(const EvalDataset& data, std::shared_ptr<const FeatureMap> fmap, double ridge_lambda);

QModel make_augmented(std::shared_ptr<const FeatureMap> fmap, Vec theta, std::shared_ptr<const FeatureMap> state_map,
                      Mat grad_theta, double eta);

// Q part by ridge on the dataset; omega-gradient part by ridge on the exact
// targets grad omega(pi_k(s)) / eta_k at the dataset's states.
QModel fit_augmented_L(const EvalDataset& data, const StatePolicy& pi_k, const BregmanGeometry& geom, double eta_k,
                       std::shared_ptr<const FeatureMap> fmap, std::shared_ptr<const FeatureMap> state_map,
                       double ridge_lambda);

// Kernel feature map whose anchors are the first n_anchors dataset points.
std::shared_ptr<const FeatureMap> kernel_map_from_data(const EvalDataset& data, int n_anchors, int n_frequencies,
                                                       double bandwidth, std::uint64_t seed, double action_scale);
// State-only version for the omega-gradient part.
std::shared_ptr<const FeatureMap> kernel_state_map_from_data(const EvalDataset& data, int n_anchors,
                                                             int n_frequencies, double bandwidth, std::uint64_t seed);

struct ErrorReport {
  double varsigma = 0.0;  // E_s || mean model - exact ||_inf
  double sigma2 = 0.0;    // E || model - mean model ||_inf^2
  double app = std::numeric_limits<double>::quiet_NaN();  // best-in-class part of varsigma
  double bia = std::numeric_limits<double>::quiet_NaN();  // remainder
  int refits = 0;
};

struct ErrorProbe {
  std::vector<StatePoint> states;
  Vec weights;
  Mat exact_q0;  // one row per probe state
};

// Refits the model R times on fresh datasets and splits the error into a
// deterministic and a zero-mean part. best_in_class, when given, is a fit on
// exact targets and isolates the approximation error.
ErrorReport diagnose_errors(const std::function<QModel(int)>& refit, int R, const ErrorProbe& probe,
                            const std::optional<QModel>& best_in_class = std::nullopt);

}  // namespace polopt
