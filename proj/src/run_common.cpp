#include "run_common.hpp"

#include <cstdlib>
#include <limits>

namespace polopt::detail {

Vec exact_weighting(const TabularMdp& mdp, const ExactOptions& options) {
  if (options.weighting.size()) {
    require(options.weighting.size() == mdp.n_states(), "weighting has the wrong size");
    return options.weighting;
  }
  if (options.oracle) return stationary_distribution(mdp, options.oracle->pi);
  return Vec::Constant(mdp.n_states(), 1.0 / mdp.n_states());
}

void fill_exact_row(TraceRow& row, const TabularMdp&, const PolicyTable& pi, const Vec& V,
                    const BregmanGeometry& geom, const ExactOptions& options, const Vec& weighting) {
  row.f = weighting.dot(V);
  row.episode_score = row.f;
  if (!options.oracle) return;
  row.gap = row.f - weighting.dot(options.oracle->V);
  const Vec& wd = options.oracle_weighting.size() ? options.oracle_weighting : weighting;
  try {
    row.D_to_opt = expected_divergence(geom, pi, options.oracle->pi, wd);
  } catch (const InvalidInput&) {
    row.D_to_opt = std::numeric_limits<double>::infinity();
  }
}

std::vector<int> exact_probes(const TabularMdp& mdp, const ExactOptions& options) {
  if (!options.probes.empty()) {
    for (int s : options.probes) require(s >= 0 && s < mdp.n_states(), "probe state out of range");
    return options.probes;
  }
  std::vector<int> all(static_cast<std::size_t>(mdp.n_states()));
  for (int s = 0; s < mdp.n_states(); ++s) all[static_cast<std::size_t>(s)] = s;
  return all;
}

Vec omega_center(const BregmanGeometry& geom, const ActionSet& set) {
  if (geom.kind() == BregmanGeometry::Kind::Euclidean) return Vec::Zero(set.dim());
  require(set.kind() == ActionSet::Kind::Simplex, geom.name() + " geometry needs a simplex action set");
  return set.center();
}

double Stopwatch::ms() const {
  static const bool on = [] {
    const char* v = std::getenv("POLOPT_TIMING");
    return v && *v && std::string(v) != "0";
  }();
  if (!on) return 0.0;
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
}

// ---------------------------------------------------------------- FaDriver

FaDriver::FaDriver(const FaProblem& problem, const BregmanGeometry& geom, const EvalConfig& eval, const Rng& rng)
    : problem_(problem), geom_(geom), eval_(eval), rng_(rng), set_(ActionSet::simplex(1)), finite_(false) {
  require(problem.env != nullptr, "run needs an environment");
  set_ = problem.env->action_set();
  finite_ = set_.kind() == ActionSet::Kind::Simplex;
  require(geom.action_dim() == set_.dim(), "geometry dimension does not match the action set");
  require(problem.eval_every >= 1, "eval_every must be at least 1");
  if (eval.targets == EvalConfig::Targets::Exact)
    require(problem.env->tabular() != nullptr, "exact targets need a tabular environment");
  if (eval.features.kind == FeatureSpec::Kind::Tabular) {
    const TabularMdp* tab = problem.env->tabular();
    require(tab != nullptr && finite_, "tabular features need a tabular environment");
    fmap_ = std::make_shared<const FeatureMap>(FeatureMap::tabular(tab->n_states(), tab->n_actions()));
    state_map_ = std::make_shared<const FeatureMap>(FeatureMap::tabular(tab->n_states(), 0));
  }
}

EvalDataset FaDriver::collect(int k, const StatePolicy& pi, const ValueEstimate& bootstrap, double noise_std) {
  if (eval_.targets == EvalConfig::Targets::Exact) return exact_dataset(*problem_.env, pi, problem_.reg);
  SamplingOptions opt = eval_.sampling;
  opt.noise_std = noise_std;
  opt.policy_id = "pi_" + std::to_string(k);
  EvalDataset d = sample_dataset(*problem_.env, pi, problem_.reg, opt, bootstrap, rng_.substream(static_cast<std::uint64_t>(k)));
  env_steps += d.env_steps;
  return d;
}

void FaDriver::ensure_maps(const EvalDataset& data) {
  if (fmap_) return;
  const FeatureSpec& f = eval_.features;
  Rng r = rng_.substream(0x6d617073ull);
  std::uint64_t seed = r();
  if (f.anchors == FeatureSpec::Anchors::Data) {
    fmap_ = kernel_map_from_data(data, f.n_anchors, f.n_frequencies, f.bandwidth, seed, f.action_scale);
    state_map_ = kernel_state_map_from_data(data, f.n_anchors, f.n_frequencies, f.bandwidth, r());
    return;
  }
  EvalDataset pool;
  Rng draw = rng_.substream(0x616e63686f72ull);
  for (int i = 0; i < f.n_anchors; ++i) {
    Sample s;
    s.state = problem_.env->reset(draw);
    s.point = state_point(*problem_.env, s.state);
    s.action = set_.sample(draw);
    pool.samples.push_back(std::move(s));
  }
  fmap_ = kernel_map_from_data(pool, f.n_anchors, f.n_frequencies, f.bandwidth, seed, f.action_scale);
  state_map_ = kernel_state_map_from_data(pool, f.n_anchors, f.n_frequencies, f.bandwidth, r());
}

std::shared_ptr<const FeatureMap> FaDriver::state_map() {
  return state_map_;
}

QModel FaDriver::fit(const EvalDataset& data) const { return fit_ridge(data, fmap_, eval_.ridge()); }

bool FaDriver::evaluates(int k, int k_max) const { return k % problem_.eval_every == 0 || k == k_max; }

void FaDriver::score(TraceRow& row, const StatePolicy& pi) const {
  PolicyScore sc = score_policy(problem_, pi, geom_);
  row.f = sc.f;
  row.gap = sc.gap;
  row.D_to_opt = sc.D_to_opt;
  row.episode_score = sc.episode_score;
}

std::optional<double> FaDriver::exact_neg_psi(const StatePolicy& pi_k, const StatePolicy& pi_next) const {
  const Environment& env = *problem_.env;
  const TabularMdp* tab = env.tabular();
  if (!tab) return std::nullopt;
  PolicyTable Pk = materialize(env, pi_k), Pn = materialize(env, pi_next);
  ValueFunctions vals = evaluate_exact(*tab, Pk, problem_.reg);
  Vec neg = -advantage_along(vals, problem_.reg, Pk, Pn);
  Vec w = problem_.weighting.size() ? problem_.weighting : env.reset_distribution();
  return w.dot(neg);
}

void FaDriver::diagnose(TraceRow& row, int k, const StatePolicy& pi, const ValueEstimate& bootstrap) {
  const Environment& env = *problem_.env;
  const TabularMdp* tab = env.tabular();
  if (eval_.error_refits < 2 || !tab || !finite_) return;
  PolicyTable P = materialize(env, pi);
  ValueFunctions vals = evaluate_exact(*tab, P, problem_.reg);
  Vec w = problem_.weighting.size() ? problem_.weighting : env.reset_distribution();
  // Probe at most 256 states, spread evenly over those with weight.
  std::vector<int> support;
  for (int s = 0; s < tab->n_states(); ++s)
    if (w[s] > 0) support.push_back(s);
  const std::size_t stride = std::max<std::size_t>(1, support.size() / 256);
  ErrorProbe probe;
  std::vector<int> chosen;
  for (std::size_t i = 0; i < support.size(); i += stride) chosen.push_back(support[i]);
  probe.weights.resize(static_cast<Eigen::Index>(chosen.size()));
  probe.exact_q0.resize(static_cast<Eigen::Index>(chosen.size()), tab->n_actions());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const auto p = static_cast<Eigen::Index>(i);
    probe.states.push_back(state_point(env, env.state_from_index(chosen[i])));
    probe.weights[p] = w[chosen[i]];
    probe.exact_q0.row(p) = vals.Q.row(chosen[i]);
  }
  Rng base = rng_.substream(0x646961670000ull + static_cast<std::uint64_t>(k));
  auto refit = [&](int r) {
    EvalDataset d;
    if (eval_.targets == EvalConfig::Targets::Exact) {
      d = exact_dataset(env, pi, problem_.reg);
    } else {
      SamplingOptions opt = eval_.sampling;
      d = sample_dataset(env, pi, problem_.reg, opt, bootstrap, base.substream(static_cast<std::uint64_t>(r)));
    }
    return fit(d);
  };
  std::optional<QModel> best;
  if (static_cast<long long>(tab->n_states()) * tab->n_actions() <= 20000) best = fit(exact_dataset(env, pi, problem_.reg));
  ErrorReport rep = diagnose_errors(refit, eval_.error_refits, probe, best);
  row.varsigma_hat = rep.varsigma;
  row.sigma2_hat = rep.sigma2;
}

ValueEstimate FaDriver::bootstrap_from(std::shared_ptr<const QModel> model, StatePolicy pi) const {
  if (!model) return {};
  const Environment* env = problem_.env;
  const bool finite = finite_;
  const int n = set_.dim();
  return [model, pi = std::move(pi), env, finite, n](const Vec& s) {
    StatePoint p = state_point(*env, s);
    Vec a = pi(s);
    if (finite) return model->q0(p, n).dot(a);
    return model->value(p, a);
  };
}

}  // namespace polopt::detail
