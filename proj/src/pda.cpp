#include "polopt/pda.hpp"

#include <json.hpp>

#include "run_common.hpp"

namespace polopt {

using detail::reg_index;
using json = nlohmann::json;

DualAccumulator::DualAccumulator(PolicyTable pi_0)
    : sum(Mat::Zero(pi_0.n_states(), pi_0.n_actions())), anchor(std::move(pi_0)) {}

PdaStep pda_step_exact(const TabularMdp& mdp, const DualAccumulator& acc, const ValueFunctions& vals_k,
                       const PdaSchedule& schedule, int k, const BregmanGeometry& geom, const Regularizer& reg) {
  require(acc.sum.rows() == mdp.n_states() && acc.sum.cols() == mdp.n_actions(), "accumulator does not match the MDP");
  require(k == acc.steps, "accumulator is at step " + std::to_string(acc.steps) + ", not " + std::to_string(k));
  const double beta = schedule.beta(k);
  const double lambda = schedule.lambda(k);
  DualAccumulator next = acc;
  next.sum += beta * vals_k.Q;
  next.beta_sum += beta;
  next.steps = k + 1;
  const ActionSet set = mdp.action_set();
  Mat rows(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) {
    BregmanTerm t{lambda, acc.anchor.row(s)};
    rows.row(s) = solve_prox(geom, set, reg, s, next.sum.row(s).transpose(), next.beta_sum,
                             std::span<const BregmanTerm>(&t, 1))
                      .transpose();
  }
  return {std::move(next), PolicyTable(std::move(rows))};
}

ExactTrace pda_run_exact(const TabularMdp& mdp, const PolicyTable& pi_0, const BregmanGeometry& geom,
                         const Regularizer& reg, const PdaSchedule& schedule, int k_max, const ExactOptions& options) {
  require(k_max >= 0, "k_max must be nonnegative");
  if (k_max > schedule.horizon())
    throw ScheduleError(ScheduleRule::Parameter, k_max, k_max, schedule.horizon(), "k_max exceeds the schedule horizon");
  detail::Stopwatch clock;
  const Vec w = detail::exact_weighting(mdp, options);
  const std::vector<int> probes = detail::exact_probes(mdp, options);
  // Divergence diameter for the lambda-change correction; entropy-type
  // geometries use the clamped simplex.
  double diam = 0.0;
  bool lambda_changes = false;
  for (int k = 1; k < k_max; ++k)
    if (schedule.lambda(k) != schedule.lambda(k - 1)) lambda_changes = true;
  if (lambda_changes) diam = geom.diameter(mdp.action_set());
  const double gamma = mdp.gamma();

  ExactTrace tr;
  DualAccumulator acc(pi_0);
  PolicyTable pi = pi_0;
  ValueFunctions vals = evaluate_exact(mdp, pi, reg);
  double best_neg_psi = std::numeric_limits<double>::infinity();
  for (int k = 0;; ++k) {
    TraceRow row;
    row.iteration = k;
    detail::fill_exact_row(row, mdp, pi, vals.V, geom, options, w);
    if (k > 0) row.min_neg_psi = best_neg_psi;
    row.wall_ms = clock.ms();
    tr.rows.push_back(row);
    if (options.keep_history) {
      tr.policies.push_back(pi);
      tr.values.push_back(vals.V);
    }
    if (k == k_max) break;
    PdaStep step = pda_step_exact(mdp, acc, vals, schedule, k, geom, reg);
    ValueFunctions next_vals = evaluate_exact(mdp, step.pi, reg);
    Vec neg = -advantage_along(vals, reg, pi, step.pi);
    Vec probe_neg(static_cast<Eigen::Index>(probes.size()));
    for (std::size_t i = 0; i < probes.size(); ++i) probe_neg[static_cast<Eigen::Index>(i)] = neg[probes[i]];
    tr.neg_psi.push_back(probe_neg);
    best_neg_psi = std::min(best_neg_psi, probe_neg.mean());
    const double inc = (next_vals.V - vals.V).maxCoeff();
    tr.max_value_increase = std::max(tr.max_value_increase, inc);
    const double dl = schedule.lambda(k) - schedule.lambda(k - 1);
    const double corr = dl > 0 ? gamma * dl * diam / ((1.0 - gamma) * schedule.beta(k)) : 0.0;
    tr.descent_slack = std::max(tr.descent_slack, inc - corr);
    acc = std::move(step.acc);
    pi = std::move(step.pi);
    vals = std::move(next_vals);
  }
  return tr;
}

// ---------------------------------------------------------------- FA accumulator

FaAccumulator::FaAccumulator(std::shared_ptr<const FeatureMap> f, Vec anchor_action)
    : fmap(std::move(f)), anchor(std::move(anchor_action)) {
  require(fmap != nullptr, "accumulator needs a feature map");
  theta_sum = Vec::Zero(fmap->size());
}

QModel FaAccumulator::model() const { return QModel(fmap, theta_sum); }

std::string FaAccumulator::to_json() const {
  json j;
  j["feature_map"] = json::parse(fmap->to_json());
  j["theta_sum"] = std::vector<double>(theta_sum.data(), theta_sum.data() + theta_sum.size());
  j["beta_sum"] = beta_sum;
  j["lambda"] = lambda;
  j["steps"] = steps;
  j["anchor"] = std::vector<double>(anchor.data(), anchor.data() + anchor.size());
  j["last_theta"] = std::vector<double>(last_theta.data(), last_theta.data() + last_theta.size());
  return j.dump();
}

FaAccumulator FaAccumulator::from_json(const std::string& text) {
  json j = json::parse(text);
  auto fmap = std::make_shared<const FeatureMap>(FeatureMap::from_json(j.at("feature_map").dump()));
  auto th = j.at("theta_sum").get<std::vector<double>>();
  auto an = j.at("anchor").get<std::vector<double>>();
  FaAccumulator acc(fmap, Eigen::Map<Vec>(an.data(), static_cast<Eigen::Index>(an.size())));
  require(static_cast<int>(th.size()) == fmap->size(), "checkpoint weights do not match its feature map");
  acc.theta_sum = Eigen::Map<Vec>(th.data(), static_cast<Eigen::Index>(th.size()));
  acc.beta_sum = j.at("beta_sum").get<double>();
  acc.lambda = j.at("lambda").get<double>();
  acc.steps = j.at("steps").get<int>();
  if (j.contains("last_theta")) {
    auto lt = j.at("last_theta").get<std::vector<double>>();
    require(lt.empty() || static_cast<int>(lt.size()) == fmap->size(), "checkpoint weights do not match its feature map");
    acc.last_theta = Eigen::Map<Vec>(lt.data(), static_cast<Eigen::Index>(lt.size()));
  }
  return acc;
}

FaAccumulator pda_accumulate(const FaAccumulator& acc, const QModel& model_k, const PdaSchedule& schedule, int k) {
  require(model_k.fmap == acc.fmap || (model_k.fmap && acc.fmap && model_k.fmap->to_json() == acc.fmap->to_json()),
          "accumulated models must share one feature map");
  require(k == acc.steps, "accumulator is at step " + std::to_string(acc.steps) + ", not " + std::to_string(k));
  FaAccumulator next = acc;
  const double beta = schedule.beta(k);
  next.theta_sum += beta * model_k.theta;
  next.beta_sum += beta;
  next.lambda = schedule.lambda(k);
  next.steps = k + 1;
  next.last_theta = model_k.theta;
  return next;
}

namespace {

Vec accumulator_policy_impl(const FaAccumulator& acc, const QModel& sum_model, const BregmanGeometry& geom,
                            const Regularizer& reg, const ActionSet& set, const StatePoint& s) {
  if (acc.steps == 0) return acc.anchor;
  const int idx = reg_index(s);
  if (set.kind() == ActionSet::Kind::Simplex) {
    BregmanTerm t{acc.lambda, acc.anchor};
    return solve_prox(geom, set, reg, idx, sum_model.q0(s, set.dim()), acc.beta_sum,
                      std::span<const BregmanTerm>(&t, 1));
  }
  const bool has_reg = reg.kind() != Regularizer::Kind::Null;
  // Divide through by lambda + beta_sum so the tolerance is on the scale of Q.
  const double scale = 1.0 / (acc.lambda + acc.beta_sum);
  SmoothObjective obj;
  obj.modulus = std::max(scale * (acc.lambda + acc.beta_sum * reg.mu_h()), 1e-12);
  obj.eval = [&](const Vec& a, Vec* grad) {
    double f = sum_model.value(s, a) + acc.lambda * geom.divergence(acc.anchor, a);
    if (has_reg) f += acc.beta_sum * reg.value(idx, a);
    if (grad) {
      *grad = sum_model.action_gradient(s, a) + acc.lambda * (geom.grad_omega(a) - geom.grad_omega(acc.anchor));
      if (has_reg) *grad += acc.beta_sum * reg.gradient(idx, a);
      *grad *= scale;
    }
    return scale * f;
  };
  ProxOptions opt;
  opt.tol = 1e-7;
  opt.max_iter = 500;
  try {
    return prox_generic(obj, set, acc.anchor, opt);
  } catch (const ConvergenceFailure& e) {
    return e.best();
  }
}

}  // namespace

Vec accumulator_policy(const FaAccumulator& acc, const BregmanGeometry& geom, const Regularizer& reg,
                       const ActionSet& set, const StatePoint& s) {
  return accumulator_policy_impl(acc, acc.model(), geom, reg, set, s);
}

Vec pda_step_fa(FaAccumulator& acc, const QModel& model_k, const PdaSchedule& schedule, int k,
                const BregmanGeometry& geom, const Regularizer& reg, const ActionSet& set, const StatePoint& s) {
  acc = pda_accumulate(acc, model_k, schedule, k);
  return accumulator_policy(acc, geom, reg, set, s);
}

namespace {

// The policy of one accumulator snapshot, with the summed model cached.
struct AccPolicy {
  std::shared_ptr<const FaAccumulator> acc;
  std::shared_ptr<const QModel> sum_model;
  const Environment* env;
  BregmanGeometry geom;
  Regularizer reg;
  ActionSet set;

  Vec operator()(const Vec& state) const {
    return accumulator_policy_impl(*acc, *sum_model, geom, reg, set, state_point(*env, state));
  }
};

StatePolicy make_policy(const FaAccumulator& acc, const Environment& env, const BregmanGeometry& geom,
                        const Regularizer& reg) {
  auto a = std::make_shared<const FaAccumulator>(acc);
  auto m = std::make_shared<const QModel>(a->model());
  return AccPolicy{a, m, &env, geom, reg, env.action_set()};
}

FaTrace pda_run_fa(const FaProblem& problem, const BregmanGeometry& geom, const PdaSchedule& schedule,
                   const EvalConfig& eval, int k_max, const ExplorationNoise& noise, const Rng& rng,
                   const FaAccumulator* resume) {
  require(k_max >= 0, "k_max must be nonnegative");
  if (k_max > schedule.horizon())
    throw ScheduleError(ScheduleRule::Parameter, k_max, k_max, schedule.horizon(), "k_max exceeds the schedule horizon");
  detail::Stopwatch clock;
  detail::FaDriver drv(problem, geom, eval, rng);
  const Environment& env = *problem.env;
  const ActionSet& set = drv.set();
  std::vector<StatePoint> probes;
  for (const auto& s : problem.probes) probes.push_back(state_point(env, s));

  // Anchor pi_0: the uniform policy on the simplex, the set's center otherwise.
  FaAccumulator acc;
  int k0 = 0;
  if (resume) {
    acc = *resume;
    k0 = acc.steps;
    require(k0 <= k_max, "checkpoint is past k_max");
    drv.set_map(acc.fmap);
  } else {
    acc.anchor = set.center();
  }
  StatePolicy pi = resume ? make_policy(acc, env, geom, problem.reg) : StatePolicy([a = acc.anchor](const Vec&) { return a; });
  // The last fitted model bootstraps truncated rollouts, so a resumed run
  // continues with the same targets.
  std::shared_ptr<const QModel> prev_model;
  if (resume && acc.last_theta.size()) prev_model = std::make_shared<const QModel>(acc.fmap, acc.last_theta);
  std::vector<Vec> probe_actions;
  for (const auto& s : problem.probes) probe_actions.push_back(pi(s));
  double best_res = std::numeric_limits<double>::infinity();

  FaTrace tr;
  for (int k = k0;; ++k) {
    TraceRow row;
    row.iteration = k;
    const bool eval_now = drv.evaluates(k, k_max);
    if (eval_now) drv.score(row, pi);
    if (k == k_max) {
      if (k > 0) row.min_neg_psi = best_res;
      row.env_steps = drv.env_steps;
      row.wall_ms = clock.ms();
      tr.rows.push_back(row);
      break;
    }
    ValueEstimate boot = drv.bootstrap_from(prev_model, pi);
    EvalDataset data = drv.collect(k, pi, boot, drv.finite() ? 0.0 : noise.std_at(k + 1));
    if (!acc.fmap) {
      drv.ensure_maps(data);
      acc = FaAccumulator(drv.fmap(), acc.anchor);
    }
    auto model = std::make_shared<const QModel>(drv.fit(data));
    acc = pda_accumulate(acc, *model, schedule, k);
    StatePolicy next = make_policy(acc, env, geom, problem.reg);

    if (eval_now) {
      if (auto neg = drv.exact_neg_psi(pi, next)) best_res = std::min(best_res, *neg);
      drv.diagnose(row, k, pi, boot);
    }
    if (!probes.empty()) {
      // Model-based residual terms at the probe states, with
      // mu_t = mu_d * sum_{j<t} beta_j + lambda_t.
      const double mu_t = schedule.mu_d() * schedule.beta_sum(k - 1) + schedule.lambda(k);
      const double mu_prev = k > 0 ? schedule.mu_d() * schedule.beta_sum(k - 2) + schedule.lambda(k - 1) : schedule.lambda(0);
      const double beta = schedule.beta(k);
      Vec neg(static_cast<Eigen::Index>(probes.size())), div(static_cast<Eigen::Index>(probes.size()));
      for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        Vec a_next = next(problem.probes[i]);
        const Vec& a_k = probe_actions[i];
        const int idx = detail::reg_index(probes[i]);
        double psi = drv.finite() ? model->q0(probes[i], set.dim()).dot(a_next - a_k)
                                  : model->value(probes[i], a_next) - model->value(probes[i], a_k);
        if (problem.reg.kind() != Regularizer::Kind::Null)
          psi += problem.reg.value(idx, a_next) - problem.reg.value(idx, a_k);
        neg[j] = -psi;
        double df = 0.0, db = 0.0;
        try {
          df = geom.divergence(a_k, a_next);
          db = geom.divergence(a_next, a_k);
        } catch (const InvalidInput&) {
          df = db = std::numeric_limits<double>::infinity();
        }
        div[j] = (mu_t * df + mu_prev * db) / (2.0 * beta);
        probe_actions[i] = a_next;
      }
      tr.neg_psi.push_back(neg);
      tr.div_terms.push_back(div);
      if (env.tabular() == nullptr) {
        Vec r = neg.cwiseAbs() + div;
        best_res = std::min(best_res, r.mean());
      }
    }
    if (k > 0) row.min_neg_psi = best_res;
    row.env_steps = drv.env_steps;
    row.wall_ms = clock.ms();
    if (eval_now) tr.rows.push_back(row);
    prev_model = model;
    pi = std::move(next);
  }
  tr.env_steps = drv.env_steps;
  if (acc.fmap) tr.checkpoint = acc.to_json();
  return tr;
}

}  // namespace

FaTrace pda_run_finite_fa(const FaProblem& problem, const BregmanGeometry& geom, const PdaSchedule& schedule,
                          const EvalConfig& eval, int k_max, const Rng& rng, const FaAccumulator* resume) {
  require(problem.env && problem.env->action_set().kind() == ActionSet::Kind::Simplex,
          "pda_run_finite_fa needs a finite action set");
  return pda_run_fa(problem, geom, schedule, eval, k_max, ExplorationNoise{}, rng, resume);
}

FaTrace pda_run_continuous(const FaProblem& problem, const BregmanGeometry& geom, const PdaSchedule& schedule,
                           const EvalConfig& eval, int k_max, const ExplorationNoise& noise, const Rng& rng,
                           const FaAccumulator* resume) {
  require(problem.env && problem.env->action_set().kind() != ActionSet::Kind::Simplex,
          "pda_run_continuous needs a continuous action set");
  return pda_run_fa(problem, geom, schedule, eval, k_max, noise, rng, resume);
}

}  // namespace polopt
