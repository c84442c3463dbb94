#include "polopt/pmd.hpp"

#include "run_common.hpp"

namespace polopt {

using detail::reg_index;

PolicyTable pmd_step_exact(const TabularMdp& mdp, const PolicyTable& pi_k, const ValueFunctions& vals,
                           const BregmanGeometry& geom, const Regularizer& reg, double eta_k) {
  require(eta_k > 0, "PMD stepsize must be positive");
  require(pi_k.n_states() == mdp.n_states() && pi_k.n_actions() == mdp.n_actions(), "policy does not match the MDP");
  const ActionSet set = mdp.action_set();
  Mat next(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) {
    BregmanTerm t{1.0 / eta_k, pi_k.row(s)};
    next.row(s) = solve_prox(geom, set, reg, s, vals.Q.row(s).transpose(), 1.0, std::span<const BregmanTerm>(&t, 1))
                      .transpose();
  }
  return PolicyTable(std::move(next));
}

ExactTrace pmd_run_exact(const TabularMdp& mdp, const PolicyTable& pi_0, const BregmanGeometry& geom,
                         const Regularizer& reg, const PmdSchedule& schedule, int k_max, const ExactOptions& options) {
  require(k_max >= 0, "k_max must be nonnegative");
  if (k_max > schedule.horizon())
    throw ScheduleError(ScheduleRule::Parameter, k_max, k_max, schedule.horizon(), "k_max exceeds the schedule horizon");
  detail::Stopwatch clock;
  const Vec w = detail::exact_weighting(mdp, options);
  const std::vector<int> probes = detail::exact_probes(mdp, options);
  ExactTrace tr;
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
    PolicyTable next = pmd_step_exact(mdp, pi, vals, geom, reg, schedule.eta(k));
    ValueFunctions next_vals = evaluate_exact(mdp, next, reg);
    Vec neg = -advantage_along(vals, reg, pi, next);
    Vec probe_neg(static_cast<Eigen::Index>(probes.size()));
    for (std::size_t i = 0; i < probes.size(); ++i) probe_neg[static_cast<Eigen::Index>(i)] = neg[probes[i]];
    tr.neg_psi.push_back(probe_neg);
    best_neg_psi = std::min(best_neg_psi, probe_neg.mean());
    double inc = (next_vals.V - vals.V).maxCoeff();
    tr.max_value_increase = std::max(tr.max_value_increase, inc);
    tr.descent_slack = std::max(tr.descent_slack, inc);
    pi = std::move(next);
    vals = std::move(next_vals);
  }
  return tr;
}

Vec pmd_step_finite_fa(const QModel& model, const BregmanGeometry& geom, const Regularizer& reg, double eta_k,
                       const StatePoint& s) {
  require(eta_k > 0, "PMD stepsize must be positive");
  const int n = geom.action_dim();
  const ActionSet set = ActionSet::simplex(n);
  Vec L0 = model.q0(s, n);
  if (model.target == QModel::Target::AugmentedL) L0 -= model.grad_omega(s);
  BregmanTerm t{1.0 / eta_k, detail::omega_center(geom, set)};
  return solve_prox(geom, set, reg, reg_index(s), L0, 1.0, std::span<const BregmanTerm>(&t, 1));
}

Vec pmd_step_continuous_fa(const QModel& model, const BregmanGeometry& geom, const Regularizer& reg, double eta_k,
                           const StatePoint& s, const ActionSet& set) {
  require(eta_k > 0, "PMD stepsize must be positive");
  const double modulus = 1.0 / eta_k + reg.mu_h();
  require(modulus > 0, "PMD subproblem is not strongly convex");
  const int idx = reg_index(s);
  const bool aug = model.target == QModel::Target::AugmentedL;
  const Vec g = aug ? model.grad_omega(s) : Vec::Zero(set.dim());
  SmoothObjective obj;
  obj.modulus = modulus;
  obj.eval = [&](const Vec& a, Vec* grad) {
    double f = model.value(s, a) - g.dot(a) + geom.omega(a) / eta_k;
    if (reg.kind() != Regularizer::Kind::Null) f += reg.value(idx, a);
    if (grad) {
      *grad = model.action_gradient(s, a) - g + geom.grad_omega(a) / eta_k;
      if (reg.kind() != Regularizer::Kind::Null) *grad += reg.gradient(idx, a);
    }
    return f;
  };
  ProxOptions opt;
  opt.tol = 1e-7;
  opt.max_iter = 500;
  try {
    return prox_generic(obj, set, set.center(), opt);
  } catch (const ConvergenceFailure& e) {
    return e.best();
  }
}

namespace {

struct PmdPolicy {
  std::shared_ptr<const QModel> model;
  const Environment* env;
  BregmanGeometry geom;
  Regularizer reg;
  double eta;
  bool finite;
  ActionSet set;

  Vec operator()(const Vec& state) const {
    StatePoint p = state_point(*env, state);
    if (finite) return pmd_step_finite_fa(*model, geom, reg, eta, p);
    return pmd_step_continuous_fa(*model, geom, reg, eta, p, set);
  }
};

FaTrace pmd_run_fa(const FaProblem& problem, const StatePolicy& pi_0, const BregmanGeometry& geom,
                   const PmdSchedule& schedule, const EvalConfig& eval, int k_max, const ExplorationNoise& noise,
                   const Rng& rng) {
  require(k_max >= 0, "k_max must be nonnegative");
  if (k_max > schedule.horizon())
    throw ScheduleError(ScheduleRule::Parameter, k_max, k_max, schedule.horizon(), "k_max exceeds the schedule horizon");
  detail::Stopwatch clock;
  detail::FaDriver drv(problem, geom, eval, rng);
  const Environment& env = *problem.env;
  std::vector<StatePoint> probes;
  for (const auto& s : problem.probes) probes.push_back(state_point(env, s));

  FaTrace tr;
  StatePolicy pi = pi_0;
  std::shared_ptr<const QModel> prev_model;
  std::vector<Vec> probe_actions;
  for (const auto& s : problem.probes) probe_actions.push_back(pi(s));
  double best_res = std::numeric_limits<double>::infinity();

  for (int k = 0;; ++k) {
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
    drv.ensure_maps(data);
    const double eta = schedule.eta(k);
    auto model = std::make_shared<const QModel>(
        fit_augmented_L(data, pi, geom, eta, drv.fmap(), drv.state_map(), eval.ridge()));
    StatePolicy next = PmdPolicy{model, &env, geom, problem.reg, eta, drv.finite(), drv.set()};

    if (eval_now) {
      if (auto neg = drv.exact_neg_psi(pi, next)) best_res = std::min(best_res, *neg);
      drv.diagnose(row, k, pi, boot);
    }
    if (!probes.empty()) {
      Vec neg(static_cast<Eigen::Index>(probes.size())), div(static_cast<Eigen::Index>(probes.size()));
      for (std::size_t i = 0; i < probes.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        Vec a_next = next(problem.probes[i]);
        const Vec& a_k = probe_actions[i];
        const int idx = detail::reg_index(probes[i]);
        double psi = model->value(probes[i], a_next) - model->value(probes[i], a_k);
        if (problem.reg.kind() != Regularizer::Kind::Null)
          psi += problem.reg.value(idx, a_next) - problem.reg.value(idx, a_k);
        neg[j] = -psi;
        div[j] = geom.divergence(a_k, a_next) / eta;
        probe_actions[i] = a_next;
      }
      tr.neg_psi.push_back(neg);
      tr.div_terms.push_back(div);
      if (drv.problem().env->tabular() == nullptr) {
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
  return tr;
}

}  // namespace

FaTrace pmd_run_finite_fa(const FaProblem& problem, const StatePolicy& pi_0, const BregmanGeometry& geom,
                          const PmdSchedule& schedule, const EvalConfig& eval, int k_max, const Rng& rng) {
  require(problem.env && problem.env->action_set().kind() == ActionSet::Kind::Simplex,
          "pmd_run_finite_fa needs a finite action set");
  return pmd_run_fa(problem, pi_0, geom, schedule, eval, k_max, ExplorationNoise{}, rng);
}

FaTrace pmd_run_continuous(const FaProblem& problem, const StatePolicy& pi_0, const BregmanGeometry& geom,
                           const PmdSchedule& schedule, const EvalConfig& eval, int k_max,
                           const ExplorationNoise& noise, const Rng& rng) {
  require(problem.env && problem.env->action_set().kind() != ActionSet::Kind::Simplex,
          "pmd_run_continuous needs a continuous action set");
  return pmd_run_fa(problem, pi_0, geom, schedule, eval, k_max, noise, rng);
}

}  // namespace polopt
