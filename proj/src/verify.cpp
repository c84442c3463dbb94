#include "polopt/verify.hpp"

#include <cmath>
#include <sstream>

#include "polopt/environments.hpp"
#include "polopt/pda.hpp"
#include "polopt/pmd.hpp"

namespace polopt {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

CheckResult check(std::string name, bool ok, std::string detail) { return {std::move(name), ok, std::move(detail)}; }

TabularMdp corpus_mdp(int i, double gamma) {
  Rng r(1000 + static_cast<std::uint64_t>(i), 0x636f7270ull);
  const int nS = 2 + static_cast<int>(r.below(14));
  const int nA = 2 + static_cast<int>(r.below(4));
  return random_tabular(nS, nA, gamma, 0.3 * r.uniform(), 1000 + static_cast<std::uint64_t>(i));
}

PolicyTable random_policy(int nS, int nA, Rng& r) {
  Mat P(nS, nA);
  for (int s = 0; s < nS; ++s) {
    for (int a = 0; a < nA; ++a) P(s, a) = -std::log(r.uniform() + 1e-300);
    P.row(s) /= P.row(s).sum();
  }
  return PolicyTable(P);
}

std::vector<CheckResult> identities() {
  std::vector<CheckResult> out;
  const double gammas[] = {0.5, 0.9, 0.99};
  double pd = 0.0, mono = 0.0, bellman = 0.0;
  for (int i = 0; i < 15; ++i) {
    const double g = gammas[i % 3];
    TabularMdp mdp = corpus_mdp(i, g);
    Rng r(static_cast<std::uint64_t>(i), 0x6964ull);
    PolicyTable pi = random_policy(mdp.n_states(), mdp.n_actions(), r);
    PolicyTable pj = random_policy(mdp.n_states(), mdp.n_actions(), r);
    Regularizer reg = Regularizer::none();
    Vec Vi = evaluate_exact(mdp, pi, reg).V, Vj = evaluate_exact(mdp, pj, reg).V;
    for (int s = 0; s < mdp.n_states(); ++s)
      pd = std::max(pd, std::abs((Vj[s] - Vi[s]) - performance_difference(mdp, pi, pj, reg, s)));
    OptimalSolution opt = value_iteration(mdp, reg);
    Vec nu = stationary_distribution(mdp, opt.pi);
    ValueFunctions vals = evaluate_exact(mdp, pi, reg);
    double lhs = -nu.dot(advantage_along(vals, reg, pi, opt.pi));
    double rhs = (1 - g) * nu.dot(vals.V - opt.V);
    mono = std::max(mono, std::abs(lhs - rhs));
    bellman = std::max(bellman, (bellman_operator(mdp, reg, opt.V) - opt.V).lpNorm<Eigen::Infinity>());
  }
  out.push_back(check("performance-difference", pd <= 1e-9, "max |lhs-rhs| = " + fmt(pd)));
  out.push_back(check("monotonicity", mono <= 1e-9, "max |lhs-rhs| = " + fmt(mono)));
  out.push_back(check("bellman-fixed-point", bellman <= 1e-8, "max residual = " + fmt(bellman)));

  // Three-point inequality of the entropy prox step.
  double worst = -1.0;
  Rng r(7, 0x7470ull);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + static_cast<int>(r.below(5));
    Vec g(n), ref(n);
    for (int i = 0; i < n; ++i) g[i] = 4 * r.uniform() - 2;
    for (int i = 0; i < n; ++i) ref[i] = r.uniform() + 0.05;
    ref /= ref.sum();
    const double eta = 0.1 + 3 * r.uniform();
    BregmanGeometry geom = BregmanGeometry::entropy(n);
    Vec p = prox_simplex_entropy(g, Regularizer::none(), 0, eta, ref);
    auto obj = [&](const Vec& a) { return g.dot(a) + geom.divergence(ref, a) / eta; };
    for (int k = 0; k < 20; ++k) {
      Vec a = ActionSet::simplex(n).sample(r);
      a = 0.5 * a + 0.5 * Vec::Constant(n, 1.0 / n);
      worst = std::max(worst, obj(p) + geom.divergence(p, a) / eta - obj(a));
    }
  }
  out.push_back(check("three-point", worst <= 1e-8, "max slack = " + fmt(worst)));

  // One PDA step from pi_0 equals one PMD step with eta = 1/lambda.
  {
    TabularMdp mdp = corpus_mdp(3, 0.9);
    BregmanGeometry geom = BregmanGeometry::entropy(mdp.n_actions());
    Regularizer reg = Regularizer::none();
    PolicyTable pi0 = PolicyTable::uniform(mdp.n_states(), mdp.n_actions());
    ValueFunctions v0 = evaluate_exact(mdp, pi0, reg);
    const double lambda = 2.5;
    PolicyTable a = pmd_step_exact(mdp, pi0, v0, geom, reg, 1.0 / lambda);
    PdaSchedule sch = PdaSchedule::linear_const(lambda, 0.0, 0.0, 1);
    PdaStep b = pda_step_exact(mdp, DualAccumulator(pi0), v0, sch, 0, geom, reg);
    double tv = 0.5 * (a.rows() - b.pi.rows()).cwiseAbs().rowwise().sum().maxCoeff();
    out.push_back(check("pda-first-step-equals-pmd", tv < 1e-9, "total variation = " + fmt(tv)));
  }

  // Linearity of the shared-feature accumulator.
  {
    auto fmap = std::make_shared<const FeatureMap>(
        FeatureMap::kernel(Mat::Random(10, 5), 40, 1.0, 3, 1.0, 3));
    PdaSchedule sch = PdaSchedule::linear_const(1.0, 0.0, 0.0, 6);
    FaAccumulator acc(fmap, Vec::Constant(3, 1.0 / 3));
    std::vector<QModel> models;
    Rng rr(11, 0x6c696eull);
    for (int k = 0; k < 6; ++k) {
      Vec th(fmap->size());
      for (Eigen::Index j = 0; j < th.size(); ++j) th[j] = rr.normal();
      models.emplace_back(fmap, th);
      acc = pda_accumulate(acc, models.back(), sch, k);
    }
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      StatePoint s{Vec::Random(2), -1};
      Vec a = ActionSet::simplex(3).sample(rr);
      double sum = 0.0;
      for (int k = 0; k < 6; ++k) sum += sch.beta(k) * models[static_cast<std::size_t>(k)].value(s, a);
      err = std::max(err, std::abs(sum - acc.model().value(s, a)));
    }
    out.push_back(check("accumulator-linearity", err <= 1e-10, "max error = " + fmt(err)));
  }
  return out;
}

std::vector<CheckResult> rates() {
  std::vector<CheckResult> out;
  double pmd_slack = 1e300, pda_slack = 1e300, pi_ratio = 0.0, descent = -1e300;
  double final_gap = 0.0;
  for (int i = 0; i < 5; ++i) {
    TabularMdp mdp = corpus_mdp(100 + i, 0.9);
    const int K = 150;
    BregmanGeometry geom = BregmanGeometry::entropy(mdp.n_actions());
    Regularizer none = Regularizer::none();
    OptimalSolution opt = value_iteration(mdp, none);
    ExactOptions eo;
    eo.oracle = &opt;
    eo.keep_history = false;
    PolicyTable pi0 = PolicyTable::uniform(mdp.n_states(), mdp.n_actions());
    ExactTrace pmd = pmd_run_exact(mdp, pi0, geom, none, PmdSchedule::geometric(0.9, 0.0, K), K, eo);
    const double g0 = pmd.rows[0].gap, D0 = pmd.rows[0].D_to_opt;
    for (int k = 1; k <= K; ++k) {
      const double bound = std::pow(0.9, k) * g0 + std::pow(0.9, k - 1) * D0;
      pmd_slack = std::min(pmd_slack, bound - pmd.rows[static_cast<std::size_t>(k)].gap);
    }
    final_gap = std::max(final_gap, pmd.rows.back().gap);
    descent = std::max(descent, pmd.max_value_increase);

    Regularizer kl = Regularizer::kl_to_anchor(0.05, Vec::Constant(mdp.n_actions(), 1.0 / mdp.n_actions()).transpose());
    OptimalSolution opt_kl = value_iteration(mdp, kl);
    ExactOptions ek;
    ek.oracle = &opt_kl;
    ek.keep_history = false;
    ExactTrace pda = pda_run_exact(mdp, pi0, geom, kl, PdaSchedule::geometric(0.9, 0.0, kl.mu_h(), kl.mu_h(), K), K, ek);
    for (int k = 0; k <= K; ++k)
      pda_slack = std::min(pda_slack, std::pow(0.9, k) * pda.rows[0].gap + 1e-8 - pda.rows[static_cast<std::size_t>(k)].gap);
    descent = std::max(descent, pda.max_value_increase);

    PolicyTable pi = pi0;
    Vec nu = stationary_distribution(mdp, opt.pi);
    double prev = nu.dot(evaluate_exact(mdp, pi, none).V - opt.V);
    for (int k = 0; k < 30 && prev > 1e-10; ++k) {
      pi = policy_iteration_step(mdp, pi, none);
      double cur = nu.dot(evaluate_exact(mdp, pi, none).V - opt.V);
      pi_ratio = std::max(pi_ratio, cur / prev);
      prev = cur;
    }
  }
  out.push_back(check("pmd-linear-rate", pmd_slack >= -1e-8 && final_gap <= 1e-6,
                      "min slack = " + fmt(pmd_slack) + ", final gap = " + fmt(final_gap)));
  out.push_back(check("pda-linear-rate", pda_slack >= 0, "min slack = " + fmt(pda_slack)));
  out.push_back(check("policy-iteration-contraction", pi_ratio <= 0.9 + 1e-6, "max ratio = " + fmt(pi_ratio)));
  out.push_back(check("exact-descent", descent <= 1e-10, "max V increase = " + fmt(descent)));

  // Schedules that break their rules are refused.
  bool refused = true;
  try {
    PmdSchedule::constant(4.0, -0.5, 10);
    refused = false;
  } catch (const ScheduleError& e) {
    refused = refused && e.rule() == ScheduleRule::StepsizeCurvature;
  }
  try {
    PdaSchedule::custom({1, 2, 3}, {3, 2, 1}, 0.0, 0.0);
    refused = false;
  } catch (const ScheduleError& e) {
    refused = refused && e.rule() == ScheduleRule::LambdaMonotone;
  }
  out.push_back(check("schedule-gates", refused, refused ? "violations rejected" : "a violation was accepted"));
  return out;
}

std::vector<CheckResult> fa_errors() {
  std::vector<CheckResult> out;
  // Tabular one-hot features with exact targets reproduce exact mode.
  {
    auto mdp = std::make_shared<const TabularMdp>(random_tabular(5, 3, 0.9, 0.0, 42));
    TabularEnv env(mdp);
    BregmanGeometry geom = BregmanGeometry::entropy(3);
    Regularizer reg = Regularizer::none();
    const int K = 20;
    ExactOptions eo;
    eo.weighting = env.reset_distribution();
    PolicyTable pi0 = PolicyTable::uniform(5, 3);
    ExactTrace ex = pmd_run_exact(*mdp, pi0, geom, reg, PmdSchedule::constant(1.0, 0.0, K), K, eo);
    FaProblem prob;
    prob.env = &env;
    prob.reg = reg;
    EvalConfig ev;
    ev.targets = EvalConfig::Targets::Exact;
    ev.features.kind = FeatureSpec::Kind::Tabular;
    ev.ridge_lambda = 1e-13;
    Vec u = Vec::Constant(3, 1.0 / 3);
    FaTrace fa = pmd_run_finite_fa(prob, [u](const Vec&) { return u; }, geom, PmdSchedule::constant(1.0, 0.0, K), ev, K,
                                   Rng(0, 0));
    double err = 0.0;
    for (int k = 0; k <= K; ++k) err = std::max(err, std::abs(fa.rows[static_cast<std::size_t>(k)].f - ex.rows[static_cast<std::size_t>(k)].f));
    out.push_back(check("fa-oracle-equivalence", err <= 1e-8, "max |f_fa - f_exact| = " + fmt(err)));
  }
  // Ridge error on a smooth target falls with the sample size.
  {
    auto target = [](const Vec& z) { return std::sin(3 * z[0]) * std::cos(2 * z[1]); };
    auto mse_at = [&](int N) {
      Rng r(5, static_cast<std::uint64_t>(N));
      Mat Z(N, 2);
      Vec y(N);
      for (int i = 0; i < N; ++i) {
        Z(i, 0) = r.uniform();
        Z(i, 1) = r.uniform();
        y[i] = target(Z.row(i).transpose()) + 0.1 * r.normal();
      }
      const int m = static_cast<int>(std::ceil(std::sqrt(N) * std::log(N)));
      FeatureMap fm = FeatureMap::kernel(Z.topRows(std::min(m, N)), m, 0.5, 9, 1.0, 0);
      std::vector<StatePoint> pts;
      std::vector<Vec> none(static_cast<std::size_t>(N));
      for (int i = 0; i < N; ++i) pts.push_back({Z.row(i).transpose(), -1});
      Vec th = ridge_solve(fm.features_batch(pts, none), y, 1e-3 * N).col(0);
      QModel model(std::make_shared<const FeatureMap>(fm), th);
      double mse = 0.0;
      for (int i = 0; i < 500; ++i) {
        Vec z(2);
        z << r.uniform(), r.uniform();
        const double d = model.value({z, -1}, Vec()) - target(z);
        mse += d * d / 500;
      }
      return mse;
    };
    double a = mse_at(128), b = mse_at(1024);
    out.push_back(check("ridge-error-trend", b < a, "mse(128) = " + fmt(a) + ", mse(1024) = " + fmt(b)));
  }
  return out;
}

}  // namespace

std::vector<CheckResult> verify(const std::string& suite) {
  std::vector<CheckResult> out;
  auto add = [&](std::vector<CheckResult> v) { out.insert(out.end(), v.begin(), v.end()); };
  if (suite == "identities") add(identities());
  else if (suite == "rates") add(rates());
  else if (suite == "fa-errors") add(fa_errors());
  else if (suite == "all") {
    add(identities());
    add(rates());
    add(fa_errors());
  } else {
    throw InvalidInput("unknown suite '" + suite + "' (identities, rates, fa-errors, all)");
  }
  return out;
}

bool print_report(std::ostream& out, const std::vector<CheckResult>& checks) {
  bool all = true;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    all = all && c.passed;
  }
  out << (all ? "all checks passed" : "some checks failed") << '\n';
  return all;
}

}  // namespace polopt
