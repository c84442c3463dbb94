#include "polopt/schedule.hpp"

#include <cmath>
#include <sstream>

namespace polopt {

namespace {
constexpr double kRelTol = 1e-12;

bool leq(double lhs, double rhs) { return lhs <= rhs + kRelTol * std::max({1.0, std::abs(lhs), std::abs(rhs)}); }

void positive_horizon(int horizon) {
  if (horizon < 1) throw ScheduleError(ScheduleRule::Parameter, 0, horizon, 1, "horizon must be at least 1");
}
}  // namespace

std::string rule_name(ScheduleRule r) {
  switch (r) {
    case ScheduleRule::StepsizeCurvature: return "stepsize-curvature";
    case ScheduleRule::WeightedStep: return "weighted-step";
    case ScheduleRule::DualModulus: return "dual-modulus";
    case ScheduleRule::LambdaMonotone: return "lambda-monotone";
    case ScheduleRule::Parameter: return "parameter";
  }
  return "?";
}

std::string rule_inequality(ScheduleRule r) {
  switch (r) {
    case ScheduleRule::StepsizeCurvature: return "mu_d + 1/eta_k >= 0";
    case ScheduleRule::WeightedStep: return "beta_k/eta_k <= beta_{k-1} (mu_h + 1/eta_{k-1})";
    case ScheduleRule::DualModulus: return "mu_d * sum_{t<=k} beta_t + lambda_k >= 0";
    case ScheduleRule::LambdaMonotone: return "lambda_{k+1} >= lambda_k";
    case ScheduleRule::Parameter: return "parameter in admissible range";
  }
  return "?";
}

namespace {
std::string message(ScheduleRule rule, int k, double lhs, double rhs, const std::string& detail) {
  std::ostringstream os;
  os << "schedule violates " << rule_name(rule) << " [" << rule_inequality(rule) << "] at k=" << k << ": lhs=" << lhs
     << " rhs=" << rhs;
  if (!detail.empty()) os << " (" << detail << ")";
  return os.str();
}
}  // namespace

ScheduleError::ScheduleError(ScheduleRule rule, int k, double lhs, double rhs, const std::string& detail)
    : Error(message(rule, k, lhs, rhs, detail)), rule_(rule), k_(k), lhs_(lhs), rhs_(rhs) {}

// ---------------------------------------------------------------- PMD

PmdSchedule::PmdSchedule(Kind kind, std::vector<double> eta, std::vector<double> beta, double mu_d, double mu_h,
                         bool weighted)
    : kind_(kind), eta_(std::move(eta)), beta_(std::move(beta)), mu_d_(mu_d), mu_h_(mu_h), weighted_(weighted) {
  validate();
}

void PmdSchedule::validate() const {
  if (eta_.empty()) throw ScheduleError(ScheduleRule::Parameter, 0, 0, 1, "empty schedule");
  if (beta_.size() != eta_.size())
    throw ScheduleError(ScheduleRule::Parameter, 0, static_cast<double>(beta_.size()), static_cast<double>(eta_.size()),
                        "beta and eta sequences differ in length");
  for (int k = 0; k < horizon(); ++k) {
    if (!(eta_[k] > 0) || !std::isfinite(eta_[k]))
      throw ScheduleError(ScheduleRule::Parameter, k, eta_[k], 0, "eta_k must be positive and finite");
    if (!(beta_[k] > 0)) throw ScheduleError(ScheduleRule::Parameter, k, beta_[k], 0, "beta_k must be positive");
    double lhs = mu_d_ + 1.0 / eta_[k];
    if (!leq(0.0, lhs)) throw ScheduleError(ScheduleRule::StepsizeCurvature, k, lhs, 0.0);
  }
  if (weighted_) {
    for (int k = 1; k < horizon(); ++k) {
      double lhs = beta_[k] / eta_[k];
      double rhs = beta_[k - 1] * (mu_h_ + 1.0 / eta_[k - 1]);
      if (!leq(lhs, rhs)) throw ScheduleError(ScheduleRule::WeightedStep, k, lhs, rhs);
    }
  }
}

PmdSchedule PmdSchedule::geometric(double gamma, double mu_d, int horizon) {
  positive_horizon(horizon);
  if (!(gamma > 0 && gamma < 1)) throw ScheduleError(ScheduleRule::Parameter, 0, gamma, 1, "gamma must lie in (0,1)");
  std::vector<double> eta(static_cast<std::size_t>(horizon)), beta(eta.size(), 1.0);
  for (int k = 0; k < horizon; ++k) eta[k] = std::pow(gamma, -k);
  return PmdSchedule(Kind::GeometricEta, eta, beta, mu_d, 0.0, false);
}

PmdSchedule PmdSchedule::constant(double eta, double mu_d, int horizon) {
  positive_horizon(horizon);
  return PmdSchedule(Kind::ConstantEta, std::vector<double>(horizon, eta), std::vector<double>(horizon, 1.0), mu_d,
                     0.0, false);
}

PmdSchedule PmdSchedule::nonconvex(double mu_d, int horizon) {
  positive_horizon(horizon);
  if (!(mu_d < 0)) throw ScheduleError(ScheduleRule::Parameter, 0, mu_d, 0, "nonconvex stepsize needs mu_d < 0");
  double eta = 1.0 / (2.0 * std::abs(mu_d));
  return PmdSchedule(Kind::NonconvexEta, std::vector<double>(horizon, eta), std::vector<double>(horizon, 1.0), mu_d,
                     0.0, false);
}

PmdSchedule PmdSchedule::sqrt_horizon(double D0, double cbar, double gamma, double M_h, double sigma2, double mu_d,
                                      double mu_h, int horizon) {
  positive_horizon(horizon);
  if (!(D0 > 0)) throw ScheduleError(ScheduleRule::Parameter, 0, D0, 0, "D0 must be positive");
  double scale = std::pow(cbar / (1.0 - gamma) + M_h, 2) + sigma2;
  if (!(scale > 0)) throw ScheduleError(ScheduleRule::Parameter, 0, scale, 0, "cost scale must be positive");
  double eta = std::sqrt(D0 / (horizon * scale));
  return PmdSchedule(Kind::SqrtHorizon, std::vector<double>(horizon, eta), std::vector<double>(horizon, 1.0), mu_d,
                     mu_h, true);
}

PmdSchedule PmdSchedule::inverse_t(double mu_h, double mu_d, int horizon) {
  positive_horizon(horizon);
  if (!(mu_h > 0)) throw ScheduleError(ScheduleRule::Parameter, 0, mu_h, 0, "1/t stepsizes need mu_h > 0");
  std::vector<double> eta(static_cast<std::size_t>(horizon)), beta(eta.size(), 1.0);
  for (int t = 0; t < horizon; ++t) eta[t] = 1.0 / (mu_h * (t + 1));
  return PmdSchedule(Kind::InverseT, eta, beta, mu_d, mu_h, true);
}

PmdSchedule PmdSchedule::inverse_t_weighted(double mu_h, double mu_d, int horizon) {
  positive_horizon(horizon);
  if (!(mu_h > 0)) throw ScheduleError(ScheduleRule::Parameter, 0, mu_h, 0, "1/t stepsizes need mu_h > 0");
  std::vector<double> eta(static_cast<std::size_t>(horizon)), beta(eta.size());
  for (int t = 0; t < horizon; ++t) {
    eta[t] = 2.0 / (mu_h * (t + 1));
    beta[t] = t + 2.0;
  }
  return PmdSchedule(Kind::InverseTWeighted, eta, beta, mu_d, mu_h, true);
}

PmdSchedule PmdSchedule::continuous_nonconvex(double mu_tilde_d, int horizon) {
  positive_horizon(horizon);
  if (!(mu_tilde_d < 0))
    throw ScheduleError(ScheduleRule::Parameter, 0, mu_tilde_d, 0, "continuous nonconvex stepsize needs mu_d < 0");
  double eta = std::min(std::abs(mu_tilde_d) / 2.0, 1.0 / std::sqrt(static_cast<double>(horizon)));
  return PmdSchedule(Kind::ContinuousNonconvex, std::vector<double>(horizon, eta), std::vector<double>(horizon, 1.0),
                     mu_tilde_d, 0.0, false);
}

PmdSchedule PmdSchedule::custom(std::vector<double> etas, std::vector<double> betas, double mu_d, double mu_h) {
  if (betas.empty()) betas.assign(etas.size(), 1.0);
  bool weighted = false;
  for (double b : betas) weighted = weighted || b != 1.0;
  return PmdSchedule(Kind::Custom, std::move(etas), std::move(betas), mu_d, mu_h, weighted);
}

std::string PmdSchedule::name() const {
  switch (kind_) {
    case Kind::GeometricEta: return "geometric";
    case Kind::ConstantEta: return "constant";
    case Kind::NonconvexEta: return "nonconvex";
    case Kind::SqrtHorizon: return "sqrt-horizon";
    case Kind::InverseT: return "inverse-t";
    case Kind::InverseTWeighted: return "inverse-t-weighted";
    case Kind::ContinuousNonconvex: return "continuous-nonconvex";
    case Kind::Custom: return "custom";
  }
  return "?";
}

double PmdSchedule::eta(int k) const {
  require(k >= 0 && k < horizon(), "PMD schedule queried beyond its horizon");
  return eta_[k];
}

double PmdSchedule::beta(int k) const {
  require(k >= 0 && k < horizon(), "PMD schedule queried beyond its horizon");
  return beta_[k];
}

// ---------------------------------------------------------------- PDA

PdaSchedule::PdaSchedule(Kind kind, std::vector<double> beta, std::vector<double> lambda, double mu_d, double mu_h)
    : kind_(kind), beta_(std::move(beta)), lambda_(std::move(lambda)), mu_d_(mu_d), mu_h_(mu_h) {
  double acc = 0.0;
  for (double b : beta_) beta_sum_.push_back(acc += b);
  validate();
}

void PdaSchedule::validate() const {
  if (beta_.empty()) throw ScheduleError(ScheduleRule::Parameter, 0, 0, 1, "empty schedule");
  if (lambda_.size() != beta_.size())
    throw ScheduleError(ScheduleRule::Parameter, 0, static_cast<double>(lambda_.size()),
                        static_cast<double>(beta_.size()), "beta and lambda sequences differ in length");
  for (int k = 0; k < horizon(); ++k) {
    if (!(beta_[k] > 0) || !std::isfinite(beta_[k]))
      throw ScheduleError(ScheduleRule::Parameter, k, beta_[k], 0, "beta_k must be positive and finite");
    if (!(lambda_[k] >= 0)) throw ScheduleError(ScheduleRule::Parameter, k, lambda_[k], 0, "lambda_k must be >= 0");
    double mu_k = modulus(k);
    if (!leq(0.0, mu_k)) throw ScheduleError(ScheduleRule::DualModulus, k, mu_k, 0.0);
    // A zero modulus leaves the subproblem without a unique solution unless
    // the regularizer itself is strongly convex.
    if (mu_k <= 0 && !(mu_h_ > 0))
      throw ScheduleError(ScheduleRule::DualModulus, k, mu_k, 0.0, "zero modulus needs a strongly convex regularizer");
    if (k + 1 < horizon() && !leq(lambda_[k], lambda_[k + 1]))
      throw ScheduleError(ScheduleRule::LambdaMonotone, k, lambda_[k + 1], lambda_[k]);
  }
}

PdaSchedule PdaSchedule::geometric(double gamma, double lambda, double mu_d, double mu_h, int horizon) {
  positive_horizon(horizon);
  if (!(gamma > 0 && gamma < 1)) throw ScheduleError(ScheduleRule::Parameter, 0, gamma, 1, "gamma must lie in (0,1)");
  std::vector<double> b(static_cast<std::size_t>(horizon)), l(b.size(), lambda);
  for (int k = 0; k < horizon; ++k) b[k] = std::pow(gamma, -k);
  return PdaSchedule(Kind::Geometric, b, l, mu_d, mu_h);
}

PdaSchedule PdaSchedule::linear_const(double lambda, double mu_d, double mu_h, int horizon) {
  positive_horizon(horizon);
  std::vector<double> b(static_cast<std::size_t>(horizon)), l(b.size(), lambda);
  for (int k = 0; k < horizon; ++k) b[k] = k + 1.0;
  return PdaSchedule(Kind::LinearConstLambda, b, l, mu_d, mu_h);
}

PdaSchedule PdaSchedule::linear_poly(double lambda, double mu_d, double mu_h, int horizon) {
  positive_horizon(horizon);
  std::vector<double> b(static_cast<std::size_t>(horizon)), l(b.size());
  for (int k = 0; k < horizon; ++k) {
    b[k] = k + 1.0;
    l[k] = lambda * std::pow(k + 1.0, 1.5);
  }
  return PdaSchedule(Kind::LinearPolyLambda, b, l, mu_d, mu_h);
}

PdaSchedule PdaSchedule::nonconvex(double mu_d, double mu_h, int horizon) {
  positive_horizon(horizon);
  if (!(mu_d < 0)) throw ScheduleError(ScheduleRule::Parameter, 0, mu_d, 0, "nonconvex schedule needs mu_d < 0");
  const double lambda = static_cast<double>(horizon) * (horizon + 1) * std::abs(mu_d);
  std::vector<double> b(static_cast<std::size_t>(horizon)), l(b.size(), lambda);
  for (int k = 0; k < horizon; ++k) b[k] = k + 1.0;
  return PdaSchedule(Kind::Nonconvex, b, l, mu_d, mu_h);
}

PdaSchedule PdaSchedule::custom(std::vector<double> betas, std::vector<double> lambdas, double mu_d, double mu_h) {
  return PdaSchedule(Kind::Custom, std::move(betas), std::move(lambdas), mu_d, mu_h);
}

std::string PdaSchedule::name() const {
  switch (kind_) {
    case Kind::Geometric: return "geometric";
    case Kind::LinearConstLambda: return "linear-const";
    case Kind::LinearPolyLambda: return "linear-poly";
    case Kind::Nonconvex: return "nonconvex";
    case Kind::Custom: return "custom";
  }
  return "?";
}

double PdaSchedule::beta(int k) const {
  require(k >= 0 && k < horizon(), "PDA schedule queried beyond its horizon");
  return beta_[k];
}

double PdaSchedule::lambda(int k) const {
  if (k == -1) return lambda_.front();
  require(k >= 0 && k < horizon(), "PDA schedule queried beyond its horizon");
  return lambda_[k];
}

double PdaSchedule::beta_sum(int k) const {
  if (k < 0) return 0.0;
  require(k < horizon(), "PDA schedule queried beyond its horizon");
  return beta_sum_[k];
}

double PdaSchedule::modulus(int k) const { return mu_d_ * beta_sum(k) + lambda(k); }

}  // namespace polopt
