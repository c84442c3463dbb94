#pragma once

#include <string>
#include <vector>

#include "polopt/common.hpp"

namespace polopt {

enum class ScheduleRule {
  // mu_d + 1/eta_k >= 0
  StepsizeCurvature,
  // beta_k / eta_k <= beta_{k-1} (mu_h + 1/eta_{k-1})
  WeightedStep,
  // mu_k = mu_d sum_{t<=k} beta_t + lambda_k >= 0
  DualModulus,
  // lambda_{k+1} >= lambda_k
  LambdaMonotone,
  // A parameter outside its admissible range (e.g. mu_h <= 0 for 1/t steps).
  Parameter,
};

std::string rule_name(ScheduleRule r);
std::string rule_inequality(ScheduleRule r);

class ScheduleError : public Error {
 public:
  ScheduleError(ScheduleRule rule, int k, double lhs, double rhs, const std::string& detail = "");
  ScheduleRule rule() const { return rule_; }
  int iteration() const { return k_; }
  double lhs() const { return lhs_; }
  double rhs() const { return rhs_; }

 private:
  ScheduleRule rule_;
  int k_;
  double lhs_, rhs_;
};

// Curvature constants. mu_Q is the weak convexity modulus of Q (or of the
// model Q-tilde), zero for tabular finite actions.
struct CurvatureSpec {
  double mu_Q = 0.0;
  double mu_h = 0.0;
  double M_Q = 0.0;
  double M_tilde_Q = 0.0;
  double mu_d() const { return mu_h - mu_Q; }
};

class PmdSchedule {
 public:
  enum class Kind { GeometricEta, ConstantEta, NonconvexEta, SqrtHorizon, InverseT, InverseTWeighted,
                    ContinuousNonconvex, Custom };

  // eta_k = gamma^{-k}
  static PmdSchedule geometric(double gamma, double mu_d, int horizon);
  static PmdSchedule constant(double eta, double mu_d, int horizon);
  // eta = 1 / (2 |mu_d|), mu_d < 0
  static PmdSchedule nonconvex(double mu_d, int horizon);
  // eta = sqrt(D0 / (k [(cbar/(1-gamma) + M_h)^2 + sigma2])), beta = 1
  static PmdSchedule sqrt_horizon(double D0, double cbar, double gamma, double M_h, double sigma2, double mu_d,
                                  double mu_h, int horizon);
  // eta_t = 1/(mu_h (t+1)), beta_t = 1
  static PmdSchedule inverse_t(double mu_h, double mu_d, int horizon);
  // eta_t = 2/(mu_h (t+1)), beta_t = t+2
  static PmdSchedule inverse_t_weighted(double mu_h, double mu_d, int horizon);
  // eta = min(|mu_tilde_d| / 2, 1/sqrt(k))
  static PmdSchedule continuous_nonconvex(double mu_tilde_d, int horizon);
  static PmdSchedule custom(std::vector<double> etas, std::vector<double> betas, double mu_d, double mu_h);

  Kind kind() const { return kind_; }
  std::string name() const;
  int horizon() const { return static_cast<int>(eta_.size()); }
  double eta(int k) const;
  double beta(int k) const;
  double mu_d() const { return mu_d_; }
  double mu_h() const { return mu_h_; }
  bool weighted() const { return weighted_; }

 private:
  PmdSchedule(Kind kind, std::vector<double> eta, std::vector<double> beta, double mu_d, double mu_h, bool weighted);
  void validate() const;

  Kind kind_;
  std::vector<double> eta_, beta_;
  double mu_d_, mu_h_;
  bool weighted_;
};

class PdaSchedule {
 public:
  enum class Kind { Geometric, LinearConstLambda, LinearPolyLambda, Nonconvex, Custom };

  // beta_k = gamma^{-k}, lambda_k = lambda
  static PdaSchedule geometric(double gamma, double lambda, double mu_d, double mu_h, int horizon);
  // beta_k = k+1, lambda_k = lambda (mu_h, or mu_tilde_d for continuous actions)
  static PdaSchedule linear_const(double lambda, double mu_d, double mu_h, int horizon);
  // beta_k = k+1, lambda_k = lambda (k+1)^{3/2}
  static PdaSchedule linear_poly(double lambda, double mu_d, double mu_h, int horizon);
  // beta_t = t+1, lambda = k(k+1)|mu_d| with k the horizon
  static PdaSchedule nonconvex(double mu_d, double mu_h, int horizon);
  static PdaSchedule custom(std::vector<double> betas, std::vector<double> lambdas, double mu_d, double mu_h);

  Kind kind() const { return kind_; }
  std::string name() const;
  int horizon() const { return static_cast<int>(beta_.size()); }
  double beta(int k) const;
  double lambda(int k) const;
  // sum_{t<=k} beta_t
  double beta_sum(int k) const;
  // mu_k = mu_d sum_{t<=k} beta_t + lambda_k; mu_{-1} = lambda_0.
  double modulus(int k) const;
  double mu_d() const { return mu_d_; }
  double mu_h() const { return mu_h_; }

 private:
  PdaSchedule(Kind kind, std::vector<double> beta, std::vector<double> lambda, double mu_d, double mu_h);
  void validate() const;

  Kind kind_;
  std::vector<double> beta_, lambda_, beta_sum_;
  double mu_d_, mu_h_;
};

}  // namespace polopt
