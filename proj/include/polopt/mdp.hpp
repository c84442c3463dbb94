#pragma once

#include <Eigen/SparseCore>
#include <string>
#include <vector>

#include "polopt/common.hpp"
#include "polopt/geometry.hpp"

namespace polopt {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Finite MDP. Transitions are stored sparsely with one row per (s, a) pair,
// row index s * n_actions + a.
class TabularMdp {
 public:
  TabularMdp(int n_states, int n_actions, double gamma, SpMat transition, Mat cost);
  // transition given row-major as [s][a][s'].
  static TabularMdp from_dense(int n_states, int n_actions, double gamma,
                               const std::vector<double>& transition, Mat cost);

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }
  double gamma() const { return gamma_; }
  const SpMat& transition() const { return P_; }
  const Mat& cost() const { return cost_; }
  // Largest stage cost; add the regularizer's bound to get c-bar.
  double cost_bound() const { return cbar_; }
  double cost_bound(const Regularizer& reg) const;
  double prob(int s, int a, int s_next) const { return P_.coeff(s * n_actions_ + a, s_next); }
  ActionSet action_set() const { return ActionSet::simplex(n_actions_); }

  std::string to_json() const;
  static TabularMdp from_json(const std::string& text);

 private:
  int n_states_;
  int n_actions_;
  double gamma_;
  SpMat P_;
  Mat cost_;
  double cbar_;
};

class PolicyTable {
 public:
  explicit PolicyTable(Mat rows);
  static PolicyTable uniform(int n_states, int n_actions);
  static PolicyTable deterministic(const std::vector<int>& actions, int n_actions);

  int n_states() const { return static_cast<int>(rows_.rows()); }
  int n_actions() const { return static_cast<int>(rows_.cols()); }
  const Mat& rows() const { return rows_; }
  Vec row(int s) const { return rows_.row(s).transpose(); }

 private:
  Mat rows_;
};

struct ValueFunctions {
  Vec V;
  // Q_0(s, i) = c(s, i) + h^{pi(s)}(s) + gamma sum_s' P(s'|s,i) V(s').
  Mat Q;
};

struct VisitationMeasure {
  Vec kappa;
  int start = 0;
};

// State transition matrix and stage cost under pi.
SpMat policy_transition(const TabularMdp& mdp, const PolicyTable& pi);
Vec policy_cost(const TabularMdp& mdp, const PolicyTable& pi, const Regularizer& reg);

ValueFunctions evaluate_exact(const TabularMdp& mdp, const PolicyTable& pi, const Regularizer& reg);

// psi^pi(s, a) = <Q_0(s), a - pi(s)> + h^a(s) - h^{pi(s)}(s).
double advantage(const ValueFunctions& vals, const Regularizer& reg, const PolicyTable& pi, int s,
                 const Vec& a);
// psi^pi(s, other(s)) for every state.
Vec advantage_along(const ValueFunctions& vals, const Regularizer& reg, const PolicyTable& pi,
                    const PolicyTable& other);

VisitationMeasure visitation(const TabularMdp& mdp, const PolicyTable& pi, int start);
// All starts at once: row s is kappa_s.
Mat visitation_matrix(const TabularMdp& mdp, const PolicyTable& pi);

// (1/(1-gamma)) sum_q kappa_s^{pi'}(q) psi^pi(q, pi'(q)).
double performance_difference(const TabularMdp& mdp, const PolicyTable& pi, const PolicyTable& pi_prime,
                              const Regularizer& reg, int s);

Vec stationary_distribution(const TabularMdp& mdp, const PolicyTable& pi);

double objective_f(const TabularMdp& mdp, const PolicyTable& pi, const Regularizer& reg, const Vec& weighting);

// E_{s~weighting} D(ref(s), pi(s)).
double expected_divergence(const BregmanGeometry& geom, const PolicyTable& ref, const PolicyTable& pi,
                           const Vec& weighting);

struct OptimalSolution {
  Vec V;
  PolicyTable pi;
  double residual = 0.0;
  int iterations = 0;
};

// Per-state minimizer of <g, a> + h^a(s) over the simplex. Returns the value.
double bellman_min(const Regularizer& reg, int s, const Vec& g, Vec* argmin);

// Bellman operator applied to V.
Vec bellman_operator(const TabularMdp& mdp, const Regularizer& reg, const Vec& V);

OptimalSolution value_iteration(const TabularMdp& mdp, const Regularizer& reg, double tol = 1e-12);

PolicyTable policy_iteration_step(const TabularMdp& mdp, const PolicyTable& pi, const Regularizer& reg);

struct StationarityResidual {
  Vec neg_advantage;  // -psi^{pi_k}(s, pi_next(s)) per probe state
  Vec div_forward;    // D(pi_k(s), pi_next(s))
  Vec div_backward;   // D(pi_next(s), pi_k(s))
  double mean_neg_advantage = 0.0;
  double mean_div_forward = 0.0;
  double mean_div_backward = 0.0;
};

StationarityResidual stationarity_residual(const TabularMdp& mdp, const PolicyTable& pi_k,
                                           const PolicyTable& pi_next, const BregmanGeometry& geom,
                                           const ValueFunctions& vals, const Regularizer& reg,
                                           const std::vector<int>& probes);

}  // namespace polopt
