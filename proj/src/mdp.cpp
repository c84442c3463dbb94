#include "polopt/mdp.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <iostream>
#include <limits>
#include <memory>
#include <json.hpp>

namespace polopt {

namespace {

constexpr int kDenseLimit = 3000;

// Factorization of I - gamma * M, reused for both orientations.
class ResolventSolver {
 public:
  ResolventSolver(const SpMat& M, double gamma) : n_(M.rows()), gamma_(gamma), M_(M) {
    if (n_ <= kDenseLimit) {
      Mat A = Mat::Identity(n_, n_) - gamma * Mat(M);
      dense_ = std::make_unique<Eigen::PartialPivLU<Mat>>(A);
    } else {
      Eigen::SparseMatrix<double> A(n_, n_);
      A.setIdentity();
      A -= gamma * Eigen::SparseMatrix<double>(M);
      A.makeCompressed();
      sparse_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
      sparse_->compute(A);
      if (sparse_->info() != Eigen::Success) throw Error("sparse LU factorization failed");
    }
  }

  Vec solve(const Vec& b, bool transposed = false) const {
    Vec x = raw(b, transposed);
    // One step of iterative refinement.
    Vec r = b - apply(x, transposed);
    if (r.lpNorm<Eigen::Infinity>() > 1e-13 * std::max(1.0, b.lpNorm<Eigen::Infinity>())) x += raw(r, transposed);
    return x;
  }

  Mat solve_many(const Mat& B, bool transposed) const {
    Mat X(B.rows(), B.cols());
    for (Eigen::Index j = 0; j < B.cols(); ++j) X.col(j) = solve(B.col(j), transposed);
    return X;
  }

  Vec apply(const Vec& x, bool transposed) const {
    if (transposed) return x - gamma_ * (M_.transpose() * x);
    return x - gamma_ * (M_ * x);
  }

 private:
  Vec raw(const Vec& b, bool transposed) const {
    if (dense_) return transposed ? Vec(dense_->transpose().solve(b)) : Vec(dense_->solve(b));
    return transposed ? Vec(sparse_->transpose().solve(b)) : Vec(sparse_->solve(b));
  }

  Eigen::Index n_;
  double gamma_;
  const SpMat& M_;
  std::unique_ptr<Eigen::PartialPivLU<Mat>> dense_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> sparse_;
};

}  // namespace

// ---------------------------------------------------------------- TabularMdp

TabularMdp::TabularMdp(int n_states, int n_actions, double gamma, SpMat transition, Mat cost)
    : n_states_(n_states), n_actions_(n_actions), gamma_(gamma), P_(std::move(transition)), cost_(std::move(cost)) {
  require(n_states >= 1 && n_actions >= 1, "MDP needs at least one state and one action");
  require(gamma >= 0 && gamma < 1, "discount must lie in [0, 1)");
  require(P_.rows() == static_cast<Eigen::Index>(n_states) * n_actions && P_.cols() == n_states,
          "transition matrix must have shape (S*A) x S");
  require(cost_.rows() == n_states && cost_.cols() == n_actions, "cost matrix must be S x A");
  require(cost_.allFinite(), "costs must be finite");
  require(cost_.minCoeff() >= 0, "costs must be nonnegative");
  P_.makeCompressed();
  for (Eigen::Index r = 0; r < P_.rows(); ++r) {
    double sum = 0.0;
    for (SpMat::InnerIterator it(P_, r); it; ++it) {
      require(it.value() >= 0, "transition probabilities must be nonnegative");
      sum += it.value();
    }
    require(std::abs(sum - 1.0) <= 1e-12, "transition row " + std::to_string(r) + " does not sum to 1");
  }
  cbar_ = cost_.maxCoeff();
}

TabularMdp TabularMdp::from_dense(int n_states, int n_actions, double gamma, const std::vector<double>& transition,
                                  Mat cost) {
  const std::size_t rows = static_cast<std::size_t>(n_states) * n_actions;
  require(transition.size() == rows * n_states, "dense transition tensor has the wrong size");
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t r = 0; r < rows; ++r)
    for (int s2 = 0; s2 < n_states; ++s2) {
      double p = transition[r * n_states + s2];
      if (p != 0.0) trip.emplace_back(static_cast<int>(r), s2, p);
    }
  SpMat P(static_cast<Eigen::Index>(rows), n_states);
  P.setFromTriplets(trip.begin(), trip.end());
  return TabularMdp(n_states, n_actions, gamma, std::move(P), std::move(cost));
}

double TabularMdp::cost_bound(const Regularizer& reg) const { return cbar_ + reg.upper_bound(action_set()); }

std::string TabularMdp::to_json() const {
  nlohmann::ordered_json j;
  j["n_states"] = n_states_;
  j["n_actions"] = n_actions_;
  j["gamma"] = gamma_;
  std::vector<double> c;
  c.reserve(static_cast<std::size_t>(n_states_) * n_actions_);
  for (int s = 0; s < n_states_; ++s)
    for (int a = 0; a < n_actions_; ++a) c.push_back(cost_(s, a));
  j["cost"] = c;
  const double dense_size = static_cast<double>(P_.rows()) * n_states_;
  if (dense_size <= 1e6) {
    std::vector<double> t(static_cast<std::size_t>(dense_size), 0.0);
    for (Eigen::Index r = 0; r < P_.rows(); ++r)
      for (SpMat::InnerIterator it(P_, r); it; ++it) t[static_cast<std::size_t>(r) * n_states_ + it.col()] = it.value();
    j["transition"] = t;
  } else {
    // Large exports (the 10^4-state grid world) use triplets instead.
    std::vector<long long> rows, cols;
    std::vector<double> vals;
    for (Eigen::Index r = 0; r < P_.rows(); ++r)
      for (SpMat::InnerIterator it(P_, r); it; ++it) {
        rows.push_back(r);
        cols.push_back(it.col());
        vals.push_back(it.value());
      }
    j["transition_sparse"] = {{"rows", rows}, {"cols", cols}, {"values", vals}};
  }
  return j.dump();
}

TabularMdp TabularMdp::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("MDP JSON: ") + e.what());
  }
  try {
    int nS = j.at("n_states").get<int>();
    int nA = j.at("n_actions").get<int>();
    double gamma = j.at("gamma").get<double>();
    auto c = j.at("cost").get<std::vector<double>>();
    require(c.size() == static_cast<std::size_t>(nS) * nA, "MDP JSON: cost has the wrong length");
    Mat cost(nS, nA);
    for (int s = 0; s < nS; ++s)
      for (int a = 0; a < nA; ++a) cost(s, a) = c[static_cast<std::size_t>(s) * nA + a];
    if (j.contains("transition")) {
      return from_dense(nS, nA, gamma, j.at("transition").get<std::vector<double>>(), std::move(cost));
    }
    const auto& sp = j.at("transition_sparse");
    auto rows = sp.at("rows").get<std::vector<long long>>();
    auto cols = sp.at("cols").get<std::vector<long long>>();
    auto vals = sp.at("values").get<std::vector<double>>();
    require(rows.size() == cols.size() && cols.size() == vals.size(), "MDP JSON: sparse arrays differ in length");
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i] >= 0 && rows[i] < static_cast<long long>(nS) * nA && cols[i] >= 0 && cols[i] < nS,
              "MDP JSON: sparse index out of range");
      trip.emplace_back(static_cast<int>(rows[i]), static_cast<int>(cols[i]), vals[i]);
    }
    SpMat P(static_cast<Eigen::Index>(nS) * nA, nS);
    P.setFromTriplets(trip.begin(), trip.end());
    return TabularMdp(nS, nA, gamma, std::move(P), std::move(cost));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("MDP JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------- PolicyTable

PolicyTable::PolicyTable(Mat rows) : rows_(std::move(rows)) {
  require(rows_.rows() >= 1 && rows_.cols() >= 1, "policy table must be nonempty");
  require(rows_.allFinite(), "policy table has non-finite entries");
  for (Eigen::Index s = 0; s < rows_.rows(); ++s) {
    require(rows_.row(s).minCoeff() >= 0, "policy row " + std::to_string(s) + " has a negative entry");
    require(std::abs(rows_.row(s).sum() - 1.0) <= 1e-12, "policy row " + std::to_string(s) + " does not sum to 1");
  }
}

PolicyTable PolicyTable::uniform(int n_states, int n_actions) {
  return PolicyTable(Mat::Constant(n_states, n_actions, 1.0 / n_actions));
}

PolicyTable PolicyTable::deterministic(const std::vector<int>& actions, int n_actions) {
  Mat m = Mat::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
  for (std::size_t s = 0; s < actions.size(); ++s) {
    require(actions[s] >= 0 && actions[s] < n_actions, "deterministic policy: action out of range");
    m(static_cast<Eigen::Index>(s), actions[s]) = 1.0;
  }
  return PolicyTable(std::move(m));
}

// -------------------------------------------------------------- evaluation

namespace {
void check_pair(const TabularMdp& mdp, const PolicyTable& pi) {
  require(pi.n_states() == mdp.n_states() && pi.n_actions() == mdp.n_actions(),
          "policy shape does not match the MDP");
}
}  // namespace

SpMat policy_transition(const TabularMdp& mdp, const PolicyTable& pi) {
  check_pair(mdp, pi);
  const int nS = mdp.n_states(), nA = mdp.n_actions();
  const SpMat& P = mdp.transition();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(P.nonZeros()));
  for (int s = 0; s < nS; ++s)
    for (int a = 0; a < nA; ++a) {
      double w = pi.rows()(s, a);
      if (w == 0.0) continue;
      for (SpMat::InnerIterator it(P, s * nA + a); it; ++it) trip.emplace_back(s, static_cast<int>(it.col()), w * it.value());
    }
  SpMat M(nS, nS);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

Vec policy_cost(const TabularMdp& mdp, const PolicyTable& pi, const Regularizer& reg) {
  check_pair(mdp, pi);
  Vec c = mdp.cost().cwiseProduct(pi.rows()).rowwise().sum();
  if (reg.kind() != Regularizer::Kind::Null)
    for (int s = 0; s < mdp.n_states(); ++s) c[s] += reg.value(s, pi.row(s));
  return c;
}

ValueFunctions evaluate_exact(const TabularMdp& mdp, const PolicyTable& pi, const Regularizer& reg) {
  SpMat M = policy_transition(mdp, pi);
  const int nS = mdp.n_states(), nA = mdp.n_actions();
  Vec h = Vec::Zero(nS);
  if (reg.kind() != Regularizer::Kind::Null)
    for (int s = 0; s < nS; ++s) h[s] = reg.value(s, pi.row(s));
  Vec c = mdp.cost().cwiseProduct(pi.rows()).rowwise().sum() + h;
  const double gamma = mdp.gamma();
  if ((1.0 + gamma) / (1.0 - gamma) > 1e12)
    std::cerr << "warning: policy evaluation system is ill-conditioned (gamma = " << gamma << ")\n";
  ResolventSolver solver(M, gamma);
  ValueFunctions out;
  out.V = solver.solve(c);
  Vec PV = mdp.transition() * out.V;
  out.Q.resize(nS, nA);
  for (int s = 0; s < nS; ++s)
    for (int a = 0; a < nA; ++a) out.Q(s, a) = mdp.cost()(s, a) + h[s] + gamma * PV[s * nA + a];
  return out;
}

double advantage(const ValueFunctions& vals, const Regularizer& reg, const PolicyTable& pi, int s, const Vec& a) {
  require(s >= 0 && s < pi.n_states(), "advantage: state out of range");
  require(a.size() == pi.n_actions(), "advantage: action dimension mismatch");
  Vec p = pi.row(s);
  double psi = vals.Q.row(s).dot(a - p);
  if (reg.kind() != Regularizer::Kind::Null) psi += reg.value(s, a) - reg.value(s, p);
  return psi;
}

Vec advantage_along(const ValueFunctions& vals, const Regularizer& reg, const PolicyTable& pi,
                    const PolicyTable& other) {
  Vec out(pi.n_states());
  for (int s = 0; s < pi.n_states(); ++s) out[s] = advantage(vals, reg, pi, s, other.row(s));
  return out;
}

VisitationMeasure visitation(const TabularMdp& mdp, const PolicyTable& pi, int start) {
  require(start >= 0 && start < mdp.n_states(), "visitation: start state out of range");
  SpMat M = policy_transition(mdp, pi);
  ResolventSolver solver(M, mdp.gamma());
  Vec e = Vec::Zero(mdp.n_states());
  e[start] = 1.0;
  VisitationMeasure out;
  out.kappa = (1.0 - mdp.gamma()) * solver.solve(e, true);
  out.kappa = out.kappa.cwiseMax(0.0);
  out.start = start;
  return out;
}

Mat visitation_matrix(const TabularMdp& mdp, const PolicyTable& pi) {
  require(mdp.n_states() <= kDenseLimit, "visitation_matrix is limited to small MDPs");
  SpMat M = policy_transition(mdp, pi);
  ResolventSolver solver(M, mdp.gamma());
  Mat K = solver.solve_many(Mat::Identity(mdp.n_states(), mdp.n_states()), true);
  return ((1.0 - mdp.gamma()) * K.transpose()).cwiseMax(0.0);
}

double performance_difference(const TabularMdp& mdp, const PolicyTable& pi, const PolicyTable& pi_prime,
                              const Regularizer& reg, int s) {
  ValueFunctions vals = evaluate_exact(mdp, pi, reg);
  Vec psi = advantage_along(vals, reg, pi, pi_prime);
  VisitationMeasure k = visitation(mdp, pi_prime, s);
  return k.kappa.dot(psi) / (1.0 - mdp.gamma());
}

Vec stationary_distribution(const TabularMdp& mdp, const PolicyTable& pi) {
  SpMat M = policy_transition(mdp, pi);
  SpMat Mt = M.transpose();
  const int n = mdp.n_states();
  Vec nu = Vec::Constant(n, 1.0 / n);
  // Raw chain first, then the lazy chain (same fixed points, aperiodic), then
  // a chain damped toward uniform for reducible cases.
  struct Phase {
    double lazy;
    double damp;
    int iters;
  };
  const Phase phases[] = {{0.0, 0.0, 10000}, {0.5, 0.0, 100000}, {0.0, 1e-6, 890000}};
  for (const auto& ph : phases) {
    for (int it = 0; it < ph.iters; ++it) {
      Vec next = Mt * nu;
      double raw_res = (next - nu).lpNorm<1>();
      if (raw_res < 1e-13) return next / next.sum();
      if (ph.damp > 0) next = (1.0 - ph.damp) * next + Vec::Constant(n, ph.damp / n);
      next = ph.lazy * nu + (1.0 - ph.lazy) * next;
      next /= next.sum();
      if (ph.damp > 0 && (next - nu).lpNorm<1>() < 1e-13) return next;
      nu = std::move(next);
    }
  }
  throw Error("stationary distribution: power iteration did not converge");
}

double objective_f(const TabularMdp& mdp, const PolicyTable& pi, const Regularizer& reg, const Vec& weighting) {
  require(weighting.size() == mdp.n_states(), "objective: weighting has the wrong length");
  return weighting.dot(evaluate_exact(mdp, pi, reg).V);
}

double expected_divergence(const BregmanGeometry& geom, const PolicyTable& ref, const PolicyTable& pi,
                           const Vec& weighting) {
  double s = 0.0;
  for (int q = 0; q < pi.n_states(); ++q)
    if (weighting[q] > 0) s += weighting[q] * geom.divergence(ref.row(q), pi.row(q));
  return s;
}

// ------------------------------------------------------------------ oracles

double bellman_min(const Regularizer& reg, int s, const Vec& g, Vec* argmin) {
  const Eigen::Index n = g.size();
  auto vertex_min = [&]() {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (g[i] < g[best]) best = i;
    if (argmin) {
      *argmin = Vec::Zero(n);
      (*argmin)[best] = 1.0;
    }
    return g[best];
  };
  switch (reg.kind()) {
    case Regularizer::Kind::Null:
    case Regularizer::Kind::EntropyBonus:
      // Concave or zero regularizer: a vertex is optimal and h vanishes there.
      return vertex_min();
    case Regularizer::Kind::KlToAnchor: {
      const double w = reg.weight();
      if (w == 0.0) return vertex_min();
      Vec p = reg.anchor(s);
      double m = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i)
        if (p[i] > 0) m = std::min(m, g[i]);
      Vec e = Vec::Zero(n);
      double z = 0.0;
      for (Eigen::Index i = 0; i < n; ++i)
        if (p[i] > 0) {
          e[i] = p[i] * std::exp(-(g[i] - m) / w);
          z += e[i];
        }
      if (argmin) *argmin = e / z;
      return m - w * std::log(z);
    }
    case Regularizer::Kind::Quadratic: {
      Vec a = solve_prox(BregmanGeometry::euclidean(static_cast<int>(n)), ActionSet::simplex(static_cast<int>(n)),
                         reg, s, g, 1.0, {});
      if (argmin) *argmin = a;
      return g.dot(a) + reg.value(s, a);
    }
  }
  return vertex_min();
}

namespace {
Mat stage_matrix(const TabularMdp& mdp, const Vec& V) {
  const int nS = mdp.n_states(), nA = mdp.n_actions();
  Vec PV = mdp.transition() * V;
  Mat G(nS, nA);
  for (int s = 0; s < nS; ++s)
    for (int a = 0; a < nA; ++a) G(s, a) = mdp.cost()(s, a) + mdp.gamma() * PV[s * nA + a];
  return G;
}

PolicyTable greedy(const TabularMdp& mdp, const Regularizer& reg, const Mat& G) {
  Mat rows(mdp.n_states(), mdp.n_actions());
  Vec a;
  for (int s = 0; s < mdp.n_states(); ++s) {
    bellman_min(reg, s, G.row(s).transpose(), &a);
    rows.row(s) = a.transpose();
  }
  return PolicyTable(std::move(rows));
}
}  // namespace

Vec bellman_operator(const TabularMdp& mdp, const Regularizer& reg, const Vec& V) {
  Mat G = stage_matrix(mdp, V);
  Vec out(mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s) out[s] = bellman_min(reg, s, G.row(s).transpose(), nullptr);
  return out;
}

OptimalSolution value_iteration(const TabularMdp& mdp, const Regularizer& reg, double tol) {
  require(tol > 0, "value iteration tolerance must be positive");
  Vec V = Vec::Zero(mdp.n_states());
  double res = std::numeric_limits<double>::infinity();
  int iters = 0;
  const double coarse = std::max(tol, 1e-6);
  while (res > coarse && iters < 1000000) {
    Vec TV = bellman_operator(mdp, reg, V);
    res = (TV - V).lpNorm<Eigen::Infinity>();
    V = std::move(TV);
    ++iters;
  }
  // Polish with exact policy evaluation so V* is accurate to rounding.
  PolicyTable pi = greedy(mdp, reg, stage_matrix(mdp, V));
  OptimalSolution best{V, pi, res, iters};
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 200; ++k) {
    Vec Vpi = evaluate_exact(mdp, pi, reg).V;
    Mat G = stage_matrix(mdp, Vpi);
    Vec TV(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) TV[s] = bellman_min(reg, s, G.row(s).transpose(), nullptr);
    double r = (TV - Vpi).lpNorm<Eigen::Infinity>();
    ++iters;
    if (r < best.residual || k == 0) best = {Vpi, pi, r, iters};
    if (r <= tol || r >= 0.5 * prev) break;
    prev = r;
    pi = greedy(mdp, reg, G);
  }
  best.iterations = iters;
  return best;
}

PolicyTable policy_iteration_step(const TabularMdp& mdp, const PolicyTable& pi, const Regularizer& reg) {
  ValueFunctions vals = evaluate_exact(mdp, pi, reg);
  Mat G = stage_matrix(mdp, vals.V);
  return greedy(mdp, reg, G);
}

StationarityResidual stationarity_residual(const TabularMdp& mdp, const PolicyTable& pi_k, const PolicyTable& pi_next,
                                           const BregmanGeometry& geom, const ValueFunctions& vals,
                                           const Regularizer& reg, const std::vector<int>& probes) {
  check_pair(mdp, pi_k);
  check_pair(mdp, pi_next);
  const auto n = static_cast<Eigen::Index>(probes.size());
  StationarityResidual out;
  out.neg_advantage.resize(n);
  out.div_forward.resize(n);
  out.div_backward.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int s = probes[static_cast<std::size_t>(i)];
    Vec a = pi_k.row(s), b = pi_next.row(s);
    out.neg_advantage[i] = -advantage(vals, reg, pi_k, s, b);
    auto safe_div = [&](const Vec& r, const Vec& x) {
      try {
        return geom.divergence(r, x);
      } catch (const InvalidInput&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    out.div_forward[i] = safe_div(a, b);
    out.div_backward[i] = safe_div(b, a);
  }
  if (n > 0) {
    out.mean_neg_advantage = out.neg_advantage.mean();
    out.mean_div_forward = out.div_forward.mean();
    out.mean_div_backward = out.div_backward.mean();
  }
  return out;
}

}  // namespace polopt
