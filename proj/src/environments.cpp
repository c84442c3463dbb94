#include "polopt/environments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace polopt {

Vec sample_vertex(const Vec& p, Rng& rng) {
  const Eigen::Index n = p.size();
  double u = rng.uniform() * p.sum();
  Eigen::Index pick = n - 1;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += p[i];
    if (u < acc) {
      pick = i;
      break;
    }
  }
  // Never land on a zero-probability action because of rounding.
  while (p[pick] <= 0 && pick > 0) --pick;
  Vec e = Vec::Zero(n);
  e[pick] = 1.0;
  return e;
}

namespace {
int vertex_index(const Vec& a) {
  Eigen::Index i;
  a.maxCoeff(&i);
  require(std::abs(a[i] - 1.0) <= 1e-12, "finite-action environments expect a simplex vertex");
  return static_cast<int>(i);
}
}  // namespace

// ---------------------------------------------------------------- tabular

TabularEnv::TabularEnv(std::shared_ptr<const TabularMdp> mdp, Vec initial)
    : mdp_(std::move(mdp)), initial_(std::move(initial)), actions_(ActionSet::simplex(mdp_->n_actions())) {
  if (initial_.size() == 0) initial_ = Vec::Constant(mdp_->n_states(), 1.0 / mdp_->n_states());
  require(initial_.size() == mdp_->n_states() && initial_.minCoeff() >= 0 &&
              std::abs(initial_.sum() - 1.0) <= 1e-10,
          "initial distribution must be a probability vector over states");
}

Vec TabularEnv::reset(Rng& rng) const {
  Vec e = sample_vertex(initial_, rng);
  Eigen::Index s;
  e.maxCoeff(&s);
  return Vec::Constant(1, static_cast<double>(s));
}

Transition TabularEnv::step(const Vec& s, const Vec& a, Rng& rng) const {
  const int si = static_cast<int>(s[0]);
  const int ai = vertex_index(a);
  const int row = si * mdp_->n_actions() + ai;
  double u = rng.uniform();
  double acc = 0.0;
  int next = -1;
  for (SpMat::InnerIterator it(mdp_->transition(), row); it; ++it) {
    acc += it.value();
    next = static_cast<int>(it.col());
    if (u < acc) break;
  }
  return {Vec::Constant(1, next), mdp_->cost()(si, ai), false};
}

Vec TabularEnv::features(const Vec& s) const {
  Vec e = Vec::Zero(mdp_->n_states());
  e[static_cast<Eigen::Index>(s[0])] = 1.0;
  return e;
}

TabularMdp random_tabular(int n_states, int n_actions, double gamma, double sparsity, std::uint64_t seed) {
  require(sparsity >= 0 && sparsity < 1, "sparsity must lie in [0, 1)");
  Rng rng(seed, 0x7461626c65ull);
  const std::size_t rows = static_cast<std::size_t>(n_states) * n_actions;
  std::vector<double> t(rows * n_states);
  for (std::size_t r = 0; r < rows; ++r) {
    double* p = &t[r * n_states];
    int keep = 0;
    for (int j = 0; j < n_states; ++j) {
      // Exp(1) draws normalized give a Dirichlet(1) row.
      p[j] = -std::log(1.0 - rng.uniform());
      if (p[j] > p[keep]) keep = j;
    }
    if (sparsity > 0)
      for (int j = 0; j < n_states; ++j)
        if (j != keep && rng.uniform() < sparsity) p[j] = 0.0;
    double sum = 0.0;
    for (int j = 0; j < n_states; ++j) sum += p[j];
    for (int j = 0; j < n_states; ++j) p[j] = (1.0 - 1e-3) * p[j] / sum + 1e-3 / n_states;
    // Renormalize once more so the row sums to 1 to rounding.
    sum = 0.0;
    for (int j = 0; j < n_states; ++j) sum += p[j];
    for (int j = 0; j < n_states; ++j) p[j] /= sum;
  }
  Mat cost(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) cost(s, a) = rng.uniform();
  return TabularMdp::from_dense(n_states, n_actions, gamma, t, std::move(cost));
}

// ---------------------------------------------------------------- grid world

GridWorld::GridWorld(GridWorldSpec spec, double gamma)
    : spec_(spec), gamma_(gamma), actions_(ActionSet::simplex(4)) {
  require(spec_.width >= 1 && spec_.height >= 1, "grid dimensions must be positive");
  require(gamma >= 0 && gamma < 1, "discount must lie in [0, 1)");
  const int cells = spec_.width * spec_.height;
  require(spec_.n_traps >= 0 && spec_.n_traps <= cells - 2, "too many traps for the grid");
  require(spec_.step_cost >= 0 && spec_.trap_cost >= 0, "grid costs must be nonnegative");
  trap_.assign(static_cast<std::size_t>(cells), false);
  // Trap layout depends only on the environment seed.
  Rng rng(spec_.env_seed, 0x67726964ull);
  int placed = 0;
  while (placed < spec_.n_traps) {
    auto c = rng.below(static_cast<std::uint64_t>(cells));
    if (!trap_[c]) {
      trap_[c] = true;
      ++placed;
    }
  }
}

int GridWorld::move(int c, int action) const {
  int x = c / spec_.height, y = c % spec_.height;
  switch (action) {
    case 0: y = std::min(y + 1, spec_.height - 1); break;
    case 1: y = std::max(y - 1, 0); break;
    case 2: x = std::max(x - 1, 0); break;
    case 3: x = std::min(x + 1, spec_.width - 1); break;
    default: throw InvalidInput("grid world: action index out of range");
  }
  return cell(x, y);
}

double GridWorld::landing_cost(int next, int target) const {
  double c = spec_.step_cost;
  if (next != target && trap_[static_cast<std::size_t>(next)]) c += spec_.trap_cost;
  return c;
}

Vec GridWorld::reset(Rng& rng) const {
  const int cells = spec_.width * spec_.height;
  int target;
  do {
    target = static_cast<int>(rng.below(static_cast<std::uint64_t>(cells)));
  } while (trap_[static_cast<std::size_t>(target)]);
  int agent;
  do {
    agent = static_cast<int>(rng.below(static_cast<std::uint64_t>(cells)));
  } while (agent == target);
  Vec s(4);
  s << agent / spec_.height, agent % spec_.height, target / spec_.height, target % spec_.height;
  return s;
}

Transition GridWorld::step(const Vec& s, const Vec& a, Rng&) const {
  const int agent = cell(static_cast<int>(s[0]), static_cast<int>(s[1]));
  const int target = cell(static_cast<int>(s[2]), static_cast<int>(s[3]));
  if (agent == target) return {s, 0.0, true};
  const int next = move(agent, vertex_index(a));
  Vec n = s;
  n[0] = next / spec_.height;
  n[1] = next % spec_.height;
  return {n, landing_cost(next, target), next == target};
}

Vec GridWorld::features(const Vec& s) const {
  const double scale = 1.0 / std::max(spec_.width, spec_.height);
  Vec f(4);
  const double pw = spec_.position_weight * scale;
  f << (s[0] - s[2]) * scale, (s[1] - s[3]) * scale, s[0] * pw, s[1] * pw;
  return f;
}

bool GridWorld::is_absorbing(const Vec& s) const { return s[0] == s[2] && s[1] == s[3]; }

int GridWorld::state_index(const Vec& s) const {
  const int cells = spec_.width * spec_.height;
  return cell(static_cast<int>(s[0]), static_cast<int>(s[1])) * cells +
         cell(static_cast<int>(s[2]), static_cast<int>(s[3]));
}

Vec GridWorld::state_of(int index) const {
  const int cells = spec_.width * spec_.height;
  int agent = index / cells, target = index % cells;
  Vec s(4);
  s << agent / spec_.height, agent % spec_.height, target / spec_.height, target % spec_.height;
  return s;
}

const TabularMdp* GridWorld::tabular() const {
  if (!tabular_) tabular_ = std::make_shared<const TabularMdp>(gridworld_to_tabular(spec_, gamma_));
  return tabular_.get();
}

Vec GridWorld::reset_distribution() const {
  const int cells = spec_.width * spec_.height;
  Vec d = Vec::Zero(static_cast<Eigen::Index>(cells) * cells);
  for (int t = 0; t < cells; ++t) {
    if (trap_[static_cast<std::size_t>(t)]) continue;
    for (int ag = 0; ag < cells; ++ag)
      if (ag != t) d[static_cast<Eigen::Index>(ag) * cells + t] = 1.0;
  }
  return d / d.sum();
}

TabularMdp gridworld_to_tabular(const GridWorldSpec& spec, double gamma) {
  GridWorld g(spec, gamma);
  const int cells = spec.width * spec.height;
  const int nS = cells * cells;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(nS) * 4);
  Mat cost = Mat::Zero(nS, 4);
  for (int agent = 0; agent < cells; ++agent)
    for (int target = 0; target < cells; ++target) {
      const int s = agent * cells + target;
      for (int a = 0; a < 4; ++a) {
        if (agent == target) {
          trip.emplace_back(s * 4 + a, s, 1.0);
          continue;
        }
        const int next = g.move(agent, a);
        trip.emplace_back(s * 4 + a, next * cells + target, 1.0);
        cost(s, a) = g.landing_cost(next, target);
      }
    }
  SpMat P(static_cast<Eigen::Index>(nS) * 4, nS);
  P.setFromTriplets(trip.begin(), trip.end());
  return TabularMdp(nS, 4, gamma, std::move(P), std::move(cost));
}

// ---------------------------------------------------------------- LQR

LqrSpec default_lqr() {
  LqrSpec s;
  s.A.resize(4, 4);
  s.A << 1.01, 0.10, 0.00, 0.00,
         0.00, 0.98, 0.10, 0.00,
         0.00, 0.00, 0.95, 0.10,
         0.05, 0.00, 0.00, 0.90;
  s.B.resize(4, 2);
  s.B << 0.0, 0.0,
         0.1, 0.0,
         0.0, 0.0,
         0.0, 0.1;
  s.Qc = Mat::Identity(4, 4);
  s.Rc = 0.1 * Mat::Identity(2, 2);
  s.noise_cov = 1e-2 * Mat::Identity(4, 4);
  s.gamma = 0.9;
  s.cost_cap = 1e3;
  s.action_bound = 5.0;
  s.init_scale = 1.0;
  return s;
}

namespace {
void validate(const LqrSpec& s) {
  const auto n = s.A.rows();
  require(n >= 1 && s.A.cols() == n, "LQR: A must be square");
  require(s.B.rows() == n && s.B.cols() >= 1, "LQR: B must have as many rows as A");
  require(s.Qc.rows() == n && s.Qc.cols() == n, "LQR: Qc must be n x n");
  require(s.Rc.rows() == s.B.cols() && s.Rc.cols() == s.B.cols(), "LQR: Rc must be m x m");
  require(s.noise_cov.rows() == n && s.noise_cov.cols() == n, "LQR: noise covariance must be n x n");
  require((s.Rc - s.Rc.transpose()).norm() <= 1e-12 * std::max(1.0, s.Rc.norm()), "LQR: Rc must be symmetric");
  Eigen::LLT<Mat> llt(s.Rc);
  require(llt.info() == Eigen::Success, "LQR: Rc must be positive definite");
  Eigen::SelfAdjointEigenSolver<Mat> eq(0.5 * (s.Qc + s.Qc.transpose()));
  require(eq.eigenvalues().minCoeff() >= -1e-12, "LQR: Qc must be positive semidefinite");
  require(s.gamma >= 0 && s.gamma < 1, "LQR: discount must lie in [0, 1)");
  require(s.cost_cap > 0 && s.action_bound > 0, "LQR: cost cap and action bound must be positive");
}

Mat psd_factor(const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (cov + cov.transpose()));
  require(es.eigenvalues().minCoeff() >= -1e-12, "LQR: noise covariance must be positive semidefinite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}
}  // namespace

LqrOutcome lqr_step(const LqrSpec& spec, const Vec& x, const Vec& u, Rng& rng) {
  double cost = x.dot(spec.Qc * x) + u.dot(spec.Rc * u);
  Vec next = spec.A * x + spec.B * u;
  if (spec.noise_cov.size() > 0 && spec.noise_cov.norm() > 0) {
    Vec w(x.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
    next += psd_factor(spec.noise_cov) * w;
  }
  return {next, std::min(cost, spec.cost_cap)};
}

LqrEnv::LqrEnv(LqrSpec spec)
    : spec_(std::move(spec)),
      actions_(ActionSet::box(Vec::Constant(spec_.B.cols(), -spec_.action_bound),
                              Vec::Constant(spec_.B.cols(), spec_.action_bound))) {
  validate(spec_);
  noise_chol_ = psd_factor(spec_.noise_cov);
}

Vec LqrEnv::reset(Rng& rng) const {
  Vec x(spec_.A.rows());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = spec_.init_scale * rng.normal();
  return x;
}

Transition LqrEnv::step(const Vec& s, const Vec& a, Rng& rng) const {
  double cost = std::min(s.dot(spec_.Qc * s) + a.dot(spec_.Rc * a), spec_.cost_cap);
  Vec next = spec_.A * s + spec_.B * a;
  Vec w(s.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
  next += noise_chol_ * w;
  // Keep the state finite; the cost is capped anyway.
  const double lim = 1e6;
  next = next.cwiseMax(-lim).cwiseMin(lim);
  return {next, cost, false};
}

// ---------------------------------------------------------------- pendulum

PendulumOutcome pendulum_step(const PendulumSpec& spec, const Vec& state, const Vec& u, Rng&) {
  const double theta = state[0], omega = state[1];
  if (std::abs(theta) > std::numbers::pi / 2) return {state, spec.fall_cost, true};
  const double torque = std::clamp(u[0], -spec.torque_limit, spec.torque_limit);
  const double acc = spec.gravity / spec.length * std::sin(theta) + torque / (spec.mass * spec.length * spec.length);
  Vec next(2);
  next[1] = omega + spec.dt * acc;
  next[0] = theta + spec.dt * next[1];
  const bool fallen = std::abs(next[0]) > std::numbers::pi / 2;
  return {next, 0.0, fallen};
}

PendulumEnv::PendulumEnv(PendulumSpec spec)
    : spec_(spec), actions_(ActionSet::box(Vec::Constant(1, -spec.torque_limit), Vec::Constant(1, spec.torque_limit))) {
  require(spec_.dt > 0, "pendulum: dt must be positive");
  require(spec_.mass > 0 && spec_.length > 0, "pendulum: mass and length must be positive");
  require(spec_.torque_limit > 0, "pendulum: torque limit must be positive");
  require(spec_.gamma >= 0 && spec_.gamma < 1, "pendulum: discount must lie in [0, 1)");
}

Vec PendulumEnv::reset(Rng& rng) const {
  Vec s(2);
  s << rng.uniform(-spec_.init_noise, spec_.init_noise), rng.uniform(-spec_.init_noise, spec_.init_noise);
  return s;
}

Transition PendulumEnv::step(const Vec& s, const Vec& a, Rng& rng) const {
  auto out = pendulum_step(spec_, s, a, rng);
  return {out.next, out.cost, out.fallen};
}

bool PendulumEnv::is_absorbing(const Vec& s) const { return std::abs(s[0]) > std::numbers::pi / 2; }

double PendulumEnv::absorbing_cost(const Vec& s) const { return is_absorbing(s) ? spec_.fall_cost : 0.0; }

}  // namespace polopt
