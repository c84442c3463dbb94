#pragma once
// Reference implementations used to check the library. Each one takes a
// different route from the code under test: dense full-pivot solves, plain
// loops, brute-force enumeration or truncated series.

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include "polopt/environments.hpp"
#include "polopt/mdp.hpp"

namespace oracle {

using polopt::Mat;
using polopt::Vec;

// Dense transition tensor: P[a](s, s').
inline std::vector<Mat> dense_transitions(const polopt::TabularMdp& mdp) {
  const int nS = mdp.n_states(), nA = mdp.n_actions();
  std::vector<Mat> P(static_cast<std::size_t>(nA), Mat::Zero(nS, nS));
  for (int s = 0; s < nS; ++s)
    for (int a = 0; a < nA; ++a)
      for (int t = 0; t < nS; ++t) P[static_cast<std::size_t>(a)](s, t) = mdp.prob(s, a, t);
  return P;
}

inline Mat policy_matrix(const polopt::TabularMdp& mdp, const Mat& pi) {
  auto P = dense_transitions(mdp);
  Mat Ppi = Mat::Zero(mdp.n_states(), mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s)
    for (int a = 0; a < mdp.n_actions(); ++a) Ppi.row(s) += pi(s, a) * P[static_cast<std::size_t>(a)].row(s);
  return Ppi;
}

// Stage cost under pi including the regularizer value at pi(s).
inline Vec policy_cost(const polopt::TabularMdp& mdp, const Mat& pi, const polopt::Regularizer& reg) {
  Vec c(mdp.n_states());
  for (int s = 0; s < mdp.n_states(); ++s) {
    c[s] = mdp.cost().row(s).dot(pi.row(s));
    if (reg.kind() != polopt::Regularizer::Kind::Null) c[s] += reg.value(s, pi.row(s).transpose());
  }
  return c;
}

// V^pi from (I - gamma P_pi) V = c_pi with a full-pivot dense LU.
inline Vec evaluate(const polopt::TabularMdp& mdp, const Mat& pi, const polopt::Regularizer& reg) {
  const int n = mdp.n_states();
  Mat M = Mat::Identity(n, n) - mdp.gamma() * policy_matrix(mdp, pi);
  return M.fullPivLu().solve(policy_cost(mdp, pi, reg));
}

// Q_0(s, a) = c(s, a) + h^{pi(s)}(s) + gamma P(.|s, a) V.
inline Mat q_values(const polopt::TabularMdp& mdp, const Mat& pi, const polopt::Regularizer& reg) {
  Vec V = evaluate(mdp, pi, reg);
  auto P = dense_transitions(mdp);
  Mat Q(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) {
    const double h = reg.kind() == polopt::Regularizer::Kind::Null ? 0.0 : reg.value(s, pi.row(s).transpose());
    for (int a = 0; a < mdp.n_actions(); ++a)
      Q(s, a) = mdp.cost()(s, a) + h + mdp.gamma() * P[static_cast<std::size_t>(a)].row(s).dot(V);
  }
  return Q;
}

// Unregularized optimal values by plain value iteration until the update
// stops moving at machine precision.
inline Vec optimal_values(const polopt::TabularMdp& mdp) {
  auto P = dense_transitions(mdp);
  Vec V = Vec::Zero(mdp.n_states());
  for (int it = 0; it < 200000; ++it) {
    Vec W(mdp.n_states());
    for (int s = 0; s < mdp.n_states(); ++s) {
      double best = std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions(); ++a)
        best = std::min(best, mdp.cost()(s, a) + mdp.gamma() * P[static_cast<std::size_t>(a)].row(s).dot(V));
      W[s] = best;
    }
    const double d = (W - V).lpNorm<Eigen::Infinity>();
    V = W;
    if (d <= 1e-14 * (1.0 + V.lpNorm<Eigen::Infinity>())) break;
  }
  return V;
}

// Optimal values and policy with h = w KL(a || p), p shared by all states,
// using min_a <g, a> + w KL(a || p) = -w log sum_i p_i exp(-g_i / w).
inline Vec soft_optimal_values(const polopt::TabularMdp& mdp, double w, const Vec& p, Mat* pi = nullptr) {
  auto P = dense_transitions(mdp);
  const int nS = mdp.n_states(), nA = mdp.n_actions();
  Vec V = Vec::Zero(nS);
  Mat G(nS, nA);
  for (int it = 0; it < 200000; ++it) {
    for (int s = 0; s < nS; ++s)
      for (int a = 0; a < nA; ++a)
        G(s, a) = mdp.cost()(s, a) + mdp.gamma() * P[static_cast<std::size_t>(a)].row(s).dot(V);
    Vec W(nS);
    for (int s = 0; s < nS; ++s) {
      const double m = G.row(s).minCoeff();
      double z = 0.0;
      for (int a = 0; a < nA; ++a) z += p[a] * std::exp(-(G(s, a) - m) / w);
      W[s] = m - w * std::log(z);
    }
    const double d = (W - V).lpNorm<Eigen::Infinity>();
    V = W;
    if (d <= 1e-14 * (1.0 + V.lpNorm<Eigen::Infinity>())) break;
  }
  if (pi) {
    pi->resize(nS, nA);
    for (int s = 0; s < nS; ++s) {
      const double m = G.row(s).minCoeff();
      for (int a = 0; a < nA; ++a) (*pi)(s, a) = p[a] * std::exp(-(G(s, a) - m) / w);
      pi->row(s) /= pi->row(s).sum();
    }
  }
  return V;
}

// Greedy deterministic policy for the unregularized values V.
inline Mat greedy(const polopt::TabularMdp& mdp, const Vec& V) {
  auto P = dense_transitions(mdp);
  Mat pi = Mat::Zero(mdp.n_states(), mdp.n_actions());
  for (int s = 0; s < mdp.n_states(); ++s) {
    int best = 0;
    double bv = std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions(); ++a) {
      const double q = mdp.cost()(s, a) + mdp.gamma() * P[static_cast<std::size_t>(a)].row(s).dot(V);
      if (q < bv - 1e-12) {
        bv = q;
        best = a;
      }
    }
    pi(s, best) = 1.0;
  }
  return pi;
}

// Optimal values by enumerating every deterministic policy. Only for tiny
// problems.
inline Vec brute_force_optimal(const polopt::TabularMdp& mdp) {
  const int nS = mdp.n_states(), nA = mdp.n_actions();
  std::vector<int> choice(static_cast<std::size_t>(nS), 0);
  Vec best = Vec::Constant(nS, std::numeric_limits<double>::infinity());
  for (;;) {
    Mat pi = Mat::Zero(nS, nA);
    for (int s = 0; s < nS; ++s) pi(s, choice[static_cast<std::size_t>(s)]) = 1.0;
    best = best.cwiseMin(evaluate(mdp, pi, polopt::Regularizer::none()));
    int s = 0;
    while (s < nS && ++choice[static_cast<std::size_t>(s)] == nA) choice[static_cast<std::size_t>(s++)] = 0;
    if (s == nS) break;
  }
  return best;
}

// A stationary distribution of P_pi: least-squares solution of
// nu^T (P - I) = 0, sum nu = 1.
inline Vec stationary(const polopt::TabularMdp& mdp, const Mat& pi) {
  const int n = mdp.n_states();
  Mat M(n + 1, n);
  M.topRows(n) = policy_matrix(mdp, pi).transpose() - Mat::Identity(n, n);
  M.row(n).setOnes();
  Vec rhs = Vec::Zero(n + 1);
  rhs[n] = 1.0;
  return M.colPivHouseholderQr().solve(rhs);
}

// Discounted visitation kappa_s = (1-gamma) sum_t gamma^t e_s^T P^t, summed
// until the tail is below tol.
inline Vec visitation_series(const polopt::TabularMdp& mdp, const Mat& pi, int start, double tol = 1e-15) {
  Mat P = policy_matrix(mdp, pi);
  Vec row = Vec::Zero(mdp.n_states());
  row[start] = 1.0;
  Vec acc = Vec::Zero(mdp.n_states());
  double w = 1.0 - mdp.gamma();
  while (w > tol) {
    acc += w * row;
    row = P.transpose() * row;
    w *= mdp.gamma();
  }
  return acc;
}

// Discounted LQR: P = Q + gamma A^T P A - gamma^2 A^T P B (R + gamma B^T P B)^{-1} B^T P A
// by fixed-point iteration. Returns P and writes the gain (u = K x).
inline Mat riccati(const polopt::LqrSpec& s, Mat* K = nullptr) {
  Mat P = s.Qc;
  const double g = s.gamma;
  for (int it = 0; it < 100000; ++it) {
    Mat G = s.Rc + g * s.B.transpose() * P * s.B;
    Mat L = G.ldlt().solve(g * s.B.transpose() * P * s.A);
    Mat next = s.Qc + g * s.A.transpose() * P * s.A - g * s.A.transpose() * P * s.B * L;
    const double d = (next - P).cwiseAbs().maxCoeff();
    P = next;
    if (d < 1e-13 * (1.0 + P.cwiseAbs().maxCoeff())) break;
  }
  if (K) *K = -(s.Rc + g * s.B.transpose() * P * s.B).ldlt().solve(g * s.B.transpose() * P * s.A);
  return P;
}

// Expected discounted cost of u = K x over `horizon` steps from x0 ~ N(0, S0),
// by propagating second moments (no cost cap).
inline double lqr_linear_cost(const polopt::LqrSpec& s, const Mat& K, const Mat& S0, int horizon) {
  Mat S = S0;
  const Mat Acl = s.A + s.B * K;
  const Mat C = s.Qc + K.transpose() * s.Rc * K;
  double total = 0.0, disc = 1.0;
  for (int t = 0; t < horizon; ++t) {
    total += disc * (C * S).trace();
    S = Acl * S * Acl.transpose() + s.noise_cov;
    disc *= s.gamma;
  }
  return total;
}

// Breadth-first distances between cells of an open grid (no walls).
inline std::vector<int> grid_bfs(int width, int height, int from) {
  std::vector<int> dist(static_cast<std::size_t>(width * height), -1);
  std::deque<int> q{from};
  dist[static_cast<std::size_t>(from)] = 0;
  while (!q.empty()) {
    int c = q.front();
    q.pop_front();
    int x = c / height, y = c % height;
    const int nx[4] = {x, x, x - 1, x + 1}, ny[4] = {y + 1, y - 1, y, y};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || nx[k] >= width || ny[k] < 0 || ny[k] >= height) continue;
      int n = nx[k] * height + ny[k];
      if (dist[static_cast<std::size_t>(n)] < 0) {
        dist[static_cast<std::size_t>(n)] = dist[static_cast<std::size_t>(c)] + 1;
        q.push_back(n);
      }
    }
  }
  return dist;
}

}  // namespace oracle
