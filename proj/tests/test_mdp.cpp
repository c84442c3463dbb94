#include <doctest.h>

#include "oracles.hpp"
#include "polopt/environments.hpp"
#include "polopt/mdp.hpp"

using namespace polopt;

namespace {

PolicyTable random_policy(int nS, int nA, Rng& r) {
  Mat P(nS, nA);
  for (int s = 0; s < nS; ++s) {
    for (int a = 0; a < nA; ++a) P(s, a) = r.uniform() + 1e-3;
    P.row(s) /= P.row(s).sum();
  }
  return PolicyTable(P);
}

}  // namespace

TEST_SUITE("mdp-core") {
  TEST_CASE("exact evaluation matches the dense oracle") {
    for (int i = 0; i < 20; ++i) {
      TabularMdp mdp = random_tabular(3 + i, 2 + i % 4, i % 2 ? 0.99 : 0.7, 0.3, static_cast<std::uint64_t>(i));
      Rng r(static_cast<std::uint64_t>(i), 1);
      PolicyTable pi = random_policy(mdp.n_states(), mdp.n_actions(), r);
      Regularizer reg = i % 3 ? Regularizer::none()
                              : Regularizer::kl_to_anchor(0.2, Mat::Constant(1, mdp.n_actions(), 1.0 / mdp.n_actions()));
      ValueFunctions v = evaluate_exact(mdp, pi, reg);
      CHECK((v.V - oracle::evaluate(mdp, pi.rows(), reg)).lpNorm<Eigen::Infinity>() < 1e-9);
      CHECK((v.Q - oracle::q_values(mdp, pi.rows(), reg)).lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }

  TEST_CASE("value iteration matches brute-force enumeration") {
    for (int i = 0; i < 10; ++i) {
      TabularMdp mdp = random_tabular(4, 3, 0.9, 0.2, 100 + static_cast<std::uint64_t>(i));
      OptimalSolution opt = value_iteration(mdp, Regularizer::none(), 1e-12);
      CHECK((opt.V - oracle::brute_force_optimal(mdp)).lpNorm<Eigen::Infinity>() < 1e-9);
      CHECK(opt.residual <= 1e-10);
    }
  }

  TEST_CASE("regularized value iteration matches the soft oracle") {
    TabularMdp mdp = random_tabular(8, 3, 0.9, 0.0, 7);
    Vec p = Vec::Constant(3, 1.0 / 3);
    Regularizer reg = Regularizer::kl_to_anchor(0.3, p.transpose());
    Mat pi;
    Vec V = oracle::soft_optimal_values(mdp, 0.3, p, &pi);
    OptimalSolution opt = value_iteration(mdp, reg, 1e-12);
    CHECK((opt.V - V).lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((opt.pi.rows() - pi).lpNorm<Eigen::Infinity>() < 1e-8);
  }

  TEST_CASE("policy iteration reaches the optimum") {
    TabularMdp mdp = random_tabular(12, 4, 0.95, 0.3, 3);
    PolicyTable pi = PolicyTable::uniform(12, 4);
    for (int k = 0; k < 50; ++k) pi = policy_iteration_step(mdp, pi, Regularizer::none());
    CHECK((oracle::evaluate(mdp, pi.rows(), Regularizer::none()) - oracle::optimal_values(mdp)).lpNorm<Eigen::Infinity>() <
          1e-9);
  }

  TEST_CASE("visitation measure matches the truncated series") {
    TabularMdp mdp = random_tabular(10, 3, 0.9, 0.4, 5);
    Rng r(5, 1);
    PolicyTable pi = random_policy(10, 3, r);
    Mat K = visitation_matrix(mdp, pi);
    for (int s = 0; s < 10; ++s) {
      Vec series = oracle::visitation_series(mdp, pi.rows(), s);
      CHECK((visitation(mdp, pi, s).kappa - series).lpNorm<Eigen::Infinity>() < 1e-10);
      CHECK((K.row(s).transpose() - series).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }

  TEST_CASE("stationary distribution is invariant") {
    TabularMdp mdp = random_tabular(15, 3, 0.9, 0.0, 9);
    Rng r(9, 1);
    PolicyTable pi = random_policy(15, 3, r);
    Vec nu = stationary_distribution(mdp, pi);
    CHECK((nu - oracle::stationary(mdp, pi.rows())).lpNorm<Eigen::Infinity>() < 1e-9);
    CHECK(nu.sum() == doctest::Approx(1.0));
  }

  TEST_CASE("advantage vanishes at the policy's own action") {
    TabularMdp mdp = random_tabular(6, 3, 0.9, 0.0, 11);
    Rng r(11, 1);
    PolicyTable pi = random_policy(6, 3, r);
    Regularizer reg = Regularizer::quadratic(0.5, Mat::Constant(1, 3, 1.0 / 3));
    ValueFunctions v = evaluate_exact(mdp, pi, reg);
    for (int s = 0; s < 6; ++s) CHECK(std::abs(advantage(v, reg, pi, s, pi.row(s))) < 1e-12);
  }

  TEST_CASE("Bellman operator fixes the optimal values") {
    TabularMdp mdp = random_tabular(9, 4, 0.99, 0.2, 13);
    OptimalSolution opt = value_iteration(mdp, Regularizer::none(), 1e-12);
    CHECK((bellman_operator(mdp, Regularizer::none(), opt.V) - opt.V).lpNorm<Eigen::Infinity>() < 1e-9);
  }

  TEST_CASE("JSON round trip is exact") {
    TabularMdp mdp = random_tabular(7, 3, 0.8, 0.5, 17);
    const std::string text = mdp.to_json();
    TabularMdp back = TabularMdp::from_json(text);
    CHECK(back.to_json() == text);
    CHECK((Mat(back.transition()) - Mat(mdp.transition())).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.cost() - mdp.cost()).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("malformed input is rejected") {
    std::vector<double> bad(2 * 2 * 2, 0.3);
    CHECK_THROWS_AS(TabularMdp::from_dense(2, 2, 0.9, bad, Mat::Zero(2, 2)), InvalidInput);
    CHECK_THROWS_AS(random_tabular(3, 2, 1.0, 0.0, 0), InvalidInput);
    CHECK_THROWS_AS(PolicyTable(Mat::Constant(2, 2, 0.7)), InvalidInput);
    CHECK_THROWS(TabularMdp::from_json("{\"n_states\": 2}"));
  }
}
