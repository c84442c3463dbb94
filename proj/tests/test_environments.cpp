#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "polopt/environments.hpp"
#include "polopt/trace.hpp"

using namespace polopt;

TEST_SUITE("environments") {
  TEST_CASE("Philox streams are reproducible and distinct") {
    Rng a(5, 1), b(5, 1), c(5, 2);
    for (int i = 0; i < 10; ++i) {
      const auto x = a(), y = b(), z = c();
      CHECK(x == y);
      CHECK(x != z);
    }
    Rng s = Rng(5, 1).substream(3), t = Rng(5, 1).substream(3);
    CHECK(s() == t());
  }

  TEST_CASE("random tabular MDPs are stochastic") {
    TabularMdp mdp = random_tabular(20, 4, 0.9, 0.6, 1);
    Mat P(mdp.transition());
    for (Eigen::Index r = 0; r < P.rows(); ++r) CHECK(P.row(r).sum() == doctest::Approx(1.0));
    CHECK(P.minCoeff() >= 0.0);
  }

  TEST_CASE("tabular environment steps follow the transition kernel") {
    auto mdp = std::make_shared<const TabularMdp>(random_tabular(3, 2, 0.9, 0.0, 2));
    TabularEnv env(mdp);
    Rng r(2, 0);
    Vec counts = Vec::Zero(3);
    const int n = 40000;
    Vec s = Vec::Constant(1, 1.0), a = Vec::Zero(2);
    a[1] = 1.0;
    for (int i = 0; i < n; ++i) counts[static_cast<Eigen::Index>(env.step(s, a, r).next[0])] += 1.0 / n;
    for (int t = 0; t < 3; ++t) CHECK(counts[t] == doctest::Approx(mdp->prob(1, 1, t)).epsilon(0.03));
  }

  TEST_CASE("trap-free grid world values match BFS distances") {
    GridWorldSpec g;
    g.width = 5;
    g.height = 4;
    g.n_traps = 0;
    const double gamma = 0.95;
    GridWorld env(g, gamma);
    OptimalSolution opt = value_iteration(*env.tabular(), Regularizer::none(), 1e-12);
    const int cells = 20;
    for (int target = 0; target < cells; ++target) {
      auto dist = oracle::grid_bfs(5, 4, target);
      for (int agent = 0; agent < cells; ++agent) {
        const int d = dist[static_cast<std::size_t>(agent)];
        const double v = (1 - std::pow(gamma, d)) / (1 - gamma);
        CHECK(opt.V[agent * cells + target] == doctest::Approx(v).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("grid world traps, absorption and tabular export agree") {
    GridWorldSpec g;
    g.width = 4;
    g.height = 4;
    g.n_traps = 3;
    g.env_seed = 7;
    GridWorld env(g, 0.9);
    int traps = 0;
    for (bool t : env.traps()) traps += t;
    CHECK(traps == 3);
    const TabularMdp& tab = *env.tabular();
    Rng r(7, 0);
    for (int i = 0; i < 200; ++i) {
      Vec s = env.reset(r);
      CHECK_FALSE(env.is_absorbing(s));
      const int a = static_cast<int>(r.below(4));
      Vec av = Vec::Zero(4);
      av[a] = 1.0;
      Transition tr = env.step(s, av, r);
      const int si = env.state_index(s), ni = env.state_index(tr.next);
      CHECK(tab.prob(si, a, ni) == doctest::Approx(1.0));
      CHECK(tab.cost()(si, a) == doctest::Approx(tr.cost));
      CHECK(tr.absorbed == env.is_absorbing(tr.next));
      CHECK(env.state_of(si).isApprox(s));
    }
    CHECK(env.reset_distribution().sum() == doctest::Approx(1.0));
  }

  TEST_CASE("LQR Monte Carlo cost matches the moment recursion") {
    LqrSpec spec = default_lqr();
    spec.cost_cap = 1e12;
    spec.action_bound = 1e6;
    Mat K;
    oracle::riccati(spec, &K);
    LqrEnv env(spec);
    FaProblem prob;
    prob.env = &env;
    prob.mc_episodes = 4000;
    prob.mc_horizon = 60;
    StatePolicy pi = [K](const Vec& x) { return Vec(K * x); };
    const double mc = score_policy(prob, pi, BregmanGeometry::euclidean(2)).f;
    const double exact = oracle::lqr_linear_cost(spec, K, Mat::Identity(4, 4), 60);
    CHECK(mc == doctest::Approx(exact).epsilon(0.03));
    // The Riccati gain beats doing nothing.
    CHECK(exact < oracle::lqr_linear_cost(spec, Mat::Zero(2, 4), Mat::Identity(4, 4), 60));
  }

  TEST_CASE("LQR costs are capped and actions live in the box") {
    LqrEnv env(default_lqr());
    Rng r(1, 0);
    Vec big = Vec::Constant(4, 1e3);
    CHECK(env.step(big, Vec::Zero(2), r).cost == doctest::Approx(1e3));
    CHECK(env.action_set().contains(Vec::Constant(2, 5.0)));
    CHECK_FALSE(env.action_set().contains(Vec::Constant(2, 5.5)));
  }

  TEST_CASE("pendulum falls without torque and is absorbing once fallen") {
    PendulumSpec p;
    PendulumEnv env(p);
    Rng r(3, 0);
    Vec s = env.reset(r);
    int steps = 0;
    while (!env.is_absorbing(s) && steps < p.step_cap) {
      s = env.step(s, Vec::Zero(1), r).next;
      ++steps;
    }
    CHECK(env.is_absorbing(s));
    CHECK(steps < p.step_cap);
    CHECK(env.absorbing_cost(s) == doctest::Approx(p.fall_cost));
    CHECK(env.episode_score(0.0, 42) == doctest::Approx(-42));
  }
}
