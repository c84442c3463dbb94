#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "polopt/pda.hpp"

using namespace polopt;

TEST_SUITE("pda") {
  TEST_CASE("entropy dual averaging is a softmax of accumulated Q") {
    TabularMdp mdp = random_tabular(6, 3, 0.9, 0.2, 21);
    const int K = 6;
    const double lambda = 2.0;
    PdaSchedule sch = PdaSchedule::linear_const(lambda, 0.0, 0.0, K);
    ExactTrace tr = pda_run_exact(mdp, PolicyTable::uniform(6, 3), BregmanGeometry::entropy(3), Regularizer::none(),
                                  sch, K);
    Mat sum = Mat::Zero(6, 3);
    for (int k = 0; k < K; ++k) {
      sum += sch.beta(k) * oracle::q_values(mdp, tr.policies[static_cast<std::size_t>(k)].rows(), Regularizer::none());
      Mat expect(6, 3);
      for (int s = 0; s < 6; ++s) {
        Vec z = -(sum.row(s).array() - sum.row(s).minCoeff()) / sch.lambda(k);
        expect.row(s) = z.array().exp().transpose();
        expect.row(s) /= expect.row(s).sum();
      }
      CHECK((tr.policies[static_cast<std::size_t>(k + 1)].rows() - expect).lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }

  TEST_CASE("accumulator JSON round trip") {
    Mat anchors(4, 4);
    anchors << 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 0, 1, 0, 1, 1;
    auto fm = std::make_shared<const FeatureMap>(FeatureMap::kernel(anchors, 20, 0.7, 5, 1.0, 3));
    FaAccumulator acc(fm, Vec::Constant(3, 1.0 / 3));
    acc.theta_sum = Vec::LinSpaced(4, -1.0, 2.0);
    acc.beta_sum = 6.0;
    acc.lambda = 1.5;
    acc.steps = 3;
    acc.last_theta = Vec::LinSpaced(4, 0.5, -0.5);
    FaAccumulator back = FaAccumulator::from_json(acc.to_json());
    CHECK(back.steps == 3);
    CHECK(back.beta_sum == 6.0);
    CHECK(back.lambda == 1.5);
    CHECK(back.theta_sum == acc.theta_sum);
    CHECK(back.anchor == acc.anchor);
    CHECK(back.last_theta == acc.last_theta);
    StatePoint s{Vec::Constant(1, 0.2), -1};
    CHECK(back.model().q0(s, 3) == acc.model().q0(s, 3));
  }

  TEST_CASE("resuming from a checkpoint matches an uninterrupted run") {
    auto mdp = std::make_shared<const TabularMdp>(random_tabular(5, 3, 0.9, 0.2, 22));
    TabularEnv env(mdp);
    FaProblem prob;
    prob.env = &env;
    EvalConfig ev;
    ev.sampling.n_samples = 50;
    ev.sampling.burn_in = 3;
    ev.sampling.truncation = 20;
    ev.features.n_anchors = 20;
    ev.features.n_frequencies = 40;
    ev.features.bandwidth = 1.0;
    ev.ridge_lambda = 0.1;
    PdaSchedule sch = PdaSchedule::linear_const(1.0, 0.0, 0.0, 6);
    BregmanGeometry geom = BregmanGeometry::entropy(3);
    FaTrace full = pda_run_finite_fa(prob, geom, sch, ev, 6, Rng(5, 0));
    FaTrace half = pda_run_finite_fa(prob, geom, sch, ev, 3, Rng(5, 0));
    FaAccumulator ck = FaAccumulator::from_json(half.checkpoint);
    FaTrace rest = pda_run_finite_fa(prob, geom, sch, ev, 6, Rng(5, 0), &ck);
    FaAccumulator a = FaAccumulator::from_json(full.checkpoint), b = FaAccumulator::from_json(rest.checkpoint);
    CHECK(a.steps == 6);
    CHECK(b.steps == 6);
    CHECK((a.theta_sum - b.theta_sum).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK(full.rows.back().f == doctest::Approx(rest.rows.back().f).epsilon(1e-12));
  }

  TEST_CASE("k_max beyond the schedule horizon is rejected") {
    TabularMdp mdp = random_tabular(3, 2, 0.9, 0.0, 23);
    CHECK_THROWS_AS(pda_run_exact(mdp, PolicyTable::uniform(3, 2), BregmanGeometry::entropy(2), Regularizer::none(),
                                  PdaSchedule::linear_const(1.0, 0.0, 0.0, 4), 5),
                    ScheduleError);
  }
}
