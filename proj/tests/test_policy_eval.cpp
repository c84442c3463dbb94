#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "oracles.hpp"
#include "polopt/policy_eval.hpp"
#include "polopt/trace.hpp"

using namespace polopt;

TEST_SUITE("policy-eval") {
  TEST_CASE("ridge solve matches the normal equations in both shapes") {
    Rng r(1, 0);
    for (auto shape : {std::pair{50, 8}, std::pair{8, 50}}) {
      Mat Phi(shape.first, shape.second);
      Mat Y(shape.first, 2);
      for (Eigen::Index i = 0; i < Phi.size(); ++i) Phi.data()[i] = r.normal();
      for (Eigen::Index i = 0; i < Y.size(); ++i) Y.data()[i] = r.normal();
      const double lambda = 0.37;
      Mat ref = (Phi.transpose() * Phi + lambda * Mat::Identity(shape.second, shape.second))
                    .fullPivLu()
                    .solve(Phi.transpose() * Y);
      CHECK((ridge_solve(Phi, Y, lambda) - ref).lpNorm<Eigen::Infinity>() < 1e-10);
    }
  }

  TEST_CASE("random features approximate the Gaussian kernel") {
    Rng r(2, 0);
    Mat anchors(5, 3);
    for (Eigen::Index i = 0; i < anchors.size(); ++i) anchors.data()[i] = r.uniform();
    const double bw = 0.6;
    FeatureMap fm = FeatureMap::kernel(anchors, 20000, bw, 4, 1.0, 0);
    for (int t = 0; t < 5; ++t) {
      Vec z(3);
      z << r.uniform(), r.uniform(), r.uniform();
      Vec f = fm.features({z, -1}, Vec());
      for (int i = 0; i < 5; ++i) {
        const double k = std::exp(-(z - anchors.row(i).transpose()).squaredNorm() / (2 * bw * bw));
        CHECK(f[i] == doctest::Approx(k).epsilon(0.03).scale(1.0));
      }
    }
    // At an anchor the cos/sin features give exactly one.
    CHECK(fm.features({anchors.row(2).transpose(), -1}, Vec())[2] == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("action gradients match finite differences") {
    Rng r(3, 0);
    Mat anchors(20, 4);
    for (Eigen::Index i = 0; i < anchors.size(); ++i) anchors.data()[i] = r.normal();
    auto fm = std::make_shared<const FeatureMap>(FeatureMap::kernel(anchors, 100, 1.3, 5, 2.0, 2));
    Vec th(20);
    for (int i = 0; i < 20; ++i) th[i] = r.normal();
    QModel m(fm, th);
    StatePoint s{Vec::Constant(2, 0.3), -1};
    Vec a(2);
    a << 0.2, -0.4;
    Vec g = m.action_gradient(s, a);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
      Vec ap = a, am = a;
      ap[j] += h;
      am[j] -= h;
      CHECK(g[j] == doctest::Approx((m.value(s, ap) - m.value(s, am)) / (2 * h)).epsilon(1e-6));
    }
  }

  TEST_CASE("feature map JSON round trip preserves features") {
    Rng r(4, 0);
    Mat anchors(6, 3);
    for (Eigen::Index i = 0; i < anchors.size(); ++i) anchors.data()[i] = r.normal();
    FeatureMap fm = FeatureMap::kernel(anchors, 30, 0.8, 9, 1.5, 1);
    FeatureMap back = FeatureMap::from_json(fm.to_json());
    StatePoint s{Vec::Constant(2, 0.1), -1};
    Vec a = Vec::Constant(1, 0.4);
    CHECK((fm.features(s, a) - back.features(s, a)).lpNorm<Eigen::Infinity>() == 0.0);
  }

  TEST_CASE("tabular features fit exact targets exactly") {
    auto mdp = std::make_shared<const TabularMdp>(random_tabular(6, 3, 0.9, 0.2, 5));
    TabularEnv env(mdp);
    Vec p(3);
    p << 0.2, 0.5, 0.3;
    StatePolicy pi = [p](const Vec&) { return p; };
    EvalDataset data = exact_dataset(env, pi, Regularizer::none());
    QModel m = fit_ridge(data, std::make_shared<const FeatureMap>(FeatureMap::tabular(6, 3)), 1e-12);
    Mat Q = oracle::q_values(*mdp, p.transpose().replicate(6, 1), Regularizer::none());
    for (int s = 0; s < 6; ++s) {
      Vec q0 = m.q0(state_point(env, Vec::Constant(1, s)), 3);
      CHECK((q0 - Q.row(s).transpose()).lpNorm<Eigen::Infinity>() < 1e-9);
    }
  }

  TEST_CASE("sampled targets are unbiased estimates of Q") {
    auto mdp = std::make_shared<const TabularMdp>(random_tabular(3, 2, 0.5, 0.0, 6));
    TabularEnv env(mdp);
    Vec p(2);
    p << 0.3, 0.7;
    StatePolicy pi = [p](const Vec&) { return p; };
    SamplingOptions opt;
    opt.n_samples = 30000;
    opt.burn_in = 5;
    opt.truncation = 60;
    EvalDataset data = sample_dataset(env, pi, Regularizer::none(), opt, [](const Vec&) { return 0.0; }, Rng(6, 0));
    CHECK(data.size() == 30000u);
    Mat Q = oracle::q_values(*mdp, p.transpose().replicate(3, 1), Regularizer::none());
    std::map<std::pair<int, int>, std::pair<double, int>> acc;
    for (const auto& s : data.samples) {
      Eigen::Index a;
      s.action.maxCoeff(&a);
      auto& e = acc[{s.point.index, static_cast<int>(a)}];
      e.first += s.y;
      e.second += 1;
    }
    for (const auto& [key, v] : acc)
      if (v.second > 500) CHECK(v.first / v.second == doctest::Approx(Q(key.first, key.second)).epsilon(0.03));
  }

  TEST_CASE("dataset CSV round trip") {
    auto mdp = std::make_shared<const TabularMdp>(random_tabular(4, 2, 0.9, 0.0, 8));
    TabularEnv env(mdp);
    StatePolicy pi = [](const Vec&) { return Vec::Constant(2, 0.5).eval(); };
    SamplingOptions opt;
    opt.n_samples = 20;
    EvalDataset data = sample_dataset(env, pi, Regularizer::none(), opt, [](const Vec&) { return 0.0; }, Rng(8, 0));
    const auto path = (std::filesystem::temp_directory_path() / "polopt_dataset_test.csv").string();
    data.dump_csv(path);
    EvalDataset back = EvalDataset::load_csv(path, &env);
    std::filesystem::remove(path);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(back.samples[i].y == doctest::Approx(data.samples[i].y).epsilon(1e-12));
      CHECK(back.samples[i].action.isApprox(data.samples[i].action));
      CHECK(back.samples[i].point.index == data.samples[i].point.index);
    }
  }

  TEST_CASE("error diagnosis separates bias from noise") {
    auto mdp = std::make_shared<const TabularMdp>(random_tabular(3, 2, 0.9, 0.0, 10));
    TabularEnv env(mdp);
    auto fm = std::make_shared<const FeatureMap>(FeatureMap::tabular(3, 2));
    ErrorProbe probe;
    for (int s = 0; s < 3; ++s) probe.states.push_back(state_point(env, Vec::Constant(1, s)));
    probe.weights = Vec::Constant(3, 1.0 / 3);
    probe.exact_q0 = Mat::Zero(3, 2);
    // Every refit returns the constant 1: pure bias, no noise.
    ErrorReport rep = diagnose_errors([&](int) { return QModel(fm, Vec::Ones(6)); }, 4, probe);
    CHECK(rep.varsigma == doctest::Approx(1.0));
    CHECK(rep.sigma2 == doctest::Approx(0.0));
  }
}
