#include <doctest.h>

#include <cmath>

#include "polopt/geometry.hpp"

using namespace polopt;

namespace {

Vec random_vec(int n, Rng& r, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * (2 * r.uniform() - 1);
  return v;
}

Vec random_simplex_point(int n, Rng& r) {
  Vec p(n);
  for (int i = 0; i < n; ++i) p[i] = r.uniform() + 0.05;
  return p / p.sum();
}

// Projection onto the simplex by bisection on the threshold tau with
// sum max(y - tau, 0) = 1.
Vec bisection_projection(const Vec& y) {
  double lo = y.minCoeff() - 1.0, hi = y.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    ((y.array() - mid).max(0.0).sum() > 1.0 ? lo : hi) = mid;
  }
  return (y.array() - 0.5 * (lo + hi)).max(0.0).matrix();
}

}  // namespace

TEST_SUITE("geometry") {
  TEST_CASE("simplex projection matches threshold bisection") {
    Rng r(1, 0);
    for (int t = 0; t < 200; ++t) {
      const int n = 1 + static_cast<int>(r.below(8));
      Vec y = random_vec(n, r, 3.0);
      Vec p = project_simplex(y);
      CHECK((p - bisection_projection(y)).lpNorm<Eigen::Infinity>() < 1e-10);
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
      CHECK(p.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("box and polyhedral projections") {
    ActionSet box = ActionSet::box(Vec::Constant(2, -1.0), Vec::Constant(2, 2.0));
    Vec y(2);
    y << -3.0, 0.5;
    Vec p = box.project(y);
    CHECK(p[0] == doctest::Approx(-1.0));
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK(box.center().isApprox(Vec::Constant(2, 0.5)));

    // Half-plane x + y <= 1: projection of (1, 1) is (0.5, 0.5).
    Mat A(1, 2);
    A << 1.0, 1.0;
    Vec b = Vec::Constant(1, 1.0);
    Vec q = project_polyhedron(A, b, Vec::Constant(2, 1.0));
    CHECK(q[0] == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(q[1] == doctest::Approx(0.5).epsilon(1e-9));
    ActionSet poly = ActionSet::polyhedral(A, b);
    CHECK(poly.contains(poly.project(Vec::Constant(2, 4.0)), 1e-9));
  }

  TEST_CASE("Bregman divergences are nonnegative and vanish on the diagonal") {
    Rng r(2, 0);
    for (auto geom : {BregmanGeometry::entropy(4), BregmanGeometry::euclidean(4), BregmanGeometry::tsallis(4, 1.5),
                      BregmanGeometry::tsallis(4, 0.5)}) {
      for (int t = 0; t < 50; ++t) {
        Vec a = random_simplex_point(4, r), b = random_simplex_point(4, r);
        CHECK(geom.divergence(a, b) >= -1e-14);
        CHECK(std::abs(geom.divergence(a, a)) < 1e-14);
      }
    }
  }

  TEST_CASE("entropy divergence is the KL divergence") {
    Rng r(3, 0);
    Vec a = random_simplex_point(5, r), b = random_simplex_point(5, r);
    double kl = 0.0;
    for (int i = 0; i < 5; ++i) kl += b[i] * std::log(b[i] / a[i]);
    CHECK(BregmanGeometry::entropy(5).divergence(a, b) == doctest::Approx(kl).epsilon(1e-12));
  }

  TEST_CASE("entropy prox satisfies its optimality conditions") {
    // Interior optimum of <g, a> + (1/eta) KL(a || ref): log(a / ref) + eta g is constant.
    Rng r(4, 0);
    for (int t = 0; t < 100; ++t) {
      const int n = 2 + static_cast<int>(r.below(5));
      Vec g = random_vec(n, r, 5.0), ref = random_simplex_point(n, r);
      const double eta = 0.05 + 5 * r.uniform();
      Vec p = prox_simplex_entropy(g, Regularizer::none(), 0, eta, ref);
      Vec c = (p.array() / ref.array()).log().matrix() + eta * g;
      CHECK(c.maxCoeff() - c.minCoeff() < 1e-9);
      CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    }
  }

  TEST_CASE("Tsallis and Euclidean prox agree with the generic solver") {
    Rng r(5, 0);
    ActionSet simplex = ActionSet::simplex(4);
    for (auto geom : {BregmanGeometry::euclidean(4), BregmanGeometry::tsallis(4, 1.5)}) {
      for (int t = 0; t < 20; ++t) {
        Vec g = random_vec(4, r, 2.0), ref = random_simplex_point(4, r);
        const double w = 0.5 + r.uniform();
        BregmanTerm term{w, ref};
        Vec p = solve_prox(geom, simplex, Regularizer::none(), 0, g, 1.0, std::span<const BregmanTerm>(&term, 1));
        SmoothObjective obj;
        obj.modulus = geom.kind() == BregmanGeometry::Kind::Euclidean ? w : 1e-3;
        obj.eval = [&](const Vec& a, Vec* grad) {
          if (grad) *grad = g + w * (geom.grad_omega(a) - geom.grad_omega(ref));
          return g.dot(a) + w * geom.divergence(ref, a);
        };
        ProxOptions opt;
        opt.tol = 1e-11;
        Vec q;
        try {
          q = prox_generic(obj, simplex, ref, opt);
        } catch (const ConvergenceFailure& e) {
          q = e.best();
        }
        CHECK(obj.eval(p, nullptr) <= obj.eval(q, nullptr) + 1e-8);
      }
    }
  }

  TEST_CASE("generic prox solves a box-constrained quadratic") {
    // min 0.5 ||a - c||^2 over a box: the projection of c.
    ActionSet box = ActionSet::box(Vec::Constant(3, -1.0), Vec::Constant(3, 1.0));
    Vec c(3);
    c << 2.0, -0.3, -4.0;
    SmoothObjective obj;
    obj.modulus = 1.0;
    obj.eval = [&](const Vec& a, Vec* grad) {
      if (grad) *grad = a - c;
      return 0.5 * (a - c).squaredNorm();
    };
    Vec a = prox_generic(obj, box, Vec::Zero(3));
    CHECK((a - box.project(c)).norm() < 1e-8);
  }

  TEST_CASE("regularizer moduli and values") {
    Mat anchor = Mat::Constant(1, 3, 1.0 / 3);
    CHECK(Regularizer::kl_to_anchor(0.2, anchor).mu_h() == doctest::Approx(0.2));
    CHECK(Regularizer::quadratic(0.7, anchor).mu_h() == doctest::Approx(0.7));
    Regularizer bonus = Regularizer::entropy_bonus(0.4);
    CHECK(bonus.mu_h() == doctest::Approx(-0.4));
    Vec e = Vec::Zero(3);
    e[1] = 1.0;
    CHECK(bonus.value(0, e) == doctest::Approx(0.0));
    CHECK(Regularizer::kl_to_anchor(0.2, anchor).value(0, Vec::Constant(3, 1.0 / 3)) == doctest::Approx(0.0));
  }

  TEST_CASE("entropy diameter grows as the interior clamp shrinks") {
    ActionSet s = ActionSet::simplex(3);
    BregmanGeometry g = BregmanGeometry::entropy(3);
    CHECK(g.diameter(s, 1e-3) < g.diameter(s, 1e-6));
    CHECK(BregmanGeometry::euclidean(3).diameter(s) == doctest::Approx(1.0));
  }

  TEST_CASE("invalid arguments throw") {
    CHECK_THROWS_AS(BregmanGeometry::tsallis(3, 1.0), InvalidInput);
    CHECK_THROWS_AS(BregmanGeometry::entropy(3).divergence(Vec::Constant(2, 0.5), Vec::Constant(3, 1.0 / 3)),
                    InvalidInput);
    CHECK_THROWS_AS(ActionSet::box(Vec::Constant(2, 1.0), Vec::Constant(2, 0.0)), InvalidInput);
  }
}
