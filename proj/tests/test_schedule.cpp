#include <doctest.h>

#include <cmath>
#include <string>

#include "polopt/schedule.hpp"

using namespace polopt;

namespace {

ScheduleRule rule_of(auto&& make) {
  try {
    make();
  } catch (const ScheduleError& e) {
    return e.rule();
  }
  FAIL("no schedule error thrown");
  return ScheduleRule::Parameter;
}

}  // namespace

TEST_SUITE("schedule") {
  TEST_CASE("pmd factories produce the stated sequences") {
    auto g = PmdSchedule::geometric(0.9, 0.0, 5);
    CHECK(g.horizon() == 5);
    for (int k = 0; k < 5; ++k) CHECK(g.eta(k) == doctest::Approx(std::pow(0.9, -k)));
    auto c = PmdSchedule::constant(0.7, 0.0, 3);
    CHECK(c.eta(2) == doctest::Approx(0.7));
    auto n = PmdSchedule::nonconvex(-0.25, 4);
    CHECK(n.eta(3) == doctest::Approx(2.0));
    auto t = PmdSchedule::inverse_t(2.0, 2.0, 4);
    CHECK(t.eta(3) == doctest::Approx(1.0 / 8.0));
    auto w = PmdSchedule::inverse_t_weighted(2.0, 2.0, 4);
    CHECK(w.eta(1) == doctest::Approx(0.5));
    CHECK(w.beta(1) == doctest::Approx(3.0));
    auto s = PmdSchedule::sqrt_horizon(2.0, 1.0, 0.5, 0.0, 0.0, 0.0, 0.0, 8);
    CHECK(s.eta(0) == doctest::Approx(std::sqrt(2.0 / (8 * 4.0))));
    auto cn = PmdSchedule::continuous_nonconvex(-1.0, 100);
    CHECK(cn.eta(0) == doctest::Approx(0.1));
  }

  TEST_CASE("pda factories produce the stated sequences") {
    auto l = PdaSchedule::linear_const(2.0, 0.0, 0.0, 4);
    CHECK(l.beta(3) == doctest::Approx(4.0));
    CHECK(l.lambda(3) == doctest::Approx(2.0));
    CHECK(l.beta_sum(3) == doctest::Approx(10.0));
    auto p = PdaSchedule::linear_poly(1.0, 0.0, 0.0, 4);
    CHECK(p.lambda(3) == doctest::Approx(8.0));
    auto n = PdaSchedule::nonconvex(-0.5, 0.0, 10);
    CHECK(n.lambda(0) == doctest::Approx(10 * 11 * 0.5));
    CHECK(n.beta(9) == doctest::Approx(10.0));
    auto g = PdaSchedule::geometric(0.5, 0.0, 0.0, 0.1, 3);
    CHECK(g.beta(2) == doctest::Approx(4.0));
  }

  TEST_CASE("invalid parameters are rejected") {
    CHECK(rule_of([] { PmdSchedule::nonconvex(0.1, 5); }) == ScheduleRule::Parameter);
    CHECK(rule_of([] { PmdSchedule::geometric(1.0, 0.0, 5); }) == ScheduleRule::Parameter);
    CHECK(rule_of([] { PmdSchedule::inverse_t(0.0, 0.0, 5); }) == ScheduleRule::Parameter);
    CHECK(rule_of([] { PdaSchedule::nonconvex(0.0, 0.0, 5); }) == ScheduleRule::Parameter);
  }

  TEST_CASE("gate violations name the rule") {
    CHECK(rule_of([] { PdaSchedule::custom({1, 1, 1}, {3, 2, 1}, 0.0, 0.0); }) == ScheduleRule::LambdaMonotone);
    CHECK(rule_of([] { PdaSchedule::custom({1, 2}, {0, 0}, 0.0, 0.0); }) == ScheduleRule::DualModulus);
    try {
      PdaSchedule::custom({1, 1, 1}, {3, 2, 1}, 0.0, 0.0);
    } catch (const ScheduleError& e) {
      CHECK(std::string(e.what()).find(rule_inequality(ScheduleRule::LambdaMonotone)) != std::string::npos);
    }
  }
}
