#include <doctest.h>

#include <cmath>

#include "sgdnoise/schedule.hpp"

using namespace sgdnoise;

TEST_CASE("basic schedules") {
  CHECK(Schedule::constant(0.05).eval(123456) == 0.05);
  const auto lin = Schedule::linear_decay(0.05, 1000);
  for (std::uint64_t i : {0, 1, 250, 999, 1000})
    CHECK(lin.eval(i) == doctest::Approx(0.05 * double(1000 - i) / 1000.0));
  CHECK(lin.eval(5000) == 0.0);
  const auto cos = Schedule::cosine(0.3, 200);
  CHECK(cos.eval(100) == doctest::Approx(0.15));
  CHECK(cos.eval(0) == doctest::Approx(0.3));
  CHECK(cos.eval(200) == doctest::Approx(0.0).epsilon(1e-12).scale(1.0));
}

TEST_CASE("table schedules are piecewise constant on a bounded domain") {
  const auto t = Schedule::table({{10, 0.1}, {20, 0.05}, {30, 0.01}});
  CHECK(t.eval(10) == 0.1);
  CHECK(t.eval(19) == 0.1);
  CHECK(t.eval(20) == 0.05);
  CHECK(t.eval(30) == 0.01);
  CHECK_THROWS_AS(t.eval(9), std::out_of_range);
  CHECK_THROWS_AS(t.eval(31), std::out_of_range);
  CHECK(t.contains(25));
  CHECK_FALSE(t.contains(31));
  CHECK_THROWS_AS(Schedule::table({{5, 0.1}, {5, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(Schedule::table({{5, -0.1}}), std::invalid_argument);
}

TEST_CASE("window multipliers") {
  SUBCASE("swa, k = 4") {
    const WindowTransform w{AveragingMethod::swa, 100, 104, 0.0};
    const auto s = Schedule::derived(Schedule::constant(0.1), w);
    CHECK(s.eval(100) == doctest::Approx(0.1));
    CHECK(s.eval(101) == doctest::Approx(0.075));
    CHECK(s.eval(102) == doctest::Approx(0.05));
    CHECK(s.eval(103) == doctest::Approx(0.025));
    CHECK(s.eval(104) == doctest::Approx(0.1));
    CHECK(s.eval(99) == doctest::Approx(0.1));
  }
  SUBCASE("two point halves the rate") {
    const auto s = Schedule::derived(Schedule::constant(0.1), {AveragingMethod::two_point, 0, 50, 0.0});
    CHECK(s.eval(0) == doctest::Approx(0.05));
    CHECK(s.eval(49) == doctest::Approx(0.05));
  }
  SUBCASE("ema, 100 steps before the window end") {
    const auto s = Schedule::derived(Schedule::constant(0.1), {AveragingMethod::ema, 0, 1000, 0.01});
    CHECK(s.eval(900) == doctest::Approx(0.1 * (1.0 - std::pow(0.99, 100))));
    CHECK(s.eval(900) == doctest::Approx(0.0633971).epsilon(1e-6));
  }
  SUBCASE("swa of a single point leaves the base unchanged") {
    const auto base = Schedule::linear_decay(0.2, 100);
    const auto s = Schedule::derived(base, {AveragingMethod::swa, 40, 41, 0.0});
    for (std::uint64_t i = 30; i < 50; ++i) CHECK(s.eval(i) == doctest::Approx(base.eval(i)));
  }
}

TEST_CASE("method names round-trip") {
  for (auto m : {AveragingMethod::swa, AveragingMethod::two_point, AveragingMethod::ema})
    CHECK(averaging_method_from_string(to_string(m)) == m);
  CHECK_THROWS_AS(averaging_method_from_string("median"), std::invalid_argument);
}
