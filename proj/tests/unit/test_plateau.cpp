#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sgdnoise/plateau.hpp"

using namespace sgdnoise;

TEST_CASE("constant series plateaus immediately") {
  const std::vector<double> s(1000, 3.5);
  const auto p = detect_plateau(s, 100, 0.01);
  CHECK(p.found);
  CHECK(p.onset_step == 0);
  CHECK(p.plateau_value == 3.5);
  CHECK(p.band_halfwidth == 0.0);
}

TEST_CASE("geometric decay plateaus at its offset") {
  std::vector<double> s(3000);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = 5.0 * std::pow(0.99, double(t)) + 2.0;
  const auto p = detect_plateau(s, 200, 0.01);
  CHECK(p.found);
  CHECK(p.plateau_value == doctest::Approx(2.0).epsilon(0.02));
  CHECK(p.onset_step > 0);
  CHECK(p.onset_step < s.size());
  CHECK(p.band_halfwidth >= 0.0);
}

TEST_CASE("a linear ramp never settles") {
  std::vector<double> s(2000);
  for (std::size_t t = 0; t < s.size(); ++t) s[t] = 10.0 - 0.004 * double(t);
  CHECK_FALSE(detect_plateau(s, 100, 0.01).found);
}

TEST_CASE("plateau preconditions") {
  const std::vector<double> s(10, 1.0);
  CHECK_THROWS_AS(detect_plateau(s, 6, 0.01), std::invalid_argument);
  CHECK_THROWS_AS(detect_plateau(s, 0, 0.01), std::invalid_argument);
}
