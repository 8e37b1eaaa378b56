#include <doctest.h>

#include <string>

#include "helpers.hpp"
#include "sgdnoise/linalg.hpp"

using namespace sgdnoise;
using namespace sgdnoise::linalg;

TEST_CASE("symmetric square root") {
  const MatrixXd c = VectorXd((VectorXd(2) << 4.0, 9.0).finished()).asDiagonal();
  const MatrixXd q = symmetric_sqrt(c);
  CHECK(q(0, 0) == doctest::Approx(2.0));
  CHECK(q(1, 1) == doctest::Approx(3.0));
  CHECK(std::abs(q(0, 1)) < 1e-15);

  const MatrixXd m = testutil::random_spd(5, 0.1, 10.0, 6);
  const MatrixXd r = symmetric_sqrt(m);
  CHECK(frobenius_relative_error(r * r, m) < 1e-12);
  CHECK((r - r.transpose()).norm() < 1e-12);
}

TEST_CASE("require_spd names the offending eigenvalue") {
  MatrixXd m = MatrixXd::Identity(3, 3);
  m(2, 2) = -0.5;
  try {
    require_spd(m, "omega");
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("omega") != std::string::npos);
    CHECK(msg.find("-0.5") != std::string::npos);
  }
  MatrixXd asym = MatrixXd::Identity(2, 2);
  asym(0, 1) = 0.3;
  CHECK_THROWS_AS(require_spd(asym, "m"), std::invalid_argument);
  CHECK_NOTHROW(require_spd(testutil::random_spd(1, 0.5, 2.0, 4), "m"));
}

TEST_CASE("checked inverse and matrix power") {
  const MatrixXd m = testutil::random_spd(2, 0.5, 3.0, 5);
  CHECK((checked_inverse(m) * m - MatrixXd::Identity(5, 5)).norm() < 1e-10);
  MatrixXd singular = MatrixXd::Ones(3, 3);
  CHECK_THROWS_AS(checked_inverse(singular), std::domain_error);

  MatrixXd expected = MatrixXd::Identity(5, 5);
  for (int i = 0; i < 13; ++i) expected = expected * m;
  CHECK(frobenius_relative_error(matrix_power(m, 13), expected) < 1e-12);
  CHECK(matrix_power(m, 0) == MatrixXd::Identity(5, 5));
}

TEST_CASE("random orthogonal matrices are orthogonal") {
  Stream s = make_stream(11);
  const MatrixXd q = random_orthogonal(s, 7);
  CHECK((q.transpose() * q - MatrixXd::Identity(7, 7)).norm() < 1e-12);
  CHECK(spectral_radius(testutil::random_spd(3, 0.5, 2.5, 4)) == doctest::Approx(2.5));
}
