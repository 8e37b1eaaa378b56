#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "sgdnoise/linalg.hpp"
#include "sgdnoise/stationary.hpp"

using namespace sgdnoise;

TEST_CASE("drag/drift decomposition") {
  QuadraticSample q;
  q.A = MatrixXd::Identity(3, 3);
  q.c = VectorXd::Zero(3);
  const VectorXd th = (VectorXd(3) << 1.0, -1.0, 2.0).finished();
  const auto split = decompose_step(th, q, 0.1);
  CHECK(split.gamma == doctest::Approx(1.0));
  CHECK(split.xi.norm() < 1e-15);

  const auto one = decompose_step(VectorXd::Constant(1, 0.7), testutil::scalar_sample(1.0, 0.3), 0.1);
  CHECK(one.gamma == doctest::Approx(1.0));
  CHECK(one.xi[0] == doctest::Approx(0.3));

  Stream s = make_stream(5);
  QuadraticSample r;
  r.A = standard_normal_matrix(s, 4, 5);
  r.c = standard_normal_vector(s, 4);
  const VectorXd t5 = standard_normal_vector(s, 5);
  const auto sp = decompose_step(t5, r, 0.07);
  const VectorXd direct = t5 - 0.07 * r.gradient(t5);
  CHECK((sp.reconstruct(t5, 0.07) - direct).norm() <= 1e-12 * direct.norm());
  CHECK(std::abs(sp.theta_perp.dot(t5)) < 1e-12 * t5.squaredNorm() * sp.gamma + 1e-12);
  CHECK_THROWS_AS(decompose_step(VectorXd::Zero(5), r, 0.1), std::invalid_argument);
}

TEST_CASE("norm change and zero-drift rate") {
  const VectorXd th = VectorXd::Unit(2, 0);
  CHECK(norm_change(th, 1.0, 1.0, 0.0) == 0.0);
  CHECK(norm_change(th, 1.0, 1.0, 1.0) == doctest::Approx(0.0).scale(1.0));
  CHECK(norm_change(th, 2.0, 1.0, 1e-4) == doctest::Approx(-2 * 1e-4 * 2.0).epsilon(1e-3));

  CHECK(zero_drift_lr(1.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(zero_drift_lr(1e-12, 1.0, 1.0, 1.0) < 1e-11);
  CHECK_THROWS_AS(zero_drift_lr(0.0, 0.0, 0.0, 0.0), std::invalid_argument);

  const double a = zero_drift_lr(0.3, 0.8, 0.9, 0.05);
  CHECK(zero_drift_norm_sq(a, 0.8, 0.9, 0.05) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(zero_drift_norm_sq_first_order(a, 0.8, 0.05) == doctest::Approx(0.3).epsilon(a));
}

TEST_CASE("predicted stationary norm") {
  const Ensemble ens = make_ensemble(testutil::additive_spec(MatrixXd::Identity(4, 4), 2.0));
  CHECK(predicted_stationary_norm(0.0, ens) == 0.0);
  CHECK(predicted_stationary_norm(0.02, ens) == doctest::Approx(0.2));
  CHECK(predicted_stationary_norm(0.08, ens) / predicted_stationary_norm(0.02, ens) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("whitening") {
  const MatrixXd A = testutil::random_spd(3, 0.5, 2.0, 2);
  const auto w0 = whiten(A, MatrixXd::Identity(2, 2), 0.1);
  CHECK(w0.Q.isApprox(MatrixXd::Identity(2, 2)));
  CHECK(w0.omega_w.isApprox(A));
  CHECK(w0.gamma.isApprox(MatrixXd::Identity(2, 2) - 0.1 * A));

  const MatrixXd C = VectorXd((VectorXd(2) << 4.0, 9.0).finished()).asDiagonal();
  const auto w1 = whiten(A, C, 0.1);
  CHECK(w1.Q(0, 0) == doctest::Approx(2.0));
  CHECK(w1.Q(1, 1) == doctest::Approx(3.0));

  const MatrixXd Cr = testutil::random_spd(4, 0.2, 5.0, 5);
  const MatrixXd Ar = testutil::random_spd(5, 0.1, 3.0, 5);
  const auto w = whiten(Ar, Cr, 0.1);
  CHECK(linalg::frobenius_relative_error(w.Q * w.Q.transpose(), Cr) < 1e-10);
  Eigen::EigenSolver<MatrixXd> es(w.omega_w);
  VectorXd ev = es.eigenvalues().real();
  std::sort(ev.data(), ev.data() + ev.size());
  CHECK((ev - testutil::linspace(0.1, 3.0, 5)).norm() < 1e-8);
  CHECK_THROWS_AS(whiten(Ar, -Cr, 0.1), std::invalid_argument);
}

TEST_CASE("geometric series") {
  CHECK(geometric_series_sum(MatrixXd::Zero(3, 3)) == MatrixXd::Identity(3, 3));
  CHECK(geometric_series_sum(MatrixXd::Constant(1, 1, 0.9))(0, 0) == doctest::Approx(1.0 / 0.19).epsilon(1e-14));
  const MatrixXd G = MatrixXd::Identity(6, 6) - 0.1 * testutil::random_spd(6, 0.5, 2.0, 6);
  MatrixXd sum = MatrixXd::Zero(6, 6), term = MatrixXd::Identity(6, 6);
  for (int i = 0; i < 2000; ++i) {
    sum += term;
    term = term * G * G;
  }
  CHECK(linalg::frobenius_relative_error(geometric_series_sum(G), sum) < 1e-8);
  CHECK_THROWS_AS(geometric_series_sum(MatrixXd::Identity(2, 2)), std::domain_error);
}

TEST_CASE("closed-form covariances") {
  const MatrixXd one = MatrixXd::Identity(1, 1);
  CHECK(stationary_covariance(0.1, one, identity_kernel()).F(0, 0) == doctest::Approx(0.1 / 1.9));

  const MatrixXd omega = testutil::random_spd(7, 0.5, 1.5, 4);
  const auto id = stationary_covariance(0.1, omega, identity_kernel());
  CHECK((id.F - id.S_alpha).norm() < 1e-14 * id.S_alpha.norm());
  CHECK(baseline_covariance(0.1, omega).isApprox(id.S_alpha));

  const auto tp = two_point_covariance(0.1, omega, 2000);
  CHECK(linalg::frobenius_relative_error(tp, 0.5 * id.S_alpha) < 1e-12);
  CHECK(linalg::frobenius_relative_error(stationary_covariance(0.1, omega, two_point_kernel(17)).F,
                                         two_point_covariance(0.1, omega, 17)) < 1e-10);
  CHECK(linalg::frobenius_relative_error(multi_point_covariance(0.1, omega, 2, 9), two_point_covariance(0.1, omega, 9)) <
        1e-10);
  CHECK(linalg::frobenius_relative_error(multi_point_covariance(0.1, omega, 1, 9), id.S_alpha) < 1e-12);
  CHECK(linalg::frobenius_relative_error(multi_point_covariance(0.1, omega, 5, 6),
                                         stationary_covariance(0.1, omega, multi_point_kernel(5, 6)).F) < 1e-10);
  CHECK(multi_point_covariance(0.1, one, 4, 5000)(0, 0) == doctest::Approx(0.1 / 1.9 / 4).epsilon(1e-9));

  for (const Kernel& k : {swa_kernel(20), ema_kernel(0.1, 100), multi_point_kernel(3, 4)}) {
    const auto r = stationary_covariance(0.1, omega, k);
    CHECK((r.F - r.F.transpose()).norm() <= 1e-10 * r.F.norm());
    CHECK(r.effective_lrs.size() == 4);
  }
  // A slow mode averaged over many relaxation times is strongly suppressed.
  const MatrixXd slow = VectorXd((VectorXd(2) << 1.0, 0.01).finished()).asDiagonal();
  const auto sup = stationary_covariance(0.1, slow, swa_kernel(20000));
  CHECK(sup.F(1, 1) < 0.15 * sup.S_alpha(1, 1));

  MatrixXd unstable = omega;
  unstable *= 30.0;
  CHECK_THROWS_WITH_AS(stationary_covariance(0.1, unstable, identity_kernel()), doctest::Contains("eigenvalue"),
                       std::domain_error);
}

TEST_CASE("effective learning rate") {
  CHECK(effective_lr(0.1, 1.0, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(effective_lr(0.1, 1.0, 7) == doctest::Approx(0.1 * (1 + std::pow(0.9, 7)) / 2).epsilon(1e-15));
  CHECK(effective_lr(0.1, 1.0, 7) == doctest::Approx(0.07391484).epsilon(1e-8));
  CHECK(effective_lr(0.1, 1.0, 100000) == doctest::Approx(0.05).epsilon(1e-15));
  for (std::uint64_t d : {0, 1, 3, 10, 100})
    for (double k : {0.5, 2.0, 9.0}) {
      const double v = effective_lr(0.1, k, d);
      CHECK(v >= 0.05 - 1e-15);
      CHECK(v <= 0.1 + 1e-15);
    }
  CHECK_THROWS_AS(effective_lr(0.1, 25.0, 3), std::invalid_argument);
}

TEST_CASE("Monte Carlo covariance agrees with the scalar closed form") {
  const Ensemble ens = make_ensemble(testutil::additive_spec(MatrixXd::Identity(1, 1), 1.0));
  const auto mc = monte_carlo_covariance(ens, 0.1, identity_kernel(), 4000, 3, 4, 1);
  CHECK(mc.samples == 4000);
  CHECK(mc.second_moment(0, 0) == doctest::Approx(0.1 / 1.9).epsilon(0.1));
  const auto again = monte_carlo_covariance(ens, 0.1, identity_kernel(), 4000, 3, 4, 3);
  CHECK(again.second_moment == mc.second_moment);
  const Ensemble factor = make_ensemble(testutil::factor_spec(MatrixXd::Identity(1, 1)));
  CHECK_THROWS_AS(monte_carlo_covariance(factor, 0.1, identity_kernel(), 10, 1), std::invalid_argument);
}
