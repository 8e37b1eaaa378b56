#include <doctest.h>

#include "helpers.hpp"
#include "sgdnoise/linalg.hpp"
#include "sgdnoise/model.hpp"

using namespace sgdnoise;
using testutil::scalar_sample;

namespace {

QuadraticBatch single(QuadraticSample q) {
  QuadraticBatch b;
  b.samples.push_back(std::move(q));
  return b;
}

MatrixXd mean_ata(const Ensemble& ens, std::size_t n, std::uint64_t seed, VectorXd* atc = nullptr) {
  Stream s = make_stream(seed);
  MatrixXd acc = MatrixXd::Zero(ens.dim(), ens.dim());
  VectorXd lin = VectorXd::Zero(ens.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = ens.draw_sample(s);
    acc += q.A.transpose() * q.A;
    lin += q.linear_term();
  }
  if (atc) *atc = lin / double(n);
  return acc / double(n);
}

}  // namespace

TEST_CASE("hand-evaluated scalar loss and gradient") {
  const auto b = single(scalar_sample(2.0, 1.0));
  const VectorXd one = VectorXd::Ones(1);
  CHECK(batch_loss(b, one) == doctest::Approx(4.5));
  CHECK(batch_gradient(b, one)[0] == doctest::Approx(6.0));
  CHECK(batch_gradient(b, VectorXd::Zero(1))[0] == doctest::Approx(2.0));  // A^T c
}

TEST_CASE("identity sample gives half the squared norm") {
  QuadraticSample q;
  q.A = MatrixXd::Identity(3, 3);
  q.c = VectorXd::Zero(3);
  const VectorXd th = (VectorXd(3) << 1.0, -2.0, 0.5).finished();
  CHECK(single(q).samples[0].loss(th) == doctest::Approx(0.5 * th.squaredNorm()));
}

TEST_CASE("batch loss at zero is half the mean |c|^2") {
  QuadraticBatch b;
  b.samples.push_back(scalar_sample(1.0, 2.0));
  b.samples.push_back(scalar_sample(3.0, 4.0));
  CHECK(batch_loss(b, VectorXd::Zero(1)) == doctest::Approx(0.5 * (4.0 + 16.0) / 2.0));
}

TEST_CASE("dimension mismatches are rejected") {
  const auto b = single(scalar_sample(2.0, 1.0));
  CHECK_THROWS_AS(batch_loss(b, VectorXd::Zero(2)), std::invalid_argument);
  CHECK_THROWS_AS(batch_gradient(b, VectorXd::Zero(2)), std::invalid_argument);
  const Ensemble ens = make_ensemble(testutil::factor_spec(MatrixXd::Identity(2, 2)));
  CHECK_THROWS_AS(global_loss(ens, VectorXd::Zero(3)), std::invalid_argument);
  CHECK_THROWS_AS(global_gradient(ens, VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(testutil::random_spd(4, 0.3, 2.0, 7), 3));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Stream s = make_stream(seed);
    const auto batch = sample_batch(ens, s, 5);
    const VectorXd th = standard_normal_vector(s, 7);
    const VectorXd g = batch_gradient(batch, th);
    VectorXd fd(7);
    for (Eigen::Index i = 0; i < 7; ++i) {
      VectorXd p = th, m = th;
      p[i] += 1e-5;
      m[i] -= 1e-5;
      fd[i] = (batch_loss(batch, p) - batch_loss(batch, m)) / 2e-5;
    }
    CHECK((fd - g).norm() / g.norm() < 1e-6);
  }
}

TEST_CASE("global loss and gradient") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(MatrixXd::Identity(3, 3)));
  CHECK(global_loss(ens, VectorXd::Zero(3)) == doctest::Approx(0.5));
  CHECK(global_loss(ens, VectorXd::Unit(3, 0)) == doctest::Approx(1.0));
  CHECK(global_gradient(ens, VectorXd::Zero(3)) == VectorXd::Zero(3));
}

TEST_CASE("global loss is the mean batch loss") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(testutil::random_spd(8, 0.5, 2.0, 4), 2, 1.5));
  Stream s = make_stream(1);
  const VectorXd th = standard_normal_vector(s, 4);
  const auto batch = sample_batch(ens, s, 100000);
  double sq = 0.0;
  for (const auto& q : batch.samples) {
    const double l = q.loss(th);
    sq += l * l;
  }
  const double mean = batch_loss(batch, th);
  const double se = std::sqrt((sq / 1e5 - mean * mean) / 1e5);
  CHECK(std::abs(mean - global_loss(ens, th)) < 4 * se);
}

TEST_CASE("sampler moments") {
  SUBCASE("identity target, m = 2") {
    const Ensemble ens = make_ensemble(testutil::factor_spec(MatrixXd::Identity(2, 2), 2));
    CHECK(linalg::frobenius_relative_error(mean_ata(ens, 100000, 3), ens.omega()) < 0.02);
  }
  SUBCASE("random SPD target, d = 8") {
    const Ensemble ens = make_ensemble(testutil::factor_spec(testutil::random_spd(9, 0.2, 3.0, 8)));
    VectorXd atc;
    CHECK(linalg::frobenius_relative_error(mean_ata(ens, 100000, 4, &atc), ens.omega()) < 0.02);
    // Each coordinate of A^T c has variance omega_ii c^2 / m; 3 standard errors of zero.
    const double se = std::sqrt(ens.omega().trace() * 1.0 / double(ens.sample_rows()) / 100000.0);
    CHECK(atc.norm() < 3 * se);
  }
  SUBCASE("fast/slow diagonal") {
    const MatrixXd omega = VectorXd((VectorXd(2) << 1.0, 0.015).finished()).asDiagonal();
    const Ensemble ens = make_ensemble(testutil::factor_spec(omega));
    CHECK(ens.lambda_max() == doctest::Approx(1.0));
    CHECK(ens.lambda_min() == doctest::Approx(0.015));
    CHECK(ens.sample_rows() == 2);
  }
}

TEST_CASE("ensemble validation") {
  MatrixXd bad = MatrixXd::Identity(2, 2);
  bad(1, 1) = -1.0;
  CHECK_THROWS_WITH_AS(make_ensemble(testutil::factor_spec(bad)), doctest::Contains("-1"), std::invalid_argument);
  EnsembleSpec s = testutil::factor_spec(MatrixXd::Identity(2, 2));
  s.d = 0;
  CHECK_THROWS_AS(make_ensemble(s), std::invalid_argument);
  s = testutil::factor_spec(MatrixXd::Identity(2, 2), 2, 0.0);
  CHECK_THROWS_AS(make_ensemble(s), std::invalid_argument);
}

TEST_CASE("batches are deterministic per seed and decorrelate across seeds") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(MatrixXd::Identity(256, 256), 1));
  Stream a = make_stream(5), b = make_stream(5);
  const auto ba = sample_batch(ens, a, 3), bb = sample_batch(ens, b, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ba.samples[i].A == bb.samples[i].A);
    CHECK(ba.samples[i].c == bb.samples[i].c);
  }
  const VectorXd th = VectorXd::Zero(256);
  double mean_abs = 0.0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    Stream s1 = make_stream(1000 + k), s2 = make_stream(2000 + k);
    const VectorXd g1 = batch_gradient(sample_batch(ens, s1, 1), th);
    const VectorXd g2 = batch_gradient(sample_batch(ens, s2, 1), th);
    mean_abs += std::abs(g1.dot(g2) / (g1.norm() * g2.norm())) / 50.0;
  }
  CHECK(mean_abs < 3.0 / std::sqrt(256.0));

  const BatchSource src(ens, 9, 2);
  CHECK(src.at(17).batch().samples[1].c == src.at(17).batch().samples[1].c);
}

TEST_CASE("additive objective") {
  const MatrixXd omega = testutil::random_spd(6, 0.5, 2.0, 3);
  const Ensemble ens = make_ensemble(testutil::additive_spec(omega, 2.0));
  CHECK(ens.noise_cov().isApprox(MatrixXd::Identity(3, 3) * 4.0 / 3.0));
  CHECK(ens.expected_linear_term_sq() == doctest::Approx(4.0));
  Stream s = make_stream(1);
  CHECK_THROWS_AS(ens.draw_sample(s), std::logic_error);
  const VectorXd b = ens.draw_noise(s);
  const auto obj = StepObjective::additive(ens, b);
  const VectorXd th = (VectorXd(3) << 0.3, -0.1, 0.7).finished();
  CHECK(obj.gradient(th).isApprox(omega * th + b));
  CHECK(obj.loss(th) == doctest::Approx(0.5 * th.dot(omega * th) + b.dot(th) + 2.0));
}
