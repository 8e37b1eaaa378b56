#include <doctest.h>

#include "helpers.hpp"
#include "sgdnoise/plateau.hpp"
#include "sgdnoise/trajectory.hpp"

using namespace sgdnoise;
using testutil::scalar_sample;

namespace {

QuadraticBatch single(QuadraticSample q) {
  QuadraticBatch b;
  b.samples.push_back(std::move(q));
  return b;
}

}  // namespace

TEST_CASE("single steps") {
  const VectorXd one = VectorXd::Ones(1);
  CHECK(sgd_step(one, single(scalar_sample(2.0, 1.0)), 0.0).first == one);
  CHECK(sgd_step(one, single(scalar_sample(1.0, 0.0)), 0.1).first[0] == doctest::Approx(0.9));
  const auto b = single(scalar_sample(2.0, 1.0));
  const VectorXd next = sgd_step(one, b, 0.25).first;
  CHECK(next[0] == doctest::Approx(-0.5));
  CHECK(batch_loss(b, next) == doctest::Approx(0.0).scale(1.0));
  CHECK_THROWS_AS(sgd_step(VectorXd::Ones(2), b, 0.1), std::invalid_argument);
}

TEST_CASE("zero momentum matches plain SGD") {
  QuadraticBatch b;
  Stream s = make_stream(2);
  const Ensemble ens = make_ensemble(testutil::factor_spec(testutil::random_spd(1, 0.5, 1.5, 4)));
  b = sample_batch(ens, s, 3);
  const VectorXd th = standard_normal_vector(s, 4);
  auto [plain, none] = sgd_step(th, b, 0.1);
  auto [heavy, state] = sgd_step(th, b, 0.1, MomentumState{VectorXd::Zero(4), 0.0});
  CHECK(plain == heavy);
  CHECK(state->velocity == batch_gradient(b, th));
  CHECK_THROWS_AS(sgd_step(th, b, 0.1, MomentumState{VectorXd::Zero(4), 1.0}), std::invalid_argument);
}

TEST_CASE("trajectory recording") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(MatrixXd::Identity(3, 3)));
  const VectorXd th0 = (VectorXd(3) << 1.0, 2.0, 2.0).finished();
  const auto r0 = run_trajectory(ens, th0, Schedule::constant(0.1), 0, 1, 7);
  REQUIRE(r0.norms.size() == 1);
  CHECK(r0.norms[0] == doctest::Approx(3.0));

  RecorderConfig rec;
  rec.thin_every = 10;
  const auto r = run_trajectory(ens, th0, Schedule::constant(0.1), 25, 2, 7, rec);
  CHECK(r.norms.size() == 26);
  CHECK(r.loss_global.size() == 26);
  CHECK(r.loss_batch.size() == 26);
  CHECK(r.lrs.size() == 26);
  CHECK(r.steps == std::vector<std::uint64_t>{0, 10, 20, 25});
  CHECK(r.theta_at(20).size() == 3);
  CHECK_THROWS_WITH_AS(r.theta_at(13), doctest::Contains("13"), std::out_of_range);

  const auto again = run_trajectory(ens, th0, Schedule::constant(0.1), 25, 2, 7, rec);
  CHECK(again.loss_batch == r.loss_batch);
  CHECK(again.final_theta() == r.final_theta());
}

TEST_CASE("unstable learning rate diverges") {
  const Ensemble ens = make_ensemble(testutil::additive_spec(MatrixXd::Identity(2, 2)));
  const auto r = run_trajectory(ens, VectorXd::Ones(2), Schedule::constant(2.5), 1000, 1, 3);
  CHECK(r.diverged);
  REQUIRE(r.diverged_at);
  CHECK(*r.diverged_at < 1000);
  CHECK_FALSE(r.warnings.empty());
}

TEST_CASE("full-gradient step with lr = 1/lambda_max decreases the global loss") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(testutil::random_spd(3, 0.1, 4.0, 6)));
  Stream s = make_stream(4);
  for (int i = 0; i < 10; ++i) {
    const VectorXd th = standard_normal_vector(s, 6);
    const VectorXd next = th - global_gradient(ens, th) / ens.lambda_max();
    CHECK(global_loss(ens, next) < global_loss(ens, th));
  }
}

TEST_CASE("one-dimensional stationary second moment is alpha / 2") {
  const Ensemble ens = make_ensemble(testutil::additive_spec(MatrixXd::Identity(1, 1)));
  RecorderConfig rec;
  rec.thin_every = 1000000;
  rec.batch_loss = false;
  const auto r = run_trajectory(ens, VectorXd::Zero(1), Schedule::constant(0.05), 200000, 1, 11, rec);
  double sum = 0.0;
  for (std::size_t t = 2000; t < r.norms.size(); ++t) sum += r.norms[t] * r.norms[t];
  CHECK(sum / double(r.norms.size() - 2000) == doctest::Approx(0.025).epsilon(0.1));
}

TEST_CASE("additive norm stays bounded and plateaus") {
  const Ensemble ens = make_ensemble(testutil::additive_spec(testutil::random_spd(5, 0.5, 1.5, 8)));
  RecorderConfig rec;
  rec.thin_every = 1000000;
  rec.batch_loss = false;
  const auto r = run_trajectory(ens, VectorXd::Constant(8, 3.0), Schedule::constant(0.1), 100000, 1, 5, rec);
  CHECK_FALSE(r.diverged);
  CHECK(std::isfinite(*std::max_element(r.norms.begin(), r.norms.end())));
  CHECK(detect_plateau(r.norms, 5000, 0.05).found);
}

TEST_CASE("one-step profile") {
  const auto train = single(scalar_sample(2.0, 1.0));
  const std::vector<QuadraticBatch> held{single(scalar_sample(1.0, -1.0)), single(scalar_sample(3.0, 0.5))};
  const auto t = loss_vs_lr_profile(VectorXd::Ones(1), train, held, {0.0, 0.25});
  CHECK(t.rows[0].train_loss == doctest::Approx(t.train_start));
  CHECK(t.rows[0].held_out_mean == doctest::Approx(t.held_out_start));
  CHECK(t.rows[1].train_loss == doctest::Approx(0.0).scale(1.0));

  const auto grid = default_lr_grid(2.0);
  CHECK(grid.size() == 50);
  CHECK(grid.front() == doctest::Approx(1e-4));
  CHECK(grid.back() == doctest::Approx(2.0));
}

TEST_CASE("small batches fit the training batch far better than held-out batches") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(MatrixXd::Identity(256, 256), 1));
  Stream s = make_stream(8);
  const VectorXd th = standard_normal_vector(s, 256);
  const auto train = sample_batch(ens, s, 4);
  std::vector<QuadraticBatch> held;
  for (int i = 0; i < 8; ++i) held.push_back(sample_batch(ens, s, 4));
  const auto t = loss_vs_lr_profile(th, train, held, default_lr_grid(1.0));
  double bt = 1e300, bh = 1e300;
  for (const auto& r : t.rows) {
    bt = std::min(bt, r.train_loss / t.train_start);
    bh = std::min(bh, r.held_out_mean / t.held_out_start);
  }
  CHECK(bt < 0.2 * bh);
}

TEST_CASE("interpolation along a line is quadratic") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(testutil::random_spd(6, 0.2, 2.0, 5), 2));
  Stream s = make_stream(6);
  const auto b = sample_batch(ens, s, 3);
  const VectorXd a = standard_normal_vector(s, 5), c = standard_normal_vector(s, 5);
  const auto curve = interpolate_losses(a, c, b, 21);
  CHECK(curve.front().first == 0.0);
  CHECK(curve.back().first == 1.0);
  // Three points determine the parabola; check the rest against it.
  const double l0 = curve[0].second, l1 = curve[10].second, l2 = curve[20].second;
  for (const auto& [t, l] : curve) {
    const double p = l0 * (t - 0.5) * (t - 1.0) / 0.5 - l1 * t * (t - 1.0) / 0.25 + l2 * t * (t - 0.5) / 0.5;
    CHECK(std::abs(p - l) <= 1e-10 * std::max(1.0, std::abs(l)));
  }
  CHECK(curve[10].second <= std::max(l0, l2));
  const auto flat = interpolate_losses(a, a, b, 5);
  for (const auto& [t, l] : flat) CHECK(l == flat.front().second);
  CHECK_THROWS_AS(interpolate_losses(a, VectorXd::Zero(4), b, 5), std::invalid_argument);
}
