#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "sgdnoise/equivalence.hpp"

using namespace sgdnoise;

namespace {

std::vector<GradientSnapshot> random_grads(Stream& s, std::uint64_t t1, std::uint64_t t2, Eigen::Index d) {
  std::vector<GradientSnapshot> g;
  for (std::uint64_t t = t1; t < t2; ++t) g.push_back({t, t, standard_normal_vector(s, d)});
  return g;
}

double replay_error(const AveragingSpec& spec, const Schedule& base, std::uint64_t seed) {
  Stream s = make_stream(seed);
  const VectorXd th = standard_normal_vector(s, 16);
  const auto grads = random_grads(s, spec.t1, spec.t2, 16);
  const auto path = frozen_gradient_path(th, grads, base, spec.t1, spec.t2);
  const VectorXd avg = average_iterates(kernel_for(spec), path);
  const VectorXd rep = frozen_gradient_replay(th, grads, equivalent_schedule(base, spec), spec.t1, spec.t2);
  return (avg - rep).norm() / std::max({avg.norm(), rep.norm(), (rep - th).norm()});
}

}  // namespace

TEST_CASE("single-step two-point average is a half step") {
  const VectorXd th = VectorXd::Constant(2, 1.0);
  const VectorXd g = (VectorXd(2) << 0.5, -2.0).finished();
  const AveragingSpec spec{AveragingMethod::two_point, 0, 1, 0.0};
  const auto eq = equivalent_schedule(Schedule::constant(0.2), spec);
  const VectorXd rep = frozen_gradient_replay(th, {{0, 0, g}}, eq, 0, 1);
  CHECK(rep.isApprox(0.5 * (th + (th - 0.2 * g))));
  CHECK(rep.isApprox(th - 0.1 * g));
}

TEST_CASE("averaging equals replay with the equivalent schedule") {
  const auto base = Schedule::linear_decay(0.1, 10000);
  for (std::uint64_t k : {1, 2, 8, 32}) {
    CHECK(replay_error({AveragingMethod::swa, 500, 500 + k, 0.0}, base, k) <= 1e-10);
    CHECK(replay_error({AveragingMethod::two_point, 500, 500 + k, 0.0}, base, 100 + k) <= 1e-10);
  }
  for (double delta : {0.05, 0.1}) {
    const auto k = std::uint64_t(std::ceil(20.0 / delta));
    CHECK(replay_error({AveragingMethod::ema, 300, 300 + k, delta}, base, 7) <= 1e-10 + std::pow(1 - delta, double(k)));
  }
}

TEST_CASE("equivalence errors") {
  Stream s = make_stream(1);
  auto grads = random_grads(s, 10, 20, 3);
  const auto base = Schedule::constant(0.1);
  grads.erase(grads.begin() + 4);
  CHECK_THROWS_WITH_AS(frozen_gradient_replay(VectorXd::Zero(3), grads, base, 10, 20), doctest::Contains("14"),
                       std::invalid_argument);
  grads = random_grads(s, 10, 20, 3);
  grads.push_back(grads.front());
  CHECK_THROWS_AS(frozen_gradient_replay(VectorXd::Zero(3), grads, base, 10, 20), std::invalid_argument);

  const auto table = Schedule::table({{0, 0.1}, {50, 0.05}});
  CHECK_THROWS_AS(equivalent_schedule(table, {AveragingMethod::swa, 40, 60, 0.0}), std::out_of_range);
  CHECK_THROWS_AS(validate({AveragingMethod::ema, 0, 100, 0.05}), std::invalid_argument);
  CHECK_THROWS_AS(validate({AveragingMethod::swa, 10, 10, 0.0}), std::invalid_argument);
}

TEST_CASE("frozen-gradient comparison collapses to the exact replay") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(testutil::random_spd(2, 0.1, 1.0, 8), 2));
  CompareOptions o;
  o.batch_size = 4;
  o.control_seed = 99;
  o.frozen_gradients = true;
  const auto r = compare_average_vs_schedule(ens, VectorXd::Constant(8, 2.0), Schedule::constant(0.05),
                                             {AveragingMethod::swa, 200, 260, 0.0}, 5, o);
  CHECK_FALSE(r.diverged);
  CHECK(r.l2_distance <= 1e-10 * r.theta_norm);
  CHECK(r.rows.size() == 61);
}

TEST_CASE("live gradients: the schedule lands near the average") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(testutil::random_spd(3, 0.05, 1.0, 32), 4));
  CompareOptions o;
  o.batch_size = 8;
  o.control_seed = 1234;
  const AveragingSpec spec{AveragingMethod::swa, 2000, 2100, 0.0};
  const auto r = compare_average_vs_schedule(ens, VectorXd::Constant(32, 3.0), Schedule::constant(0.02), spec, 17, o);
  CHECK(r.relative_distance < 1.0);
  CHECK(r.loss_gap < r.momentary_gap);
  CHECK(r.gradient_cosines.size() == 100);

  const auto again = compare_average_vs_schedule(ens, VectorXd::Constant(32, 3.0), Schedule::constant(0.02), spec, 17, o);
  CHECK(again.l2_distance == r.l2_distance);
  CHECK(again.loss_gap == r.loss_gap);
}

TEST_CASE("gradient alignment") {
  const Ensemble ens = make_ensemble(testutil::factor_spec(MatrixXd::Identity(256, 256), 1));
  RecorderConfig rec;
  rec.thin_every = 10;
  const auto record = run_trajectory(ens, VectorXd::Constant(256, 1.0), Schedule::constant(0.001), 100, 1, 3, rec);
  Stream s = make_stream(4);
  const auto fixed = sample_batch(ens, s, 1);
  const auto rows = gradient_alignment(ens, record, fixed, 77);
  REQUIRE(rows.size() == record.steps.size());
  CHECK(*rows[0].cosine == doctest::Approx(1.0));
  CHECK(rows[0].norm_ratio == doctest::Approx(1.0));
  double ctrl = 0.0;
  for (const auto& r : rows) {
    CHECK(*r.cosine > 0.5);
    ctrl += std::abs(*r.control_cosine) / double(rows.size());
  }
  CHECK(ctrl <= 3.0 / std::sqrt(256.0));

  QuadraticBatch zero;
  QuadraticSample q;
  q.A = MatrixXd::Zero(1, 256);
  q.c = VectorXd::Zero(1);
  zero.samples.push_back(q);
  CHECK_FALSE(gradient_alignment(ens, record, zero, 77)[0].cosine.has_value());
}
