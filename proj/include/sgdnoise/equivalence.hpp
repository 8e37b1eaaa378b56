#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sgdnoise/averaging.hpp"
#include "sgdnoise/model.hpp"
#include "sgdnoise/schedule.hpp"
#include "sgdnoise/trajectory.hpp"

namespace sgdnoise {

/// An averaging method over the window [t1, t2], k = t2 - t1.
///   swa:       mean of the last k iterates theta_{t1+1..t2}
///   two_point: (theta_t1 + theta_t2) / 2
///   ema:       EMA with decay delta, truncated at K = k (requires k >= 10/delta)
struct AveragingSpec {
  AveragingMethod method = AveragingMethod::two_point;
  std::uint64_t t1 = 0;
  std::uint64_t t2 = 1;
  double ema_decay = 0.0;

  std::uint64_t k() const { return t2 - t1; }
};

void validate(const AveragingSpec& spec);

/// The kernel the spec applies at step t2.
Kernel kernel_for(const AveragingSpec& spec);

/// Learning-rate schedule whose final iterate reproduces the averaged point
/// under frozen gradients. Over [t1, t2) the base rate at step s is scaled by
///   swa:       (k + 1 - i) / k,    i = s - t1 + 1
///   two_point: 1/2
///   ema:       1 - (1 - delta)^(t2 - s)
/// and left unchanged elsewhere. Rejects windows outside a bounded base domain.
Schedule equivalent_schedule(const Schedule& base, const AveragingSpec& spec);

/// theta_t1 - sum_s schedule(s) g_s over the window's steps s in [t1, t2).
/// Every window step needs exactly one recorded gradient.
VectorXd frozen_gradient_replay(const VectorXd& theta1, const std::vector<GradientSnapshot>& grads,
                                const Schedule& schedule, std::uint64_t t1, std::uint64_t t2);

/// Iterates theta_t1..theta_t2 produced by stepping with the recorded gradients.
std::vector<VectorXd> frozen_gradient_path(const VectorXd& theta1, const std::vector<GradientSnapshot>& grads,
                                           const Schedule& schedule, std::uint64_t t1, std::uint64_t t2);

struct ComparisonRow {
  std::uint64_t step = 0;
  double dist_avg_vs_sched = 0.0;
  double dist_avg_vs_indep = 0.0;
  double loss_avg = 0.0;
  double loss_sched = 0.0;
  double loss_momentary = 0.0;
};

struct ComparisonReport {
  double l2_distance = 0.0;         // ||theta_avg - theta_sched|| at t2
  double loss_gap = 0.0;            // |L(theta_avg) - L(theta_sched)|
  double momentary_gap = 0.0;       // |L(theta_t2) - L(theta_avg)|
  double control_distance = 0.0;    // ||theta_avg - theta_indep||
  double relative_distance = 0.0;   // l2_distance / control_distance
  double theta_norm = 0.0;          // ||theta_avg||
  double loss_avg = 0.0;
  double loss_sched = 0.0;
  double loss_momentary = 0.0;
  std::vector<double> gradient_cosines;  // main vs side-trip, same batch, per window step
  std::vector<ComparisonRow> rows;       // per step t1..t2 (partial-window averages)
  bool diverged = false;
};

struct CompareOptions {
  std::size_t batch_size = 1;
  std::uint64_t control_seed = 0;  // batch seed of the independent control side-trip
  bool frozen_gradients = false;   // reuse gradients evaluated at theta_t1 for every window step
};

/// Runs the base trajectory to t2 and averages it, then replays [t1, t2) from
/// theta_t1 with the equivalent schedule on the same batches (side-trip) and on
/// an independent batch sequence (control). Momentum is never used.
ComparisonReport compare_average_vs_schedule(const Ensemble& ensemble, const VectorXd& theta0, const Schedule& base,
                                             const AveragingSpec& spec, std::uint64_t seed,
                                             const CompareOptions& options = {});

struct AlignmentRow {
  std::uint64_t step = 0;
  std::optional<double> cosine;  // vs the gradient at the first snapshot; empty if a gradient vanishes
  double norm_ratio = 0.0;
  std::optional<double> control_cosine;  // two fresh independent batches at the same theta
};

/// Gradient of `fixed_batch` along the record's snapshots, compared with the
/// gradient at the first snapshot, plus a control of independent batches drawn
/// from `control_seed` with the fixed batch's size.
std::vector<AlignmentRow> gradient_alignment(const Ensemble& ensemble, const TrajectoryRecord& record,
                                             const QuadraticBatch& fixed_batch, std::uint64_t control_seed);

}  // namespace sgdnoise
