#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sgdnoise/model.hpp"
#include "sgdnoise/schedule.hpp"

namespace sgdnoise {

struct MomentumState {
  VectorXd velocity;
  double coefficient = 0.0;  // in [0, 1)
};

struct RecorderConfig {
  std::uint64_t thin_every = 100;  // full-theta snapshot stride; the last step is always kept
  bool global_loss = true;
  bool batch_loss = true;
  bool gradients = false;  // keep the stochastic gradient used at every step
};

struct GradientSnapshot {
  std::uint64_t step = 0;
  std::uint64_t batch_id = 0;  // the absolute step whose batch produced the gradient
  VectorXd gradient;
};

/// Iterates and per-step series of one simulated run.
///
/// Per-step series have one entry per visited step start_step..last_step();
/// entry i belongs to step start_step + i and describes theta at that step
/// (lr is the rate used to leave it). Series that were not requested stay empty.
struct TrajectoryRecord {
  std::uint64_t start_step = 0;
  std::uint64_t thin_every = 100;
  std::vector<std::uint64_t> steps;  // snapshot steps, increasing
  std::vector<VectorXd> thetas;
  std::vector<double> loss_global;
  std::vector<double> loss_batch;
  std::vector<double> norms;
  std::vector<double> lrs;
  std::vector<GradientSnapshot> grad_snapshots;
  bool diverged = false;
  std::optional<std::uint64_t> diverged_at;
  std::vector<std::string> warnings;

  std::uint64_t last_step() const { return start_step + (norms.empty() ? 0 : norms.size() - 1); }
  const VectorXd& final_theta() const { return thetas.back(); }
  bool has_snapshot(std::uint64_t step) const;
  /// Throws std::out_of_range naming the step when no snapshot was stored.
  const VectorXd& theta_at(std::uint64_t step) const;
};

struct RunOptions {
  std::uint64_t start_step = 0;
  std::optional<double> momentum;  // heavy-ball coefficient; absent = plain SGD
  /// Called with every visited iterate (including theta0) in step order.
  std::function<void(std::uint64_t, const VectorXd&)> observer;
};

/// Non-finite coordinates or a norm above this mark a run as diverged.
inline constexpr double kDivergenceNorm = 1e12;

/// theta - lr * gradient, or the heavy-ball update v <- mu v + g,
/// theta <- theta - lr v when momentum is given.
std::pair<VectorXd, std::optional<MomentumState>> sgd_step(const VectorXd& theta, const StepObjective& objective,
                                                           double lr,
                                                           std::optional<MomentumState> momentum = std::nullopt);
std::pair<VectorXd, std::optional<MomentumState>> sgd_step(const VectorXd& theta, const QuadraticBatch& batch,
                                                           double lr,
                                                           std::optional<MomentumState> momentum = std::nullopt);

/// Runs `steps` SGD steps from theta0 starting at absolute step
/// options.start_step, drawing step objectives from `source`.
///
/// A stability warning is attached (once) when lr * lambda_max(omega) >= 2.
/// Divergence stops the run and marks the record; it is not an error.
TrajectoryRecord run_trajectory(const BatchSource& source, const VectorXd& theta0, const Schedule& schedule,
                                std::uint64_t steps, const RecorderConfig& recorder = {},
                                const RunOptions& options = {});

TrajectoryRecord run_trajectory(const Ensemble& ensemble, const VectorXd& theta0, const Schedule& schedule,
                                std::uint64_t steps, std::size_t batch_size, std::uint64_t seed,
                                const RecorderConfig& recorder = {}, const RunOptions& options = {});

struct ProfileRow {
  double lr = 0.0;
  double train_loss = 0.0;
  double held_out_mean = 0.0;
  double held_out_std = 0.0;
  double held_out_min = 0.0;
  double held_out_max = 0.0;
};

struct ProfileTable {
  double train_start = 0.0;
  double held_out_start = 0.0;  // mean over held-out batches at the starting theta
  std::vector<ProfileRow> rows;
};

/// One step along the training-batch gradient for every rate in lr_grid,
/// evaluated on the training batch and on each held-out batch.
ProfileTable loss_vs_lr_profile(const VectorXd& theta, const QuadraticBatch& train_batch,
                                const std::vector<QuadraticBatch>& held_out, const std::vector<double>& lr_grid);

/// `points` log-spaced rates from 1e-4 to 4 / lambda_max.
std::vector<double> default_lr_grid(double lambda_max, std::size_t points = 50);

/// Batch loss along theta(t) = (1 - t) theta_a + t theta_b on `grid` equispaced t in [0, 1].
std::vector<std::pair<double, double>> interpolate_losses(const VectorXd& theta_a, const VectorXd& theta_b,
                                                          const QuadraticBatch& batch, std::size_t grid);

}  // namespace sgdnoise
