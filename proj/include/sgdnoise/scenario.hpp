#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgdnoise/config.hpp"
#include "sgdnoise/model.hpp"
#include "sgdnoise/plateau.hpp"
#include "sgdnoise/schedule.hpp"
#include "sgdnoise/trajectory.hpp"

namespace sgdnoise {

struct RunSettings {
  std::optional<std::filesystem::path> output_dir;  // overrides the config's output_dir
  std::optional<std::uint64_t> seed;                // replaces the seeds with seed, seed+1, ...
  std::size_t threads = 1;
  bool plots = false;
};

struct ScenarioResult {
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> files;  // relative to output_dir, manifest last
  bool diverged = false;
  nlohmann::json summary;
};

/// Runs a validated scenario and writes its CSVs (and SVGs with plots on),
/// then manifest.json listing the config, seeds and every produced file.
/// Outputs depend only on the config and seeds, never on the thread count.
ScenarioResult run_scenario(const ScenarioConfig& config, const RunSettings& settings = {});

/// Applies a --seed override: seeds become base, base+1, ... keeping their count.
std::vector<std::uint64_t> override_seeds(const std::vector<std::uint64_t>& seeds, std::uint64_t base);

void write_trajectory_csv(const TrajectoryRecord& record, const std::filesystem::path& path);
void write_snapshots_csv(const TrajectoryRecord& record, const std::filesystem::path& path);

// Experiment building blocks shared by the scenarios and the acceptance suite.

struct ModeSeries {
  std::vector<double> total;  // 0.5 theta^T omega theta
  std::vector<double> fast;   // contribution of eigenmodes with kappa >= split
  std::vector<double> slow;
};

struct MultiscaleParams {
  double lr0 = 5e-2;
  double lr1 = 2e-2;
  double ema_decay = 1.0 / 450.0;
  std::uint64_t steps = 20000;
  std::optional<double> mode_split;  // default sqrt(lambda_min lambda_max)
};

struct MultiscaleSeries {
  ModeSeries plain;  // lr0
  ModeSeries ema;    // EMA of the lr0 trajectory
  ModeSeries small;  // lr1
  bool diverged = false;
};

/// Per-mode excess loss of three runs sharing theta0 and the batch sequence of
/// `seed`: lr0, the EMA of that same run, and lr1. Entry t describes step t.
MultiscaleSeries run_multiscale(const Ensemble& ensemble, const VectorXd& theta0, const MultiscaleParams& params,
                                std::size_t batch_size, std::uint64_t seed);

/// Element-wise mean of several runs (all of equal length).
MultiscaleSeries mean_series(const std::vector<MultiscaleSeries>& runs);

struct MultiscaleSummary {
  double stationary_plain = 0.0;  // mean total over the stationary tail
  double stationary_ema = 0.0;
  double stationary_small = 0.0;
  double fast_plain = 0.0;  // tail means per mode group
  double fast_ema = 0.0;
  double slow_plain = 0.0;
  double slow_ema = 0.0;
  std::optional<std::uint64_t> halving_plain;  // first step with slow <= slow[0] / 2
  std::optional<std::uint64_t> halving_ema;
  std::optional<std::uint64_t> halving_small;
  double slow_ratio_at_plain_halving = 0.0;  // slow_ema / slow_plain at halving_plain
};

/// Tail statistics use the last `tail_fraction` of the steps.
MultiscaleSummary summarize_multiscale(const MultiscaleSeries& series, double tail_fraction = 0.5);

struct BasinsRun {
  std::vector<double> distance;  // ||theta_t - theta'_T|| for t = 0..T
  double final_norm_a = 0.0;
  double final_norm_b = 0.0;
  bool diverged = false;
};

/// Two trajectories from the same theta0 with batch streams derived from
/// (seed, "branch", 0) and (seed, "branch", 1); distance of the first to the
/// final iterate of the second.
BasinsRun run_basins(const Ensemble& ensemble, const VectorXd& theta0, const Schedule& schedule, std::uint64_t steps,
                     std::size_t batch_size, std::uint64_t seed);

/// One-step profile at theta0 on a training batch and `held_out` fresh batches,
/// all drawn from streams derived from `seed`.
ProfileTable run_single_step_profile(const Ensemble& ensemble, const VectorXd& theta0, std::size_t batch_size,
                                     std::size_t held_out, const std::vector<double>& lr_grid, std::uint64_t seed);

/// Max |second difference - mean second difference| over the loss curve,
/// relative to the loss range; zero for an exactly quadratic curve.
double quadratic_residual(const std::vector<std::pair<double, double>>& curve);

}  // namespace sgdnoise
