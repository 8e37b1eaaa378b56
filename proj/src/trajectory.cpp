#include "sgdnoise/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sgdnoise {

bool TrajectoryRecord::has_snapshot(std::uint64_t step) const {
  return std::binary_search(steps.begin(), steps.end(), step);
}

const VectorXd& TrajectoryRecord::theta_at(std::uint64_t step) const {
  auto it = std::lower_bound(steps.begin(), steps.end(), step);
  if (it == steps.end() || *it != step) {
    std::ostringstream os;
    os << "trajectory record has no theta snapshot at step " << step << " (thin_every = " << thin_every << ")";
    throw std::out_of_range(os.str());
  }
  return thetas[std::size_t(it - steps.begin())];
}

std::pair<VectorXd, std::optional<MomentumState>> sgd_step(const VectorXd& theta, const StepObjective& objective,
                                                           double lr, std::optional<MomentumState> momentum) {
  if (!(lr >= 0.0)) throw std::invalid_argument("sgd_step: learning rate must be >= 0");
  VectorXd g = objective.gradient(theta);
  if (!momentum) return {theta - lr * g, std::nullopt};
  if (!(momentum->coefficient >= 0.0 && momentum->coefficient < 1.0)) {
    throw std::invalid_argument("sgd_step: momentum coefficient must lie in [0, 1)");
  }
  if (momentum->velocity.size() == 0) momentum->velocity = VectorXd::Zero(theta.size());
  if (momentum->velocity.size() != theta.size()) {
    throw std::invalid_argument("sgd_step: velocity dimension mismatch");
  }
  momentum->velocity = momentum->coefficient * momentum->velocity + g;
  VectorXd next = theta - lr * momentum->velocity;
  return {std::move(next), std::move(momentum)};
}

std::pair<VectorXd, std::optional<MomentumState>> sgd_step(const VectorXd& theta, const QuadraticBatch& batch,
                                                           double lr, std::optional<MomentumState> momentum) {
  return sgd_step(theta, StepObjective::from_batch(batch), lr, std::move(momentum));
}

TrajectoryRecord run_trajectory(const BatchSource& source, const VectorXd& theta0, const Schedule& schedule,
                                std::uint64_t steps, const RecorderConfig& recorder, const RunOptions& options) {
  const Ensemble& ensemble = source.ensemble();
  if (theta0.size() != ensemble.dim()) throw std::invalid_argument("run_trajectory: theta0 dimension mismatch");
  if (recorder.thin_every == 0) throw std::invalid_argument("run_trajectory: thin_every must be positive");

  TrajectoryRecord rec;
  rec.start_step = options.start_step;
  rec.thin_every = recorder.thin_every;
  const std::uint64_t end = options.start_step + steps;

  std::optional<MomentumState> momentum;
  if (options.momentum) momentum = MomentumState{VectorXd::Zero(theta0.size()), *options.momentum};

  bool warned = false;
  VectorXd theta = theta0;
  for (std::uint64_t t = options.start_step;; ++t) {
    const bool last = (t == end);
    const double norm = theta.norm();
    const bool bad = !theta.allFinite() || !(norm <= kDivergenceNorm);

    if (options.observer) options.observer(t, theta);
    rec.norms.push_back(norm);
    if (recorder.global_loss) rec.loss_global.push_back(global_loss(ensemble, theta));
    if ((t - options.start_step) % recorder.thin_every == 0 || last || bad) {
      rec.steps.push_back(t);
      rec.thetas.push_back(theta);
    }
    const double lr = schedule.contains(t) ? schedule.eval(t) : std::numeric_limits<double>::quiet_NaN();
    rec.lrs.push_back(lr);

    if (bad) {
      rec.diverged = true;
      rec.diverged_at = t;
      if (recorder.batch_loss) rec.loss_batch.push_back(std::numeric_limits<double>::quiet_NaN());
      break;
    }

    const bool need_batch = !last || recorder.batch_loss;
    std::optional<StepObjective> objective;
    if (need_batch) objective = source.at(t);
    if (recorder.batch_loss) rec.loss_batch.push_back(objective->loss(theta));
    if (last) break;

    if (!schedule.contains(t)) {
      std::ostringstream os;
      os << "run_trajectory: schedule undefined at step " << t;
      throw std::out_of_range(os.str());
    }
    if (!warned && lr * ensemble.lambda_max() >= 2.0) {
      std::ostringstream os;
      os << "step " << t << ": lr * lambda_max(omega) = " << lr * ensemble.lambda_max()
         << " >= 2, the mean dynamics are unstable";
      rec.warnings.push_back(os.str());
      warned = true;
    }
    if (recorder.gradients) rec.grad_snapshots.push_back({t, t, objective->gradient(theta)});
    auto [next, state] = sgd_step(theta, *objective, lr, std::move(momentum));
    theta = std::move(next);
    momentum = std::move(state);
  }
  return rec;
}

TrajectoryRecord run_trajectory(const Ensemble& ensemble, const VectorXd& theta0, const Schedule& schedule,
                                std::uint64_t steps, std::size_t batch_size, std::uint64_t seed,
                                const RecorderConfig& recorder, const RunOptions& options) {
  return run_trajectory(BatchSource(ensemble, seed, batch_size), theta0, schedule, steps, recorder, options);
}

ProfileTable loss_vs_lr_profile(const VectorXd& theta, const QuadraticBatch& train_batch,
                                const std::vector<QuadraticBatch>& held_out, const std::vector<double>& lr_grid) {
  if (lr_grid.empty()) throw std::invalid_argument("loss_vs_lr_profile: lr_grid is empty");
  if (held_out.empty()) throw std::invalid_argument("loss_vs_lr_profile: no held-out batches");
  ProfileTable table;
  table.train_start = batch_loss(train_batch, theta);
  for (const auto& b : held_out) table.held_out_start += batch_loss(b, theta);
  table.held_out_start /= double(held_out.size());

  const VectorXd g = batch_gradient(train_batch, theta);
  for (double lr : lr_grid) {
    const VectorXd next = theta - lr * g;
    ProfileRow row;
    row.lr = lr;
    row.train_loss = batch_loss(train_batch, next);
    std::vector<double> losses;
    losses.reserve(held_out.size());
    for (const auto& b : held_out) losses.push_back(batch_loss(b, next));
    double mean = 0.0;
    for (double l : losses) mean += l;
    mean /= double(losses.size());
    double var = 0.0;
    for (double l : losses) var += (l - mean) * (l - mean);
    row.held_out_mean = mean;
    row.held_out_std = losses.size() > 1 ? std::sqrt(var / double(losses.size() - 1)) : 0.0;
    row.held_out_min = *std::min_element(losses.begin(), losses.end());
    row.held_out_max = *std::max_element(losses.begin(), losses.end());
    table.rows.push_back(row);
  }
  return table;
}

std::vector<double> default_lr_grid(double lambda_max, std::size_t points) {
  if (!(lambda_max > 0.0)) throw std::invalid_argument("default_lr_grid: lambda_max must be positive");
  if (points < 2) throw std::invalid_argument("default_lr_grid: need at least two points");
  const double lo = std::log(1e-4);
  const double hi = std::log(4.0 / lambda_max);
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * double(i) / double(points - 1));
  }
  return grid;
}

std::vector<std::pair<double, double>> interpolate_losses(const VectorXd& theta_a, const VectorXd& theta_b,
                                                          const QuadraticBatch& batch, std::size_t grid) {
  if (grid < 2) throw std::invalid_argument("interpolate_losses: grid must be at least 2");
  if (theta_a.size() != theta_b.size()) throw std::invalid_argument("interpolate_losses: dimension mismatch");
  std::vector<std::pair<double, double>> out;
  out.reserve(grid);
  for (std::size_t i = 0; i < grid; ++i) {
    const double t = double(i) / double(grid - 1);
    out.emplace_back(t, batch_loss(batch, (1.0 - t) * theta_a + t * theta_b));
  }
  return out;
}

}  // namespace sgdnoise
