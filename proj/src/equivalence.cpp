#include "sgdnoise/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sgdnoise {
namespace {

std::optional<double> cosine(const VectorXd& a, const VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return std::nullopt;
  return a.dot(b) / (na * nb);
}

std::map<std::uint64_t, const VectorXd*> index_window(const std::vector<GradientSnapshot>& grads, std::uint64_t t1,
                                                     std::uint64_t t2) {
  std::map<std::uint64_t, const VectorXd*> by_step;
  for (const auto& g : grads) {
    if (g.step < t1 || g.step >= t2) continue;
    if (!by_step.emplace(g.step, &g.gradient).second) {
      std::ostringstream os;
      os << "frozen_gradient_replay: duplicate gradient for step " << g.step;
      throw std::invalid_argument(os.str());
    }
  }
  for (std::uint64_t s = t1; s < t2; ++s) {
    if (!by_step.count(s)) {
      std::ostringstream os;
      os << "frozen_gradient_replay: missing gradient for window step " << s;
      throw std::invalid_argument(os.str());
    }
  }
  return by_step;
}

/// Running average over the partial window theta_t1..theta_s.
class PartialWindowAverage {
 public:
  PartialWindowAverage(const AveragingSpec& spec, const VectorXd& theta1)
      : spec_(spec), first_(theta1), last_(theta1), sum_(VectorXd::Zero(theta1.size())),
        ema_(OnlineAverager::ema(spec.method == AveragingMethod::ema ? spec.ema_decay : 0.5)) {
    ema_.update(theta1);
  }

  void push(const VectorXd& theta) {
    last_ = theta;
    sum_ += theta;
    ++count_;
    ema_.update(theta);
  }

  VectorXd current() const {
    switch (spec_.method) {
      case AveragingMethod::two_point: return 0.5 * (first_ + last_);
      case AveragingMethod::swa: return count_ == 0 ? first_ : VectorXd(sum_ / double(count_));
      case AveragingMethod::ema: return ema_.current();
    }
    return last_;
  }

 private:
  AveragingSpec spec_;
  VectorXd first_;
  VectorXd last_;
  VectorXd sum_;  // theta_{t1+1..s}
  std::size_t count_ = 0;
  OnlineAverager ema_;
};

}  // namespace

void validate(const AveragingSpec& spec) {
  if (spec.t2 <= spec.t1) throw std::invalid_argument("averaging spec: window needs t2 > t1");
  if (spec.method == AveragingMethod::ema) {
    if (!(spec.ema_decay > 0.0 && spec.ema_decay < 1.0)) {
      throw std::invalid_argument("averaging spec: EMA decay must lie in (0, 1)");
    }
    if (double(spec.k()) < 10.0 / spec.ema_decay - 1e-9) {
      std::ostringstream os;
      os << "averaging spec: EMA window k = " << spec.k() << " must be at least 10/delta = " << 10.0 / spec.ema_decay;
      throw std::invalid_argument(os.str());
    }
  }
}

Kernel kernel_for(const AveragingSpec& spec) {
  validate(spec);
  switch (spec.method) {
    case AveragingMethod::swa: return swa_kernel(spec.k());
    case AveragingMethod::two_point: return two_point_kernel(spec.k());
    case AveragingMethod::ema: return ema_kernel(spec.ema_decay, spec.k());
  }
  throw std::logic_error("kernel_for: unknown method");
}

Schedule equivalent_schedule(const Schedule& base, const AveragingSpec& spec) {
  validate(spec);
  if (!base.contains(spec.t1) || !base.contains(spec.t2 - 1)) {
    std::ostringstream os;
    os << "equivalent_schedule: window [" << spec.t1 << ", " << spec.t2 << ") exceeds the base schedule's domain";
    throw std::out_of_range(os.str());
  }
  return Schedule::derived(base, WindowTransform{spec.method, spec.t1, spec.t2, spec.ema_decay});
}

VectorXd frozen_gradient_replay(const VectorXd& theta1, const std::vector<GradientSnapshot>& grads,
                                const Schedule& schedule, std::uint64_t t1, std::uint64_t t2) {
  return frozen_gradient_path(theta1, grads, schedule, t1, t2).back();
}

std::vector<VectorXd> frozen_gradient_path(const VectorXd& theta1, const std::vector<GradientSnapshot>& grads,
                                           const Schedule& schedule, std::uint64_t t1, std::uint64_t t2) {
  if (t2 < t1) throw std::invalid_argument("frozen_gradient_replay: t2 < t1");
  const auto by_step = index_window(grads, t1, t2);
  std::vector<VectorXd> path;
  path.reserve(t2 - t1 + 1);
  path.push_back(theta1);
  for (std::uint64_t s = t1; s < t2; ++s) {
    const VectorXd& g = *by_step.at(s);
    if (g.size() != theta1.size()) throw std::invalid_argument("frozen_gradient_replay: dimension mismatch");
    path.push_back(path.back() - schedule.eval(s) * g);
  }
  return path;
}

ComparisonReport compare_average_vs_schedule(const Ensemble& ensemble, const VectorXd& theta0, const Schedule& base,
                                             const AveragingSpec& spec, std::uint64_t seed,
                                             const CompareOptions& options) {
  const Schedule side = equivalent_schedule(base, spec);
  const Kernel kernel = kernel_for(spec);
  const BatchSource source(ensemble, seed, options.batch_size);
  const BatchSource control(ensemble, options.control_seed, options.batch_size);

  ComparisonReport report;
  VectorXd theta_t1 = theta0;
  if (spec.t1 > 0) {
    RecorderConfig rec;
    rec.thin_every = spec.t1;
    rec.global_loss = false;
    rec.batch_loss = false;
    const TrajectoryRecord prefix = run_trajectory(source, theta0, base, spec.t1, rec);
    if (prefix.diverged) {
      report.diverged = true;
      return report;
    }
    theta_t1 = prefix.final_theta();
  }

  std::vector<VectorXd> main{theta_t1};
  VectorXd trip = theta_t1;
  VectorXd indep = theta_t1;
  auto finite = [](const VectorXd& v) { return v.allFinite() && v.norm() <= kDivergenceNorm; };

  PartialWindowAverage partial(spec, theta_t1);
  auto emit_row = [&](std::uint64_t s) {
    const VectorXd avg = partial.current();
    ComparisonRow row;
    row.step = s;
    row.dist_avg_vs_sched = (avg - trip).norm();
    row.dist_avg_vs_indep = (avg - indep).norm();
    row.loss_avg = global_loss(ensemble, avg);
    row.loss_sched = global_loss(ensemble, trip);
    row.loss_momentary = global_loss(ensemble, main.back());
    report.rows.push_back(row);
  };
  emit_row(spec.t1);

  for (std::uint64_t s = spec.t1; s < spec.t2; ++s) {
    const StepObjective obj = source.at(s);
    const StepObjective ctl = control.at(s);
    const VectorXd& at_main = options.frozen_gradients ? theta_t1 : main.back();
    const VectorXd& at_trip = options.frozen_gradients ? theta_t1 : trip;
    const VectorXd& at_indep = options.frozen_gradients ? theta_t1 : indep;
    const VectorXd g_main = obj.gradient(at_main);
    const VectorXd g_trip = options.frozen_gradients ? g_main : obj.gradient(at_trip);
    const VectorXd g_indep = ctl.gradient(at_indep);
    report.gradient_cosines.push_back(cosine(g_main, g_trip).value_or(std::numeric_limits<double>::quiet_NaN()));

    main.push_back(main.back() - base.eval(s) * g_main);
    partial.push(main.back());
    trip = trip - side.eval(s) * g_trip;
    indep = indep - side.eval(s) * g_indep;
    if (!finite(main.back()) || !finite(trip) || !finite(indep)) {
      report.diverged = true;
      return report;
    }
    emit_row(s + 1);
  }

  const VectorXd avg = average_iterates(kernel, main);
  report.theta_norm = avg.norm();
  report.l2_distance = (avg - trip).norm();
  report.control_distance = (avg - indep).norm();
  report.relative_distance =
      report.control_distance > 0.0 ? report.l2_distance / report.control_distance : std::numeric_limits<double>::infinity();
  report.loss_avg = global_loss(ensemble, avg);
  report.loss_sched = global_loss(ensemble, trip);
  report.loss_momentary = global_loss(ensemble, main.back());
  report.loss_gap = std::abs(report.loss_avg - report.loss_sched);
  report.momentary_gap = std::abs(report.loss_momentary - report.loss_avg);
  return report;
}

std::vector<AlignmentRow> gradient_alignment(const Ensemble& ensemble, const TrajectoryRecord& record,
                                             const QuadraticBatch& fixed_batch, std::uint64_t control_seed) {
  if (record.thetas.empty()) throw std::invalid_argument("gradient_alignment: record has no snapshots");
  if (fixed_batch.size() == 0) throw std::invalid_argument("gradient_alignment: empty fixed batch");
  const VectorXd g0 = batch_gradient(fixed_batch, record.thetas.front());
  const double n0 = g0.norm();
  std::vector<AlignmentRow> rows;
  rows.reserve(record.thetas.size());
  for (std::size_t i = 0; i < record.thetas.size(); ++i) {
    const VectorXd& theta = record.thetas[i];
    const VectorXd g = batch_gradient(fixed_batch, theta);
    AlignmentRow row;
    row.step = record.steps[i];
    row.cosine = cosine(g, g0);
    row.norm_ratio = n0 > 0.0 ? g.norm() / n0 : std::numeric_limits<double>::quiet_NaN();
    Stream stream = make_stream(control_seed, "alignment_control", row.step);
    const QuadraticBatch b1 = sample_batch(ensemble, stream, fixed_batch.size());
    const QuadraticBatch b2 = sample_batch(ensemble, stream, fixed_batch.size());
    row.control_cosine = cosine(batch_gradient(b1, theta), batch_gradient(b2, theta));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace sgdnoise
