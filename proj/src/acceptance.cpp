#include "sgdnoise/acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "sgdnoise/averaging.hpp"
#include "sgdnoise/equivalence.hpp"
#include "sgdnoise/linalg.hpp"
#include "sgdnoise/model.hpp"
#include "sgdnoise/parallel.hpp"
#include "sgdnoise/plateau.hpp"
#include "sgdnoise/rng.hpp"
#include "sgdnoise/scenario.hpp"
#include "sgdnoise/stationary.hpp"
#include "sgdnoise/trajectory.hpp"

namespace sgdnoise {
namespace {

// Tolerances, pinned.
constexpr double kReplayTol = 1e-10;
constexpr double kNormLawTol = 0.10;
constexpr double kScalingTol = 0.10;
constexpr double kCovarianceTol = 0.10;
constexpr double kAlgebraTol = 1e-10;
constexpr double kLimitTol = 1e-12;
constexpr double kSeriesTol = 1e-8;
constexpr double kShrinkTarget = 0.5;
constexpr double kShrinkTol = 0.05;
constexpr double kSlowMatchTol = 0.10;
constexpr double kHalvingFactor = 2.0;
constexpr double kFastSuppression = 3.0;
constexpr double kSlowChangeTol = 0.20;
constexpr double kPlateauSpreadTol = 0.15;
constexpr double kTrainRatioMax = 0.05;
constexpr double kHeldOutRatioMin = 0.8;
constexpr double kFiniteDiffTol = 1e-6;
constexpr double kMomentTol = 0.05;
constexpr double kQuadraticTol = 1e-9;

constexpr std::uint64_t kMasterSeed = 20240611;

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

CheckResult check(std::string name, bool ok, std::string detail) { return {std::move(name), ok, std::move(detail)}; }

double rel_err(const VectorXd& a, const VectorXd& b, double scale) { return (a - b).norm() / std::max(scale, 1e-300); }

VectorXd linspace(double lo, double hi, Eigen::Index n) {
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = n == 1 ? hi : lo + (hi - lo) * double(i) / double(n - 1);
  return v;
}

EnsembleSpec additive_spec(const MatrixXd& omega, double c_norm, std::optional<MatrixXd> noise = std::nullopt) {
  EnsembleSpec s;
  s.d = omega.rows();
  s.omega = omega;
  s.c_norm = c_norm;
  s.kind = SamplerKind::additive_gaussian;
  s.noise_cov = std::move(noise);
  return s;
}

// 1. Averaging equals the frozen-gradient replay of the equivalent schedule.
std::vector<CheckResult> criterion_replay() {
  constexpr Eigen::Index d = 16;
  constexpr int sequences = 100;
  struct Case {
    AveragingMethod method;
    std::uint64_t k;
    double decay;
  };
  const std::vector<Case> cases = {{AveragingMethod::swa, 2, 0},       {AveragingMethod::swa, 8, 0},
                                   {AveragingMethod::swa, 32, 0},      {AveragingMethod::two_point, 2, 0},
                                   {AveragingMethod::two_point, 8, 0}, {AveragingMethod::two_point, 32, 0},
                                   {AveragingMethod::ema, 400, 0.05}};
  std::vector<CheckResult> out;
  for (const auto& c : cases) {
    double worst = 0.0;
    const double tol = kReplayTol + (c.method == AveragingMethod::ema ? std::pow(1.0 - c.decay, double(c.k)) : 0.0);
    for (int n = 0; n < sequences; ++n) {
      Stream stream = make_stream(kMasterSeed, "replay_" + to_string(c.method), std::uint64_t(n) * 1000 + c.k);
      std::uniform_real_distribution<double> lr(0.005, 0.1);
      const std::uint64_t t1 = 100 + std::uint64_t(n);
      const std::uint64_t t2 = t1 + c.k;
      std::vector<std::pair<std::uint64_t, double>> pts;
      for (std::uint64_t s = t1; s <= t2; ++s) pts.emplace_back(s, lr(stream));
      const Schedule base = Schedule::table(pts);
      const AveragingSpec spec{c.method, t1, t2, c.decay};
      const VectorXd theta1 = standard_normal_vector(stream, d);
      std::vector<GradientSnapshot> grads;
      for (std::uint64_t s = t1; s < t2; ++s) grads.push_back({s, s, standard_normal_vector(stream, d)});

      const auto path = frozen_gradient_path(theta1, grads, base, t1, t2);
      const VectorXd averaged = average_iterates(kernel_for(spec), path);
      const VectorXd replay = frozen_gradient_replay(theta1, grads, equivalent_schedule(base, spec), t1, t2);
      const double scale = std::max({averaged.norm(), replay.norm(), (replay - theta1).norm()});
      worst = std::max(worst, rel_err(averaged, replay, scale));
    }
    out.push_back(check(to_string(c.method) + " k=" + std::to_string(c.k), worst <= tol,
                        "max relative error " + fmt(worst) + " <= " + fmt(tol)));
  }
  return out;
}

// 2. Long-run RMS norm follows c sqrt(alpha / 2).
std::vector<CheckResult> criterion_norm_law() {
  constexpr Eigen::Index d = 32;
  constexpr double c_norm = 1.0;
  const std::vector<double> alphas = {0.005, 0.02, 0.08};
  constexpr std::uint64_t kSampleSteps = 200000;
  const Ensemble ens = make_ensemble(additive_spec(MatrixXd::Identity(d, d), c_norm));

  std::vector<double> rms;
  std::vector<CheckResult> out;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double a = alphas[i];
    const auto burn = std::uint64_t(std::ceil(20.0 / a));
    double sum = 0.0;
    std::uint64_t n = 0;
    RecorderConfig rec;
    rec.thin_every = burn + kSampleSteps + 1;
    rec.global_loss = rec.batch_loss = false;
    RunOptions opts;
    opts.observer = [&](std::uint64_t t, const VectorXd& th) {
      if (t > burn) {
        sum += th.squaredNorm();
        ++n;
      }
    };
    run_trajectory(ens, VectorXd::Zero(d), Schedule::constant(a), burn + kSampleSteps, 1,
                   derive_seed(kMasterSeed, "norm_law", i), rec, opts);
    rms.push_back(std::sqrt(sum / double(n)));
    const double predicted = c_norm * std::sqrt(a / 2.0);
    const double err = std::abs(rms.back() / predicted - 1.0);
    out.push_back(check("alpha=" + fmt(a), err <= kNormLawTol,
                        "rms " + fmt(rms.back()) + " vs " + fmt(predicted) + ", deviation " + fmt(err) +
                            " <= " + fmt(kNormLawTol)));
  }
  for (std::size_t i = 1; i < alphas.size(); ++i) {
    const double target = std::sqrt(alphas[i] / alphas[0]);
    const double ratio = rms[i] / rms[0];
    const double err = std::abs(ratio / target - 1.0);
    out.push_back(check("sqrt scaling " + fmt(alphas[i]) + "/" + fmt(alphas[0]), err <= kScalingTol,
                        "ratio " + fmt(ratio) + " vs " + fmt(target) + ", deviation " + fmt(err) + " <= " +
                            fmt(kScalingTol)));
  }
  return out;
}

// 3. Monte Carlo covariance of averaged iterates against the closed form.
std::vector<CheckResult> criterion_covariance(const AcceptanceOptions& opt) {
  constexpr double alpha = 0.1;
  constexpr std::size_t samples = 4000;
  const std::vector<KernelSpec> kernels = {
      {KernelSpec::MultiPoint{1, 0}}, {KernelSpec::TwoPoint{16}}, {KernelSpec::Swa{32}},
      {KernelSpec::MultiPoint{4, 8}}, {KernelSpec::Ema{0.05, 200}}};
  std::vector<CheckResult> out;
  for (Eigen::Index d : {2, 8}) {
    Stream s = make_stream(kMasterSeed, "covariance_omega", std::uint64_t(d));
    const MatrixXd omega = linalg::random_spd(s, linspace(0.5, 2.0, d));
    const Ensemble ens = make_ensemble(additive_spec(omega, 1.0, MatrixXd::Identity(d, d)));
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      const Kernel kernel = make_kernel(kernels[k]);
      const auto F = stationary_covariance(alpha, omega, kernel).F;
      const auto mc = monte_carlo_covariance(ens, alpha, kernel, samples,
                                             derive_seed(kMasterSeed, "covariance_mc", std::uint64_t(d) * 16 + k), 8,
                                             opt.threads);
      const double err = linalg::frobenius_relative_error(mc.second_moment, F);
      out.push_back(check("d=" + std::to_string(d) + " " + kernel.label, err <= kCovarianceTol && mc.samples >= 2000,
                          "Frobenius relative error " + fmt(err) + " <= " + fmt(kCovarianceTol) + " over " +
                              std::to_string(mc.samples) + " snapshots"));
    }
  }
  return out;
}

// 4. Two-point / multi-point algebra.
std::vector<CheckResult> criterion_algebra() {
  constexpr double alpha = 0.1;
  Stream s = make_stream(kMasterSeed, "algebra", 0);
  const MatrixXd omega = linalg::random_spd(s, linspace(0.3, 1.5, 5));
  std::vector<CheckResult> out;

  double worst = 0.0;
  for (std::uint64_t delta : {1, 5, 20, 100}) {
    const MatrixXd two = two_point_covariance(alpha, omega, delta);
    const MatrixXd multi = multi_point_covariance(alpha, omega, 2, delta);
    worst = std::max(worst, (two - multi).norm() / two.norm());
  }
  out.push_back(check("multi_point(n=2) = two_point", worst <= kAlgebraTol,
                      "max relative difference " + fmt(worst) + " <= " + fmt(kAlgebraTol)));

  double w0 = 0.0, winf = 0.0;
  for (double kappa : {0.1, 0.5, 1.0, 5.0, 15.0}) {
    w0 = std::max(w0, std::abs(effective_lr(alpha, kappa, 0) - alpha) / alpha);
    winf = std::max(winf, std::abs(effective_lr(alpha, kappa, 1000000) - alpha / 2) / (alpha / 2));
  }
  out.push_back(check("effective lr at delta=0", w0 <= kLimitTol, "relative error " + fmt(w0) + " <= " + fmt(kLimitTol)));
  out.push_back(check("effective lr as delta grows", winf <= kLimitTol,
                      "relative error " + fmt(winf) + " <= " + fmt(kLimitTol)));

  const MatrixXd gamma = MatrixXd::Identity(5, 5) - alpha * omega;
  const MatrixXd closed = geometric_series_sum(gamma);
  MatrixXd sum = MatrixXd::Zero(5, 5), term = MatrixXd::Identity(5, 5);
  const MatrixXd g2 = gamma * gamma;
  for (int i = 0; i < 20000; ++i) {
    sum += term;
    term = term * g2;
  }
  const double gerr = (closed - sum).norm() / sum.norm();
  out.push_back(check("geometric series", gerr <= kSeriesTol, "relative error " + fmt(gerr) + " <= " + fmt(kSeriesTol)));
  return out;
}

// 5. Midpoint of two distant stationary samples has half the squared norm.
std::vector<CheckResult> criterion_midpoint(const AcceptanceOptions& opt) {
  constexpr Eigen::Index d = 16;
  constexpr double alpha = 0.1;
  constexpr std::size_t samples = 2000;
  const MatrixXd omega = MatrixXd::Identity(d, d);
  const Ensemble ens = make_ensemble(additive_spec(omega, 1.0));
  const auto delta = std::uint64_t(std::ceil(20.0 / (alpha * ens.lambda_min())));
  const auto plain =
      monte_carlo_covariance(ens, alpha, identity_kernel(), samples, derive_seed(kMasterSeed, "midpoint", 0), 8, opt.threads);
  const auto mid = monte_carlo_covariance(ens, alpha, two_point_kernel(delta), samples,
                                          derive_seed(kMasterSeed, "midpoint", 1), 8, opt.threads);
  const double ratio = mid.second_moment.trace() / plain.second_moment.trace();
  return {check("E|midpoint|^2 / E|theta|^2 (delta=" + std::to_string(delta) + ")",
                std::abs(ratio - kShrinkTarget) <= kShrinkTol,
                "ratio " + fmt(ratio) + " within " + fmt(kShrinkTarget) + " +- " + fmt(kShrinkTol))};
}

// 6. Fast/slow two-scale experiment.
std::vector<CheckResult> criterion_multiscale(const AcceptanceOptions& opt) {
  constexpr std::size_t seeds = 64;
  EnsembleSpec spec;
  spec.d = 2;
  spec.omega = VectorXd((VectorXd(2) << 1.0, 0.015).finished()).asDiagonal();
  spec.c_norm = 1.0;
  spec.kind = SamplerKind::gaussian_factor;
  const Ensemble ens = make_ensemble(spec);
  MultiscaleParams p;
  p.lr0 = 5e-2;
  p.lr1 = 2e-2;
  p.ema_decay = 1.0 / 450.0;
  p.steps = 20000;
  const VectorXd theta0 = VectorXd::Constant(2, 10.0);

  std::vector<MultiscaleSeries> runs(seeds);
  parallel_for(seeds, opt.threads, [&](std::size_t i) {
    runs[i] = run_multiscale(ens, theta0, p, 1, derive_seed(kMasterSeed, "multiscale", i));
  });
  const MultiscaleSeries mean = mean_series(runs);
  if (mean.diverged) return {check("no divergence", false, "a multiscale run diverged")};
  const MultiscaleSummary m = summarize_multiscale(mean);

  std::vector<CheckResult> out;
  out.push_back(check("stationary loss lr0+EMA < lr0", m.stationary_ema < m.stationary_plain,
                      fmt(m.stationary_ema) + " < " + fmt(m.stationary_plain)));
  const double dev = std::abs(m.slow_ratio_at_plain_halving - 1.0);
  out.push_back(check("slow mode of lr0+EMA matches lr0 at lr0's halving step", m.halving_plain && dev <= kSlowMatchTol,
                      "ratio " + fmt(m.slow_ratio_at_plain_halving) + " at step " +
                          (m.halving_plain ? std::to_string(*m.halving_plain) : "none") + ", deviation " + fmt(dev) +
                          " <= " + fmt(kSlowMatchTol)));
  const bool halved = m.halving_ema && m.halving_small;
  const double factor = halved ? double(*m.halving_small) / double(*m.halving_ema) : 0.0;
  out.push_back(check("lr1 slow halving >= 2x later than lr0+EMA", halved && factor >= kHalvingFactor,
                      "halving steps lr0=" + (m.halving_plain ? std::to_string(*m.halving_plain) : "none") +
                          " lr0+EMA=" + (m.halving_ema ? std::to_string(*m.halving_ema) : "none") +
                          " lr1=" + (m.halving_small ? std::to_string(*m.halving_small) : "none") + ", factor " +
                          fmt(factor) + " >= " + fmt(kHalvingFactor)));
  const double suppression = m.fast_plain / m.fast_ema;
  out.push_back(check("EMA suppresses the fast-mode stationary loss", suppression >= kFastSuppression,
                      "factor " + fmt(suppression) + " >= " + fmt(kFastSuppression)));
  const double change = std::abs(m.slow_ema / m.slow_plain - 1.0);
  out.push_back(check("EMA changes the slow-mode stationary loss mildly", change <= kSlowChangeTol,
                      "relative change " + fmt(change) + " <= " + fmt(kSlowChangeTol)));
  return out;
}

// 7. Distance to an independently trained solution saturates.
std::vector<CheckResult> criterion_basins(const AcceptanceOptions& opt) {
  constexpr Eigen::Index d = 1024;
  constexpr std::size_t window = 500;
  constexpr double rel_tol = 0.02;
  EnsembleSpec spec;
  spec.d = d;
  spec.m = 2;
  VectorXd ev(d);
  for (Eigen::Index i = 0; i < d; ++i) ev[i] = 0.05 * std::pow(20.0, double(i) / double(d - 1));
  spec.omega = ev.asDiagonal();
  spec.c_norm = 1.0;
  const Ensemble ens = make_ensemble(spec);
  const std::vector<std::uint64_t> seeds = {kMasterSeed, kMasterSeed + 1, kMasterSeed + 2};

  std::vector<BasinsRun> runs(seeds.size());
  parallel_for(seeds.size(), opt.threads, [&](std::size_t i) {
    Stream s = make_stream(seeds[i], "theta0", 0);
    runs[i] = run_basins(ens, standard_normal_vector(s, d), Schedule::constant(0.05), 6000, 8, seeds[i]);
  });
  std::vector<CheckResult> out;
  std::vector<double> values;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (runs[i].diverged) {
      out.push_back(check("seed " + std::to_string(seeds[i]), false, "diverged"));
      continue;
    }
    const auto p = detect_plateau(runs[i].distance, window, rel_tol);
    out.push_back(check("plateau seed " + std::to_string(seeds[i]), p.found,
                        p.found ? "value " + fmt(p.plateau_value) + " from step " + std::to_string(p.onset_step) +
                                      ", start " + fmt(runs[i].distance.front())
                                : "no plateau"));
    if (p.found) values.push_back(p.plateau_value);
  }
  if (values.size() == seeds.size()) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    const double spread = (*hi - *lo) / mean;
    out.push_back(check("plateau spread across seeds", spread <= kPlateauSpreadTol,
                        "(max - min) / mean = " + fmt(spread) + " <= " + fmt(kPlateauSpreadTol)));
  } else {
    out.push_back(check("plateau spread across seeds", false, "not every seed plateaued"));
  }
  return out;
}

// 8. One step helps the training batch a lot and held-out batches barely.
std::vector<CheckResult> criterion_single_step(const AcceptanceOptions& opt) {
  constexpr Eigen::Index d = 512;
  constexpr std::size_t seeds = 20;
  EnsembleSpec spec;
  spec.d = d;
  spec.m = 1;
  spec.omega = MatrixXd::Identity(d, d);
  spec.c_norm = 1.0;
  const Ensemble ens = make_ensemble(spec);
  const auto grid = default_lr_grid(ens.lambda_max());
  std::vector<double> train(seeds), held(seeds);
  parallel_for(seeds, opt.threads, [&](std::size_t i) {
    const auto seed = derive_seed(kMasterSeed, "single_step", i);
    Stream s = make_stream(seed, "theta0", 0);
    const auto t = run_single_step_profile(ens, standard_normal_vector(s, d), 8, 16, grid, seed);
    double bt = t.rows.front().train_loss, bh = t.rows.front().held_out_mean;
    for (const auto& r : t.rows) {
      bt = std::min(bt, r.train_loss);
      bh = std::min(bh, r.held_out_mean);
    }
    train[i] = bt / t.train_start;
    held[i] = bh / t.held_out_start;
  });
  double mt = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < seeds; ++i) {
    mt += train[i] / double(seeds);
    mh += held[i] / double(seeds);
  }
  return {check("training batch loss ratio", mt <= kTrainRatioMax, fmt(mt) + " <= " + fmt(kTrainRatioMax)),
          check("held-out loss ratio", mh >= kHeldOutRatioMin, fmt(mh) + " >= " + fmt(kHeldOutRatioMin))};
}

// 9. Property suites.
std::vector<CheckResult> criterion_properties(const AcceptanceOptions& opt) {
  std::vector<CheckResult> out;

  {
    EnsembleSpec spec;
    spec.d = 6;
    spec.m = 3;
    Stream s = make_stream(kMasterSeed, "properties_omega", 0);
    spec.omega = linalg::random_spd(s, linspace(0.2, 3.0, 6));
    const Ensemble ens = make_ensemble(spec);
    const QuadraticBatch batch = sample_batch(ens, s, 4);
    const VectorXd theta = standard_normal_vector(s, 6);
    const VectorXd g = batch_gradient(batch, theta);
    VectorXd fd(6);
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < 6; ++i) {
      VectorXd tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      fd[i] = (batch_loss(batch, tp) - batch_loss(batch, tm)) / (2 * h);
    }
    const double err = (fd - g).norm() / g.norm();
    out.push_back(check("gradient vs finite differences", err <= kFiniteDiffTol,
                        "relative error " + fmt(err) + " <= " + fmt(kFiniteDiffTol)));

    constexpr std::size_t n = 40000;
    MatrixXd ata = MatrixXd::Zero(6, 6);
    VectorXd atc = VectorXd::Zero(6);
    double atc_sq = 0.0;
    Stream ms = make_stream(kMasterSeed, "properties_moments", 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto q = ens.draw_sample(ms);
      ata += q.A.transpose() * q.A;
      const VectorXd b = q.linear_term();
      atc += b;
      atc_sq += b.squaredNorm();
    }
    ata /= double(n);
    atc /= double(n);
    const double merr = linalg::frobenius_relative_error(ata, ens.omega());
    out.push_back(check("E[A^T A] -> omega", merr <= kMomentTol, "relative error " + fmt(merr) + " <= " + fmt(kMomentTol)));
    const double cnorm = atc.norm() / std::sqrt(atc_sq / double(n));
    out.push_back(check("E[A^T c] -> 0", cnorm <= kMomentTol,
                        "|mean| / rms = " + fmt(cnorm) + " <= " + fmt(kMomentTol)));
  }

  {
    auto brute = [](const Kernel& k, std::size_t delta) {
      double s = 0.0;
      for (std::size_t i = 0; i < k.weights.size(); ++i)
        for (std::size_t j = 0; j < k.weights.size(); ++j)
          if (j == i + delta) s += k.weights[i] * k.weights[j];
      return s;
    };
    double worst = 0.0;
    for (const Kernel& k : {two_point_kernel(7), swa_kernel(9), multi_point_kernel(5, 3), ema_kernel(0.2, 60)}) {
      const auto c = kernel_autocorrelation(k, k.support() + 2);
      for (std::size_t dl = 0; dl < c.size(); ++dl) worst = std::max(worst, std::abs(c[dl] - brute(k, dl)));
    }
    out.push_back(check("autocorrelation vs brute force", worst <= 1e-15, "max difference " + fmt(worst)));
    const auto tp = kernel_autocorrelation(two_point_kernel(7), 7);
    const bool tp_ok = std::abs(tp[0] - 0.5) <= 1e-15 && std::abs(tp[7] - 0.25) <= 1e-15;
    out.push_back(check("two-point C_0 = 1/2, C_delta = 1/4", tp_ok, "C_0 = " + fmt(tp[0], 17) + ", C_delta = " + fmt(tp[7], 17)));
    double mp_worst = 0.0;
    for (std::uint64_t n : {2, 3, 5}) {
      const auto c = kernel_autocorrelation(multi_point_kernel(n, 4), 4 * n);
      for (std::uint64_t k = 0; k < n; ++k)
        mp_worst = std::max(mp_worst, std::abs(c[4 * k] - double(n - k) / double(n * n)));
    }
    out.push_back(check("multi-point C_{k delta} = (n - k) / n^2", mp_worst <= 1e-15, "max difference " + fmt(mp_worst)));
  }

  {
    EnsembleSpec spec;
    spec.d = 5;
    spec.omega = linspace(0.5, 1.5, 5).asDiagonal();
    const Ensemble ens = make_ensemble(spec);
    const VectorXd theta0 = VectorXd::Ones(5);
    const auto a = run_trajectory(ens, theta0, Schedule::constant(0.1), 500, 4, kMasterSeed);
    const auto b = run_trajectory(ens, theta0, Schedule::constant(0.1), 500, 4, kMasterSeed);
    bool same = a.loss_global == b.loss_global && a.loss_batch == b.loss_batch && a.norms == b.norms;
    for (std::size_t i = 0; same && i < a.thetas.size(); ++i) same = (a.thetas[i].array() == b.thetas[i].array()).all();
    out.push_back(check("trajectory bit-reproducible", same, same ? "identical reruns" : "reruns differ"));

    const Ensemble add = make_ensemble(additive_spec(MatrixXd::Identity(3, 3), 1.0));
    const auto m1 = monte_carlo_covariance(add, 0.2, swa_kernel(4), 64, kMasterSeed, 4, 1);
    const auto m4 = monte_carlo_covariance(add, 0.2, swa_kernel(4), 64, kMasterSeed, 4, std::max<std::size_t>(4, opt.threads));
    const bool same_mc = (m1.second_moment.array() == m4.second_moment.array()).all();
    out.push_back(check("thread-count independence", same_mc, same_mc ? "1 vs 4 threads identical" : "outputs differ"));

    Stream s = make_stream(kMasterSeed, "properties_interp", 0);
    const QuadraticBatch batch = sample_batch(ens, s, 4);
    const auto curve = interpolate_losses(a.thetas.front(), a.final_theta(), batch, 41);
    const double res = quadratic_residual(curve);
    out.push_back(check("interpolation is quadratic", res <= kQuadraticTol,
                        "second-difference residual " + fmt(res) + " <= " + fmt(kQuadraticTol)));
  }
  return out;
}

const char* title(int id) {
  switch (id) {
    case 1: return "averaging equals frozen-gradient replay of the equivalent schedule";
    case 2: return "stationary norm law |theta| = c sqrt(alpha/2)";
    case 3: return "averaged-iterate covariance closed form";
    case 4: return "two-point and multi-point algebra";
    case 5: return "midpoint shrinkage";
    case 6: return "multiscale fast/slow experiment";
    case 7: return "distance to an alternative solution saturates";
    case 8: return "single-step training/held-out gap";
    case 9: return "property suites";
    default: return "unknown";
  }
}

}  // namespace

bool CriterionResult::passed() const {
  if (checks.empty()) return false;
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

CriterionResult run_criterion(int id, const AcceptanceOptions& options) {
  CriterionResult r;
  r.id = id;
  r.title = title(id);
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (id) {
      case 1: r.checks = criterion_replay(); break;
      case 2: r.checks = criterion_norm_law(); break;
      case 3: r.checks = criterion_covariance(options); break;
      case 4: r.checks = criterion_algebra(); break;
      case 5: r.checks = criterion_midpoint(options); break;
      case 6: r.checks = criterion_multiscale(options); break;
      case 7: r.checks = criterion_basins(options); break;
      case 8: r.checks = criterion_single_step(options); break;
      case 9: r.checks = criterion_properties(options); break;
      default: r.checks = {check("known criterion", false, "no criterion " + std::to_string(id))};
    }
  } catch (const std::exception& e) {
    r.checks.push_back(check("ran without error", false, e.what()));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void print_criterion(std::ostream& os, const CriterionResult& r) {
  os << "criterion " << r.id << ' ' << (r.passed() ? "PASS" : "FAIL") << "  " << r.title << "  ("
     << std::fixed << std::setprecision(1) << r.seconds << " s)" << std::defaultfloat << '\n';
  for (const auto& c : r.checks) os << "    [" << (c.passed ? "ok" : "FAIL") << "] " << c.name << ": " << c.detail << '\n';
  os.flush();
}

bool run_acceptance(std::ostream& os, const std::vector<int>& ids, const AcceptanceOptions& options) {
  std::vector<int> todo = ids;
  if (todo.empty())
    for (int i = 1; i <= kCriterionCount; ++i) todo.push_back(i);
  bool ok = true;
  for (int id : todo) {
    const auto r = run_criterion(id, options);
    print_criterion(os, r);
    ok = ok && r.passed();
  }
  return ok;
}

}  // namespace sgdnoise
