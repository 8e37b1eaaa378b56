#include "sgdnoise/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

#include "sgdnoise/averaging.hpp"
#include "sgdnoise/csv.hpp"
#include "sgdnoise/equivalence.hpp"
#include "sgdnoise/linalg.hpp"
#include "sgdnoise/parallel.hpp"
#include "sgdnoise/plot.hpp"
#include "sgdnoise/stationary.hpp"

namespace sgdnoise {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Collects the files a scenario writes. Each seed owns its own file names,
/// so registration order is fixed by sorting at the end.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path file(const std::string& name) {
    std::lock_guard<std::mutex> lock(mutex_);
    names_.push_back(name);
    return dir_ / name;
  }

  std::vector<std::string> sorted() const {
    auto out = names_;
    std::sort(out.begin(), out.end());
    return out;
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::mutex mutex_;
  std::vector<std::string> names_;
};

std::string seeded(const std::string& stem, std::uint64_t seed, const std::string& ext = ".csv") {
  return stem + "_seed" + std::to_string(seed) + ext;
}

std::vector<double> iota_steps(std::size_t n, std::uint64_t start = 0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = double(start + i);
  return x;
}

double tail_mean(const std::vector<double>& v, double tail_fraction) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t n = std::max<std::size_t>(1, std::size_t(std::floor(double(v.size()) * tail_fraction)));
  double s = 0.0;
  for (std::size_t i = v.size() - n; i < v.size(); ++i) s += v[i];
  return s / double(n);
}

std::optional<std::uint64_t> halving_step(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  for (std::size_t t = 0; t < v.size(); ++t)
    if (v[t] <= 0.5 * v[0]) return t;
  return std::nullopt;
}

json opt_json(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

/// Covariance of the kernel-averaged iterate predicted in the noise-whitened
/// frame and mapped back. Needs a symmetric whitened matrix.
MatrixXd predicted_covariance(const Ensemble& ens, double alpha, const Kernel& kernel) {
  const WhitenedSystem w = whiten(ens.omega(), ens.noise_cov(), alpha);
  const double asym = (w.omega_w - w.omega_w.transpose()).norm();
  if (asym > 1e-9 * w.omega_w.norm()) {
    throw std::domain_error("closed-form covariance needs noise_cov commuting with omega (whitened omega is not symmetric)");
  }
  const MatrixXd F = stationary_covariance(alpha, linalg::symmetrize(w.omega_w), kernel).F;
  return w.Q * F * w.Q.transpose();
}

void write_mode_row(CsvWriter& csv, std::size_t t, const MultiscaleSeries& s) {
  csv.cell((unsigned long long)t)
      .cell(s.plain.total[t]).cell(s.ema.total[t]).cell(s.small.total[t])
      .cell(s.plain.fast[t]).cell(s.plain.slow[t])
      .cell(s.ema.fast[t]).cell(s.ema.slow[t])
      .cell(s.small.fast[t]).cell(s.small.slow[t]);
  csv.end_row();
}

void write_multiscale_csv(const fs::path& path, const MultiscaleSeries& s) {
  CsvWriter csv(path, {"step", "loss_plain", "loss_ema", "loss_small", "fast_plain", "slow_plain", "fast_ema",
                       "slow_ema", "fast_small", "slow_small"});
  for (std::size_t t = 0; t < s.plain.total.size(); ++t) write_mode_row(csv, t, s);
}

json summary_json(const MultiscaleSummary& m) {
  return json{{"stationary_plain", m.stationary_plain},
              {"stationary_ema", m.stationary_ema},
              {"stationary_small", m.stationary_small},
              {"fast_plain", m.fast_plain},
              {"fast_ema", m.fast_ema},
              {"slow_plain", m.slow_plain},
              {"slow_ema", m.slow_ema},
              {"halving_plain", opt_json(m.halving_plain)},
              {"halving_ema", opt_json(m.halving_ema)},
              {"halving_small", opt_json(m.halving_small)},
              {"slow_ratio_at_plain_halving", m.slow_ratio_at_plain_halving}};
}

// ---------------------------------------------------------------------------

ScenarioResult scenario_multiscale(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds, Outputs& out,
                                   const RunSettings& settings) {
  const Ensemble ens = make_ensemble(cfg.ensemble);
  MultiscaleParams p;
  p.lr0 = param_double(cfg, "lr0", p.lr0);
  p.lr1 = param_double(cfg, "lr1", p.lr1);
  p.ema_decay = param_double(cfg, "ema_decay", p.ema_decay);
  p.steps = cfg.steps;
  if (cfg.params.contains("mode_split")) p.mode_split = param_double(cfg, "mode_split", 0.0);

  std::vector<MultiscaleSeries> runs(seeds.size());
  parallel_for(seeds.size(), settings.threads, [&](std::size_t i) {
    runs[i] = run_multiscale(ens, make_theta0(cfg.theta0, ens.dim(), seeds[i]), p, cfg.batch_size, seeds[i]);
    write_multiscale_csv(out.file(seeded("multiscale", seeds[i])), runs[i]);
  });

  ScenarioResult res;
  for (const auto& r : runs) res.diverged = res.diverged || r.diverged;
  if (res.diverged) {
    res.summary = {{"diverged", true}};
    return res;
  }
  const MultiscaleSeries mean = mean_series(runs);
  write_multiscale_csv(out.file("multiscale_mean.csv"), mean);
  const MultiscaleSummary sm = summarize_multiscale(mean);
  res.summary = summary_json(sm);
  {
    CsvWriter csv(out.file("multiscale_summary.csv"), {"metric", "value"});
    for (const auto& [k, v] : res.summary.items()) {
      csv.cell(k);
      if (v.is_null()) csv.cell(std::string("nan"));
      else csv.cell(v.get<double>());
      csv.end_row();
    }
  }
  if (settings.plots) {
    const auto x = iota_steps(mean.plain.total.size());
    write_line_plot_svg(out.file("multiscale_loss.svg"), "excess loss (mean over seeds)", x,
                        {{"lr0", mean.plain.total}, {"lr0 + EMA", mean.ema.total}, {"lr1", mean.small.total}}, true);
    write_line_plot_svg(out.file("multiscale_modes.svg"), "per-mode loss contributions", x,
                        {{"fast lr0", mean.plain.fast}, {"fast EMA", mean.ema.fast},
                         {"slow lr0", mean.plain.slow}, {"slow EMA", mean.ema.slow}},
                        true);
  }
  return res;
}

ScenarioResult scenario_two_point(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds, Outputs& out,
                                  const RunSettings& settings) {
  const Ensemble ens = make_ensemble(cfg.ensemble);
  const double alpha = param_double(cfg, "alpha", 0.05);
  require_contractive(alpha, ens.omega());
  const auto delta = param_uint(cfg, "delta", std::uint64_t(std::ceil(20.0 / (alpha * ens.lambda_min()))));
  const auto samples = param_uint(cfg, "samples", 2000);
  const auto chains = param_uint(cfg, "chains", 8);

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(ens.omega());
  const VectorXd kappa = eig.eigenvalues();
  const MatrixXd V = eig.eigenvectors();

  {
    CsvWriter csv(out.file("effective_lr_sweep.csv"), {"delta", "mode", "kappa", "effective_lr"});
    std::vector<std::uint64_t> deltas{0};
    for (std::uint64_t d = 1; d <= 4 * std::max<std::uint64_t>(delta, 1); d *= 2) deltas.push_back(d);
    for (auto d : deltas)
      for (Eigen::Index m = 0; m < kappa.size(); ++m)
        csv.cell((unsigned long long)d).cell((long long)m).cell(kappa[m]).cell(effective_lr(alpha, kappa[m], d)).end_row();
  }

  const MatrixXd S_pred = predicted_covariance(ens, alpha, identity_kernel());
  const Kernel mid = two_point_kernel(delta);
  const MatrixXd F_pred = predicted_covariance(ens, alpha, mid);

  struct Row {
    double shrink_emp = 0.0;
    double err_plain = 0.0;
    double err_mid = 0.0;
  };
  std::vector<Row> rows(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto plain = monte_carlo_covariance(ens, alpha, identity_kernel(), samples, derive_seed(seeds[i], "two_point", 0),
                                              chains, settings.threads);
    const auto avg = monte_carlo_covariance(ens, alpha, mid, samples, derive_seed(seeds[i], "two_point", 1), chains,
                                            settings.threads);
    rows[i] = {avg.second_moment.trace() / plain.second_moment.trace(),
               linalg::frobenius_relative_error(plain.second_moment, S_pred),
               linalg::frobenius_relative_error(avg.second_moment, F_pred)};
    CsvWriter csv(out.file(seeded("two_point_modes", seeds[i])),
                  {"mode", "kappa", "effective_lr", "predicted_ratio", "empirical_ratio"});
    for (Eigen::Index m = 0; m < kappa.size(); ++m) {
      const VectorXd v = V.col(m);
      const double emp = v.dot(avg.second_moment * v) / v.dot(plain.second_moment * v);
      csv.cell((long long)m).cell(kappa[m]).cell(effective_lr(alpha, kappa[m], delta))
          .cell(0.5 * (1.0 + std::pow(1.0 - alpha * kappa[m], double(delta)))).cell(emp).end_row();
    }
  }

  const double shrink_pred = F_pred.trace() / S_pred.trace();
  CsvWriter csv(out.file("two_point_summary.csv"),
                {"seed", "delta", "predicted_shrinkage", "empirical_shrinkage", "plain_frobenius_rel_error",
                 "midpoint_frobenius_rel_error"});
  json per_seed = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    csv.cell((unsigned long long)seeds[i]).cell((unsigned long long)delta).cell(shrink_pred).cell(rows[i].shrink_emp)
        .cell(rows[i].err_plain).cell(rows[i].err_mid).end_row();
    per_seed.push_back({{"seed", seeds[i]}, {"empirical_shrinkage", rows[i].shrink_emp}});
  }
  ScenarioResult res;
  res.summary = {{"alpha", alpha}, {"delta", delta}, {"predicted_shrinkage", shrink_pred}, {"seeds", per_seed}};
  return res;
}

ScenarioResult scenario_stationary_check(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                         Outputs& out, const RunSettings& settings) {
  const Ensemble ens = make_ensemble(cfg.ensemble);
  const double alpha = param_double(cfg, "alpha", 0.1);
  require_contractive(alpha, ens.omega());
  const auto samples = param_uint(cfg, "samples", 2000);
  const auto chains = param_uint(cfg, "chains", 8);

  std::vector<Kernel> kernels;
  for (const auto& k : cfg.kernels) kernels.push_back(make_kernel(k));
  std::vector<MatrixXd> predicted;
  for (const auto& k : kernels) predicted.push_back(predicted_covariance(ens, alpha, k));

  CsvWriter summary(out.file("stationary_summary.csv"),
                    {"seed", "kernel", "predicted_trace", "empirical_trace", "frobenius_rel_error", "samples",
                     "burn_in", "spacing"});
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    CsvWriter csv(out.file("kernel_" + std::to_string(k) + ".csv"), {"k", "mu_k"});
    for (std::size_t j = 0; j < kernels[k].weights.size(); ++j)
      csv.cell((unsigned long long)j).cell(kernels[k].weights[j]).end_row();
  }
  json rows = json::array();
  for (auto seed : seeds) {
    CsvWriter table(out.file(seeded("stationary_cov", seed)), {"kernel", "row", "col", "predicted", "empirical"});
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      const auto mc = monte_carlo_covariance(ens, alpha, kernels[k], samples, derive_seed(seed, "stationary", k), chains,
                                             settings.threads);
      const double err = linalg::frobenius_relative_error(mc.second_moment, predicted[k]);
      for (Eigen::Index r = 0; r < ens.dim(); ++r)
        for (Eigen::Index c = 0; c < ens.dim(); ++c)
          table.cell(kernels[k].label).cell((long long)r).cell((long long)c).cell(predicted[k](r, c))
              .cell(mc.second_moment(r, c)).end_row();
      summary.cell((unsigned long long)seed).cell(kernels[k].label).cell(predicted[k].trace())
          .cell(mc.second_moment.trace()).cell(err).cell((unsigned long long)mc.samples)
          .cell((unsigned long long)mc.burn_in).cell((unsigned long long)mc.spacing).end_row();
      rows.push_back({{"seed", seed}, {"kernel", kernels[k].label}, {"frobenius_rel_error", err}});
    }
  }
  ScenarioResult res;
  res.summary = {{"alpha", alpha}, {"kernels", rows}};
  return res;
}

ScenarioResult scenario_equivalence(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds, Outputs& out,
                                    const RunSettings& settings) {
  const Ensemble ens = make_ensemble(cfg.ensemble);
  const Schedule& base = cfg.schedules.front();
  const AveragingSpec spec = *cfg.averaging;
  const Schedule eq = equivalent_schedule(base, spec);
  {
    CsvWriter csv(out.file("equivalent_schedule.csv"), {"step", "base_lr", "equivalent_lr"});
    for (std::uint64_t s = spec.t1; s < spec.t2; ++s)
      csv.cell((unsigned long long)s).cell(base.eval(s)).cell(eq.eval(s)).end_row();
  }
  CompareOptions opts;
  opts.batch_size = cfg.batch_size;
  opts.frozen_gradients = param_bool(cfg, "frozen_gradients", false);

  std::vector<ComparisonReport> reports(seeds.size());
  parallel_for(seeds.size(), settings.threads, [&](std::size_t i) {
    CompareOptions o = opts;
    o.control_seed = derive_seed(seeds[i], "control", 0);
    reports[i] = compare_average_vs_schedule(ens, make_theta0(cfg.theta0, ens.dim(), seeds[i]), base, spec, seeds[i], o);
    CsvWriter csv(out.file(seeded("equivalence_rows", seeds[i])),
                  {"step", "dist_avg_vs_sched", "dist_avg_vs_indep", "loss_avg", "loss_sched", "loss_momentary"});
    for (const auto& r : reports[i].rows)
      csv.cell((unsigned long long)r.step).cell(r.dist_avg_vs_sched).cell(r.dist_avg_vs_indep).cell(r.loss_avg)
          .cell(r.loss_sched).cell(r.loss_momentary).end_row();
  });

  ScenarioResult res;
  CsvWriter csv(out.file("equivalence_summary.csv"),
                {"seed", "l2_distance", "relative_distance", "control_distance", "loss_gap", "momentary_gap",
                 "theta_norm", "mean_gradient_cosine"});
  json rows = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& r = reports[i];
    res.diverged = res.diverged || r.diverged;
    double mc = 0.0;
    for (double c : r.gradient_cosines) mc += c;
    mc = r.gradient_cosines.empty() ? std::numeric_limits<double>::quiet_NaN() : mc / double(r.gradient_cosines.size());
    csv.cell((unsigned long long)seeds[i]).cell(r.l2_distance).cell(r.relative_distance).cell(r.control_distance)
        .cell(r.loss_gap).cell(r.momentary_gap).cell(r.theta_norm).cell(mc).end_row();
    rows.push_back({{"seed", seeds[i]}, {"relative_distance", r.relative_distance}, {"loss_gap", r.loss_gap}});
  }
  res.summary = {{"method", to_string(spec.method)}, {"t1", spec.t1}, {"t2", spec.t2}, {"seeds", rows}};
  return res;
}

ScenarioResult scenario_basins(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds, Outputs& out,
                               const RunSettings& settings) {
  const Ensemble ens = make_ensemble(cfg.ensemble);
  const Schedule schedule =
      cfg.schedules.empty() ? Schedule::constant(param_double(cfg, "lr", 0.05)) : cfg.schedules.front();
  const auto window = param_uint(cfg, "window", 500);
  const double rel_tol = param_double(cfg, "rel_tol", 0.02);

  std::vector<BasinsRun> runs(seeds.size());
  std::vector<PlateauReport> plateaus(seeds.size());
  parallel_for(seeds.size(), settings.threads, [&](std::size_t i) {
    runs[i] = run_basins(ens, make_theta0(cfg.theta0, ens.dim(), seeds[i]), schedule, cfg.steps, cfg.batch_size,
                         seeds[i]);
    CsvWriter csv(out.file(seeded("basins_distance", seeds[i])), {"step", "distance"});
    for (std::size_t t = 0; t < runs[i].distance.size(); ++t)
      csv.cell((unsigned long long)t).cell(runs[i].distance[t]).end_row();
    if (!runs[i].diverged && runs[i].distance.size() >= 2 * window) {
      plateaus[i] = detect_plateau(runs[i].distance, window, rel_tol);
    }
  });

  ScenarioResult res;
  CsvWriter csv(out.file("basins_summary.csv"), {"seed", "found", "plateau_value", "onset_step", "band_halfwidth"});
  json rows = json::array();
  std::vector<double> values;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    res.diverged = res.diverged || runs[i].diverged;
    const auto& p = plateaus[i];
    csv.cell((unsigned long long)seeds[i]).cell(p.found ? 1 : 0).cell(p.plateau_value)
        .cell((unsigned long long)p.onset_step).cell(p.band_halfwidth).end_row();
    rows.push_back({{"seed", seeds[i]}, {"found", p.found}, {"plateau_value", p.plateau_value}});
    if (p.found) values.push_back(p.plateau_value);
  }
  double spread = std::numeric_limits<double>::quiet_NaN();
  if (!values.empty()) {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    spread = (*hi - *lo) / (std::accumulate(values.begin(), values.end(), 0.0) / double(values.size()));
  }
  res.summary = {{"window", window}, {"rel_tol", rel_tol}, {"plateau_spread", spread}, {"seeds", rows}};
  if (settings.plots && !res.diverged) {
    std::vector<PlotSeries> series;
    for (std::size_t i = 0; i < seeds.size(); ++i) series.push_back({"seed " + std::to_string(seeds[i]), runs[i].distance});
    write_line_plot_svg(out.file("basins_distance.svg"), "distance to the alternative solution",
                        iota_steps(runs.front().distance.size()), series);
  }
  return res;
}

ScenarioResult scenario_profile(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds, Outputs& out,
                                const RunSettings& settings) {
  const Ensemble ens = make_ensemble(cfg.ensemble);
  const auto held_out = param_uint(cfg, "held_out_batches", 16);
  const auto grid = default_lr_grid(ens.lambda_max(), param_uint(cfg, "grid_points", 50));

  std::vector<ProfileTable> tables(seeds.size());
  parallel_for(seeds.size(), settings.threads, [&](std::size_t i) {
    tables[i] = run_single_step_profile(ens, make_theta0(cfg.theta0, ens.dim(), seeds[i]), cfg.batch_size, held_out,
                                        grid, seeds[i]);
    const auto& t = tables[i];
    CsvWriter csv(out.file(seeded("profile", seeds[i])),
                  {"lr", "train_loss", "held_out_mean", "held_out_std", "held_out_min", "held_out_max", "train_ratio",
                   "held_out_ratio"});
    for (const auto& r : t.rows)
      csv.cell(r.lr).cell(r.train_loss).cell(r.held_out_mean).cell(r.held_out_std).cell(r.held_out_min)
          .cell(r.held_out_max).cell(r.train_loss / t.train_start).cell(r.held_out_mean / t.held_out_start).end_row();
  });

  CsvWriter csv(out.file("profile_summary.csv"),
                {"seed", "train_start", "held_out_start", "min_train_ratio", "min_held_out_ratio"});
  double mt = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto& t = tables[i];
    double bt = std::numeric_limits<double>::infinity(), bh = bt;
    for (const auto& r : t.rows) {
      bt = std::min(bt, r.train_loss);
      bh = std::min(bh, r.held_out_mean);
    }
    mt += bt / t.train_start;
    mh += bh / t.held_out_start;
    csv.cell((unsigned long long)seeds[i]).cell(t.train_start).cell(t.held_out_start).cell(bt / t.train_start)
        .cell(bh / t.held_out_start).end_row();
  }
  mt /= double(seeds.size());
  mh /= double(seeds.size());
  if (settings.plots) {
    std::vector<double> train(grid.size(), 0.0), held(grid.size(), 0.0);
    for (const auto& t : tables)
      for (std::size_t j = 0; j < grid.size(); ++j) {
        train[j] += t.rows[j].train_loss / t.train_start / double(tables.size());
        held[j] += t.rows[j].held_out_mean / t.held_out_start / double(tables.size());
      }
    write_line_plot_svg(out.file("profile.svg"), "one-step loss ratio vs learning rate (x = grid index)",
                        iota_steps(grid.size()), {{"training batch", train}, {"held-out", held}}, true);
  }
  ScenarioResult res;
  res.summary = {{"mean_min_train_ratio", mt}, {"mean_min_held_out_ratio", mh}};
  return res;
}

ScenarioResult scenario_interpolation(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                      Outputs& out, const RunSettings& settings) {
  const Ensemble ens = make_ensemble(cfg.ensemble);
  const Schedule& schedule = cfg.schedules.front();
  const auto t_a = param_uint(cfg, "t_a", cfg.steps / 2);
  const auto t_b = param_uint(cfg, "t_b", cfg.steps);
  const auto grid = param_uint(cfg, "grid", 51);
  if (t_a > cfg.steps || t_b > cfg.steps) throw ConfigError("$.params", "t_a and t_b must not exceed steps");

  struct Row {
    double residual = 0.0;
    bool diverged = false;
  };
  std::vector<Row> rows(seeds.size());
  parallel_for(seeds.size(), settings.threads, [&](std::size_t i) {
    const auto seed = seeds[i];
    VectorXd theta_a, theta_b;
    RunOptions opts;
    opts.observer = [&](std::uint64_t t, const VectorXd& th) {
      if (t == t_a) theta_a = th;
      if (t == t_b) theta_b = th;
    };
    const auto rec = run_trajectory(ens, make_theta0(cfg.theta0, ens.dim(), seed), schedule, cfg.steps,
                                    cfg.batch_size, seed, RecorderConfig{}, opts);
    write_trajectory_csv(rec, out.file(seeded("trajectory", seed)));
    write_snapshots_csv(rec, out.file(seeded("snapshots", seed)));
    if (rec.diverged) {
      rows[i].diverged = true;
      return;
    }
    Stream stream = make_stream(seed, "interpolation_batch", 0);
    const QuadraticBatch batch = sample_batch(ens, stream, cfg.batch_size);
    const auto curve = interpolate_losses(theta_a, theta_b, batch, grid);
    CsvWriter csv(out.file(seeded("interpolation", seed)), {"t", "batch_loss", "global_loss"});
    for (const auto& [t, l] : curve)
      csv.cell(t).cell(l).cell(global_loss(ens, (1.0 - t) * theta_a + t * theta_b)).end_row();
    rows[i].residual = quadratic_residual(curve);
  });
  ScenarioResult res;
  CsvWriter csv(out.file("interpolation_summary.csv"), {"seed", "t_a", "t_b", "quadratic_residual"});
  json js = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    res.diverged = res.diverged || rows[i].diverged;
    csv.cell((unsigned long long)seeds[i]).cell((unsigned long long)t_a).cell((unsigned long long)t_b)
        .cell(rows[i].residual).end_row();
    js.push_back({{"seed", seeds[i]}, {"quadratic_residual", rows[i].residual}});
  }
  res.summary = {{"seeds", js}};
  return res;
}

ScenarioResult scenario_alignment(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds, Outputs& out,
                                  const RunSettings& settings) {
  const Ensemble ens = make_ensemble(cfg.ensemble);
  const Schedule& schedule = cfg.schedules.front();
  RecorderConfig recorder;
  recorder.thin_every = param_uint(cfg, "thin_every", 100);
  if (recorder.thin_every == 0) throw ConfigError("$.params.thin_every", "must be positive");

  std::vector<std::vector<AlignmentRow>> all(seeds.size());
  std::vector<char> diverged(seeds.size(), 0);
  parallel_for(seeds.size(), settings.threads, [&](std::size_t i) {
    const auto seed = seeds[i];
    const auto rec = run_trajectory(ens, make_theta0(cfg.theta0, ens.dim(), seed), schedule, cfg.steps,
                                    cfg.batch_size, seed, recorder);
    write_trajectory_csv(rec, out.file(seeded("trajectory", seed)));
    if (rec.diverged) {
      diverged[i] = 1;
      return;
    }
    Stream stream = make_stream(seed, "alignment_batch", 0);
    const QuadraticBatch fixed = sample_batch(ens, stream, cfg.batch_size);
    all[i] = gradient_alignment(ens, rec, fixed, derive_seed(seed, "control", 0));
    CsvWriter csv(out.file(seeded("alignment", seed)), {"step", "cosine", "norm_ratio", "control_cosine"});
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : all[i])
      csv.cell((unsigned long long)r.step).cell(r.cosine.value_or(nan)).cell(r.norm_ratio)
          .cell(r.control_cosine.value_or(nan)).end_row();
  });
  ScenarioResult res;
  json js = json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    res.diverged = res.diverged || diverged[i];
    double lo = 1.0;
    for (const auto& r : all[i])
      if (r.cosine) lo = std::min(lo, *r.cosine);
    js.push_back({{"seed", seeds[i]}, {"min_cosine", lo}});
  }
  if (settings.plots && !res.diverged) {
    std::vector<double> x, cs, ctrl;
    for (const auto& r : all.front()) {
      x.push_back(double(r.step));
      cs.push_back(r.cosine.value_or(std::numeric_limits<double>::quiet_NaN()));
      ctrl.push_back(r.control_cosine.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    write_line_plot_svg(out.file("alignment.svg"), "fixed-batch gradient cosine", x,
                        {{"fixed batch", cs}, {"independent batches", ctrl}});
  }
  res.summary = {{"seeds", js}};
  return res;
}

}  // namespace

std::vector<std::uint64_t> override_seeds(const std::vector<std::uint64_t>& seeds, std::uint64_t base) {
  std::vector<std::uint64_t> out(std::max<std::size_t>(1, seeds.size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = base + i;
  return out;
}

void write_trajectory_csv(const TrajectoryRecord& record, const fs::path& path) {
  CsvWriter csv(path, {"step", "loss_global", "loss_batch", "norm_theta", "lr"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < record.norms.size(); ++i) {
    csv.cell((unsigned long long)(record.start_step + i))
        .cell(i < record.loss_global.size() ? record.loss_global[i] : nan)
        .cell(i < record.loss_batch.size() ? record.loss_batch[i] : nan)
        .cell(record.norms[i])
        .cell(i < record.lrs.size() ? record.lrs[i] : nan)
        .end_row();
  }
}

void write_snapshots_csv(const TrajectoryRecord& record, const fs::path& path) {
  std::vector<std::string> header{"step"};
  const Eigen::Index d = record.thetas.empty() ? 0 : record.thetas.front().size();
  for (Eigen::Index j = 0; j < d; ++j) header.push_back("theta_" + std::to_string(j));
  CsvWriter csv(path, header);
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    csv.cell((unsigned long long)record.steps[i]);
    for (Eigen::Index j = 0; j < d; ++j) csv.cell(record.thetas[i][j]);
    csv.end_row();
  }
}

MultiscaleSeries run_multiscale(const Ensemble& ensemble, const VectorXd& theta0, const MultiscaleParams& params,
                                std::size_t batch_size, std::uint64_t seed) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(ensemble.omega());
  const VectorXd kappa = eig.eigenvalues();
  const MatrixXd Vt = eig.eigenvectors().transpose();
  const double split = params.mode_split.value_or(std::sqrt(ensemble.lambda_min() * ensemble.lambda_max()));

  auto record = [&](ModeSeries& s, const VectorXd& theta) {
    const VectorXd p = Vt * theta;
    double fast = 0.0, slow = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      const double c = 0.5 * kappa[i] * p[i] * p[i];
      (kappa[i] >= split ? fast : slow) += c;
    }
    s.total.push_back(fast + slow);
    s.fast.push_back(fast);
    s.slow.push_back(slow);
  };

  RecorderConfig rec;
  rec.thin_every = params.steps + 1;
  rec.global_loss = false;
  rec.batch_loss = false;

  MultiscaleSeries out;
  OnlineAverager ema = OnlineAverager::ema(params.ema_decay);
  RunOptions opts;
  opts.observer = [&](std::uint64_t, const VectorXd& theta) {
    record(out.plain, theta);
    ema.update(theta);
    record(out.ema, ema.current());
  };
  const BatchSource source(ensemble, seed, batch_size);
  const auto a = run_trajectory(source, theta0, Schedule::constant(params.lr0), params.steps, rec, opts);
  opts.observer = [&](std::uint64_t, const VectorXd& theta) { record(out.small, theta); };
  const auto b = run_trajectory(source, theta0, Schedule::constant(params.lr1), params.steps, rec, opts);
  out.diverged = a.diverged || b.diverged;
  return out;
}

MultiscaleSeries mean_series(const std::vector<MultiscaleSeries>& runs) {
  if (runs.empty()) throw std::invalid_argument("mean_series: no runs");
  MultiscaleSeries out = runs.front();
  auto acc = [&](std::vector<double>& dst, const std::vector<double>& src) {
    if (dst.size() != src.size()) throw std::invalid_argument("mean_series: runs differ in length");
    for (std::size_t t = 0; t < dst.size(); ++t) dst[t] += src[t];
  };
  auto acc_modes = [&](ModeSeries& dst, const ModeSeries& src) {
    acc(dst.total, src.total);
    acc(dst.fast, src.fast);
    acc(dst.slow, src.slow);
  };
  for (std::size_t r = 1; r < runs.size(); ++r) {
    acc_modes(out.plain, runs[r].plain);
    acc_modes(out.ema, runs[r].ema);
    acc_modes(out.small, runs[r].small);
    out.diverged = out.diverged || runs[r].diverged;
  }
  const double n = double(runs.size());
  for (ModeSeries* s : {&out.plain, &out.ema, &out.small})
    for (auto* v : {&s->total, &s->fast, &s->slow})
      for (double& x : *v) x /= n;
  return out;
}

MultiscaleSummary summarize_multiscale(const MultiscaleSeries& s, double tail_fraction) {
  MultiscaleSummary m;
  m.stationary_plain = tail_mean(s.plain.total, tail_fraction);
  m.stationary_ema = tail_mean(s.ema.total, tail_fraction);
  m.stationary_small = tail_mean(s.small.total, tail_fraction);
  m.fast_plain = tail_mean(s.plain.fast, tail_fraction);
  m.fast_ema = tail_mean(s.ema.fast, tail_fraction);
  m.slow_plain = tail_mean(s.plain.slow, tail_fraction);
  m.slow_ema = tail_mean(s.ema.slow, tail_fraction);
  m.halving_plain = halving_step(s.plain.slow);
  m.halving_ema = halving_step(s.ema.slow);
  m.halving_small = halving_step(s.small.slow);
  if (m.halving_plain) m.slow_ratio_at_plain_halving = s.ema.slow[*m.halving_plain] / s.plain.slow[*m.halving_plain];
  return m;
}

BasinsRun run_basins(const Ensemble& ensemble, const VectorXd& theta0, const Schedule& schedule, std::uint64_t steps,
                     std::size_t batch_size, std::uint64_t seed) {
  RecorderConfig rec;
  rec.thin_every = steps + 1;
  rec.global_loss = false;
  rec.batch_loss = false;
  BasinsRun out;
  const auto b = run_trajectory(ensemble, theta0, schedule, steps, batch_size, derive_seed(seed, "branch", 1), rec);
  out.final_norm_b = b.final_theta().norm();
  if (b.diverged) {
    out.diverged = true;
    return out;
  }
  const VectorXd target = b.final_theta();
  RunOptions opts;
  opts.observer = [&](std::uint64_t, const VectorXd& theta) { out.distance.push_back((theta - target).norm()); };
  const auto a = run_trajectory(ensemble, theta0, schedule, steps, batch_size, derive_seed(seed, "branch", 0), rec, opts);
  out.final_norm_a = a.final_theta().norm();
  out.diverged = a.diverged;
  return out;
}

ProfileTable run_single_step_profile(const Ensemble& ensemble, const VectorXd& theta0, std::size_t batch_size,
                                     std::size_t held_out, const std::vector<double>& lr_grid, std::uint64_t seed) {
  Stream train_stream = make_stream(seed, "profile_train", 0);
  const QuadraticBatch train = sample_batch(ensemble, train_stream, batch_size);
  std::vector<QuadraticBatch> fresh;
  for (std::size_t j = 0; j < held_out; ++j) {
    Stream s = make_stream(seed, "profile_held_out", j);
    fresh.push_back(sample_batch(ensemble, s, batch_size));
  }
  return loss_vs_lr_profile(theta0, train, fresh, lr_grid);
}

double quadratic_residual(const std::vector<std::pair<double, double>>& curve) {
  if (curve.size() < 3) return 0.0;
  std::vector<double> d2;
  double lo = curve.front().second, hi = lo;
  for (std::size_t i = 1; i + 1 < curve.size(); ++i) d2.push_back(curve[i + 1].second - 2 * curve[i].second + curve[i - 1].second);
  for (const auto& [t, l] : curve) {
    lo = std::min(lo, l);
    hi = std::max(hi, l);
  }
  const double mean = std::accumulate(d2.begin(), d2.end(), 0.0) / double(d2.size());
  double worst = 0.0;
  for (double v : d2) worst = std::max(worst, std::abs(v - mean));
  return hi > lo ? worst / (hi - lo) : worst;
}

ScenarioResult run_scenario(const ScenarioConfig& config, const RunSettings& settings) {
  const auto seeds = settings.seed ? override_seeds(config.seeds, *settings.seed) : config.seeds;
  Outputs out(settings.output_dir.value_or(fs::path(config.output_dir)));

  ScenarioResult res;
  switch (config.scenario) {
    case ScenarioKind::multiscale: res = scenario_multiscale(config, seeds, out, settings); break;
    case ScenarioKind::two_point: res = scenario_two_point(config, seeds, out, settings); break;
    case ScenarioKind::stationary_check: res = scenario_stationary_check(config, seeds, out, settings); break;
    case ScenarioKind::equivalence: res = scenario_equivalence(config, seeds, out, settings); break;
    case ScenarioKind::basins: res = scenario_basins(config, seeds, out, settings); break;
    case ScenarioKind::single_step_profile: res = scenario_profile(config, seeds, out, settings); break;
    case ScenarioKind::interpolation: res = scenario_interpolation(config, seeds, out, settings); break;
    case ScenarioKind::gradient_alignment: res = scenario_alignment(config, seeds, out, settings); break;
  }
  res.output_dir = out.dir();

  json files = json::array();
  for (const auto& name : out.sorted()) {
    files.push_back({{"path", name}, {"bytes", fs::file_size(out.dir() / name)}});
    res.files.emplace_back(name);
  }
  json manifest = {{"scenario", to_string(config.scenario)},
                   {"seeds", seeds},
                   {"ensemble", to_json(config.ensemble)},
                   {"config", config.source},
                   {"diverged", res.diverged},
                   {"summary", res.summary},
                   {"files", files}};
  std::ofstream(out.dir() / "manifest.json") << manifest.dump(2) << '\n';
  res.files.emplace_back("manifest.json");
  return res;
}

}  // namespace sgdnoise
