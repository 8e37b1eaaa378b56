#include "sgdnoise/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "sgdnoise/linalg.hpp"
#include "sgdnoise/parallel.hpp"
#include "sgdnoise/trajectory.hpp"

namespace sgdnoise {

VectorXd DriftDragSplit::reconstruct(const VectorXd& theta, double alpha) const {
  return (1.0 - alpha * gamma) * theta - alpha * xi;
}

DriftDragSplit decompose_step(const VectorXd& theta, const QuadraticSample& sample, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("decompose_step: alpha must be >= 0");
  if (theta.size() != sample.A.cols()) throw std::invalid_argument("decompose_step: dimension mismatch");
  const double theta_sq = theta.squaredNorm();
  if (theta_sq == 0.0) throw std::invalid_argument("decompose_step: theta = 0 leaves gamma undefined");
  const VectorXd a_theta = sample.A * theta;
  const VectorXd hess_theta = sample.A.transpose() * a_theta;
  DriftDragSplit out;
  out.gamma = a_theta.squaredNorm() / theta_sq;
  out.theta_perp = hess_theta - out.gamma * theta;
  out.linear_term = sample.linear_term();
  out.xi = out.theta_perp + out.linear_term;
  return out;
}

double norm_change(const VectorXd& theta, double gamma, double xi_sq, double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("norm_change: alpha must be >= 0");
  const double ag = alpha * gamma;
  return -ag * (2.0 - ag) * theta.squaredNorm() + alpha * alpha * xi_sq;
}

double zero_drift_lr(double theta_sq, double mean_gamma, double mean_gamma_sq, double mean_xi_sq) {
  const double denom = mean_xi_sq + theta_sq * mean_gamma_sq;
  if (!(denom > 0.0)) throw std::invalid_argument("zero_drift_lr: statistics are all zero");
  return 2.0 * theta_sq * mean_gamma / denom;
}

double zero_drift_norm_sq(double alpha, double mean_gamma, double mean_gamma_sq, double mean_xi_sq) {
  const double denom = 2.0 * mean_gamma - alpha * mean_gamma_sq;
  if (!(denom > 0.0)) throw std::invalid_argument("zero_drift_norm_sq: 2 E[gamma] - alpha E[gamma^2] must be positive");
  return alpha * mean_xi_sq / denom;
}

double zero_drift_norm_sq_first_order(double alpha, double mean_gamma, double mean_xi_sq) {
  if (!(mean_gamma > 0.0)) throw std::invalid_argument("zero_drift_norm_sq_first_order: E[gamma] must be positive");
  return alpha * mean_xi_sq / (2.0 * mean_gamma);
}

double predicted_stationary_norm(double alpha, const Ensemble& ensemble) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("predicted_stationary_norm: alpha must be >= 0");
  const MatrixXd& omega = ensemble.omega();
  const bool identity = (omega - MatrixXd::Identity(omega.rows(), omega.cols())).cwiseAbs().maxCoeff() <= 1e-12;
  if (identity) return ensemble.c_norm() * std::sqrt(alpha / 2.0);
  const double mean_gamma = omega.trace() / double(omega.rows());
  return std::sqrt(zero_drift_norm_sq_first_order(alpha, mean_gamma, ensemble.expected_linear_term_sq()));
}

WhitenedSystem whiten(const MatrixXd& A_bar, const MatrixXd& C, double alpha) {
  if (A_bar.rows() != A_bar.cols() || A_bar.rows() != C.rows()) {
    throw std::invalid_argument("whiten: A_bar and C must be square and of equal size");
  }
  WhitenedSystem w;
  w.alpha = alpha;
  w.Q = linalg::symmetric_sqrt(C, "C");
  const MatrixXd q_inv = linalg::checked_inverse(w.Q, "Q");
  w.omega_w = q_inv * A_bar * w.Q;
  w.gamma = MatrixXd::Identity(A_bar.rows(), A_bar.cols()) - alpha * w.omega_w;
  return w;
}

MatrixXd geometric_series_sum(const MatrixXd& gamma) {
  if (gamma.rows() != gamma.cols()) throw std::invalid_argument("geometric_series_sum: gamma must be square");
  const double rho = linalg::spectral_radius(gamma);
  if (!(rho < 1.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "geometric_series_sum: spectral radius " << rho << " >= 1, the series diverges";
    throw std::domain_error(os.str());
  }
  const MatrixXd id = MatrixXd::Identity(gamma.rows(), gamma.cols());
  return linalg::checked_inverse(id - gamma * gamma, "I - Gamma^2");
}

void require_contractive(double alpha, const MatrixXd& omega) {
  if (omega.rows() != omega.cols() || omega.rows() == 0) {
    throw std::invalid_argument("stationary: omega must be a non-empty square matrix");
  }
  if (!(alpha > 0.0)) throw std::invalid_argument("stationary: alpha must be positive");
  const MatrixXd gamma = MatrixXd::Identity(omega.rows(), omega.cols()) - alpha * omega;
  Eigen::EigenSolver<MatrixXd> eig(gamma, false);
  const double scale = std::max(1.0, gamma.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
    const auto ev = eig.eigenvalues()[i];
    if (std::abs(ev.imag()) > 1e-10 * scale || !(ev.real() > 0.0 && ev.real() < 1.0)) {
      std::ostringstream os;
      os.precision(17);
      os << "stationary: eigenvalue " << ev.real();
      if (ev.imag() != 0.0) os << (ev.imag() > 0 ? "+" : "") << ev.imag() << "i";
      os << " of I - alpha omega lies outside (0, 1)";
      throw std::domain_error(os.str());
    }
  }
}

MatrixXd baseline_covariance(double alpha, const MatrixXd& omega) {
  require_contractive(alpha, omega);
  const MatrixXd m = 2.0 * omega - alpha * omega * omega;
  return alpha * linalg::checked_inverse(m, "2 omega - alpha omega^2");
}

StationaryReport stationary_covariance(double alpha, const MatrixXd& omega, const Kernel& kernel) {
  StationaryReport r;
  r.alpha = alpha;
  r.kernel_label = kernel.label;
  r.S_alpha = baseline_covariance(alpha, omega);

  const Eigen::Index d = omega.rows();
  const MatrixXd id = MatrixXd::Identity(d, d);
  const MatrixXd gamma = id - alpha * omega;
  const std::size_t lag = kernel.max_lag();
  const std::vector<double> c = kernel_autocorrelation(kernel, lag);

  MatrixXd factor = c[0] * id;
  MatrixXd power = id;
  for (std::size_t delta = 1; delta <= lag; ++delta) {
    power = power * gamma;
    if (c[delta] != 0.0) factor += 2.0 * c[delta] * power;
  }
  r.F = r.S_alpha * factor;

  Eigen::EigenSolver<MatrixXd> eig(omega, false);
  std::vector<double> kappas;
  for (Eigen::Index i = 0; i < d; ++i) kappas.push_back(eig.eigenvalues()[i].real());
  std::sort(kappas.begin(), kappas.end());
  r.mode_eigenvalues = Eigen::Map<VectorXd>(kappas.data(), d);
  r.effective_lrs.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double g = 1.0 - alpha * kappas[std::size_t(i)];
    double phi = c[0];
    double p = 1.0;
    for (std::size_t delta = 1; delta <= lag; ++delta) {
      p *= g;
      phi += 2.0 * c[delta] * p;
    }
    r.effective_lrs[i] = alpha * phi;
  }
  return r;
}

MatrixXd two_point_covariance(double alpha, const MatrixXd& omega, std::uint64_t delta) {
  const MatrixXd s = baseline_covariance(alpha, omega);
  const MatrixXd id = MatrixXd::Identity(omega.rows(), omega.cols());
  return 0.5 * s * (id + linalg::matrix_power(id - alpha * omega, delta));
}

double effective_lr(double alpha, double kappa, std::uint64_t delta) {
  const double ak = alpha * kappa;
  if (!(ak > 0.0 && ak < 2.0)) throw std::invalid_argument("effective_lr: requires 0 < alpha * kappa < 2");
  return 0.5 * alpha * (1.0 + std::pow(1.0 - ak, double(delta)));
}

MatrixXd multi_point_covariance(double alpha, const MatrixXd& omega, std::uint64_t n, std::uint64_t delta) {
  if (n == 0) throw std::invalid_argument("multi_point_covariance: n must be at least 1");
  if (delta == 0) throw std::invalid_argument("multi_point_covariance: delta must be at least 1");
  const MatrixXd s = baseline_covariance(alpha, omega);
  const MatrixXd id = MatrixXd::Identity(omega.rows(), omega.cols());
  const MatrixXd gamma = id - alpha * omega;
  const MatrixXd p = linalg::matrix_power(gamma, delta);
  const MatrixXd p_nm1 = linalg::matrix_power(p, n - 1);
  const MatrixXd p_n = p_nm1 * p;
  const MatrixXd inv = linalg::checked_inverse(id - p, "I - Gamma^Delta");
  const MatrixXd g1 = inv * p * (id - p_nm1);
  const MatrixXd g2 = inv * inv * p * (id - double(n) * p_nm1 + double(n - 1) * p_n);
  const double nn = double(n);
  return s * (id / nn + (2.0 / nn) * (g1 - g2 / nn));
}

MonteCarloCovariance monte_carlo_covariance(const Ensemble& ensemble, double alpha, const Kernel& kernel,
                                            std::size_t samples, std::uint64_t seed, std::size_t chains,
                                            std::size_t threads) {
  if (ensemble.kind() != SamplerKind::additive_gaussian) {
    throw std::invalid_argument("monte_carlo_covariance: needs an additive_gaussian ensemble");
  }
  if (samples == 0 || chains == 0) throw std::invalid_argument("monte_carlo_covariance: samples and chains must be positive");
  require_contractive(alpha, ensemble.omega());

  const double slowest = alpha * ensemble.lambda_min();
  const std::size_t lag = kernel.max_lag();
  MonteCarloCovariance out;
  out.burn_in = std::max<std::uint64_t>(std::uint64_t(std::ceil(20.0 / slowest)), 10 * kernel.support());
  out.burn_in = std::max<std::uint64_t>(out.burn_in, lag);
  out.spacing = lag + std::uint64_t(std::ceil(5.0 / slowest));
  chains = std::min(chains, samples);

  const Eigen::Index d = ensemble.dim();
  std::vector<MatrixXd> partial(chains, MatrixXd::Zero(d, d));
  std::vector<std::size_t> counts(chains, 0);
  parallel_for(chains, threads, [&](std::size_t chain) {
    const std::size_t quota = samples / chains + (chain < samples % chains ? 1 : 0);
    const std::uint64_t steps = out.burn_in + out.spacing * quota;
    std::deque<VectorXd> window;
    std::uint64_t next_sample = out.burn_in;
    auto observe = [&](std::uint64_t t, const VectorXd& theta) {
      window.push_back(theta);
      if (window.size() > lag + 1) window.pop_front();
      if (t == next_sample && counts[chain] < quota) {
        std::vector<VectorXd> hist(window.begin(), window.end());
        const VectorXd avg = average_iterates(kernel, hist);
        partial[chain] += avg * avg.transpose();
        ++counts[chain];
        next_sample += out.spacing;
      }
    };
    RecorderConfig rec;
    rec.thin_every = steps + 1;
    rec.global_loss = false;
    rec.batch_loss = false;
    RunOptions opts;
    opts.observer = observe;
    const Schedule schedule = Schedule::constant(alpha);
    BatchSource source(ensemble, derive_seed(seed, "mc_chain", chain), 1);
    run_trajectory(source, VectorXd::Zero(d), schedule, steps, rec, opts);
  });

  out.second_moment = MatrixXd::Zero(d, d);
  for (std::size_t c = 0; c < chains; ++c) {
    out.second_moment += partial[c];
    out.samples += counts[c];
  }
  out.second_moment /= double(out.samples);
  return out;
}

}  // namespace sgdnoise
