#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "sgdnoise/averaging.hpp"
#include "sgdnoise/model.hpp"

namespace sgdnoise {

/// Drag/drift split of one per-sample step:
///   theta - alpha A^T A theta - alpha b = (1 - alpha gamma) theta - alpha xi
/// with gamma = theta^T A^T A theta / ||theta||^2, theta_perp = A^T A theta - gamma theta
/// and xi = theta_perp + b. The identity is exact; b is carried whole, so xi is
/// orthogonal to theta only up to b's projection.
struct DriftDragSplit {
  double gamma = 0.0;
  VectorXd xi;
  VectorXd theta_perp;
  VectorXd linear_term;  // b = A^T c

  /// (1 - alpha gamma) theta - alpha xi.
  VectorXd reconstruct(const VectorXd& theta, double alpha) const;
};

DriftDragSplit decompose_step(const VectorXd& theta, const QuadraticSample& sample, double alpha);

/// Change in ||theta||^2 assuming xi orthogonal to theta:
///   -alpha gamma (2 - alpha gamma) ||theta||^2 + alpha^2 ||xi||^2.
double norm_change(const VectorXd& theta, double gamma, double xi_sq, double alpha);

/// Learning rate at which the expected norm change vanishes:
///   2 ||theta||^2 E[gamma] / (E||xi||^2 + ||theta||^2 E[gamma^2]).
double zero_drift_lr(double theta_sq, double mean_gamma, double mean_gamma_sq, double mean_xi_sq);

/// Exact inverse of zero_drift_lr: alpha E||xi||^2 / (2 E[gamma] - alpha E[gamma^2]).
double zero_drift_norm_sq(double alpha, double mean_gamma, double mean_gamma_sq, double mean_xi_sq);

/// First-order stationary norm: alpha E||xi||^2 / (2 E[gamma]).
double zero_drift_norm_sq_first_order(double alpha, double mean_gamma, double mean_xi_sq);

/// Predicted stationary ||theta||. For omega = I this is c_norm sqrt(alpha / 2);
/// otherwise sqrt(alpha E||b||^2 / (2 E[gamma])) with E[gamma] = tr(omega)/d,
/// the direction-averaged Rayleigh quotient.
double predicted_stationary_norm(double alpha, const Ensemble& ensemble);

/// Noise-whitening change of coordinates theta = Q u with Q Q^T = C.
struct WhitenedSystem {
  MatrixXd Q;        // symmetric root of C
  MatrixXd omega_w;  // Q^{-1} A_bar Q
  MatrixXd gamma;    // I - alpha omega_w
  double alpha = 0.0;
};

WhitenedSystem whiten(const MatrixXd& A_bar, const MatrixXd& C, double alpha);

/// (I - Gamma^2)^{-1} = sum_{tau >= 0} Gamma^{2 tau}; rejects spectral radius >= 1.
MatrixXd geometric_series_sum(const MatrixXd& gamma);

struct StationaryReport {
  double alpha = 0.0;
  std::string kernel_label;
  MatrixXd F;        // covariance of the averaged iterate
  MatrixXd S_alpha;  // plain SGD covariance alpha (2 omega - alpha omega^2)^{-1}
  VectorXd mode_eigenvalues;  // eigenvalues kappa of omega, ascending
  VectorXd effective_lrs;     // alpha * (C_0 + 2 sum_d C_d (1 - alpha kappa)^d) per mode
  std::optional<MatrixXd> empirical_cov;
  std::optional<double> frobenius_rel_error;
};

/// Throws std::domain_error naming the first eigenvalue of I - alpha omega outside (0, 1).
void require_contractive(double alpha, const MatrixXd& omega);

/// alpha (2 omega - alpha omega^2)^{-1}.
MatrixXd baseline_covariance(double alpha, const MatrixXd& omega);

/// F = alpha (2 omega - alpha omega^2)^{-1} (C_0 + 2 sum_{d >= 1} C_d Gamma^d),
/// the sum running over the kernel's support.
StationaryReport stationary_covariance(double alpha, const MatrixXd& omega, const Kernel& kernel);

/// S_alpha (I + (I - alpha omega)^Delta) / 2.
MatrixXd two_point_covariance(double alpha, const MatrixXd& omega, std::uint64_t delta);

/// alpha (1 + (1 - alpha kappa)^Delta) / 2; requires 0 < alpha kappa < 2.
double effective_lr(double alpha, double kappa, std::uint64_t delta);

/// S_alpha (I/n + (2/n)(G1 - G2/n)) with
///   G1 = (I - P)^{-1} P (I - Gamma^{(n-1)Delta}),
///   G2 = (I - P)^{-2} P (I - n Gamma^{(n-1)Delta} + (n-1) Gamma^{n Delta}),  P = Gamma^Delta.
MatrixXd multi_point_covariance(double alpha, const MatrixXd& omega, std::uint64_t n, std::uint64_t delta);

struct MonteCarloCovariance {
  MatrixXd second_moment;  // E[u u^T] of the averaged iterate (the mean is zero)
  std::size_t samples = 0;
  std::uint64_t burn_in = 0;
  std::uint64_t spacing = 0;
};

/// Empirical second moment of the kernel-averaged iterate of the additive
/// model u_{t+1} = (I - alpha omega) u_t - alpha b_t, b_t ~ N(0, noise_cov),
/// from `samples` snapshots split over `chains` independent chains. Burn-in is
/// max(20/(alpha kappa_min), 10 * kernel support); snapshots are spaced by the
/// kernel lag plus 5/(alpha kappa_min) steps.
MonteCarloCovariance monte_carlo_covariance(const Ensemble& ensemble, double alpha, const Kernel& kernel,
                                            std::size_t samples, std::uint64_t seed, std::size_t chains = 8,
                                            std::size_t threads = 1);

}  // namespace sgdnoise
