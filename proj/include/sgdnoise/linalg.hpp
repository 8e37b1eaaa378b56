#pragma once

#include <string>

#include <Eigen/Dense>

#include "sgdnoise/rng.hpp"

namespace sgdnoise::linalg {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Eigenvalues at or below this fraction of the largest one are treated as
/// non-positive when checking symmetric positive definiteness.
inline constexpr double kSpdRelativeFloor = 1e-12;

/// Condition number above which checked_inverse refuses to invert.
inline constexpr double kMaxCondition = 1e12;

/// Throws std::invalid_argument unless `m` is square, symmetric (relative
/// tolerance 1e-10) and positive definite. `what` names the matrix in the
/// diagnostic, which also reports the offending eigenvalue.
void require_spd(const MatrixXd& m, const std::string& what);

/// Symmetric square root S with S*S = m (S symmetric), via eigendecomposition.
MatrixXd symmetric_sqrt(const MatrixXd& m, const std::string& what = "matrix");

/// Inverse by LU with an rcond estimate and a residual check ||M X - I|| <= 1e-8.
MatrixXd checked_inverse(const MatrixXd& m, const std::string& what = "matrix");

/// m^n by repeated squaring; m^0 = I.
MatrixXd matrix_power(const MatrixXd& m, unsigned long long n);

double spectral_radius(const MatrixXd& m);

double frobenius_relative_error(const MatrixXd& estimate, const MatrixXd& reference);

MatrixXd symmetrize(const MatrixXd& m);

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
MatrixXd random_orthogonal(Stream& stream, Eigen::Index d);

/// Q diag(eigenvalues) Q^T with Q drawn by random_orthogonal.
MatrixXd random_spd(Stream& stream, const VectorXd& eigenvalues);

}  // namespace sgdnoise::linalg
