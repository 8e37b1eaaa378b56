#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgdnoise/rng.hpp"

namespace sgdnoise {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One sampled loss term L(theta) = 0.5 * ||A theta + c||^2.
struct QuadraticSample {
  MatrixXd A;  // m x d
  VectorXd c;  // m

  double loss(const VectorXd& theta) const;
  VectorXd gradient(const VectorXd& theta) const;
  /// b = A^T c, the gradient at theta = 0.
  VectorXd linear_term() const { return A.transpose() * c; }
};

/// Loss and gradient of a batch are arithmetic means over its samples.
struct QuadraticBatch {
  std::vector<QuadraticSample> samples;

  std::size_t size() const { return samples.size(); }
  Eigen::Index dim() const;
};

enum class SamplerKind { gaussian_factor, additive_gaussian };

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& name);

/// Declarative description of an ensemble, as read from a scenario config.
struct EnsembleSpec {
  Eigen::Index d = 0;
  std::optional<Eigen::Index> m;  // defaults to d
  MatrixXd omega;
  double c_norm = 1.0;
  SamplerKind kind = SamplerKind::gaussian_factor;
  std::optional<MatrixXd> noise_cov;  // additive_gaussian only; defaults to (c_norm^2/d) I
  std::optional<std::uint64_t> seed;
};

/// The sampling distribution over quadratic samples.
///
/// gaussian_factor draws A = G omega^{1/2} / sqrt(m) with G an m x d matrix of
/// independent standard normals, and c ~ N(0, c_norm^2/m I_m) independently,
/// so E[A^T A] = omega, E[A^T c] = 0 and E||c||^2 = c_norm^2. The expected loss
/// 0.5 theta^T omega theta + 0.5 c_norm^2 is minimised at theta = 0.
///
/// additive_gaussian skips per-sample matrices altogether: every step sees
/// the fixed matrix omega and a noise vector b ~ N(0, noise_cov).
class Ensemble {
 public:
  Eigen::Index dim() const { return d_; }
  Eigen::Index sample_rows() const { return m_; }
  SamplerKind kind() const { return kind_; }
  double c_norm() const { return c_norm_; }
  const MatrixXd& omega() const { return omega_; }
  const MatrixXd& omega_sqrt() const { return omega_sqrt_; }
  const MatrixXd& noise_cov() const { return noise_cov_; }
  const MatrixXd& noise_sqrt() const { return noise_sqrt_; }
  double lambda_max() const { return lambda_max_; }
  double lambda_min() const { return lambda_min_; }
  const EnsembleSpec& spec() const { return spec_; }

  /// One gaussian_factor sample. Throws std::logic_error for additive ensembles.
  QuadraticSample draw_sample(Stream& stream) const;
  /// One additive noise vector b ~ N(0, noise_cov). Throws for gaussian_factor.
  VectorXd draw_noise(Stream& stream) const;

  /// E||b||^2 with b the per-step linear term: tr(omega) c_norm^2 / m for
  /// gaussian_factor, tr(noise_cov) for additive_gaussian.
  double expected_linear_term_sq() const;

 private:
  friend Ensemble make_ensemble(const EnsembleSpec& spec);
  Ensemble() = default;

  EnsembleSpec spec_;
  Eigen::Index d_ = 0;
  Eigen::Index m_ = 0;
  SamplerKind kind_ = SamplerKind::gaussian_factor;
  double c_norm_ = 1.0;
  MatrixXd omega_;
  MatrixXd omega_sqrt_;
  std::optional<VectorXd> omega_sqrt_diag_;
  MatrixXd noise_cov_;
  MatrixXd noise_sqrt_;
  double lambda_max_ = 0.0;
  double lambda_min_ = 0.0;
};

/// Validates `spec` and precomputes the matrix roots. Rejects d <= 0, m <= 0,
/// c_norm <= 0 and non-SPD omega / noise_cov (the diagnostic names the
/// offending eigenvalue).
Ensemble make_ensemble(const EnsembleSpec& spec);

/// Draws `size` independent samples, consuming `stream`. gaussian_factor only.
QuadraticBatch sample_batch(const Ensemble& ensemble, Stream& stream, std::size_t size);

double batch_loss(const QuadraticBatch& batch, const VectorXd& theta);
VectorXd batch_gradient(const QuadraticBatch& batch, const VectorXd& theta);

/// 0.5 theta^T omega theta + 0.5 c_norm^2. The 1/2 of the per-sample loss is kept.
double global_loss(const Ensemble& ensemble, const VectorXd& theta);
/// omega theta.
VectorXd global_gradient(const Ensemble& ensemble, const VectorXd& theta);

/// The stochastic objective seen at a single step: either a quadratic batch
/// or, for additive_gaussian ensembles, the pair (omega, b) with gradient
/// omega theta + b and loss 0.5 theta^T omega theta + b^T theta + 0.5 c_norm^2.
class StepObjective {
 public:
  static StepObjective from_batch(QuadraticBatch batch);
  static StepObjective additive(const Ensemble& ensemble, VectorXd noise);

  double loss(const VectorXd& theta) const;
  VectorXd gradient(const VectorXd& theta) const;

  bool is_batch() const { return !additive_; }
  const QuadraticBatch& batch() const { return batch_; }
  const VectorXd& noise() const { return noise_; }

 private:
  bool additive_ = false;
  QuadraticBatch batch_;
  const MatrixXd* omega_ = nullptr;
  VectorXd noise_;
  double offset_ = 0.0;
};

/// Deterministic per-step draws: the objective for absolute step s depends only
/// on (seed, s), so any run that visits step s sees the same batch.
class BatchSource {
 public:
  BatchSource(const Ensemble& ensemble, std::uint64_t seed, std::size_t batch_size);

  StepObjective at(std::uint64_t step) const;
  std::uint64_t seed() const { return seed_; }
  std::size_t batch_size() const { return batch_size_; }
  const Ensemble& ensemble() const { return *ensemble_; }

 private:
  const Ensemble* ensemble_;
  std::uint64_t seed_;
  std::size_t batch_size_;
};

}  // namespace sgdnoise
