#include "sgdnoise/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sgdnoise/linalg.hpp"

namespace sgdnoise {
namespace {

void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    std::ostringstream os;
    os << what << ": dimension mismatch (expected " << expected << ", got " << got << ")";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

double QuadraticSample::loss(const VectorXd& theta) const {
  require_dim(A.cols(), theta.size(), "QuadraticSample::loss");
  return 0.5 * (A * theta + c).squaredNorm();
}

VectorXd QuadraticSample::gradient(const VectorXd& theta) const {
  require_dim(A.cols(), theta.size(), "QuadraticSample::gradient");
  return A.transpose() * (A * theta + c);
}

Eigen::Index QuadraticBatch::dim() const { return samples.empty() ? 0 : samples.front().A.cols(); }

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::gaussian_factor: return "gaussian_factor";
    case SamplerKind::additive_gaussian: return "additive_gaussian";
  }
  return "unknown";
}

SamplerKind sampler_kind_from_string(const std::string& name) {
  if (name == "gaussian_factor") return SamplerKind::gaussian_factor;
  if (name == "additive_gaussian") return SamplerKind::additive_gaussian;
  throw std::invalid_argument("unknown sampler kind '" + name +
                              "' (expected gaussian_factor or additive_gaussian)");
}

Ensemble make_ensemble(const EnsembleSpec& spec) {
  if (spec.d <= 0) throw std::invalid_argument("ensemble: d must be positive");
  const Eigen::Index m = spec.m.value_or(spec.d);
  if (m <= 0) throw std::invalid_argument("ensemble: m must be positive");
  if (!(spec.c_norm > 0.0) || !std::isfinite(spec.c_norm)) {
    throw std::invalid_argument("ensemble: c_norm must be positive and finite");
  }
  if (spec.omega.rows() != spec.d || spec.omega.cols() != spec.d) {
    std::ostringstream os;
    os << "ensemble: omega must be " << spec.d << "x" << spec.d << ", got " << spec.omega.rows()
       << "x" << spec.omega.cols();
    throw std::invalid_argument(os.str());
  }

  Ensemble e;
  e.spec_ = spec;
  e.d_ = spec.d;
  e.m_ = m;
  e.kind_ = spec.kind;
  e.c_norm_ = spec.c_norm;
  e.omega_ = linalg::symmetrize(spec.omega);
  e.omega_sqrt_ = linalg::symmetric_sqrt(spec.omega, "omega");
  if (e.omega_.isDiagonal(0.0)) {
    e.omega_sqrt_diag_ = e.omega_.diagonal().cwiseSqrt();
    e.omega_sqrt_ = e.omega_sqrt_diag_->asDiagonal();
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(e.omega_, Eigen::EigenvaluesOnly);
  e.lambda_max_ = eig.eigenvalues().maxCoeff();
  e.lambda_min_ = eig.eigenvalues().minCoeff();

  if (spec.kind == SamplerKind::additive_gaussian) {
    if (spec.noise_cov) {
      if (spec.noise_cov->rows() != spec.d || spec.noise_cov->cols() != spec.d) {
        throw std::invalid_argument("ensemble: noise_cov must be d x d");
      }
      e.noise_cov_ = linalg::symmetrize(*spec.noise_cov);
    } else {
      e.noise_cov_ = MatrixXd::Identity(spec.d, spec.d) * (spec.c_norm * spec.c_norm / double(spec.d));
    }
    e.noise_sqrt_ = linalg::symmetric_sqrt(e.noise_cov_, "noise_cov");
  }
  return e;
}

QuadraticSample Ensemble::draw_sample(Stream& stream) const {
  if (kind_ != SamplerKind::gaussian_factor) {
    throw std::logic_error("draw_sample: additive_gaussian ensembles draw noise vectors, not samples");
  }
  const double inv_sqrt_m = 1.0 / std::sqrt(double(m_));
  QuadraticSample s;
  if (omega_sqrt_diag_) {
    s.A = standard_normal_matrix(stream, m_, d_) * omega_sqrt_diag_->asDiagonal() * inv_sqrt_m;
  } else {
    s.A = standard_normal_matrix(stream, m_, d_) * omega_sqrt_ * inv_sqrt_m;
  }
  s.c = standard_normal_vector(stream, m_) * (c_norm_ * inv_sqrt_m);
  return s;
}

VectorXd Ensemble::draw_noise(Stream& stream) const {
  if (kind_ != SamplerKind::additive_gaussian) {
    throw std::logic_error("draw_noise: only additive_gaussian ensembles carry a noise covariance");
  }
  return noise_sqrt_ * standard_normal_vector(stream, d_);
}

double Ensemble::expected_linear_term_sq() const {
  if (kind_ == SamplerKind::additive_gaussian) return noise_cov_.trace();
  return omega_.trace() * c_norm_ * c_norm_ / double(m_);
}

QuadraticBatch sample_batch(const Ensemble& ensemble, Stream& stream, std::size_t size) {
  if (size == 0) throw std::invalid_argument("sample_batch: size must be at least 1");
  QuadraticBatch batch;
  batch.samples.reserve(size);
  for (std::size_t i = 0; i < size; ++i) batch.samples.push_back(ensemble.draw_sample(stream));
  return batch;
}

double batch_loss(const QuadraticBatch& batch, const VectorXd& theta) {
  if (batch.samples.empty()) throw std::invalid_argument("batch_loss: empty batch");
  double total = 0.0;
  for (const auto& s : batch.samples) total += s.loss(theta);
  return total / double(batch.samples.size());
}

VectorXd batch_gradient(const QuadraticBatch& batch, const VectorXd& theta) {
  if (batch.samples.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  VectorXd g = VectorXd::Zero(theta.size());
  for (const auto& s : batch.samples) g += s.gradient(theta);
  return g / double(batch.samples.size());
}

double global_loss(const Ensemble& ensemble, const VectorXd& theta) {
  require_dim(ensemble.dim(), theta.size(), "global_loss");
  return 0.5 * theta.dot(ensemble.omega() * theta) + 0.5 * ensemble.c_norm() * ensemble.c_norm();
}

VectorXd global_gradient(const Ensemble& ensemble, const VectorXd& theta) {
  require_dim(ensemble.dim(), theta.size(), "global_gradient");
  return ensemble.omega() * theta;
}

StepObjective StepObjective::from_batch(QuadraticBatch batch) {
  StepObjective o;
  o.batch_ = std::move(batch);
  return o;
}

StepObjective StepObjective::additive(const Ensemble& ensemble, VectorXd noise) {
  require_dim(ensemble.dim(), noise.size(), "StepObjective::additive");
  StepObjective o;
  o.additive_ = true;
  o.omega_ = &ensemble.omega();
  o.noise_ = std::move(noise);
  o.offset_ = 0.5 * ensemble.c_norm() * ensemble.c_norm();
  return o;
}

double StepObjective::loss(const VectorXd& theta) const {
  if (!additive_) return batch_loss(batch_, theta);
  require_dim(noise_.size(), theta.size(), "StepObjective::loss");
  return 0.5 * theta.dot(*omega_ * theta) + noise_.dot(theta) + offset_;
}

VectorXd StepObjective::gradient(const VectorXd& theta) const {
  if (!additive_) return batch_gradient(batch_, theta);
  require_dim(noise_.size(), theta.size(), "StepObjective::gradient");
  return *omega_ * theta + noise_;
}

BatchSource::BatchSource(const Ensemble& ensemble, std::uint64_t seed, std::size_t batch_size)
    : ensemble_(&ensemble), seed_(seed), batch_size_(batch_size) {
  if (batch_size == 0) throw std::invalid_argument("BatchSource: batch size must be at least 1");
}

StepObjective BatchSource::at(std::uint64_t step) const {
  Stream stream = make_stream(seed_, "batch", step);
  if (ensemble_->kind() == SamplerKind::additive_gaussian) {
    return StepObjective::additive(*ensemble_, ensemble_->draw_noise(stream));
  }
  return StepObjective::from_batch(sample_batch(*ensemble_, stream, batch_size_));
}

}  // namespace sgdnoise
