#include "sgdnoise/linalg.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace sgdnoise::linalg {

void require_spd(const MatrixXd& m, const std::string& what) {
  if (m.rows() == 0 || m.rows() != m.cols()) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw std::invalid_argument(os.str());
  }
  if (!m.allFinite()) throw std::invalid_argument(what + ": contains non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300)) {
    throw std::invalid_argument(what + ": not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const VectorXd& ev = eig.eigenvalues();
  const double largest = ev.maxCoeff();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (!(largest > 0.0) || ev[i] <= kSpdRelativeFloor * largest) {
      std::ostringstream os;
      os.precision(17);
      os << what << ": not positive definite (eigenvalue " << i << " = " << ev[i]
         << ", largest = " << largest << ")";
      throw std::invalid_argument(os.str());
    }
  }
}

MatrixXd symmetric_sqrt(const MatrixXd& m, const std::string& what) {
  require_spd(m, what);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(symmetrize(m));
  const VectorXd root = eig.eigenvalues().cwiseSqrt();
  MatrixXd s = eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return symmetrize(s);
}

MatrixXd checked_inverse(const MatrixXd& m, const std::string& what) {
  if (m.rows() != m.cols()) throw std::invalid_argument(what + ": cannot invert a non-square matrix");
  Eigen::PartialPivLU<MatrixXd> lu(m);
  const double rcond = lu.rcond();
  if (!(rcond > 1.0 / kMaxCondition)) {
    std::ostringstream os;
    os << what << ": ill-conditioned (rcond estimate " << rcond << ")";
    throw std::domain_error(os.str());
  }
  MatrixXd inv = lu.inverse();
  const MatrixXd id = MatrixXd::Identity(m.rows(), m.cols());
  const double residual = (m * inv - id).norm();
  if (!(residual <= 1e-8)) {
    std::ostringstream os;
    os << what << ": inverse residual " << residual << " exceeds 1e-8";
    throw std::domain_error(os.str());
  }
  return inv;
}

MatrixXd matrix_power(const MatrixXd& m, unsigned long long n) {
  MatrixXd result = MatrixXd::Identity(m.rows(), m.cols());
  MatrixXd base = m;
  while (n > 0) {
    if (n & 1ULL) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

double spectral_radius(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> eig(m, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double frobenius_relative_error(const MatrixXd& estimate, const MatrixXd& reference) {
  const double ref = reference.norm();
  if (ref == 0.0) return estimate.norm();
  return (estimate - reference).norm() / ref;
}

MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

MatrixXd random_orthogonal(Stream& stream, Eigen::Index d) {
  const MatrixXd g = standard_normal_matrix(stream, d, d);
  Eigen::HouseholderQR<MatrixXd> qr(g);
  MatrixXd q = qr.householderQ();
  const MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

MatrixXd random_spd(Stream& stream, const VectorXd& eigenvalues) {
  const MatrixXd q = random_orthogonal(stream, eigenvalues.size());
  return symmetrize(q * eigenvalues.asDiagonal() * q.transpose());
}

}  // namespace sgdnoise::linalg
