#include "sgdnoise/averaging.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sgdnoise {
namespace {

template <class... Ts>
struct overloaded : Ts... { using Ts::operator()...; };
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void normalise(std::vector<double>& w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
}

}  // namespace

std::size_t Kernel::max_lag() const {
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] != 0.0) return k;
  }
  return 0;
}

Kernel identity_kernel() { return Kernel{{1.0}, std::nullopt, "identity"}; }

Kernel two_point_kernel(std::uint64_t delta) {
  if (delta == 0) return Kernel{{1.0}, std::nullopt, "two_point(0)"};
  Kernel k;
  k.weights.assign(delta + 1, 0.0);
  k.weights.front() = 0.5;
  k.weights.back() = 0.5;
  k.label = "two_point(" + std::to_string(delta) + ")";
  return k;
}

Kernel swa_kernel(std::uint64_t k) {
  if (k == 0) throw std::invalid_argument("swa kernel: k must be at least 1");
  return Kernel{std::vector<double>(k, 1.0 / double(k)), std::nullopt, "swa(" + std::to_string(k) + ")"};
}

Kernel ema_kernel(double decay, std::uint64_t truncation) {
  if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("ema kernel: decay must lie in (0, 1)");
  const auto min_k = static_cast<std::uint64_t>(std::ceil(10.0 / decay - 1e-9));
  if (truncation < min_k) {
    std::ostringstream os;
    os << "ema kernel: truncation " << truncation << " is below ceil(10/delta) = " << min_k;
    throw std::invalid_argument(os.str());
  }
  Kernel k;
  k.weights.resize(truncation + 1);
  const double q = 1.0 - decay;
  double p = 1.0;
  for (auto& w : k.weights) {
    w = decay * p;
    p *= q;
  }
  normalise(k.weights);
  k.truncated_at = truncation;
  std::ostringstream os;
  os.precision(6);
  os << "ema(" << decay << ", " << truncation << ")";
  k.label = os.str();
  return k;
}

Kernel multi_point_kernel(std::uint64_t n, std::uint64_t delta) {
  if (n == 0) throw std::invalid_argument("multi_point kernel: n must be at least 1");
  if (n == 1) return identity_kernel();
  if (delta == 0) {
    return Kernel{{1.0}, std::nullopt, "multi_point(" + std::to_string(n) + ", " + std::to_string(delta) + ")"};
  }
  Kernel k;
  k.weights.assign((n - 1) * delta + 1, 0.0);
  for (std::uint64_t j = 0; j < n; ++j) k.weights[j * delta] = 1.0 / double(n);
  k.label = "multi_point(" + std::to_string(n) + ", " + std::to_string(delta) + ")";
  return k;
}

Kernel make_kernel(const KernelSpec& spec) {
  return std::visit(
      overloaded{
          [](const KernelSpec::TwoPoint& s) { return two_point_kernel(s.delta); },
          [](const KernelSpec::Swa& s) { return swa_kernel(s.k); },
          [](const KernelSpec::Ema& s) { return ema_kernel(s.decay, s.truncation); },
          [](const KernelSpec::MultiPoint& s) { return multi_point_kernel(s.n, s.delta); },
          [](const KernelSpec::Custom& s) {
            if (s.weights.empty()) throw std::invalid_argument("custom kernel: no weights");
            double total = 0.0;
            for (double w : s.weights) {
              if (!std::isfinite(w)) throw std::invalid_argument("custom kernel: non-finite weight");
              if (w < 0.0 && !s.allow_negative) {
                throw std::invalid_argument("custom kernel: negative weight (set allow_negative to permit)");
              }
              total += w;
            }
            if (std::abs(total - 1.0) > kKernelSumTolerance) {
              std::ostringstream os;
              os.precision(17);
              os << "custom kernel: weights sum to " << total << ", expected 1 within " << kKernelSumTolerance;
              throw std::invalid_argument(os.str());
            }
            Kernel k{s.weights, std::nullopt, "custom(" + std::to_string(s.weights.size()) + ")"};
            normalise(k.weights);
            return k;
          },
      },
      spec.shape);
}

std::vector<double> kernel_autocorrelation(const Kernel& kernel, std::size_t delta_max) {
  const auto& mu = kernel.weights;
  std::vector<double> c(delta_max + 1, 0.0);
  // Sparse kernels (two-point, multi-point) dominate; skip zero weights.
  std::vector<std::size_t> nz;
  for (std::size_t k = 0; k < mu.size(); ++k)
    if (mu[k] != 0.0) nz.push_back(k);
  for (std::size_t a = 0; a < nz.size(); ++a) {
    for (std::size_t b = a; b < nz.size(); ++b) {
      const std::size_t lag = nz[b] - nz[a];
      if (lag > delta_max) break;
      c[lag] += mu[nz[a]] * mu[nz[b]];
    }
  }
  return c;
}

VectorXd average_iterates(const Kernel& kernel, std::span<const VectorXd> history) {
  const std::size_t need = kernel.max_lag() + 1;
  if (history.size() < need) {
    std::ostringstream os;
    os << "average_iterates: kernel " << kernel.label << " needs " << need << " iterates, got " << history.size();
    throw std::invalid_argument(os.str());
  }
  const std::size_t newest = history.size() - 1;
  VectorXd out = VectorXd::Zero(history[newest].size());
  for (std::size_t k = 0; k < need; ++k) {
    if (kernel.weights[k] != 0.0) out += kernel.weights[k] * history[newest - k];
  }
  return out;
}

VectorXd apply_kernel(const TrajectoryRecord& record, const Kernel& kernel, std::uint64_t at_step) {
  const std::size_t lag = kernel.max_lag();
  if (lag > at_step) {
    std::ostringstream os;
    os << "apply_kernel: kernel " << kernel.label << " reaches before step 0 from step " << at_step;
    throw std::out_of_range(os.str());
  }
  VectorXd out;
  for (std::size_t k = 0; k <= lag; ++k) {
    const double w = kernel.weights[k];
    if (w == 0.0) continue;
    const VectorXd& theta = record.theta_at(at_step - k);
    if (out.size() == 0) out = VectorXd::Zero(theta.size());
    out += w * theta;
  }
  return out;
}

OnlineAverager OnlineAverager::ema(double decay) {
  if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("OnlineAverager::ema: decay must lie in (0, 1)");
  return OnlineAverager(Kind::ema, decay);
}

OnlineAverager OnlineAverager::swa() { return OnlineAverager(Kind::swa, 0.0); }

void OnlineAverager::update(const VectorXd& theta) {
  if (count_ == 0) {
    sum_ = VectorXd::Zero(theta.size());
  } else if (theta.size() != sum_.size()) {
    throw std::invalid_argument("OnlineAverager::update: dimension mismatch");
  }
  ++count_;
  if (kind_ == Kind::ema) {
    const double q = 1.0 - decay_;
    sum_ = q * sum_ + decay_ * theta;
    weight_ = q * weight_ + decay_;
  } else {
    sum_ += theta;
    weight_ += 1.0;
  }
}

VectorXd OnlineAverager::current() const {
  if (count_ == 0) throw std::logic_error("OnlineAverager::current: no updates yet");
  return sum_ / weight_;
}

}  // namespace sgdnoise
