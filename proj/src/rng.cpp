#include "sgdnoise/rng.hpp"

namespace sgdnoise {
namespace {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view role, std::uint64_t index) {
  // Each stage is a bijection of its running state given the other inputs.
  std::uint64_t h = splitmix64(master_seed);
  h = splitmix64(h ^ fnv1a(role));
  h = splitmix64(h + index * 0xd1b54a32d192ed03ULL);
  return h;
}

Eigen::VectorXd standard_normal_vector(Stream& stream, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(stream);
  return v;
}

Eigen::MatrixXd standard_normal_matrix(Stream& stream, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order so that the draw sequence does not depend on storage order.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(stream);
  return m;
}

}  // namespace sgdnoise
