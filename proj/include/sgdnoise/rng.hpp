#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace sgdnoise {

using Stream = std::mt19937_64;

/// Derives the seed of an independent stream from a master seed, a role label
/// ("batch", "control", "theta0", ...) and an index.
///
/// The derivation is fixed: FNV-1a over the role bytes, then three rounds of
/// SplitMix64 finalisation folding in the master seed and the index. It must
/// not change between releases since recorded experiments depend on it.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view role, std::uint64_t index);

inline Stream make_stream(std::uint64_t seed) { return Stream(seed); }

inline Stream make_stream(std::uint64_t master_seed, std::string_view role, std::uint64_t index) {
  return Stream(derive_seed(master_seed, role, index));
}

Eigen::VectorXd standard_normal_vector(Stream& stream, Eigen::Index n);
Eigen::MatrixXd standard_normal_matrix(Stream& stream, Eigen::Index rows, Eigen::Index cols);

}  // namespace sgdnoise
