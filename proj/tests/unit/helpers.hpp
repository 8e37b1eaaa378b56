#pragma once

#include <Eigen/Dense>

#include "sgdnoise/linalg.hpp"
#include "sgdnoise/model.hpp"

namespace testutil {

inline Eigen::VectorXd linspace(double lo, double hi, Eigen::Index n) {
  return Eigen::VectorXd::LinSpaced(n, lo, hi);
}

inline Eigen::MatrixXd random_spd(std::uint64_t seed, double lo, double hi, Eigen::Index d) {
  sgdnoise::Stream s = sgdnoise::make_stream(seed);
  return sgdnoise::linalg::random_spd(s, linspace(lo, hi, d));
}

inline sgdnoise::QuadraticSample scalar_sample(double a, double c) {
  sgdnoise::QuadraticSample q;
  q.A = Eigen::MatrixXd::Constant(1, 1, a);
  q.c = Eigen::VectorXd::Constant(1, c);
  return q;
}

inline sgdnoise::EnsembleSpec factor_spec(const Eigen::MatrixXd& omega, std::optional<Eigen::Index> m = std::nullopt,
                                          double c_norm = 1.0) {
  sgdnoise::EnsembleSpec s;
  s.d = omega.rows();
  s.m = m;
  s.omega = omega;
  s.c_norm = c_norm;
  return s;
}

inline sgdnoise::EnsembleSpec additive_spec(const Eigen::MatrixXd& omega, double c_norm = 1.0,
                                            std::optional<Eigen::MatrixXd> noise = std::nullopt) {
  sgdnoise::EnsembleSpec s = factor_spec(omega, std::nullopt, c_norm);
  s.kind = sgdnoise::SamplerKind::additive_gaussian;
  s.noise_cov = std::move(noise);
  return s;
}

}  // namespace testutil
