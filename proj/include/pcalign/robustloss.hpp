#pragma once

#include "pcalign/geometry.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace pcalign {

constexpr double kSigmaFloor = 1e-6;

struct ResidualSet {
  Eigen::Matrix<double, Eigen::Dynamic, 3> r;        // visible points only
  double sigma = 0;
  double nu = 5.0;
  Eigen::Matrix<double, Eigen::Dynamic, 3> weights;
};

// r_jl = transformed image color - point color, over visible points.
inline Eigen::Matrix<double, Eigen::Dynamic, 3> residuals(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& transformed,
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& pc_colors) {
  if (transformed.rows() != pc_colors.rows())
    throw std::invalid_argument("residuals: shape mismatch");
  if (transformed.rows() == 0)
    throw std::runtime_error("residuals: no visible points, alignment failed");
  return transformed - pc_colors;
}

// w_jl = (nu+1)/(nu + r^2/sigma^2)
inline Eigen::Matrix<double, Eigen::Dynamic, 3> t_weights(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& r, double sigma, double nu) {
  if (!(sigma > 0) || !(nu > 0))
    throw std::invalid_argument("t_weights: sigma and nu must be positive");
  return (nu + 1.0) / ((r.array().square() / (sigma * sigma)) + nu);
}

// Self-consistent robust scale: sigma^2 = (1/3n) sum r^2 (nu+1)/(nu+r^2/sigma^2),
// iterated from sigma = RMS(r).
inline double sigma_fixed_point(const Eigen::Matrix<double, Eigen::Dynamic, 3>& r,
                                double nu, double tol = 1e-6, int max_iter = 50) {
  const double count = 3.0 * static_cast<double>(r.rows());
  if (count == 0) throw std::invalid_argument("sigma_fixed_point: empty residuals");
  double ms = r.array().square().sum() / count;
  if (ms <= kSigmaFloor * kSigmaFloor) return kSigmaFloor;
  double sigma = std::sqrt(ms);
  for (int it = 0; it < max_iter; ++it) {
    double s2 = sigma * sigma;
    double acc = (r.array().square() * (nu + 1.0) /
                  ((r.array().square() / s2) + nu)).sum();
    double next = std::sqrt(acc / count);
    if (next < kSigmaFloor) next = kSigmaFloor;
    double rel = std::abs(next - sigma) / sigma;
    sigma = next;
    if (rel < tol) break;
  }
  return sigma;
}

// L = sum_j sum_l w_jl r_jl^2
inline double weighted_loss(const Eigen::Matrix<double, Eigen::Dynamic, 3>& r,
                            const Eigen::Matrix<double, Eigen::Dynamic, 3>& w) {
  if (r.rows() != w.rows())
    throw std::invalid_argument("weighted_loss: shape mismatch");
  return (w.array() * r.array().square()).sum();
}

}  // namespace pcalign
