#pragma once

#include "pcalign/geometry.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <array>
#include <stdexcept>
#include <vector>

namespace pcalign {

enum class ColorOrder { Zero, First, Second };

inline int color_feature_dim(ColorOrder order) {
  switch (order) {
    case ColorOrder::Zero: return 3;    // identity, no fit
    case ColorOrder::First: return 4;   // [1, R, G, B]
    case ColorOrder::Second: return 10;
  }
  return 10;
}

using PolyFeatures = Eigen::Matrix<double, 10, 1>;

// [1, R, G, B, RG, GB, RB, R^2, G^2, B^2]
inline PolyFeatures poly_kernel(const Vec3& rgb) {
  const double R = rgb.x(), G = rgb.y(), B = rgb.z();
  PolyFeatures k;
  k << 1, R, G, B, R * G, G * B, R * B, R * R, G * G, B * B;
  return k;
}

// d(poly_kernel)/d(rgb), 10x3.
inline Eigen::Matrix<double, 10, 3> poly_kernel_jacobian(const Vec3& rgb) {
  const double R = rgb.x(), G = rgb.y(), B = rgb.z();
  Eigen::Matrix<double, 10, 3> J;
  J << 0, 0, 0,
       1, 0, 0,
       0, 1, 0,
       0, 0, 1,
       G, R, 0,
       0, B, G,
       B, 0, R,
       2 * R, 0, 0,
       0, 2 * G, 0,
       0, 0, 2 * B;
  return J;
}

// 3 x k transform applied to polynomial-lifted image colors. k is 10 for the
// second-order kernel, 4 for the first-order truncation.
struct ColorTransform {
  Eigen::MatrixXd D;  // 3 x k

  int feature_dim() const { return static_cast<int>(D.cols()); }

  // Rows select the plain R,G,B features: the embedding of the identity map.
  static ColorTransform identity(ColorOrder order = ColorOrder::Second) {
    int k = color_feature_dim(order);
    ColorTransform t;
    t.D = Eigen::MatrixXd::Zero(3, k);
    if (order == ColorOrder::Zero) {
      t.D.setIdentity();
    } else {
      for (int r = 0; r < 3; ++r) t.D(r, r + 1) = 1.0;
    }
    return t;
  }
};

inline Eigen::VectorXd lift_color(const Vec3& rgb, int feature_dim) {
  PolyFeatures k10 = poly_kernel(rgb);
  if (feature_dim == 10) return k10;
  if (feature_dim == 4) return k10.head<4>();
  if (feature_dim == 3) return rgb;
  throw std::invalid_argument("lift_color: unsupported feature dimension");
}

// Hot path: apply a 3 x k transform without heap traffic.
inline Vec3 transform_color_unclipped(const Eigen::MatrixXd& D, const Vec3& rgb) {
  const int k = static_cast<int>(D.cols());
  if (k == 3) return D * rgb;
  PolyFeatures feat = poly_kernel(rgb);
  return D * feat.head(k);
}

struct InlierSet {
  std::vector<uint8_t> flags;
  double beta_max = 0;
  bool degenerate = false;         // too few inliers, previous D kept
  std::size_t count = 0;
  // Per alternation round: inlier residual sum with the gating transform,
  // then with the refit transform (for the monotonicity check).
  std::vector<std::pair<double, double>> round_objectives;
};

namespace detail {

inline Eigen::MatrixXd fit_ls(const Eigen::MatrixXd& img_colors,
                              const Eigen::MatrixXd& pc_colors,
                              const std::vector<uint8_t>& flags, int k,
                              double ridge) {
  // Accumulate the full second-order Gram matrices; the first-order system
  // is their leading block since the low-order features are a prefix.
  Eigen::Matrix<double, 10, 10> A10 = Eigen::Matrix<double, 10, 10>::Zero();
  Eigen::Matrix<double, 3, 10> B10 = Eigen::Matrix<double, 3, 10>::Zero();
  for (Eigen::Index j = 0; j < img_colors.rows(); ++j) {
    if (!flags[static_cast<std::size_t>(j)]) continue;
    PolyFeatures kj = poly_kernel(img_colors.row(j).transpose());
    A10.noalias() += kj * kj.transpose();
    B10.noalias() += Vec3(pc_colors.row(j).transpose()) * kj.transpose();
  }
  Eigen::MatrixXd A = A10.topLeftCorner(k, k) +
                      ridge * Eigen::MatrixXd::Identity(k, k);
  Eigen::MatrixXd B = B10.leftCols(k);
  return A.ldlt().solve(B.transpose()).transpose();
}

inline double inlier_residual_sum(const Eigen::MatrixXd& img_colors,
                                  const Eigen::MatrixXd& pc_colors,
                                  const std::vector<uint8_t>& flags,
                                  const Eigen::MatrixXd& D) {
  double s = 0;
  for (Eigen::Index j = 0; j < img_colors.rows(); ++j) {
    if (!flags[static_cast<std::size_t>(j)]) continue;
    Vec3 r = transform_color_unclipped(D, img_colors.row(j).transpose()) -
             Vec3(pc_colors.row(j).transpose());
    s += r.squaredNorm();
  }
  return s;
}

}  // namespace detail

// Alternating inlier gating and least-squares refit of D. Round 0 fits on all
// points; later rounds re-gate with the current D and refit on the inliers.
// Stops when the inlier set stabilizes or max_rounds is reached.
inline std::pair<ColorTransform, InlierSet> solve_color_transform(
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& img_colors,
    const Eigen::Matrix<double, Eigen::Dynamic, 3>& pc_colors,
    double beta_max, int max_rounds, ColorOrder order = ColorOrder::Second,
    const ColorTransform* previous = nullptr) {
  if (img_colors.rows() != pc_colors.rows())
    throw std::invalid_argument("solve_color_transform: shape mismatch");
  if (!img_colors.allFinite() || !pc_colors.allFinite())
    throw std::invalid_argument("solve_color_transform: non-finite colors");
  const Eigen::Index n = img_colors.rows();
  const int k = color_feature_dim(order);
  const double ridge = 1e-8;
  const Eigen::Index min_inliers = 10;

  InlierSet inliers;
  inliers.beta_max = beta_max;
  inliers.flags.assign(static_cast<std::size_t>(n), 1);
  inliers.count = static_cast<std::size_t>(n);

  ColorTransform xf = previous ? *previous : ColorTransform::identity(order);
  if (order == ColorOrder::Zero) return {xf, inliers};

  if (n < min_inliers) {
    inliers.degenerate = true;
    return {xf, inliers};
  }

  Eigen::MatrixXd D = detail::fit_ls(img_colors, pc_colors, inliers.flags, k, ridge);
  for (int round = 1; round < max_rounds; ++round) {
    std::vector<uint8_t> next(static_cast<std::size_t>(n), 0);
    Eigen::Index cnt = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      Vec3 r = transform_color_unclipped(D, img_colors.row(j).transpose()) -
               Vec3(pc_colors.row(j).transpose());
      if (r.norm() < beta_max) {
        next[static_cast<std::size_t>(j)] = 1;
        ++cnt;
      }
    }
    if (cnt < min_inliers) {
      inliers.degenerate = true;
      break;
    }
    bool changed = next != inliers.flags;
    inliers.flags = std::move(next);
    inliers.count = static_cast<std::size_t>(cnt);
    if (!changed) break;
    double pre = detail::inlier_residual_sum(img_colors, pc_colors, inliers.flags, D);
    D = detail::fit_ls(img_colors, pc_colors, inliers.flags, k, ridge);
    double post = detail::inlier_residual_sum(img_colors, pc_colors, inliers.flags, D);
    inliers.round_objectives.emplace_back(pre, post);
  }
  if (!inliers.degenerate) xf.D = D;
  return {xf, inliers};
}

// Applies D to the lifted color and clips to [0,1]. pass_through marks the
// clipped channels; gradients downstream always use the unclipped derivative.
inline Vec3 apply_color_transform(const ColorTransform& xf, const Vec3& rgb,
                                  std::array<bool, 3>* pass_through = nullptr) {
  Vec3 out = transform_color_unclipped(xf.D, rgb);
  std::array<bool, 3> clipped{false, false, false};
  for (int c = 0; c < 3; ++c) {
    if (out(c) < 0) { out(c) = 0; clipped[c] = true; }
    else if (out(c) > 1) { out(c) = 1; clipped[c] = true; }
  }
  if (pass_through) *pass_through = clipped;
  return out;
}

// d(D K(c))/dc of the unclipped transform (straight-through rule).
inline Mat3 color_transform_jacobian(const ColorTransform& xf, const Vec3& rgb) {
  int k = xf.feature_dim();
  if (k == 3) return xf.D;
  Eigen::Matrix<double, 10, 3> Jk = poly_kernel_jacobian(rgb);
  if (k == 4) return xf.D * Jk.topRows<4>();
  return xf.D * Jk;
}

}  // namespace pcalign
