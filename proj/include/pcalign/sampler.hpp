#pragma once

#include "pcalign/geometry.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pcalign {

enum class GradStrategy { A, B };

// Row-major RGB raster. Regular images hold values in [0,1]; the same
// container carries the signed central-difference fields.
struct Image {
  int width = 0, height = 0;
  std::vector<double> data;  // height*width*3

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  double& at(int u, int v, int c) {
    return data[(static_cast<std::size_t>(v) * width + u) * 3 + c];
  }
  double at(int u, int v, int c) const {
    return data[(static_cast<std::size_t>(v) * width + u) * 3 + c];
  }
  Vec3 pixel(int u, int v) const {
    const double* p = &data[(static_cast<std::size_t>(v) * width + u) * 3];
    return {p[0], p[1], p[2]};
  }
  void set_pixel(int u, int v, const Vec3& rgb) {
    double* p = &data[(static_cast<std::size_t>(v) * width + u) * 3];
    p[0] = rgb.x();
    p[1] = rgb.y();
    p[2] = rgb.z();
  }
};

struct SubpixelSample {
  Vec3 color;
  Vec3 grad_u;
  Vec3 grad_v;
  GradStrategy strategy;
};

inline Vec3 bilinear_sample(const Image& J, double u, double v) {
  if (!(u >= 0 && u <= J.width - 1 && v >= 0 && v <= J.height - 1))
    throw std::domain_error("bilinear_sample: coordinates out of range");
  int j = std::min(static_cast<int>(std::floor(u)), J.width - 2);
  int k = std::min(static_cast<int>(std::floor(v)), J.height - 2);
  double du = u - j, dv = v - k;
  return (1 - du) * (1 - dv) * J.pixel(j, k) + du * (1 - dv) * J.pixel(j + 1, k) +
         (1 - du) * dv * J.pixel(j, k + 1) + du * dv * J.pixel(j + 1, k + 1);
}

// Strategy A: exact derivative of the bilinear interpolant within the cell.
// At integer coordinates the right-sided (forward) cell is used.
inline void grad_strategy_a(const Image& J, double u, double v, Vec3& grad_u, Vec3& grad_v) {
  if (!(u >= 0 && u < J.width - 1 && v >= 0 && v < J.height - 1))
    throw std::domain_error("grad_strategy_a: no forward neighbors");
  int j = static_cast<int>(std::floor(u));
  int k = static_cast<int>(std::floor(v));
  double du = u - j, dv = v - k;
  Vec3 p00 = J.pixel(j, k), p10 = J.pixel(j + 1, k);
  Vec3 p01 = J.pixel(j, k + 1), p11 = J.pixel(j + 1, k + 1);
  grad_u = (1 - dv) * (p10 - p00) + dv * (p11 - p01);
  grad_v = (1 - du) * (p01 - p00) + du * (p11 - p10);
}

// Central-difference fields with replicate padding at the borders.
inline void central_diff_images(const Image& J, Image& Ja, Image& Jb) {
  Ja = Image(J.width, J.height);
  Jb = Image(J.width, J.height);
  auto clampu = [&](int a) { return std::min(std::max(a, 0), J.width - 1); };
  auto clampv = [&](int b) { return std::min(std::max(b, 0), J.height - 1); };
  for (int v = 0; v < J.height; ++v)
    for (int u = 0; u < J.width; ++u) {
      Ja.set_pixel(u, v, 0.5 * (J.pixel(clampu(u + 1), v) - J.pixel(clampu(u - 1), v)));
      Jb.set_pixel(u, v, 0.5 * (J.pixel(u, clampv(v + 1)) - J.pixel(u, clampv(v - 1))));
    }
}

// Strategy B: bilinear interpolation of the central-difference fields.
inline void grad_strategy_b(const Image& Ja, const Image& Jb, double u, double v,
                            Vec3& grad_u, Vec3& grad_v) {
  if (!(u >= 1 && u <= Ja.width - 2 && v >= 1 && v <= Ja.height - 2))
    throw std::domain_error("grad_strategy_b: missing central-difference support");
  grad_u = bilinear_sample(Ja, u, v);
  grad_v = bilinear_sample(Jb, u, v);
}

inline void grad_strategy_b(const Image& J, double u, double v, Vec3& grad_u, Vec3& grad_v) {
  Image Ja, Jb;
  central_diff_images(J, Ja, Jb);
  grad_strategy_b(Ja, Jb, u, v, grad_u, grad_v);
}

inline SubpixelSample subpixel_sample(const Image& J, double u, double v, GradStrategy strategy) {
  SubpixelSample s;
  s.strategy = strategy;
  s.color = bilinear_sample(J, u, v);
  if (strategy == GradStrategy::A)
    grad_strategy_a(J, u, v, s.grad_u, s.grad_v);
  else
    grad_strategy_b(J, u, v, s.grad_u, s.grad_v);
  return s;
}

// 1-D reference functions used by the equivalence analysis of the two
// gradient strategies on a sequence h.

inline double interp1(const std::vector<double>& h, double x) {
  if (!(x >= 0 && x <= static_cast<double>(h.size() - 1)))
    throw std::domain_error("interp1: out of range");
  int j = std::min(static_cast<int>(std::floor(x)), static_cast<int>(h.size()) - 2);
  double d = x - j;
  return (1 - d) * h[j] + d * h[j + 1];
}

// f^A_x: forward difference of the cell containing x.
inline double grad1_strategy_a(const std::vector<double>& h, double x) {
  if (!(x >= 0 && x < static_cast<double>(h.size() - 1)))
    throw std::domain_error("grad1_strategy_a: out of range");
  int j = static_cast<int>(std::floor(x));
  return h[j + 1] - h[j];
}

inline std::vector<double> central_diff_1d(const std::vector<double>& h) {
  std::vector<double> ha(h.size());
  for (int a = 0; a < static_cast<int>(h.size()); ++a) {
    int lo = std::max(a - 1, 0);
    int hi = std::min(a + 1, static_cast<int>(h.size()) - 1);
    ha[a] = 0.5 * (h[hi] - h[lo]);
  }
  return ha;
}

// f^B_x: linear interpolation of the central-difference sequence.
inline double grad1_strategy_b(const std::vector<double>& h, double x) {
  if (!(x >= 1 && x <= static_cast<double>(h.size() - 2)))
    throw std::domain_error("grad1_strategy_b: out of range");
  return interp1(central_diff_1d(h), x);
}

}  // namespace pcalign
