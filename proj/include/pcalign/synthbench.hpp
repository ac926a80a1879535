#pragma once

#include "pcalign/aligner.hpp"
#include "pcalign/detail/parallel.hpp"
#include "pcalign/geometry.hpp"
#include "pcalign/sampler.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace pcalign {

enum class TextureProfile { Smooth, Mixed, HighFrequency };
enum class SceneGeometry { Plane, TwoPlanes, BoxRoom };

struct SceneSpec {
  std::uint64_t seed = 0;
  TextureProfile texture_profile = TextureProfile::Mixed;
  SceneGeometry geometry = SceneGeometry::BoxRoom;
  int width = 256, height = 256;
  double scene_depth = 3.0;  // meters

  void validate() const {
    if (width < 64 || height < 64)
      throw std::invalid_argument("SceneSpec: image must be at least 64x64");
    if (!(scene_depth > 0))
      throw std::invalid_argument("SceneSpec: scene_depth must be positive");
  }
};

struct PerturbationSpec {
  double max_translation = 0.02;  // meters
  double max_rotation = 1.0;      // degrees
  std::uint64_t seed = 0;
};

struct TrialResult {
  double translation_error_mm = 0;
  double rotation_error_deg = 0;
  bool converged = false;
  int iterations = 0;
  std::string mode;
  bool ok = false;
  std::string error;
};

struct Scene {
  Image image;
  std::vector<double> depth;  // width*height row-major
  PointCloud cloud;
  CameraIntrinsics K;
  PoseParams theta_gt;
};

namespace detail {

struct Sinusoid {
  double ku, kv, amp;
  double phase[3];
};

struct Blob {
  double cu, cv, inv2s2, amp;
  double chan[3];
};

inline Vec3 random_unit_vector(std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  Vec3 v;
  do {
    v = Vec3(gauss(rng), gauss(rng), gauss(rng));
  } while (v.norm() < 1e-8);
  return v.normalized();
}

inline double ray_depth(const SceneSpec& spec, double dx, double dy) {
  switch (spec.geometry) {
    case SceneGeometry::Plane: {
      Vec3 n(0.2, -0.15, 1.0);
      Vec3 d(dx, dy, 1.0);
      return spec.scene_depth * n.norm() / n.dot(d);
    }
    case SceneGeometry::TwoPlanes: {
      Vec3 d(dx, dy, 1.0);
      Vec3 n1(0.35, 0.0, 1.0), n2(-0.35, 0.1, 1.0);
      double t1 = spec.scene_depth * n1.norm() / n1.dot(d);
      double t2 = spec.scene_depth * n2.norm() / n2.dot(d);
      double t = std::min(t1 > 0 ? t1 : 1e30, t2 > 0 ? t2 : 1e30);
      return t;
    }
    case SceneGeometry::BoxRoom: {
      // Camera inside an axis-aligned box, forward-facing rays exit
      // through the far wall or the sides.
      double hx = 0.8 * spec.scene_depth;
      double hy = 0.8 * spec.scene_depth;
      double zmax = 1.4 * spec.scene_depth;
      double t = zmax;  // dz = 1
      if (dx > 1e-12) t = std::min(t, hx / dx);
      if (dx < -1e-12) t = std::min(t, -hx / dx);
      if (dy > 1e-12) t = std::min(t, hy / dy);
      if (dy < -1e-12) t = std::min(t, -hy / dy);
      return t;
    }
  }
  return spec.scene_depth;
}

}  // namespace detail

// Procedural multi-frequency texture rendered per pixel, back-projected
// through the depth field into a colored point cloud expressed in a world
// frame offset by theta_gt. Aligning the cloud to the image recovers
// theta_gt exactly.
inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  Scene sc;
  sc.K.width = spec.width;
  sc.K.height = spec.height;
  sc.K.fx = sc.K.fy = 0.86 * spec.width;
  sc.K.cx = 0.5 * (spec.width - 1);
  sc.K.cy = 0.5 * (spec.height - 1);

  auto make_sines = [&](int count, double lam_lo, double lam_hi, double amp,
                        std::vector<detail::Sinusoid>& out) {
    for (int i = 0; i < count; ++i) {
      double lam = lam_lo + (lam_hi - lam_lo) * uni(rng);
      double angle = 2 * M_PI * uni(rng);
      detail::Sinusoid s;
      s.ku = 2 * M_PI / lam * std::cos(angle);
      s.kv = 2 * M_PI / lam * std::sin(angle);
      s.amp = amp * (0.5 + 0.5 * uni(rng));
      for (int c = 0; c < 3; ++c) s.phase[c] = 2 * M_PI * uni(rng);
      out.push_back(s);
    }
  };

  std::vector<detail::Sinusoid> sines;
  std::vector<detail::Blob> blobs;
  double blob_amp = 0.8;
  switch (spec.texture_profile) {
    case TextureProfile::Smooth:
      make_sines(3, 48, 128, 0.5, sines);
      break;
    case TextureProfile::Mixed:
      make_sines(3, 48, 128, 0.5, sines);
      make_sines(4, 8, 24, 0.4, sines);
      break;
    case TextureProfile::HighFrequency:
      // Wavelengths well above the initial projection offset (~1.5 px at the
      // benchmark perturbation) so the basin of attraction is preserved, yet
      // fine enough that the window-smoothed gradient loses precision.
      make_sines(6, 5.0, 10.0, 1.0, sines);
      make_sines(2, 16, 48, 0.4, sines);
      blob_amp = 0.3;
      break;
  }
  for (int i = 0; i < 8; ++i) {
    detail::Blob b;
    b.cu = spec.width * uni(rng);
    b.cv = spec.height * uni(rng);
    double s = 20 + 20 * uni(rng);
    b.inv2s2 = 1.0 / (2 * s * s);
    b.amp = blob_amp;
    for (int c = 0; c < 3; ++c) b.chan[c] = 2 * uni(rng) - 1;
    blobs.push_back(b);
  }

  sc.image = Image(spec.width, spec.height);
  // Luma-dominant palette: compressing chroma toward the per-pixel mean
  // mimics the channel correlation of natural images and keeps the texture
  // inside the gamut region where hue rotation is close to linear.
  const double chroma = 0.35;
  double lo = 1e30, hi = -1e30;
  for (int v = 0; v < spec.height; ++v)
    for (int u = 0; u < spec.width; ++u) {
      Vec3 val = Vec3::Zero();
      for (const auto& s : sines)
        for (int c = 0; c < 3; ++c)
          val(c) += s.amp * std::sin(s.ku * u + s.kv * v + s.phase[c]);
      for (const auto& b : blobs) {
        double d2 = (u - b.cu) * (u - b.cu) + (v - b.cv) * (v - b.cv);
        double g = b.amp * std::exp(-d2 * b.inv2s2);
        for (int c = 0; c < 3; ++c) val(c) += g * b.chan[c];
      }
      double m = val.mean();
      val = Vec3::Constant(m) + chroma * (val - Vec3::Constant(m));
      sc.image.set_pixel(u, v, val);
      lo = std::min(lo, val.minCoeff());
      hi = std::max(hi, val.maxCoeff());
    }
  // Single global span so the normalization preserves the chroma ratio.
  double span = std::max(hi - lo, 1e-12);
  for (int v = 0; v < spec.height; ++v)
    for (int u = 0; u < spec.width; ++u) {
      Vec3 val = sc.image.pixel(u, v);
      for (int c = 0; c < 3; ++c) val(c) = 0.05 + 0.9 * (val(c) - lo) / span;
      sc.image.set_pixel(u, v, val);
    }

  sc.depth.resize(static_cast<std::size_t>(spec.width) * spec.height);
  for (int v = 0; v < spec.height; ++v)
    for (int u = 0; u < spec.width; ++u) {
      double dx = (u - sc.K.cx) / sc.K.fx;
      double dy = (v - sc.K.cy) / sc.K.fy;
      sc.depth[static_cast<std::size_t>(v) * spec.width + u] =
          detail::ray_depth(spec, dx, dy);
    }

  // Ground-truth pose: moderate random offset between world and camera frame.
  sc.theta_gt.omega = detail::random_unit_vector(rng) * (0.3 * uni(rng));
  sc.theta_gt.tau = Vec3(uni(rng) - 0.5, uni(rng) - 0.5, uni(rng) - 0.5) *
                    (spec.scene_depth / 3.0);

  const Eigen::Index n = static_cast<Eigen::Index>(spec.width) * spec.height;
  sc.cloud.positions.resize(n, 3);
  sc.cloud.colors.resize(n, 3);
  PoseParams inv_gt = inverse(sc.theta_gt);
  Mat3 R_inv = rotation_from_axis_angle(inv_gt.omega);
  Eigen::Index idx = 0;
  for (int v = 0; v < spec.height; ++v)
    for (int u = 0; u < spec.width; ++u, ++idx) {
      double z = sc.depth[static_cast<std::size_t>(v) * spec.width + u];
      Vec3 p_cam((u - sc.K.cx) * z / sc.K.fx, (v - sc.K.cy) * z / sc.K.fy, z);
      sc.cloud.positions.row(idx) = (R_inv * p_cam + inv_gt.tau).transpose();
      sc.cloud.colors.row(idx) = sc.image.pixel(u, v).transpose();
    }
  return sc;
}

namespace detail {

inline Vec3 rgb_to_hsv(const Vec3& rgb) {
  double mx = rgb.maxCoeff(), mn = rgb.minCoeff(), d = mx - mn;
  double h = 0;
  if (d > 1e-12) {
    if (mx == rgb.x()) h = std::fmod((rgb.y() - rgb.z()) / d, 6.0);
    else if (mx == rgb.y()) h = (rgb.z() - rgb.x()) / d + 2.0;
    else h = (rgb.x() - rgb.y()) / d + 4.0;
    h /= 6.0;
    if (h < 0) h += 1.0;
  }
  double s = mx > 1e-12 ? d / mx : 0.0;
  return {h, s, mx};
}

inline Vec3 hsv_to_rgb(const Vec3& hsv) {
  double h = hsv.x() * 6.0, s = hsv.y(), v = hsv.z();
  int i = static_cast<int>(std::floor(h)) % 6;
  if (i < 0) i += 6;
  double f = h - std::floor(h);
  double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

inline double luma(const Vec3& rgb) {
  return 0.299 * rgb.x() + 0.587 * rgb.y() + 0.114 * rgb.z();
}

inline void clip_image(Image& img) {
  for (double& x : img.data) x = std::min(std::max(x, 0.0), 1.0);
}

inline void gaussian_blur(Image& img, double sigma) {
  int radius = static_cast<int>(std::ceil(3.0 * sigma));
  if (radius < 1) return;
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] =
        std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= sum;

  Image tmp(img.width, img.height);
  auto cu = [&](int a) { return std::min(std::max(a, 0), img.width - 1); };
  auto cv = [&](int b) { return std::min(std::max(b, 0), img.height - 1); };
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      Vec3 acc = Vec3::Zero();
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * img.pixel(cu(u + i), v);
      tmp.set_pixel(u, v, acc);
    }
  for (int v = 0; v < img.height; ++v)
    for (int u = 0; u < img.width; ++u) {
      Vec3 acc = Vec3::Zero();
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[static_cast<std::size_t>(i + radius)] * tmp.pixel(u, cv(v + i));
      img.set_pixel(u, v, acc);
    }
}

}  // namespace detail

struct ColorEffectParams {
  double brightness = 1, contrast = 1, saturation = 1;
  double hue_shift = 0;   // fraction of the hue circle
  double gamma = 1;
  double blur_sigma = 0;  // pixels
  std::array<int, 4> jitter_order{0, 1, 2, 3};
};

inline ColorEffectParams draw_color_effect_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 0xda942042e4dd58b5ULL + 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  ColorEffectParams p;
  auto factor = [&](double strength_max) {
    double s = strength_max * uni(rng);
    return uni(rng) < 0.5 ? 1.0 - s : 1.0 + s;
  };
  p.brightness = factor(0.4);
  p.contrast = factor(0.4);
  p.saturation = factor(0.4);
  double hs = 0.06 * uni(rng);
  p.hue_shift = uni(rng) < 0.5 ? -hs : hs;
  double g = uni(rng) < 0.5 ? 0.5 + 0.5 * uni(rng) : 1.0 + uni(rng);
  p.gamma = g;
  p.blur_sigma = 0.75 * uni(rng);
  for (int i = 3; i > 0; --i)
    std::swap(p.jitter_order[static_cast<std::size_t>(i)],
              p.jitter_order[rng() % static_cast<std::uint64_t>(i + 1)]);
  return p;
}

inline Image apply_color_effects(const Image& image, const ColorEffectParams& p) {
  Image out = image;
  double mean_luma = 0;
  for (int v = 0; v < out.height; ++v)
    for (int u = 0; u < out.width; ++u) mean_luma += detail::luma(out.pixel(u, v));
  mean_luma /= static_cast<double>(out.width) * out.height;

  auto per_pixel = [&](auto&& fn) {
    for (int v = 0; v < out.height; ++v)
      for (int u = 0; u < out.width; ++u) out.set_pixel(u, v, fn(out.pixel(u, v)));
  };
  for (int op : p.jitter_order) {
    switch (op) {
      case 0:
        if (p.brightness != 1)
          per_pixel([&](const Vec3& c) { return Vec3(p.brightness * c); });
        break;
      case 1:
        if (p.contrast != 1)
          per_pixel([&](const Vec3& c) {
            return Vec3(Vec3::Constant(mean_luma) + p.contrast * (c - Vec3::Constant(mean_luma)));
          });
        break;
      case 2:
        if (p.saturation != 1)
          per_pixel([&](const Vec3& c) {
            double l = detail::luma(c);
            return Vec3(Vec3::Constant(l) + p.saturation * (c - Vec3::Constant(l)));
          });
        break;
      case 3:
        if (p.hue_shift != 0)
          per_pixel([&](const Vec3& c) {
            Vec3 clipped = c.cwiseMax(0.0).cwiseMin(1.0);
            Vec3 hsv = detail::rgb_to_hsv(clipped);
            hsv.x() = std::fmod(hsv.x() + p.hue_shift + 1.0, 1.0);
            return detail::hsv_to_rgb(hsv);
          });
        break;
    }
    detail::clip_image(out);
  }
  if (p.gamma != 1)
    per_pixel([&](const Vec3& c) {
      return Vec3(c.cwiseMax(0.0).array().pow(p.gamma).matrix());
    });
  if (p.blur_sigma > 0) detail::gaussian_blur(out, p.blur_sigma);
  detail::clip_image(out);
  return out;
}

inline Image apply_color_effects(const Image& image, std::uint64_t seed) {
  return apply_color_effects(image, draw_color_effect_params(seed));
}

// Composes theta_gt with a bounded random rotation and a bounded random
// translation offset; the measured pose errors never exceed the maxima.
inline PoseParams perturb_pose(const PoseParams& theta_gt, const PerturbationSpec& spec) {
  if (spec.max_translation < 0 || spec.max_rotation < 0)
    throw std::invalid_argument("perturb_pose: negative maxima");
  std::mt19937_64 rng(spec.seed * 0xbf58476d1ce4e5b9ULL + 0x94d049bb133111ebULL);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double angle = spec.max_rotation * M_PI / 180.0 * uni(rng);
  Vec3 axis = detail::random_unit_vector(rng);
  double tnorm = spec.max_translation * uni(rng);
  Vec3 tdir = detail::random_unit_vector(rng);

  Mat3 dR = rotation_from_axis_angle(axis * angle);
  PoseParams out;
  out.omega = axis_angle_from_rotation(dR * rotation_from_axis_angle(theta_gt.omega));
  out.tau = theta_gt.tau + tnorm * tdir;
  return canonicalize(out);
}

inline double translation_error_mm(const PoseParams& gt, const PoseParams& est) {
  return (gt.tau - est.tau).norm() * 1000.0;
}

inline double rotation_error_deg(const PoseParams& gt, const PoseParams& est) {
  Mat3 rel = rotation_from_axis_angle(gt.omega).transpose() *
             rotation_from_axis_angle(est.omega);
  // atan2 form stays accurate near zero angle, where acos of the trace loses
  // half the significant digits.
  Vec3 s(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  return std::atan2(0.5 * s.norm(), 0.5 * (rel.trace() - 1.0)) * 180.0 / M_PI;
}

struct BenchmarkMode {
  std::string name;
  AlignConfig cfg;
};

struct BenchmarkOptions {
  int n_trials = 20;
  SceneSpec scene_template;
  PerturbationSpec perturb;
  std::vector<BenchmarkMode> modes;
  bool color_effects = true;
  int threads = 0;  // trial-level parallelism
};

struct Quantiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] * (1 - frac) + v[hi] * frac;
}

inline Quantiles make_quantiles(const std::vector<double>& v) {
  return {quantile(v, 0.0), quantile(v, 0.25), quantile(v, 0.5),
          quantile(v, 0.75), quantile(v, 1.0)};
}

struct ModeStats {
  std::string name;
  std::vector<TrialResult> trials;
  Quantiles translation, rotation;
  double median_translation_mm = 0, median_rotation_deg = 0;
  double convergence_rate = 0, failure_rate = 0;

  std::vector<double> errors(bool translation_metric) const {
    std::vector<double> v;
    for (const auto& t : trials)
      if (t.ok)
        v.push_back(translation_metric ? t.translation_error_mm : t.rotation_error_deg);
    return v;
  }
};

struct BenchmarkReport {
  BenchmarkOptions options;
  std::vector<ModeStats> modes;
  std::vector<double> hist_edges_translation, hist_edges_rotation;
  // Per mode, cumulative normalized histogram values at the edges.
  std::vector<std::vector<double>> hist_translation, hist_rotation;
};

inline BenchmarkReport run_benchmark(const BenchmarkOptions& opt) {
  if (opt.n_trials < 1) throw std::invalid_argument("run_benchmark: n_trials < 1");
  if (opt.modes.empty()) throw std::invalid_argument("run_benchmark: no modes");

  const std::size_t n_modes = opt.modes.size();
  std::vector<std::vector<TrialResult>> results(
      n_modes, std::vector<TrialResult>(static_cast<std::size_t>(opt.n_trials)));

  pcalign::detail::parallel_chunks(
      static_cast<std::size_t>(opt.n_trials), 1, opt.threads,
      [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t t = b; t < e; ++t) {
          SceneSpec spec = opt.scene_template;
          spec.seed = opt.scene_template.seed + t;
          Scene sc = generate_scene(spec);
          Image img = opt.color_effects
                          ? apply_color_effects(sc.image, spec.seed * 31 + 7)
                          : sc.image;
          PerturbationSpec pspec = opt.perturb;
          pspec.seed = opt.perturb.seed + spec.seed * 131 + 17;
          PoseParams theta0 = perturb_pose(sc.theta_gt, pspec);

          for (std::size_t m = 0; m < n_modes; ++m) {
            TrialResult tr;
            tr.mode = opt.modes[m].name;
            AlignConfig cfg = opt.modes[m].cfg;
            cfg.threads = 1;  // trials already run in parallel
            try {
              AlignResult ar = align(sc.cloud, img, sc.K, theta0, cfg);
              tr.translation_error_mm = translation_error_mm(sc.theta_gt, ar.theta_final);
              tr.rotation_error_deg = rotation_error_deg(sc.theta_gt, ar.theta_final);
              tr.converged = ar.converged;
              tr.iterations = ar.iterations_run;
              tr.ok = true;
            } catch (const std::exception& ex) {
              tr.ok = false;
              tr.error = ex.what();
            }
            results[m][t] = tr;
          }
        }
      });

  BenchmarkReport rep;
  rep.options = opt;
  for (std::size_t m = 0; m < n_modes; ++m) {
    ModeStats ms;
    ms.name = opt.modes[m].name;
    ms.trials = results[m];
    auto terr = ms.errors(true);
    auto rerr = ms.errors(false);
    ms.translation = make_quantiles(terr);
    ms.rotation = make_quantiles(rerr);
    ms.median_translation_mm = ms.translation.median;
    ms.median_rotation_deg = ms.rotation.median;
    int conv = 0, fail = 0;
    for (const auto& t : ms.trials) {
      if (!t.ok) ++fail;
      else if (t.converged) ++conv;
    }
    ms.convergence_rate = static_cast<double>(conv) / static_cast<double>(opt.n_trials);
    ms.failure_rate = static_cast<double>(fail) / static_cast<double>(opt.n_trials);
    rep.modes.push_back(std::move(ms));
  }

  auto build_hist = [&](bool translation_metric, std::vector<double>& edges,
                        std::vector<std::vector<double>>& hists) {
    double max_err = 0;
    for (const auto& ms : rep.modes)
      for (double v : ms.errors(translation_metric)) max_err = std::max(max_err, v);
    if (max_err <= 0) max_err = 1.0;
    const int bins = 50;
    edges.resize(bins);
    for (int i = 0; i < bins; ++i)
      edges[static_cast<std::size_t>(i)] = max_err * (i + 1) / bins;
    for (const auto& ms : rep.modes) {
      auto errs = ms.errors(translation_metric);
      std::vector<double> cum(static_cast<std::size_t>(bins), 0.0);
      for (int i = 0; i < bins; ++i) {
        std::size_t cnt = 0;
        for (double v : errs)
          if (v <= edges[static_cast<std::size_t>(i)] + 1e-15) ++cnt;
        cum[static_cast<std::size_t>(i)] =
            errs.empty() ? 0.0 : static_cast<double>(cnt) / static_cast<double>(errs.size());
      }
      hists.push_back(std::move(cum));
    }
  };
  build_hist(true, rep.hist_edges_translation, rep.hist_translation);
  build_hist(false, rep.hist_edges_rotation, rep.hist_rotation);
  return rep;
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace detail

inline std::string texture_profile_name(TextureProfile p) {
  switch (p) {
    case TextureProfile::Smooth: return "smooth";
    case TextureProfile::Mixed: return "mixed";
    case TextureProfile::HighFrequency: return "high_frequency";
  }
  return "?";
}

inline std::string geometry_name(SceneGeometry g) {
  switch (g) {
    case SceneGeometry::Plane: return "plane";
    case SceneGeometry::TwoPlanes: return "two_planes";
    case SceneGeometry::BoxRoom: return "box_room";
  }
  return "?";
}

// report.txt (key=value) plus plot-data CSVs in out_dir.
inline void write_benchmark_report(const BenchmarkReport& rep, const std::string& out_dir) {
  using detail::fmt_num;
  {
    std::ofstream f(out_dir + "/report.txt");
    if (!f) throw std::runtime_error("cannot write " + out_dir + "/report.txt");
    f << "trials=" << rep.options.n_trials << "\n";
    f << "family=" << texture_profile_name(rep.options.scene_template.texture_profile) << "\n";
    f << "geometry=" << geometry_name(rep.options.scene_template.geometry) << "\n";
    f << "image_size=" << rep.options.scene_template.width << "x"
      << rep.options.scene_template.height << "\n";
    f << "scene_depth=" << fmt_num(rep.options.scene_template.scene_depth) << "\n";
    f << "seed=" << rep.options.scene_template.seed << "\n";
    f << "max_translation=" << fmt_num(rep.options.perturb.max_translation) << "\n";
    f << "max_rotation=" << fmt_num(rep.options.perturb.max_rotation) << "\n";
    f << "color_effects=" << (rep.options.color_effects ? 1 : 0) << "\n";
    for (const auto& ms : rep.modes) {
      f << "\n[mode " << ms.name << "]\n";
      f << "median_translation_error_mm=" << fmt_num(ms.median_translation_mm) << "\n";
      f << "median_rotation_error_deg=" << fmt_num(ms.median_rotation_deg) << "\n";
      f << "convergence_rate=" << fmt_num(ms.convergence_rate) << "\n";
      f << "failure_rate=" << fmt_num(ms.failure_rate) << "\n";
    }
  }
  {
    std::ofstream f(out_dir + "/trials.csv");
    f << "mode,trial,ok,converged,iterations,translation_error_mm,rotation_error_deg\n";
    for (const auto& ms : rep.modes)
      for (std::size_t t = 0; t < ms.trials.size(); ++t) {
        const auto& tr = ms.trials[t];
        f << ms.name << "," << t << "," << (tr.ok ? 1 : 0) << ","
          << (tr.converged ? 1 : 0) << "," << tr.iterations << ","
          << fmt_num(tr.translation_error_mm) << ","
          << fmt_num(tr.rotation_error_deg) << "\n";
      }
  }
  {
    std::ofstream f(out_dir + "/quantiles.csv");
    f << "mode,metric,min,q1,median,q3,max\n";
    for (const auto& ms : rep.modes) {
      auto row = [&](const char* metric, const Quantiles& q) {
        f << ms.name << "," << metric << "," << fmt_num(q.min) << ","
          << fmt_num(q.q1) << "," << fmt_num(q.median) << "," << fmt_num(q.q3)
          << "," << fmt_num(q.max) << "\n";
      };
      row("translation_mm", ms.translation);
      row("rotation_deg", ms.rotation);
    }
  }
  auto write_hist = [&](const char* name, const std::vector<double>& edges,
                        const std::vector<std::vector<double>>& hists) {
    std::ofstream f(out_dir + "/" + name);
    f << "edge";
    for (const auto& ms : rep.modes) f << "," << ms.name;
    f << "\n";
    for (std::size_t i = 0; i < edges.size(); ++i) {
      f << fmt_num(edges[i]);
      for (const auto& h : hists) f << "," << fmt_num(h[i]);
      f << "\n";
    }
  };
  write_hist("hist_translation.csv", rep.hist_edges_translation, rep.hist_translation);
  write_hist("hist_rotation.csv", rep.hist_edges_rotation, rep.hist_rotation);
}

}  // namespace pcalign
