#pragma once

#include "pcalign/colorxform.hpp"
#include "pcalign/detail/parallel.hpp"
#include "pcalign/geometry.hpp"
#include "pcalign/robustloss.hpp"
#include "pcalign/sampler.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace pcalign {

struct AlignConfig {
  GradStrategy strategy = GradStrategy::A;
  ColorOrder color_mode = ColorOrder::Second;
  double lr_translation = 0;   // <= 0: auto, 1e-3 x median scene depth
  double lr_rotation = 1e-3;   // radians
  double lr_decay = 0.975;     // per-iteration multiplier on both rates
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_iters = 500;
  double param_tol = 1e-7;     // on the depth-scaled update norm
  double beta_max = 0.3;       // inlier gate, L2 in unit-RGB space
  int color_rounds = 5;
  double nu = 5.0;
  double depth_eps = 0;        // <= 0: auto, 1% of median scene depth
  int threads = 0;             // 0: all cores
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr_rotation > 0) || !(adam_beta1 >= 0 && adam_beta1 < 1) ||
        !(adam_beta2 >= 0 && adam_beta2 < 1) || !(adam_eps > 0))
      throw std::invalid_argument("AlignConfig: bad optimizer parameters");
    if (max_iters < 1 || !(param_tol > 0))
      throw std::invalid_argument("AlignConfig: bad iteration limits");
  }
};

struct AlignError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kMinVisibleFraction = 0.01;

// Everything one outer iteration produces, with per-visible-point arrays
// indexed in ascending point order.
struct AlignState {
  PoseParams theta;
  VisibilityMask mask;
  std::vector<Eigen::Index> visible;            // point indices
  std::vector<Vec3> p_cam;                      // camera-frame, visible only
  std::vector<Vec2> uv;
  std::vector<Vec3> sampled;                    // bilinear image color
  std::vector<Vec3> grad_u, grad_v;             // per configured strategy
  ColorTransform xform;
  InlierSet inliers;
  std::vector<Vec3> transformed;                // clipped D K(sampled)
  std::vector<std::array<bool, 3>> clipped;
  Eigen::Matrix<double, Eigen::Dynamic, 3> residual;
  Eigen::Matrix<double, Eigen::Dynamic, 3> weight;
  double sigma = 0;
  double loss = 0;
  double visible_fraction = 0;
};

struct AdamState {
  Vec6 m = Vec6::Zero();
  Vec6 v = Vec6::Zero();
  int step_count = 0;
};

struct AlignResult {
  PoseParams theta_final;
  ColorTransform D_final;
  std::vector<double> loss_trace;
  std::vector<int> inlier_counts;
  int iterations_run = 0;
  bool converged = false;
  double visible_fraction = 0;
};

// Strategy-B gradients reuse the central-difference fields across iterations.
struct SamplerCache {
  Image Ja, Jb;
  bool ready = false;

  void ensure(const Image& J) {
    if (!ready) {
      central_diff_images(J, Ja, Jb);
      ready = true;
    }
  }
};

inline double median_scene_depth(const PointCloud& pc, const PoseParams& theta) {
  auto cam = se3_transform(theta, pc.positions);
  std::vector<double> z;
  z.reserve(static_cast<std::size_t>(cam.rows()));
  for (Eigen::Index j = 0; j < cam.rows(); ++j)
    if (cam(j, 2) > 0) z.push_back(cam(j, 2));
  if (z.empty()) throw AlignError("median_scene_depth: no points in front of camera");
  std::nth_element(z.begin(), z.begin() + z.size() / 2, z.end());
  return z[z.size() / 2];
}

// Fills in the data-dependent defaults so the inner loops see concrete values.
inline AlignConfig resolve_config(AlignConfig cfg, const PointCloud& pc,
                                  const PoseParams& theta0) {
  cfg.validate();
  double depth = median_scene_depth(pc, theta0);
  if (!(cfg.lr_translation > 0)) cfg.lr_translation = 1e-3 * depth;
  if (!(cfg.depth_eps > 0)) cfg.depth_eps = 0.01 * depth;
  return cfg;
}

// Transform -> Z-buffer -> project -> sample -> lift -> color solve -> apply
// -> residuals, robust scale, weights, loss.
inline AlignState forward_pass(const PointCloud& pc, const Image& J,
                               const CameraIntrinsics& K, const PoseParams& theta,
                               const AlignConfig& cfg,
                               SamplerCache* cache = nullptr,
                               const ColorTransform* prev_xform = nullptr) {
  if (!(cfg.depth_eps > 0))
    throw std::invalid_argument("forward_pass: resolve_config first (depth_eps)");
  const Eigen::Index n = pc.size();
  AlignState st;
  st.theta = theta;

  auto cam_all = se3_transform(theta, pc.positions);
  st.mask = zbuffer_mask(cam_all, K, cfg.depth_eps);
  for (Eigen::Index j = 0; j < n; ++j)
    if (st.mask.visible(static_cast<std::size_t>(j))) st.visible.push_back(j);

  const std::size_t m = st.visible.size();
  st.visible_fraction = static_cast<double>(m) / static_cast<double>(n);
  if (st.visible_fraction < kMinVisibleFraction)
    throw AlignError("forward_pass: visible fraction below 1%");

  SamplerCache local;
  SamplerCache* sc = cache ? cache : &local;
  if (cfg.strategy == GradStrategy::B) sc->ensure(J);

  st.p_cam.resize(m);
  st.uv.resize(m);
  st.sampled.resize(m);
  st.grad_u.resize(m);
  st.grad_v.resize(m);
  detail::parallel_chunks(m, detail::kDefaultChunk, cfg.threads,
                          [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Eigen::Index j = st.visible[i];
      st.p_cam[i] = cam_all.row(j).transpose();
      st.uv[i] = project(K, st.p_cam[i]);
      st.sampled[i] = bilinear_sample(J, st.uv[i].x(), st.uv[i].y());
      if (cfg.strategy == GradStrategy::A)
        grad_strategy_a(J, st.uv[i].x(), st.uv[i].y(), st.grad_u[i], st.grad_v[i]);
      else
        grad_strategy_b(sc->Ja, sc->Jb, st.uv[i].x(), st.uv[i].y(),
                        st.grad_u[i], st.grad_v[i]);
    }
  });

  Eigen::Matrix<double, Eigen::Dynamic, 3> img_colors(m, 3), pc_colors(m, 3);
  for (std::size_t i = 0; i < m; ++i) {
    img_colors.row(i) = st.sampled[i].transpose();
    pc_colors.row(i) = pc.colors.row(st.visible[i]);
  }

  if (cfg.color_mode == ColorOrder::Zero) {
    st.xform = ColorTransform::identity(ColorOrder::Zero);
    st.inliers.flags.assign(m, 1);
    st.inliers.count = m;
  } else {
    auto [xf, inl] = solve_color_transform(img_colors, pc_colors, cfg.beta_max,
                                           cfg.color_rounds, cfg.color_mode,
                                           prev_xform);
    st.xform = xf;
    st.inliers = inl;
  }

  st.transformed.resize(m);
  st.clipped.resize(m);
  Eigen::Matrix<double, Eigen::Dynamic, 3> transformed(m, 3);
  for (std::size_t i = 0; i < m; ++i) {
    st.transformed[i] = apply_color_transform(st.xform, st.sampled[i], &st.clipped[i]);
    transformed.row(i) = st.transformed[i].transpose();
  }

  st.residual = residuals(transformed, pc_colors);
  st.sigma = sigma_fixed_point(st.residual, cfg.nu);
  st.weight = t_weights(st.residual, st.sigma, cfg.nu);
  st.loss = weighted_loss(st.residual, st.weight);
  if (!std::isfinite(st.loss)) throw AlignError("forward_pass: non-finite loss");
  return st;
}

// dL/dtheta with the mask, color transform, weights and sigma held fixed
// (alternating / IRLS semantics). Clipped channels keep the unclipped
// color derivative.
inline Vec6 pose_gradient(const AlignState& st, const PointCloud& pc,
                          const CameraIntrinsics& K, const AlignConfig& cfg) {
  const std::size_t m = st.visible.size();
  const std::size_t chunk = detail::kDefaultChunk;
  const std::size_t n_chunks = (m + chunk - 1) / chunk;
  std::vector<Vec6> partial(n_chunks, Vec6::Zero());

  // Rotation-block factors of d(p_cam)/d(theta) shared by all points.
  const Vec3& w = st.theta.omega;
  const double n2 = w.squaredNorm();
  const Mat3 R = rotation_from_axis_angle(w);
  std::array<Mat3, 3> rot_factor;
  const bool small_angle = n2 < 1e-16;
  if (!small_angle) {
    Mat3 I_minus_R = Mat3::Identity() - R;
    for (int i = 0; i < 3; ++i) {
      Vec3 ei = Vec3::Unit(i);
      rot_factor[i] = (w(i) * skew(w) + skew(w.cross(I_minus_R * ei))) / n2 * R;
    }
  }

  detail::parallel_chunks(m, chunk, cfg.threads,
                          [&](std::size_t c, std::size_t b, std::size_t e) {
    Vec6 acc = Vec6::Zero();
    for (std::size_t i = b; i < e; ++i) {
      Eigen::Index j = st.visible[i];
      Mat3 Jc = color_transform_jacobian(st.xform, st.sampled[i]);
      Eigen::Matrix<double, 3, 2> G;
      G.col(0) = st.grad_u[i];
      G.col(1) = st.grad_v[i];
      Mat23 Jp = projection_jacobian(K, st.p_cam[i]);
      Vec3 x = pc.positions.row(j).transpose();
      Mat36 Jt;
      Jt.rightCols<3>() = Mat3::Identity();
      if (small_angle) {
        Jt.leftCols<3>() = -skew(x);
      } else {
        for (int a = 0; a < 3; ++a) Jt.col(a) = rot_factor[a] * x;
      }
      Mat36 full = (Jc * G) * (Jp * Jt);
      Vec3 wr = 2.0 * st.weight.row(i).transpose().cwiseProduct(
                          st.residual.row(i).transpose());
      acc.noalias() += full.transpose() * wr;
    }
    partial[c] = acc;
  });

  Vec6 g = Vec6::Zero();
  for (const Vec6& p : partial) g += p;
  return g;
}

// The loss as a function of theta alone, with the visibility set, color
// transform and robust weights frozen to the given state. This is the
// function pose_gradient differentiates (up to clipping pass-through).
inline double frozen_loss(const AlignState& st, const PointCloud& pc,
                          const Image& J, const CameraIntrinsics& K,
                          const PoseParams& theta) {
  double loss = 0;
  Mat3 R = rotation_from_axis_angle(theta.omega);
  for (std::size_t i = 0; i < st.visible.size(); ++i) {
    Eigen::Index j = st.visible[i];
    Vec3 p = R * Vec3(pc.positions.row(j).transpose()) + theta.tau;
    Vec2 uv = project(K, p);
    Vec3 color = bilinear_sample(J, uv.x(), uv.y());
    Vec3 transformed = apply_color_transform(st.xform, color);
    Vec3 r = transformed - Vec3(pc.colors.row(j).transpose());
    loss += st.weight.row(i).transpose().cwiseProduct(r.cwiseAbs2()).sum();
  }
  return loss;
}

// One Adam step with bias correction and per-block learning rates
// (components 0-2 rotation, 3-5 translation), both decayed geometrically.
inline Vec6 adam_step(AdamState& adam, const Vec6& grad, const AlignConfig& cfg) {
  if (!grad.allFinite()) throw std::invalid_argument("adam_step: non-finite gradient");
  if (!(cfg.lr_translation > 0))
    throw std::invalid_argument("adam_step: resolve_config first (lr_translation)");
  adam.step_count += 1;
  adam.m = cfg.adam_beta1 * adam.m + (1 - cfg.adam_beta1) * grad;
  adam.v = cfg.adam_beta2 * adam.v.array().matrix() +
           (1 - cfg.adam_beta2) * grad.cwiseAbs2();
  double bc1 = 1 - std::pow(cfg.adam_beta1, adam.step_count);
  double bc2 = 1 - std::pow(cfg.adam_beta2, adam.step_count);
  Vec6 m_hat = adam.m / bc1;
  Vec6 v_hat = adam.v / bc2;
  double decay = std::pow(cfg.lr_decay, adam.step_count - 1);
  Vec6 lr;
  lr << Vec3::Constant(cfg.lr_rotation * decay),
        Vec3::Constant(cfg.lr_translation * decay);
  return lr.cwiseProduct(m_hat.cwiseQuotient(
      v_hat.cwiseSqrt() + Vec6::Constant(cfg.adam_eps)));
}

using AlignCallback =
    std::function<void(int iter, const AlignState& state, const PoseParams& theta)>;

inline AlignResult align(const PointCloud& pc, const Image& J,
                         const CameraIntrinsics& K, const PoseParams& theta0,
                         const AlignConfig& cfg_in,
                         const AlignCallback& callback = nullptr) {
  K.validate();
  AlignConfig cfg = resolve_config(cfg_in, pc, theta0);
  const double depth = median_scene_depth(pc, theta0);

  // Optimize in a cloud-centroid-centered frame: rotating about a point far
  // from the scene centroid couples rotation and translation into a badly
  // conditioned valley that first-order steps crawl along. With x' = x - c
  // and tau' = tau + R c the forward values are unchanged but the rotation
  // axis passes through the centroid. The centroid is rounded to float so
  // the recentering stays exact on coarse fixture data.
  Vec3 centroid = pc.positions.colwise().mean().transpose();
  for (int i = 0; i < 3; ++i)
    centroid(i) = static_cast<double>(static_cast<float>(centroid(i)));
  PointCloud centered;
  centered.positions = pc.positions.rowwise() - centroid.transpose();
  centered.colors = pc.colors;
  auto decenter = [&](const PoseParams& t) {
    PoseParams out = t;
    out.tau = t.tau - rotation_from_axis_angle(t.omega) * centroid;
    return out;
  };

  AlignResult res;
  PoseParams theta = canonicalize(theta0);
  theta.tau += rotation_from_axis_angle(theta.omega) * centroid;
  AdamState adam;
  SamplerCache cache;
  ColorTransform prev = ColorTransform::identity(
      cfg.color_mode == ColorOrder::Zero ? ColorOrder::Zero : cfg.color_mode);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    AlignState st = forward_pass(centered, J, K, theta, cfg, &cache, &prev);
    prev = st.xform;
    res.loss_trace.push_back(st.loss);
    res.inlier_counts.push_back(static_cast<int>(st.inliers.count));
    res.visible_fraction = st.visible_fraction;
    res.D_final = st.xform;
    if (callback) callback(iter, st, decenter(theta));

    Vec6 g = pose_gradient(st, centered, K, cfg);
    Vec6 update = adam_step(adam, g, cfg);
    theta.omega -= update.head<3>();
    theta.tau -= update.tail<3>();
    theta = canonicalize(theta);
    res.iterations_run = iter + 1;

    double scaled = std::sqrt(update.head<3>().squaredNorm() * depth * depth +
                              update.tail<3>().squaredNorm());
    if (scaled < cfg.param_tol) {
      res.converged = true;
      break;
    }
  }
  res.theta_final = decenter(theta);
  return res;
}

}  // namespace pcalign
