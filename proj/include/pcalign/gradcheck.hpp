#pragma once

// Finite-difference verification of every analytic Jacobian in the pipeline,
// exposed as the `gradcheck` CLI subcommand.

#include "pcalign/aligner.hpp"
#include "pcalign/colorxform.hpp"
#include "pcalign/geometry.hpp"
#include "pcalign/synthbench.hpp"

#include <cstdint>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace pcalign {

struct GradCheckResult {
  std::string name;
  int trials = 0;
  double max_rel_err = 0;
  double tolerance = 0;
  bool passed() const { return max_rel_err < tolerance; }
};

namespace gradcheck_detail {

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  double denom = std::max(want.norm(), 1e-12);
  return (got - want).norm() / denom;
}

}  // namespace gradcheck_detail

inline GradCheckResult check_projection_jacobian(std::uint64_t seed, int trials = 200) {
  std::mt19937_64 rng(seed ^ 0x1111);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  GradCheckResult res{"projection_jacobian", trials, 0, 1e-5};
  for (int t = 0; t < trials; ++t) {
    CameraIntrinsics K;
    K.fx = 200 + 400 * std::abs(uni(rng));
    K.fy = 200 + 400 * std::abs(uni(rng));
    K.cx = 320;
    K.cy = 240;
    K.width = 640;
    K.height = 480;
    Vec3 p(uni(rng), uni(rng), 1.0 + 3.0 * std::abs(uni(rng)));
    Mat23 J = projection_jacobian(K, p);
    const double h = 1e-6;
    Eigen::Matrix<double, 6, 1> got, want;
    got << J.row(0).transpose(), J.row(1).transpose();
    for (int i = 0; i < 3; ++i) {
      Vec3 hi = p, lo = p;
      hi(i) += h;
      lo(i) -= h;
      Vec2 d = (project(K, hi) - project(K, lo)) / (2 * h);
      want(i) = d.x();
      want(3 + i) = d.y();
    }
    res.max_rel_err = std::max(res.max_rel_err, gradcheck_detail::rel_err(got, want));
  }
  return res;
}

inline GradCheckResult check_pose_point_jacobian(std::uint64_t seed, int trials = 200) {
  std::mt19937_64 rng(seed ^ 0x2222);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  GradCheckResult res{"pose_point_jacobian", trials, 0, 1e-5};
  for (int t = 0; t < trials; ++t) {
    PoseParams theta;
    theta.omega = Vec3(uni(rng), uni(rng), uni(rng)) * 1.5;
    theta.tau = Vec3(uni(rng), uni(rng), uni(rng));
    theta = canonicalize(theta);
    Vec3 x(uni(rng), uni(rng), uni(rng));
    Mat36 J = pose_point_jacobian(theta, x);
    Eigen::VectorXd got = Eigen::Map<Eigen::VectorXd>(J.data(), 18);
    Mat36 Jfd;
    const double h = 1e-6;
    for (int i = 0; i < 6; ++i) {
      Vec6 v = theta.as_vector();
      Vec6 vh = v, vl = v;
      vh(i) += h;
      vl(i) -= h;
      Jfd.col(i) = (se3_transform(PoseParams::from_vector(vh), x) -
                    se3_transform(PoseParams::from_vector(vl), x)) / (2 * h);
    }
    Eigen::VectorXd want = Eigen::Map<Eigen::VectorXd>(Jfd.data(), 18);
    res.max_rel_err = std::max(res.max_rel_err, gradcheck_detail::rel_err(got, want));
  }
  return res;
}

inline GradCheckResult check_color_jacobian(std::uint64_t seed, int trials = 200) {
  std::mt19937_64 rng(seed ^ 0x3333);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.05, 0.95);
  GradCheckResult res{"color_transform_jacobian", trials, 0, 1e-5};
  for (int t = 0; t < trials; ++t) {
    ColorTransform xf;
    xf.D = Eigen::MatrixXd::NullaryExpr(3, 10, [&]() { return uni(rng); });
    Vec3 rgb(unit(rng), unit(rng), unit(rng));
    Mat3 J = color_transform_jacobian(xf, rgb);
    Eigen::VectorXd got = Eigen::Map<Eigen::VectorXd>(J.data(), 9);
    Mat3 Jfd;
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
      Vec3 hi = rgb, lo = rgb;
      hi(i) += h;
      lo(i) -= h;
      Jfd.col(i) = (transform_color_unclipped(xf.D, hi) -
                    transform_color_unclipped(xf.D, lo)) / (2 * h);
    }
    Eigen::VectorXd want = Eigen::Map<Eigen::VectorXd>(Jfd.data(), 9);
    res.max_rel_err = std::max(res.max_rel_err, gradcheck_detail::rel_err(got, want));
  }
  return res;
}

// Full chain-rule pose gradient against central differences of the loss with
// visibility, color transform, weights and sigma frozen across the stencil.
// Strategy A only: its image-gradient factor is the exact derivative of the
// sampled color, so the finite-difference comparison is well-posed. The
// strategy-B factor is a windowed smoothing of A by construction and is
// checked against that identity instead.
inline GradCheckResult check_pose_gradient(std::uint64_t seed, int trials = 100) {
  GradCheckResult res{"pose_gradient", trials, 0, 1e-3};
  for (int t = 0; t < trials; ++t) {
    SceneSpec spec;
    spec.seed = seed * 1000 + static_cast<std::uint64_t>(t);
    spec.width = spec.height = 96;
    spec.texture_profile = static_cast<TextureProfile>(t % 3);
    spec.geometry = static_cast<SceneGeometry>((t / 3) % 3);
    Scene sc = generate_scene(spec);

    PerturbationSpec pspec{0.02, 1.0, spec.seed + 5};
    PoseParams theta = perturb_pose(sc.theta_gt, pspec);

    AlignConfig cfg;
    cfg.strategy = GradStrategy::A;
    cfg.color_mode = static_cast<ColorOrder>(t % 3);
    cfg.threads = 1;
    cfg = resolve_config(cfg, sc.cloud, theta);

    AlignState st = forward_pass(sc.cloud, sc.image, sc.K, theta, cfg);
    Vec6 g = pose_gradient(st, sc.cloud, sc.K, cfg);
    Vec6 gfd;
    for (int i = 0; i < 6; ++i) {
      double h = i < 3 ? 1e-7 : 1e-6;
      Vec6 v = theta.as_vector();
      Vec6 vh = v, vl = v;
      vh(i) += h;
      vl(i) -= h;
      gfd(i) = (frozen_loss(st, sc.cloud, sc.image, sc.K, PoseParams::from_vector(vh)) -
                frozen_loss(st, sc.cloud, sc.image, sc.K, PoseParams::from_vector(vl))) /
               (2 * h);
    }
    res.max_rel_err = std::max(res.max_rel_err, gradcheck_detail::rel_err(g, gfd));
  }
  return res;
}

inline std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed) {
  return {check_projection_jacobian(seed), check_pose_point_jacobian(seed),
          check_color_jacobian(seed), check_pose_gradient(seed)};
}

inline bool print_gradcheck(const std::vector<GradCheckResult>& results, std::ostream& os) {
  bool ok = true;
  for (const auto& r : results) {
    os << (r.passed() ? "[PASS] " : "[FAIL] ") << r.name << ": max rel err "
       << r.max_rel_err << " (tol " << r.tolerance << ", " << r.trials
       << " trials)\n";
    ok = ok && r.passed();
  }
  return ok;
}

}  // namespace pcalign
