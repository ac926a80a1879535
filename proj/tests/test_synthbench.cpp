#include "pcalign/synthbench.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

namespace pcalign {
namespace {

double mean_abs_central_diff(const Image& img) {
  Image Ja, Jb;
  central_diff_images(img, Ja, Jb);
  double s = 0;
  for (double x : Ja.data) s += std::abs(x);
  for (double x : Jb.data) s += std::abs(x);
  return s / static_cast<double>(Ja.data.size() + Jb.data.size());
}

TEST(Synthbench, SceneSelfConsistency) {
  for (auto geom : {SceneGeometry::Plane, SceneGeometry::TwoPlanes, SceneGeometry::BoxRoom}) {
    SceneSpec spec;
    spec.seed = 3;
    spec.width = spec.height = 96;
    spec.geometry = geom;
    Scene sc = generate_scene(spec);
    // Re-render every 7th point through theta_gt: it must land on its pixel
    // center with its own color.
    for (Eigen::Index j = 0; j < sc.cloud.size(); j += 7) {
      Vec3 p = se3_transform(sc.theta_gt, Vec3(sc.cloud.positions.row(j).transpose()));
      ASSERT_GT(p.z(), 0);
      Vec2 uv = project(sc.K, p);
      int u = static_cast<int>(std::lround(uv.x()));
      int v = static_cast<int>(std::lround(uv.y()));
      EXPECT_NEAR(uv.x(), u, 1e-9);
      EXPECT_NEAR(uv.y(), v, 1e-9);
      EXPECT_NEAR((sc.image.pixel(u, v) - Vec3(sc.cloud.colors.row(j).transpose())).norm(),
                  0, 1e-9);
    }
  }
}

TEST(Synthbench, SceneDeterminism) {
  SceneSpec spec;
  spec.seed = 17;
  spec.width = spec.height = 96;
  Scene a = generate_scene(spec);
  Scene b = generate_scene(spec);
  EXPECT_EQ(a.image.data, b.image.data);
  EXPECT_TRUE(a.cloud.positions == b.cloud.positions);
  EXPECT_EQ(a.theta_gt.omega, b.theta_gt.omega);
  SceneSpec other = spec;
  other.seed = 18;
  EXPECT_NE(generate_scene(other).image.data, a.image.data);
}

TEST(Synthbench, HighFrequencyTextureIsRougher) {
  double smooth_sum = 0, hf_sum = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    SceneSpec spec;
    spec.seed = 100 + s;
    spec.width = spec.height = 128;
    spec.texture_profile = TextureProfile::Smooth;
    smooth_sum += mean_abs_central_diff(generate_scene(spec).image);
    spec.texture_profile = TextureProfile::HighFrequency;
    hf_sum += mean_abs_central_diff(generate_scene(spec).image);
  }
  EXPECT_GE(hf_sum, 3.0 * smooth_sum);
}

TEST(Synthbench, ImageValuesInRange) {
  SceneSpec spec;
  spec.seed = 23;
  spec.width = spec.height = 96;
  Scene sc = generate_scene(spec);
  for (double x : sc.image.data) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(Synthbench, ColorEffectsIdentityParams) {
  SceneSpec spec;
  spec.seed = 5;
  spec.width = spec.height = 64;
  Scene sc = generate_scene(spec);
  ColorEffectParams p;  // all defaults: identity
  Image out = apply_color_effects(sc.image, p);
  EXPECT_EQ(out.data, sc.image.data);
}

TEST(Synthbench, GammaOnConstantImage) {
  Image img(64, 64);
  for (double& x : img.data) x = 0.5;
  ColorEffectParams p;
  p.gamma = 2.0;
  Image out = apply_color_effects(img, p);
  for (double x : out.data) EXPECT_NEAR(x, 0.25, 1e-12);
}

TEST(Synthbench, BlurPreservesMass) {
  Image img(65, 65);
  img.set_pixel(32, 32, Vec3(1, 1, 1));  // delta in the interior
  ColorEffectParams p;
  p.blur_sigma = 0.75;
  Image out = apply_color_effects(img, p);
  double mass = 0;
  for (double x : out.data) mass += x;
  EXPECT_NEAR(mass, 3.0, 1e-6);
}

TEST(Synthbench, ColorEffectParamsWithinDocumentedRanges) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    ColorEffectParams p = draw_color_effect_params(s);
    EXPECT_GE(p.brightness, 0.6);
    EXPECT_LE(p.brightness, 1.4);
    EXPECT_GE(p.contrast, 0.6);
    EXPECT_LE(p.contrast, 1.4);
    EXPECT_GE(p.saturation, 0.6);
    EXPECT_LE(p.saturation, 1.4);
    EXPECT_LE(std::abs(p.hue_shift), 0.06);
    EXPECT_TRUE((p.gamma >= 0.5 && p.gamma <= 1.0) || (p.gamma >= 1.0 && p.gamma <= 2.0));
    EXPECT_GE(p.blur_sigma, 0.0);
    EXPECT_LE(p.blur_sigma, 0.75);
  }
}

TEST(Synthbench, ColorEffectsSeedDeterminism) {
  SceneSpec spec;
  spec.seed = 5;
  spec.width = spec.height = 64;
  Scene sc = generate_scene(spec);
  Image a = apply_color_effects(sc.image, std::uint64_t{42});
  Image b = apply_color_effects(sc.image, std::uint64_t{42});
  EXPECT_EQ(a.data, b.data);
}

TEST(Synthbench, PerturbZeroMaximaIsIdentity) {
  PoseParams gt;
  gt.omega = Vec3(0.1, -0.2, 0.05);
  gt.tau = Vec3(1, 2, 3);
  PoseParams out = perturb_pose(gt, {0, 0, 9});
  EXPECT_NEAR(rotation_error_deg(gt, out), 0, 1e-12);
  EXPECT_NEAR(translation_error_mm(gt, out), 0, 1e-12);
}

TEST(Synthbench, PerturbRespectsBounds) {
  PoseParams gt;
  gt.omega = Vec3(0.2, 0.1, -0.3);
  gt.tau = Vec3(0.5, -0.5, 2.0);
  for (std::uint64_t s = 0; s < 100; ++s) {
    PerturbationSpec pspec{0.02, 1.0, s};
    PoseParams out = perturb_pose(gt, pspec);
    EXPECT_LE(rotation_error_deg(gt, out), 1.0 + 1e-9);
    EXPECT_LE(translation_error_mm(gt, out), 20.0 + 1e-9);
  }
}

TEST(Synthbench, PerturbSeedDeterminism) {
  PoseParams gt;
  gt.tau = Vec3(1, 0, 0);
  PoseParams a = perturb_pose(gt, {0.02, 1.0, 4});
  PoseParams b = perturb_pose(gt, {0.02, 1.0, 4});
  EXPECT_EQ(a.omega, b.omega);
  EXPECT_EQ(a.tau, b.tau);
}

TEST(Synthbench, TranslationErrorBasics) {
  PoseParams a, b;
  EXPECT_DOUBLE_EQ(translation_error_mm(a, b), 0);
  b.tau = Vec3(0.003, 0.004, 0);
  EXPECT_NEAR(translation_error_mm(a, b), 5.0, 1e-12);
}

TEST(Synthbench, TranslationErrorInvariantToCommonRotation) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    PoseParams a, b, g;
    a.tau = Vec3(sym(rng), sym(rng), sym(rng));
    b.tau = Vec3(sym(rng), sym(rng), sym(rng));
    a.omega = Vec3(sym(rng), sym(rng), sym(rng));
    b.omega = a.omega;
    g.omega = Vec3(sym(rng), sym(rng), sym(rng));
    g.tau = Vec3(sym(rng), sym(rng), sym(rng));
    double before = translation_error_mm(a, b);
    double after = translation_error_mm(compose(g, a), compose(g, b));
    EXPECT_NEAR(after, before, 1e-9 * std::max(1.0, before));
  }
}

TEST(Synthbench, RotationErrorBasics) {
  PoseParams a, b;
  EXPECT_DOUBLE_EQ(rotation_error_deg(a, b), 0);
  b.omega = Vec3(0, 0, 10.0 * M_PI / 180.0);
  EXPECT_NEAR(rotation_error_deg(a, b), 10.0, 1e-9);
  EXPECT_NEAR(rotation_error_deg(b, a), rotation_error_deg(a, b), 1e-12);
}

TEST(Synthbench, ErrorMetricsProper) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    PoseParams a;
    a.omega = Vec3(sym(rng), sym(rng), sym(rng));
    a.tau = Vec3(sym(rng), sym(rng), sym(rng));
    EXPECT_NEAR(rotation_error_deg(a, a), 0, 1e-6);
    EXPECT_NEAR(translation_error_mm(a, a), 0, 1e-12);
  }
}

TEST(Synthbench, QuantileBasics) {
  std::vector<double> v = {4, 1, 3, 2, 5};
  EXPECT_DOUBLE_EQ(quantile(v, 0.0), 1);
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 3);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 5);
  EXPECT_DOUBLE_EQ(quantile(v, 0.25), 2);
}

TEST(Synthbench, BenchmarkReportStructure) {
  BenchmarkOptions opt;
  opt.n_trials = 3;
  opt.scene_template.seed = 50;
  opt.scene_template.width = opt.scene_template.height = 64;
  opt.perturb = {0.005, 0.25, 0};
  BenchmarkMode mode;
  mode.name = "second-A";
  mode.cfg.max_iters = 5;
  opt.modes = {mode};
  opt.threads = 1;

  BenchmarkReport rep = run_benchmark(opt);
  ASSERT_EQ(rep.modes.size(), 1u);
  EXPECT_EQ(rep.modes[0].trials.size(), 3u);
  for (const auto& t : rep.modes[0].trials) EXPECT_TRUE(t.ok);

  // Cumulative histograms are non-decreasing and end at 1.
  for (const auto& h : rep.hist_translation) {
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_GE(h[i], h[i - 1]);
    EXPECT_DOUBLE_EQ(h.back(), 1.0);
  }

  auto dir = std::filesystem::temp_directory_path() / "pcalign_bench_test";
  std::filesystem::create_directories(dir);
  write_benchmark_report(rep, dir.string());
  for (const char* f : {"report.txt", "trials.csv", "quantiles.csv",
                        "hist_translation.csv", "hist_rotation.csv"})
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;

  // trials.csv has one row per mode per trial plus the header.
  std::ifstream csv(dir / "trials.csv");
  int lines = 0;
  std::string line;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 1 + 3);
  std::filesystem::remove_all(dir);
}

TEST(Synthbench, BenchmarkDeterministicAcrossThreadCounts) {
  auto run = [&](int threads) {
    BenchmarkOptions opt;
    opt.n_trials = 4;
    opt.scene_template.seed = 60;
    opt.scene_template.width = opt.scene_template.height = 64;
    opt.perturb = {0.005, 0.25, 0};
    BenchmarkMode mode;
    mode.name = "second-A";
    mode.cfg.max_iters = 8;
    opt.modes = {mode};
    opt.threads = threads;
    return run_benchmark(opt);
  };
  BenchmarkReport a = run(1), b = run(4);
  for (std::size_t t = 0; t < a.modes[0].trials.size(); ++t) {
    EXPECT_EQ(a.modes[0].trials[t].translation_error_mm,
              b.modes[0].trials[t].translation_error_mm);
    EXPECT_EQ(a.modes[0].trials[t].rotation_error_deg,
              b.modes[0].trials[t].rotation_error_deg);
  }
}

}  // namespace
}  // namespace pcalign
