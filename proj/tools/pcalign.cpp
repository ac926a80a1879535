#include "pcalign/gradcheck.hpp"
#include "pcalign/pcalign.hpp"
#ifdef PCALIGN_HAS_PNG
#include "pcalign/png_codec.hpp"
#endif

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace pcalign;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

GradStrategy parse_strategy(const std::string& s) {
  if (s == "A" || s == "a") return GradStrategy::A;
  if (s == "B" || s == "b") return GradStrategy::B;
  throw CLI::ValidationError("strategy must be A or B");
}

ColorOrder parse_color_mode(const std::string& s) {
  if (s == "zero") return ColorOrder::Zero;
  if (s == "first") return ColorOrder::First;
  if (s == "second") return ColorOrder::Second;
  throw CLI::ValidationError("color mode must be zero, first or second");
}

TextureProfile parse_family(const std::string& s) {
  if (s == "smooth") return TextureProfile::Smooth;
  if (s == "mixed") return TextureProfile::Mixed;
  if (s == "high_frequency") return TextureProfile::HighFrequency;
  throw CLI::ValidationError("family must be smooth, mixed or high_frequency");
}

SceneGeometry parse_geometry(const std::string& s) {
  if (s == "plane") return SceneGeometry::Plane;
  if (s == "two_planes") return SceneGeometry::TwoPlanes;
  if (s == "box_room") return SceneGeometry::BoxRoom;
  throw CLI::ValidationError("geometry must be plane, two_planes or box_room");
}

// "second-A" -> SecondOrder color model with gradient strategy A
BenchmarkMode parse_mode(const std::string& s) {
  auto dash = s.find('-');
  if (dash == std::string::npos)
    throw CLI::ValidationError("mode must look like second-A");
  BenchmarkMode m;
  m.name = s;
  m.cfg.color_mode = parse_color_mode(s.substr(0, dash));
  m.cfg.strategy = parse_strategy(s.substr(dash + 1));
  return m;
}

// Flat key=value run configuration; CLI flags override file values.
void apply_config_entry(AlignConfig& cfg, int& heatmap_interval,
                        const std::string& key, const std::string& val) {
  auto num = [&] { return std::stod(val); };
  if (key == "strategy") cfg.strategy = parse_strategy(val);
  else if (key == "color_mode") cfg.color_mode = parse_color_mode(val);
  else if (key == "lr_translation") cfg.lr_translation = num();
  else if (key == "lr_rotation") cfg.lr_rotation = num();
  else if (key == "lr_decay") cfg.lr_decay = num();
  else if (key == "max_iters") cfg.max_iters = static_cast<int>(num());
  else if (key == "param_tol") cfg.param_tol = num();
  else if (key == "beta_max") cfg.beta_max = num();
  else if (key == "nu") cfg.nu = num();
  else if (key == "depth_eps") cfg.depth_eps = num();
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(num());
  else if (key == "heatmap_interval") heatmap_interval = static_cast<int>(num());
  else throw ParseError("config: unknown key '" + key + "'");
}

// Splat the cloud at the given pose into an image plus coverage mask, for
// the color-difference heatmaps.
Image render_cloud(const PointCloud& pc, const CameraIntrinsics& K,
                   const PoseParams& theta, double depth_eps,
                   std::vector<uint8_t>& coverage) {
  auto cam = se3_transform(theta, pc.positions);
  VisibilityMask vis = zbuffer_mask(cam, K, depth_eps);
  Image img(K.width, K.height);
  std::vector<double> depth(static_cast<std::size_t>(K.width) * K.height,
                            std::numeric_limits<double>::infinity());
  coverage.assign(depth.size(), 0);
  for (Eigen::Index j = 0; j < pc.size(); ++j) {
    if (!vis.visible(static_cast<std::size_t>(j))) continue;
    double z = cam(j, 2);
    int u = static_cast<int>(std::lround(K.fx * cam(j, 0) / z + K.cx));
    int v = static_cast<int>(std::lround(K.fy * cam(j, 1) / z + K.cy));
    std::size_t idx = static_cast<std::size_t>(v) * K.width + u;
    if (z < depth[idx]) {
      depth[idx] = z;
      img.set_pixel(u, v, pc.colors.row(j).transpose());
      coverage[idx] = 1;
    }
  }
  return img;
}

int cmd_align(const std::string& cloud_path, const std::string& image_path,
              const std::string& intr_path, const std::string& init_pose_path,
              const std::string& config_path, const std::string& out_dir,
              const std::map<std::string, std::string>& overrides, int threads) {
  AlignConfig cfg;
  int heatmap_interval = 0;
  if (!config_path.empty()) {
    std::ifstream f(config_path);
    if (!f) throw ParseError("cannot open " + config_path);
    for (const auto& [k, v] : parse_key_values(f))
      apply_config_entry(cfg, heatmap_interval, k, v);
  }
  for (const auto& [k, v] : overrides)
    apply_config_entry(cfg, heatmap_interval, k, v);
  cfg.threads = threads;

  PointCloud pc = load_ply(cloud_path);
  Image img = load_image(image_path);
  std::vector<std::string> warnings;
  CameraIntrinsics K = load_intrinsics(intr_path, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (K.width != img.width || K.height != img.height)
    throw ParseError("intrinsics image size does not match the image");
  PoseParams theta0 = init_pose_path.empty() ? PoseParams{} : load_pose(init_pose_path);

  fs::create_directories(out_dir);
  AlignCallback callback;
  if (heatmap_interval > 0) {
    AlignConfig resolved = resolve_config(cfg, pc, theta0);
    double depth_eps = resolved.depth_eps;
    callback = [&, depth_eps](int iter, const AlignState&, const PoseParams& theta) {
      if (iter % heatmap_interval != 0) return;
      std::vector<uint8_t> coverage;
      Image rendered = render_cloud(pc, K, theta, depth_eps, coverage);
      Image hm = heatmap(rendered, img, &coverage);
      char name[64];
      std::snprintf(name, sizeof(name), "heatmap_%05d.ppm", iter);
      save_image((fs::path(out_dir) / name).string(), hm);
    };
  }

  AlignResult res = align(pc, img, K, theta0, cfg, callback);
  save_pose((fs::path(out_dir) / "pose.txt").string(), res.theta_final);
  {
    std::ofstream f(fs::path(out_dir) / "loss_trace.csv");
    f << "iteration,loss,inliers\n";
    char buf[64];
    for (std::size_t i = 0; i < res.loss_trace.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%zu,%.12g,%d\n", i, res.loss_trace[i],
                    res.inlier_counts[i]);
      f << buf;
    }
  }
  std::cout << "iterations=" << res.iterations_run
            << " converged=" << (res.converged ? 1 : 0)
            << " final_loss=" << res.loss_trace.back()
            << " visible_fraction=" << res.visible_fraction << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef PCALIGN_HAS_PNG
  register_png_codec();
#endif
  CLI::App app{"Colored point cloud to image alignment"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = all cores)")
      ->capture_default_str();

  // align
  auto* align_cmd = app.add_subcommand("align", "align a point cloud to an image");
  std::string cloud_path, image_path, intr_path, init_pose_path, config_path, out_dir;
  align_cmd->add_option("--cloud", cloud_path, "PLY point cloud")->required();
  align_cmd->add_option("--image", image_path, "target image (PPM)")->required();
  align_cmd->add_option("--intrinsics", intr_path, "intrinsics key=value file")->required();
  align_cmd->add_option("--init-pose", init_pose_path, "initial pose file (default identity)");
  align_cmd->add_option("--config", config_path, "key=value run config");
  align_cmd->add_option("--out", out_dir, "output directory")->required();
  std::map<std::string, std::string> overrides;
  std::string strategy_flag, color_mode_flag;
  std::optional<int> max_iters_flag, heatmap_interval_flag;
  std::optional<double> seed_flag;
  align_cmd->add_option("--strategy", strategy_flag, "gradient strategy A|B");
  align_cmd->add_option("--color-mode", color_mode_flag, "zero|first|second");
  align_cmd->add_option("--max-iters", max_iters_flag, "iteration cap");
  align_cmd->add_option("--seed", seed_flag, "rng seed");
  align_cmd->add_option("--heatmap-interval", heatmap_interval_flag,
                        "write a heatmap every N iterations (0 = off)");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "synthetic pose-recovery benchmark");
  int trials = 20;
  std::string family = "mixed", geometry = "box_room", modes_arg = "second-A";
  std::string bench_out;
  int image_size = 256;
  double scene_depth = 3.0, max_translation = 0.02, max_rotation = 1.0;
  std::uint64_t bench_seed = 1;
  bool no_color_effects = false;
  bench_cmd->add_option("--trials", trials, "number of trials")->capture_default_str();
  bench_cmd->add_option("--family", family, "smooth|mixed|high_frequency")
      ->capture_default_str();
  bench_cmd->add_option("--geometry", geometry, "plane|two_planes|box_room")
      ->capture_default_str();
  bench_cmd->add_option("--modes", modes_arg, "comma list, e.g. second-A,zero-A")
      ->capture_default_str();
  bench_cmd->add_option("--size", image_size, "image side length")->capture_default_str();
  bench_cmd->add_option("--depth", scene_depth, "scene depth (m)")->capture_default_str();
  bench_cmd->add_option("--max-translation", max_translation, "perturbation (m)")
      ->capture_default_str();
  bench_cmd->add_option("--max-rotation", max_rotation, "perturbation (deg)")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_seed, "base seed")->capture_default_str();
  bench_cmd->add_flag("--no-color-effects", no_color_effects,
                      "skip the multimodal color distortions");
  bench_cmd->add_option("--out", bench_out, "output directory")->required();

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference oracle suite");
  std::uint64_t grad_seed = 1;
  grad_cmd->add_option("--seed", grad_seed, "rng seed")->capture_default_str();

  // heatmap
  auto* heat_cmd = app.add_subcommand("heatmap", "color-difference heatmap of two images");
  std::string heat_a, heat_b, heat_out;
  heat_cmd->add_option("--a", heat_a, "first image")->required();
  heat_cmd->add_option("--b", heat_b, "second image")->required();
  heat_cmd->add_option("--out", heat_out, "output image")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (align_cmd->parsed()) {
      if (!strategy_flag.empty()) overrides["strategy"] = strategy_flag;
      if (!color_mode_flag.empty()) overrides["color_mode"] = color_mode_flag;
      if (max_iters_flag) overrides["max_iters"] = std::to_string(*max_iters_flag);
      if (seed_flag) overrides["seed"] = std::to_string(*seed_flag);
      if (heatmap_interval_flag)
        overrides["heatmap_interval"] = std::to_string(*heatmap_interval_flag);
      return cmd_align(cloud_path, image_path, intr_path, init_pose_path,
                       config_path, out_dir, overrides, threads);
    }
    if (bench_cmd->parsed()) {
      BenchmarkOptions opt;
      opt.n_trials = trials;
      opt.scene_template.texture_profile = parse_family(family);
      opt.scene_template.geometry = parse_geometry(geometry);
      opt.scene_template.width = opt.scene_template.height = image_size;
      opt.scene_template.scene_depth = scene_depth;
      opt.scene_template.seed = bench_seed;
      opt.perturb.max_translation = max_translation;
      opt.perturb.max_rotation = max_rotation;
      opt.color_effects = !no_color_effects;
      opt.threads = threads;
      std::stringstream ss(modes_arg);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) opt.modes.push_back(parse_mode(tok));
      if (opt.modes.empty()) throw CLI::ValidationError("--modes is empty");
      fs::create_directories(bench_out);
      BenchmarkReport rep = run_benchmark(opt);
      write_benchmark_report(rep, bench_out);
      for (const auto& ms : rep.modes)
        std::cout << ms.name << ": median " << ms.median_translation_mm
                  << " mm / " << ms.median_rotation_deg << " deg, convergence "
                  << ms.convergence_rate << ", failures " << ms.failure_rate << "\n";
      return kExitOk;
    }
    if (grad_cmd->parsed()) {
      bool ok = print_gradcheck(run_gradcheck(grad_seed), std::cout);
      return ok ? kExitOk : kExitRuntime;
    }
    if (heat_cmd->parsed()) {
      Image a = load_image(heat_a);
      Image b = load_image(heat_b);
      save_image(heat_out, heatmap(a, b));
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
