// stereonav command-line front end.
//
// Exit codes: 0 success, 1 validation failure, 2 I/O or usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "stereonav/stereonav.hpp"

namespace fs = std::filesystem;
using namespace stereonav;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct MatcherFlags {
  std::optional<int> window, min_disp, max_disp, prefilter_cap, texture_threshold, uniqueness_ratio, threads;

  void add(CLI::App* app) {
    app->add_option("--window", window, "SAD window size (odd, >= 3)");
    app->add_option("--min-disp", min_disp, "Smallest disparity searched");
    app->add_option("--max-disp", max_disp, "Largest disparity searched");
    app->add_option("--prefilter-cap", prefilter_cap, "Prefilter gradient clamp");
    app->add_option("--texture-threshold", texture_threshold, "Minimum window texture energy");
    app->add_option("--uniqueness-ratio", uniqueness_ratio, "Uniqueness margin in percent");
    app->add_option("--threads", threads, "Matcher row bands (0 = all cores)");
  }
  void apply(MatcherParams& p) const {
    if (window) p.window = *window;
    if (min_disp) p.min_disp = *min_disp;
    if (max_disp) p.max_disp = *max_disp;
    if (prefilter_cap) p.prefilter_cap = *prefilter_cap;
    if (texture_threshold) p.texture_threshold = *texture_threshold;
    if (uniqueness_ratio) p.uniqueness_ratio = *uniqueness_ratio;
    if (threads) p.threads = *threads;
  }
};

RunConfig base_config(const std::string& config_path) {
  if (config_path.empty()) return RunConfig{};
  const fs::path path(config_path);
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, "config file not found: " + config_path);
  RunConfig cfg;
  apply_config(read_key_value_file(path), cfg, path.parent_path());
  return cfg;
}

int cmd_match(const std::string& left_path, const std::string& right_path, const std::string& out_path,
              const std::string& vis_path, const std::string& config_path, const MatcherFlags& flags) {
  RunConfig cfg = base_config(config_path);
  flags.apply(cfg.sim.matcher);
  const GrayImage left = read_pgm(left_path);
  const GrayImage right = read_pgm(right_path);
  cfg.sim.matcher.validate(left.width);
  const DisparityMap dm = compute_disparity(left, right, cfg.sim.matcher);
  write_disparity_pgm(out_path, dm);
  if (!vis_path.empty()) write_pgm(vis_path, disparity_to_gray(dm));
  std::cout << "valid pixels: " << dm.valid_count() << " / " << dm.data.size() << "\n";
  return kExitOk;
}

int cmd_obstacle(const std::string& disparity_path, const std::string& calib_path, const std::string& mask_path,
                 const std::string& blobs_path, ObstacleParams params) {
  params.validate();
  const StereoRig rig = load_calibration(calib_path);
  const DisparityMap dm = read_disparity_pgm(disparity_path);
  if (!band_within_horopter(dm, rig, params.z_near, params.z_far))
    std::cerr << "warning: BandOutsideHoropter: depth band [" << params.z_near << ", " << params.z_far
              << "] m reaches outside disparities [" << dm.min_disp << ", " << dm.max_disp << "]\n";
  const ObstacleResult r = detect_obstacles(dm, rig, params);
  if (!mask_path.empty()) write_pgm(mask_path, mask_to_gray(r.mask));
  if (!blobs_path.empty()) {
    std::string csv = "x0,y0,x1,y1,cx,cy,area\n";
    char buf[128];
    for (const auto& b : r.blobs) {
      std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.1f,%.1f,%d\n", b.bbox.x0, b.bbox.y0, b.bbox.x1, b.bbox.y1,
                    b.centroid.x, b.centroid.y, b.area);
      csv += buf;
    }
    write_file_atomic(blobs_path, csv);
  }
  std::cout << to_string(r.decision) << "\n";
  return kExitOk;
}

int cmd_reconstruct(const std::string& disparity_path, const std::string& color_path, const std::string& calib_path,
                    const std::string& out_path, const CloudFilterParams& filter, bool no_filter) {
  const StereoRig rig = load_calibration(calib_path);
  const DisparityMap dm = read_disparity_pgm(disparity_path);
  const ColorImage rgb = read_ppm(color_path);
  PointCloud cloud = cloud_from_disparity(dm, rgb, build_reprojection_matrix(rig));
  const std::size_t raw = cloud.size();
  if (!no_filter) cloud = filter_cloud(cloud, filter);
  write_ply(out_path, cloud);
  std::cout << "points: " << cloud.size() << " (of " << raw << " reprojected)\n";
  return kExitOk;
}

int cmd_calib_check(const std::string& corrs_path, double threshold, RansacConfig ransac) {
  const auto corrs = load_correspondences(corrs_path);
  const AlignmentReport rep = check_alignment(corrs, threshold);
  std::printf("correspondences: %zu\n", corrs.size());
  std::printf("vertical disparity: mean %.6f px, max %.6f px (threshold %.3f px)\n", rep.mean_vertical,
              rep.max_vertical, threshold);
  if (corrs.size() >= 8) {
    try {
      const RansacResult rr = ransac_fundamental(corrs, ransac);
      std::printf("fundamental matrix (RANSAC, %zu/%zu inliers):\n", rr.inlier_count, corrs.size());
      for (int r = 0; r < 3; ++r) std::printf("  % .9e % .9e % .9e\n", rr.f.m(r, 0), rr.f.m(r, 1), rr.f.m(r, 2));
      double sum = 0.0;
      double worst = 0.0;
      for (std::size_t i = 0; i < corrs.size(); ++i) {
        if (!rr.inliers[i]) continue;
        const double e = epipolar_residual(rr.f, corrs[i]);
        sum += e;
        worst = std::max(worst, e);
      }
      std::printf("epipolar residual over inliers: mean %.6e px, max %.6e px\n",
                  rr.inlier_count ? sum / static_cast<double>(rr.inlier_count) : 0.0, worst);
    } catch (const Error& e) {
      std::printf("fundamental matrix: not estimated (%s)\n", e.what());
    }
  } else {
    std::printf("fundamental matrix: not estimated (need >= 8 correspondences)\n");
  }
  std::printf("alignment: %s\n", rep.pass ? "PASS" : "FAIL");
  return rep.pass ? kExitOk : kExitValidation;
}

int cmd_render(const std::string& world_path, const std::string& calib_path, const Pose2D& pose, double height,
               const std::string& out_dir, const std::string& prefix, int supersample, double vertical_offset) {
  const WorldModel world = load_world(world_path);
  const StereoRig rig = calib_path.empty() ? default_rig() : load_calibration(calib_path);
  Scene scene;
  scene.world = &world;
  scene.camera_pose = pose;
  scene.camera_height = height;
  scene.supersample = supersample;
  scene.vertical_offset_px = vertical_offset;
  const RenderOutput out = render_stereo(scene, rig);
  const fs::path dir(out_dir);
  write_pgm(dir / (prefix + "left.pgm"), out.left);
  write_pgm(dir / (prefix + "right.pgm"), out.right);
  write_ppm(dir / (prefix + "left.ppm"), out.left_color);
  write_ppm(dir / (prefix + "right.ppm"), out.right_color);
  write_disparity_pgm(dir / (prefix + "gt_disparity.pgm"), out.gt_disparity);
  write_pgm(dir / (prefix + "occlusion.pgm"), mask_to_gray(out.occluded));
  std::cout << "ground-truth pixels: " << out.gt_disparity.valid_count() << "\n";
  return kExitOk;
}

int cmd_simulate(const std::string& world_path, const std::string& config_path, const std::string& out_dir,
                 std::optional<long long> seed, std::optional<double> duration) {
  const WorldModel world = load_world(world_path);
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (seed) cfg.sim.sim.seed = static_cast<std::uint64_t>(*seed);
  if (duration) cfg.sim.sim.duration_s = *duration;
  const StereoRig rig = cfg.load_rig();
  validate_config(cfg, rig.width());
  const fs::path dir = out_dir.empty() ? cfg.output_dir : fs::path(out_dir);

  Simulator sim(world, rig, cfg.sim);
  sim.run();
  write_file_atomic(dir / "poses.csv", sim.pose_log_csv());
  write_file_atomic(dir / "readings.csv", sim.readings_csv());
  write_occupancy(dir / "map.pgm", sim.grid());
  write_ply(dir / "cloud.ply", merge_clouds(sim.clouds()));
  std::printf("ticks: %zu  final pose: %.3f %.3f %.3f  collisions: %d\n", sim.log().size(), sim.state().pose.x,
              sim.state().pose.y, sim.state().pose.theta, sim.collision_ticks());
  return sim.collision_ticks() == 0 ? kExitOk : kExitValidation;
}

int cmd_map(const std::string& readings_path, const std::string& out_path, double resolution, double max_range) {
  std::ifstream in(readings_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + readings_path);
  const auto readings = parse_readings(in);
  if (readings.empty()) throw Error(ErrorCode::EmptyInput, "no readings");
  if (!(resolution > 0.0)) throw Error(ErrorCode::ValidationError, "resolution must be > 0");
  double x0 = readings[0].pose.x, x1 = x0, y0 = readings[0].pose.y, y1 = y0;
  for (const auto& r : readings) {
    x0 = std::min(x0, r.pose.x);
    x1 = std::max(x1, r.pose.x);
    y0 = std::min(y0, r.pose.y);
    y1 = std::max(y1, r.pose.y);
  }
  const double margin = max_range + resolution;
  const double ox = std::floor((x0 - margin) / resolution) * resolution;
  const double oy = std::floor((y0 - margin) / resolution) * resolution;
  const int cols = static_cast<int>(std::ceil((x1 + margin - ox) / resolution)) + 1;
  const int rows = static_cast<int>(std::ceil((y1 + margin - oy) / resolution)) + 1;
  OccupancyGrid grid(cols, rows, resolution, ox, oy);
  UltrasoundModel model;
  model.max_range = max_range;
  for (const auto& r : readings) integrate_reading(grid, r, model.sensor(r.sensor_index));
  write_occupancy(out_path, grid);
  std::cout << "readings: " << readings.size() << "  grid: " << cols << "x" << rows << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo-vision indoor navigation toolkit"};
  app.require_subcommand(1);

  std::string left, right, out, vis, config;
  MatcherFlags matcher_flags;
  auto* match = app.add_subcommand("match", "Stereo pair -> fixed-point disparity PGM");
  match->add_option("--left", left, "Left image (P5 PGM)")->required();
  match->add_option("--right", right, "Right image (P5 PGM)")->required();
  match->add_option("--out", out, "Output disparity (16-bit PGM)")->required();
  match->add_option("--vis", vis, "Optional 8-bit visualisation PGM");
  match->add_option("--config", config, "Run configuration (key = value)");
  matcher_flags.add(match);

  std::string disparity, calib, mask, blobs;
  ObstacleParams obstacle_params;
  auto* obstacle = app.add_subcommand("obstacle", "Disparity -> near-obstacle mask, blobs and decision");
  obstacle->add_option("--disparity", disparity, "Disparity (16-bit PGM)")->required();
  obstacle->add_option("--calib", calib, "Calibration file")->required();
  obstacle->add_option("--mask", mask, "Output mask PGM");
  obstacle->add_option("--blobs", blobs, "Output blob CSV");
  obstacle->add_option("--z-near", obstacle_params.z_near, "Near edge of the depth band (m)");
  obstacle->add_option("--z-far", obstacle_params.z_far, "Far edge of the depth band (m)");
  obstacle->add_option("--min-area", obstacle_params.min_area, "Smallest blob kept (pixels)");

  std::string color;
  CloudFilterParams filter;
  bool no_filter = false;
  auto* reconstruct = app.add_subcommand("reconstruct", "Disparity + colour -> PLY point cloud");
  reconstruct->add_option("--disparity", disparity, "Disparity (16-bit PGM)")->required();
  reconstruct->add_option("--color", color, "Left colour image (P6 PPM)")->required();
  reconstruct->add_option("--calib", calib, "Calibration file")->required();
  reconstruct->add_option("--out", out, "Output ASCII PLY")->required();
  reconstruct->add_option("--min-cluster", filter.min_cluster, "Smallest cluster kept (points)");
  reconstruct->add_option("--cluster-radius", filter.cluster_radius, "Single-linkage radius (m)");
  reconstruct->add_option("--max-range", filter.max_range, "Range cut-off (m)");
  reconstruct->add_flag("--no-filter", no_filter, "Skip range and cluster filtering");

  std::string corrs;
  double align_threshold = 1.0;
  RansacConfig ransac;
  auto* calib_check = app.add_subcommand("calib-check", "Correspondence CSV -> alignment report and F");
  calib_check->add_option("--corrs", corrs, "CSV of xl,yl,xr,yr")->required();
  calib_check->add_option("--threshold", align_threshold, "Max vertical disparity for PASS (px)");
  calib_check->add_option("--iterations", ransac.iterations, "RANSAC iterations");
  calib_check->add_option("--inlier-threshold", ransac.inlier_threshold_px, "RANSAC inlier distance (px)");
  calib_check->add_option("--seed", ransac.seed, "RANSAC seed");
  calib_check->add_option("--min-inlier-fraction", ransac.min_inlier_fraction, "Required consensus fraction");

  std::string world, out_dir, prefix;
  Pose2D pose;
  double theta_deg = 0.0;
  double height = 0.25;
  int supersample = 2;
  double vertical_offset = 0.0;
  auto* render = app.add_subcommand("render", "World + camera pose -> stereo pair and ground truth");
  render->add_option("--world", world, "World file")->required();
  render->add_option("--calib", calib, "Calibration file (default 640x480, f=500, 63 mm)");
  render->add_option("--x", pose.x, "Camera x (m)");
  render->add_option("--y", pose.y, "Camera y (m)");
  render->add_option("--theta-deg", theta_deg, "Camera heading (degrees)");
  render->add_option("--height", height, "Camera height above the floor (m)");
  render->add_option("--out-dir", out_dir, "Output directory")->required();
  render->add_option("--prefix", prefix, "File name prefix");
  render->add_option("--supersample", supersample, "Samples per pixel axis");
  render->add_option("--vertical-offset", vertical_offset, "Right image vertical shift (px)");

  std::optional<long long> seed;
  std::optional<double> duration;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop navigation run");
  simulate->add_option("--world", world, "World file")->required();
  simulate->add_option("--config", config, "Scenario configuration");
  simulate->add_option("--out-dir", out_dir, "Output directory (default: config output_dir)");
  simulate->add_option("--seed", seed, "Override the scenario seed");
  simulate->add_option("--duration", duration, "Override the run length (s)");

  std::string readings;
  double resolution = 0.05;
  double us_range = 3.0;
  auto* map = app.add_subcommand("map", "Ultrasound reading log -> occupancy PGM");
  map->add_option("--readings", readings, "CSV of sensor,range,x,y,theta")->required();
  map->add_option("--out", out, "Output PGM (sidecar .txt written alongside)")->required();
  map->add_option("--resolution", resolution, "Cell size (m)");
  map->add_option("--max-range", us_range, "Sensor max range (m)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (argc <= 1) std::cerr << app.help();
    return kExitIo;
  }

  try {
    if (*match) return cmd_match(left, right, out, vis, config, matcher_flags);
    if (*obstacle) return cmd_obstacle(disparity, calib, mask, blobs, obstacle_params);
    if (*reconstruct) return cmd_reconstruct(disparity, color, calib, out, filter, no_filter);
    if (*calib_check) return cmd_calib_check(corrs, align_threshold, ransac);
    if (*render) {
      pose.theta = deg_to_rad(theta_deg);
      return cmd_render(world, calib, pose, height, out_dir, prefix, supersample, vertical_offset);
    }
    if (*simulate) return cmd_simulate(world, config, out_dir, seed, duration);
    if (*map) return cmd_map(readings, out, resolution, us_range);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::IoError ? kExitIo : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitIo;
}
