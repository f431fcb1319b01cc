#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "stereonav/error.hpp"
#include "stereonav/geometry.hpp"
#include "stereonav/keyvalue.hpp"
#include "stereonav/robosim.hpp"

namespace stereonav {

/// Everything a CLI run needs besides its positional inputs.
struct RunConfig {
  std::filesystem::path calibration;
  std::filesystem::path output_dir = "out";
  SimConfig sim;

  StereoRig load_rig() const {
    if (calibration.empty()) return default_rig();
    return load_calibration(calibration);
  }
};

inline const std::set<std::string>& run_config_keys() {
  static const std::set<std::string> keys{
      "calibration", "output_dir", "window", "min_disp", "max_disp", "prefilter_cap", "texture_threshold",
      "uniqueness_ratio", "threads", "z_near", "z_far", "min_area", "min_cluster", "cluster_radius", "max_range",
      "seed", "duration_s", "tick_s", "substep_s", "track_width", "wheel_radius", "v_max", "v_forward", "v_turn",
      "body_radius", "camera_height", "compass_sigma", "kp", "ki", "kd", "turn90_direction", "cloud_every",
      "map_resolution", "start_x", "start_y", "start_theta_deg", "stop_threshold", "ultrasound_max_range"};
  return keys;
}

/// Applies the keys present in `kv` on top of `cfg`. Relative paths resolve
/// against `base_dir`.
inline void apply_config(const KeyValueFile& kv, RunConfig& cfg, const std::filesystem::path& base_dir = {}) {
  kv.reject_unknown(run_config_keys());
  auto path_of = [&](const std::string& key, const std::filesystem::path& fallback) {
    if (!kv.has(key)) return fallback;
    std::filesystem::path p = kv.get_string(key, "");
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  cfg.calibration = path_of("calibration", cfg.calibration);
  cfg.output_dir = path_of("output_dir", cfg.output_dir);

  auto& m = cfg.sim.matcher;
  m.window = static_cast<int>(kv.get_int("window", m.window));
  m.min_disp = static_cast<int>(kv.get_int("min_disp", m.min_disp));
  m.max_disp = static_cast<int>(kv.get_int("max_disp", m.max_disp));
  m.prefilter_cap = static_cast<int>(kv.get_int("prefilter_cap", m.prefilter_cap));
  m.texture_threshold = static_cast<int>(kv.get_int("texture_threshold", m.texture_threshold));
  m.uniqueness_ratio = static_cast<int>(kv.get_int("uniqueness_ratio", m.uniqueness_ratio));
  m.threads = static_cast<int>(kv.get_int("threads", m.threads));

  auto& o = cfg.sim.obstacle;
  o.z_near = kv.get_double("z_near", o.z_near);
  o.z_far = kv.get_double("z_far", o.z_far);
  o.min_area = static_cast<int>(kv.get_int("min_area", o.min_area));

  auto& c = cfg.sim.cloud;
  c.min_cluster = static_cast<int>(kv.get_int("min_cluster", c.min_cluster));
  c.cluster_radius = kv.get_double("cluster_radius", c.cluster_radius);
  c.max_range = kv.get_double("max_range", c.max_range);

  auto& s = cfg.sim.sim;
  s.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(s.seed)));
  s.duration_s = kv.get_double("duration_s", s.duration_s);
  s.tick_s = kv.get_double("tick_s", s.tick_s);
  s.substep_s = kv.get_double("substep_s", s.substep_s);
  s.track_width = kv.get_double("track_width", s.track_width);
  s.wheel_radius = kv.get_double("wheel_radius", s.wheel_radius);
  s.v_max = kv.get_double("v_max", s.v_max);
  s.v_forward = kv.get_double("v_forward", s.v_forward);
  s.v_turn = kv.get_double("v_turn", s.v_turn);
  s.body_radius = kv.get_double("body_radius", s.body_radius);
  s.camera_height = kv.get_double("camera_height", s.camera_height);
  s.compass_sigma = kv.get_double("compass_sigma", s.compass_sigma);
  s.kp = kv.get_double("kp", s.kp);
  s.ki = kv.get_double("ki", s.ki);
  s.kd = kv.get_double("kd", s.kd);
  s.cloud_every = static_cast<int>(kv.get_int("cloud_every", s.cloud_every));
  s.map_resolution = kv.get_double("map_resolution", s.map_resolution);
  s.start.x = kv.get_double("start_x", s.start.x);
  s.start.y = kv.get_double("start_y", s.start.y);
  s.start.theta = deg_to_rad(kv.get_double("start_theta_deg", s.start.theta * 180.0 / std::numbers::pi));
  if (kv.has("turn90_direction")) {
    const auto dir = kv.get_string("turn90_direction", "right");
    if (dir != "left" && dir != "right")
      throw Error(ErrorCode::ValidationError, "turn90_direction must be 'left' or 'right'");
    s.turn90_right = dir == "right";
  }
  auto& u = cfg.sim.ultrasound;
  u.stop_threshold = kv.get_double("stop_threshold", u.stop_threshold);
  u.max_range = kv.get_double("ultrasound_max_range", u.max_range);
}

/// Checks every parameter invariant; the message names the violated one.
inline void validate_config(const RunConfig& cfg, int image_width) {
  try {
    cfg.sim.matcher.validate(image_width);
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationError, e.what());
  }
  cfg.sim.obstacle.validate();
  cfg.sim.cloud.validate();
  cfg.sim.sim.validate();
  if (!(cfg.sim.ultrasound.stop_threshold > 0.0) || !(cfg.sim.ultrasound.max_range > 0.0))
    throw Error(ErrorCode::ValidationError, "ultrasound ranges must be > 0");
}

inline RunConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoError, "config file not found: " + path.string());
  const KeyValueFile kv = read_key_value_file(path);
  RunConfig cfg;
  apply_config(kv, cfg, path.parent_path());
  if (!cfg.calibration.empty() && !std::filesystem::exists(cfg.calibration))
    throw Error(ErrorCode::IoError, "calibration file not found: " + cfg.calibration.string());
  const StereoRig rig = cfg.load_rig();
  validate_config(cfg, rig.width());
  return cfg;
}

}  // namespace stereonav
