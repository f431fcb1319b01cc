#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "stereonav/error.hpp"
#include "stereonav/geometry.hpp"
#include "stereonav/mapping.hpp"
#include "stereonav/obstacle.hpp"
#include "stereonav/pointcloud.hpp"
#include "stereonav/pose.hpp"
#include "stereonav/render.hpp"
#include "stereonav/stereo_match.hpp"
#include "stereonav/world.hpp"

namespace stereonav {

inline constexpr double kMaxRange = std::numeric_limits<double>::infinity();

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct RobotState {
  Pose2D pose;
  /// Wheel rim speeds, m/s.
  double v_left = 0.0;
  double v_right = 0.0;
};

/// Differential-drive motion over dt with the wheel speeds held constant:
/// exact arc integration, straight line when the turn rate vanishes.
inline RobotState step_kinematics(const RobotState& s, double dt, double track_width) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  if (!(track_width > 0.0)) throw Error(ErrorCode::InvalidArgument, "track_width must be > 0");
  const double v = 0.5 * (s.v_left + s.v_right);
  const double omega = (s.v_right - s.v_left) / track_width;
  RobotState out = s;
  const double th = s.pose.theta;
  if (std::abs(omega) < 1e-9) {
    out.pose.x += v * dt * std::cos(th);
    out.pose.y += v * dt * std::sin(th);
  } else {
    const double th1 = th + omega * dt;
    const double radius = v / omega;
    out.pose.x += radius * (std::sin(th1) - std::sin(th));
    out.pose.y -= radius * (std::cos(th1) - std::cos(th));
  }
  out.pose.theta = normalize_angle(th + omega * dt);
  return out;
}

/// Quadrature-free optical encoder: 400 pulses per revolution (0.9 degrees
/// per pulse). Rotation accumulates so fractional pulses carry over.
struct EncoderModel {
  int pulses_per_rev = 400;
  double wheel_radius = 0.03;
  double rotation = 0.0;
  long long pulses = 0;

  double radians_per_pulse() const { return 2.0 * std::numbers::pi / pulses_per_rev; }
  double metres_per_pulse() const { return radians_per_pulse() * wheel_radius; }
};

/// Adds `wheel_rotation` radians and returns the pulses emitted.
inline long long read_encoders(EncoderModel& e, double wheel_rotation) {
  e.rotation += wheel_rotation;
  // Rotations that land on a pulse edge up to rounding count the pulse.
  const auto total = static_cast<long long>(std::floor(e.rotation / e.radians_per_pulse() + 1e-9));
  const long long delta = total - e.pulses;
  e.pulses = total;
  return delta;
}

/// Heading plus seeded Gaussian noise, wrapped to (-pi, pi].
inline double read_compass(const RobotState& s, double noise_sigma, std::mt19937_64& rng) {
  if (noise_sigma <= 0.0) return s.pose.theta;
  std::normal_distribution<double> noise(0.0, noise_sigma);
  return normalize_angle(s.pose.theta + noise(rng));
}

struct UltrasoundModel {
  std::array<double, 3> angles{deg_to_rad(-20.0), 0.0, deg_to_rad(20.0)};
  double max_range = 3.0;
  double stop_threshold = 0.25;

  SensorGeometry sensor(int i) const { return SensorGeometry{angles[static_cast<std::size_t>(i)], max_range, 0.0}; }
};

using UltrasoundRanges = std::array<double, 3>;

/// Range along each mounted ray to the nearest box, kMaxRange beyond the
/// sensor's reach. Sensors sit at the robot origin.
inline UltrasoundRanges read_ultrasound(const WorldModel& world, const RobotState& s, const UltrasoundModel& m) {
  UltrasoundRanges out{};
  for (std::size_t i = 0; i < 3; ++i) {
    const double a = s.pose.theta + m.angles[i];
    const double dx = std::cos(a);
    const double dy = std::sin(a);
    double best = kMaxRange;
    for (const auto& b : world.boxes)
      if (auto t = ray_box_2d(s.pose.x, s.pose.y, dx, dy, b)) best = std::min(best, std::max(0.0, *t));
    out[i] = best <= m.max_range ? best : kMaxRange;
  }
  return out;
}

struct PidController {
  double kp = 2.0;
  double ki = 0.1;
  double kd = 0.05;
  double integral_limit = 0.5;
  double output_limit = 2.0;

  double integral = 0.0;
  double previous_error = 0.0;
  bool has_previous = false;

  void reset() {
    integral = 0.0;
    previous_error = 0.0;
    has_previous = false;
  }
};

/// One PID step on the heading error; returns the turn-rate command (rad/s).
inline double pid_update(PidController& c, double error, double dt) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be > 0");
  c.integral = std::clamp(c.integral + error * dt, -c.integral_limit, c.integral_limit);
  const double derivative = c.has_previous ? (error - c.previous_error) / dt : 0.0;
  c.previous_error = error;
  c.has_previous = true;
  const double u = c.kp * error + c.ki * c.integral + c.kd * derivative;
  return std::clamp(u, -c.output_limit, c.output_limit);
}

struct WheelCommand {
  double v_left = 0.0;
  double v_right = 0.0;
};

/// Splits a turn-rate command symmetrically around a forward speed, each
/// wheel limited to +-v_max.
inline WheelCommand differential_command(double forward, double turn_rate, double track_width, double v_max) {
  const double offset = 0.5 * turn_rate * track_width;
  return WheelCommand{std::clamp(forward - offset, -v_max, v_max), std::clamp(forward + offset, -v_max, v_max)};
}

/// Ultrasound has priority: any return closer than the stop threshold stops
/// the robot whatever vision decided.
inline Decision arbitrate(const UltrasoundRanges& ultra, Decision vision, const UltrasoundModel& m) {
  for (double r : ultra)
    if (r < m.stop_threshold) return Decision::Stop;
  return vision;
}

struct SimParams {
  std::uint64_t seed = 1;
  double duration_s = 40.0;
  double tick_s = 0.2;
  double substep_s = 0.01;
  double track_width = 0.20;
  double wheel_radius = 0.03;
  double v_max = 0.20;
  double v_forward = 0.20;
  double v_turn = 0.10;
  double body_radius = 0.08;
  double camera_height = 0.25;
  double compass_sigma = 0.0;
  double kp = 2.0;
  double ki = 0.1;
  double kd = 0.05;
  bool turn90_right = true;
  int cloud_every = 10;
  double map_resolution = 0.05;
  Pose2D start;

  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) throw Error(ErrorCode::ValidationError, what);
    };
    need(duration_s > 0.0, "duration_s must be > 0");
    need(tick_s > 0.0, "tick_s must be > 0");
    need(substep_s > 0.0 && substep_s <= tick_s, "substep_s must be in (0, tick_s]");
    need(track_width > 0.0, "track_width must be > 0");
    need(wheel_radius > 0.0, "wheel_radius must be > 0");
    need(v_max > 0.0, "v_max must be > 0");
    need(v_forward > 0.0 && v_forward <= v_max, "v_forward must be in (0, v_max]");
    need(v_turn > 0.0 && v_turn <= v_max, "v_turn must be in (0, v_max]");
    need(body_radius > 0.0, "body_radius must be > 0");
    need(camera_height > 0.0, "camera_height must be > 0");
    need(compass_sigma >= 0.0, "compass_sigma must be >= 0");
    need(cloud_every >= 0, "cloud_every must be >= 0");
    need(map_resolution > 0.0, "map_resolution must be > 0");
  }
};

struct SimConfig {
  SimParams sim;
  MatcherParams matcher;
  ObstacleParams obstacle;
  CloudFilterParams cloud;
  UltrasoundModel ultrasound;
};

struct PoseLogRow {
  double t = 0.0;
  Pose2D pose;
  Decision decision = Decision::Forward;
};

inline std::string format_pose_row(const PoseLogRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.3f,%.6f,%.6f,%.6f,%s\n", r.t, r.pose.x, r.pose.y, r.pose.theta,
                to_string(r.decision));
  return buf;
}

struct TickResult {
  RobotState state;
  Decision vision = Decision::Forward;
  Decision decision = Decision::Forward;
  UltrasoundRanges ultrasound{};
  bool interrupted = false;
  bool collided = false;
  PoseLogRow log;
};

/// Closed-loop run of the platform: each tick renders the stereo pair at the
/// camera pose, runs the obstacle pipeline, arbitrates with ultrasound,
/// drives the wheels for one tick in substeps and updates odometry, the
/// occupancy grid and the point-cloud map.
class Simulator {
 public:
  Simulator(const WorldModel& world, const StereoRig& rig, SimConfig cfg)
      : world_(world), rig_(rig), cfg_(std::move(cfg)), q_(build_reprojection_matrix(rig)),
        grid_(OccupancyGrid::covering(std::max(world.floor_w, 0.1), std::max(world.floor_h, 0.1),
                                      cfg_.sim.map_resolution)),
        compass_rng_(cfg_.sim.seed) {
    world_.validate();
    rig_.validate();
    cfg_.sim.validate();
    cfg_.matcher.validate(rig.width());
    cfg_.obstacle.validate();
    cfg_.cloud.validate();
    state_.pose = cfg_.sim.start;
    state_.pose.theta = normalize_angle(state_.pose.theta);
    odometry_ = state_.pose;
    heading_setpoint_ = state_.pose.theta;
    left_encoder_.wheel_radius = right_encoder_.wheel_radius = cfg_.sim.wheel_radius;
    pid_.kp = cfg_.sim.kp;
    pid_.ki = cfg_.sim.ki;
    pid_.kd = cfg_.sim.kd;
  }

  TickResult tick() {
    const SimParams& sp = cfg_.sim;
    TickResult res;
    res.ultrasound = read_ultrasound(world_, state_, cfg_.ultrasound);

    if (turn_remaining_ > 0.0) {
      res.vision = Decision::Turn90;
    } else {
      res.vision = run_vision();
    }
    res.decision = turn_remaining_ > 0.0 ? Decision::Turn90 : arbitrate(res.ultrasound, res.vision, cfg_.ultrasound);

    // Wheel plan for this tick.
    double spin = 0.0;  // +1 counter-clockwise, -1 clockwise, 0 none
    bool forward = false;
    switch (res.decision) {
      case Decision::Forward:
        forward = true;
        turn_budget_ = 0.0;
        turn_latch_ = 0.0;
        break;
      case Decision::TurnLeft:
      case Decision::TurnRight: {
        // Keep the side picked first: a blob straddling the midline would
        // otherwise flip the direction every tick.
        if (turn_latch_ == 0.0) turn_latch_ = res.decision == Decision::TurnLeft ? 1.0 : -1.0;
        spin = turn_latch_;
        res.decision = spin > 0.0 ? Decision::TurnLeft : Decision::TurnRight;
        turn_budget_ += 2.0 * sp.v_turn / sp.track_width * sp.tick_s;
        if (turn_budget_ >= std::numbers::pi / 2.0) {
          // Turning for a quarter revolution without clearing the band:
          // commit to a full 90 degree turn in the same direction.
          turn_remaining_ = std::numbers::pi / 2.0;
          turn90_sign_ = spin;
          turn_budget_ = 0.0;
          turn_latch_ = 0.0;
          res.decision = Decision::Turn90;
        }
        break;
      }
      case Decision::Turn90:
        turn_latch_ = 0.0;
        if (turn_remaining_ <= 0.0) {
          turn_remaining_ = std::numbers::pi / 2.0;
          turn90_sign_ = sp.turn90_right ? -1.0 : 1.0;
        }
        turn_budget_ = 0.0;
        break;
      case Decision::Stop:
        turn_budget_ = 0.0;
        turn_latch_ = 0.0;
        if (previous_decision_ == Decision::Stop) {
          // Still blocked after stopping: rotate in place towards the side
          // with more clearance.
          spin = res.ultrasound[2] >= res.ultrasound[0] ? 1.0 : -1.0;
        }
        break;
    }
    if (res.decision == Decision::Forward && previous_decision_ != Decision::Forward) {
      heading_setpoint_ = read_compass(state_, sp.compass_sigma, compass_rng_);
      pid_.reset();
    }

    const int substeps = std::max(1, static_cast<int>(std::lround(sp.tick_s / sp.substep_s)));
    const double dt = sp.tick_s / substeps;
    const double spin_rate = 2.0 * sp.v_turn / sp.track_width;
    for (int k = 0; k < substeps; ++k) {
      WheelCommand cmd;
      if (forward && !res.interrupted) {
        const auto ranges = read_ultrasound(world_, state_, cfg_.ultrasound);
        if (arbitrate(ranges, Decision::Forward, cfg_.ultrasound) == Decision::Stop) {
          res.interrupted = true;
        } else {
          const double heading = read_compass(state_, sp.compass_sigma, compass_rng_);
          const double u = pid_update(pid_, normalize_angle(heading_setpoint_ - heading), dt);
          cmd = differential_command(sp.v_forward, u, sp.track_width, sp.v_max);
        }
      } else if (res.decision == Decision::Turn90 && turn_remaining_ > 0.0) {
        const double rate = std::min(spin_rate, turn_remaining_ / dt);
        turn_remaining_ = std::max(0.0, turn_remaining_ - rate * dt);
        const double v = 0.5 * rate * sp.track_width;
        cmd = WheelCommand{-turn90_sign_ * v, turn90_sign_ * v};
      } else if (spin != 0.0) {
        cmd = WheelCommand{-spin * sp.v_turn, spin * sp.v_turn};
      }
      advance(cmd, dt, res);
    }
    if (res.interrupted) res.decision = Decision::Stop;

    integrate_ultrasound();
    time_ += sp.tick_s;
    ++ticks_;
    previous_decision_ = res.decision;
    res.state = state_;
    res.log = PoseLogRow{time_, state_.pose, res.decision};
    log_.push_back(res.log);
    if (res.collided) ++collision_ticks_;
    return res;
  }

  void run() {
    const int n = static_cast<int>(std::lround(cfg_.sim.duration_s / cfg_.sim.tick_s));
    for (int i = 0; i < n; ++i) tick();
  }

  const RobotState& state() const { return state_; }
  const Pose2D& odometry() const { return odometry_; }
  const OccupancyGrid& grid() const { return grid_; }
  const std::vector<PoseLogRow>& log() const { return log_; }
  const std::vector<UltrasoundReading>& readings() const { return readings_; }
  const std::vector<PointCloud>& clouds() const { return clouds_; }
  const EncoderModel& left_encoder() const { return left_encoder_; }
  const EncoderModel& right_encoder() const { return right_encoder_; }
  int collision_ticks() const { return collision_ticks_; }
  double time() const { return time_; }
  const SimConfig& config() const { return cfg_; }

  std::string pose_log_csv() const {
    std::string s = "t,x,y,theta,decision\n";
    for (const auto& r : log_) s += format_pose_row(r);
    return s;
  }

  std::string readings_csv() const {
    std::string s = "sensor,range,x,y,theta\n";
    for (const auto& r : readings_) s += format_reading(r);
    return s;
  }

 private:
  Decision run_vision() {
    try {
      Scene scene;
      scene.world = &world_;
      scene.camera_pose = state_.pose;
      scene.camera_height = cfg_.sim.camera_height;
      scene.supersample = 1;
      const RenderOutput frame = render_stereo(scene, rig_);
      const DisparityMap dm = compute_disparity(frame.left, frame.right, cfg_.matcher);
      const ObstacleResult obs = detect_obstacles(dm, rig_, cfg_.obstacle);
      if (cfg_.sim.cloud_every > 0 && ticks_ % cfg_.sim.cloud_every == 0) {
        PointCloud cloud = filter_cloud(cloud_from_disparity(dm, frame.left_color, q_), cfg_.cloud);
        cloud = transform_cloud(camera_to_body(cloud, cfg_.sim.camera_height), odometry_);
        cloud.source_pose = odometry_;
        clouds_.push_back(std::move(cloud));
      }
      return obs.decision;
    } catch (const Error&) {
      return Decision::Stop;
    }
  }

  void advance(const WheelCommand& cmd, double dt, TickResult& res) {
    const SimParams& sp = cfg_.sim;
    state_.v_left = cmd.v_left;
    state_.v_right = cmd.v_right;
    state_ = step_kinematics(state_, dt, sp.track_width);

    const long long dl = read_encoders(left_encoder_, cmd.v_left * dt / sp.wheel_radius);
    const long long dr = read_encoders(right_encoder_, cmd.v_right * dt / sp.wheel_radius);
    const double heading = read_compass(state_, sp.compass_sigma, compass_rng_);
    const double dist = 0.5 * static_cast<double>(dl + dr) * left_encoder_.metres_per_pulse();
    const double mid = odometry_.theta + 0.5 * normalize_angle(heading - odometry_.theta);
    odometry_.x += dist * std::cos(mid);
    odometry_.y += dist * std::sin(mid);
    odometry_.theta = heading;

    if (clearance(world_, state_.pose.x, state_.pose.y) < sp.body_radius) res.collided = true;
  }

  void integrate_ultrasound() {
    const auto ranges = read_ultrasound(world_, state_, cfg_.ultrasound);
    for (int i = 0; i < 3; ++i) {
      UltrasoundReading r;
      r.sensor_index = i;
      r.pose = odometry_;
      r.max_range_flag = std::isinf(ranges[static_cast<std::size_t>(i)]);
      r.range = r.max_range_flag ? 0.0 : ranges[static_cast<std::size_t>(i)];
      integrate_reading(grid_, r, cfg_.ultrasound.sensor(i));
      readings_.push_back(r);
    }
  }

  WorldModel world_;
  StereoRig rig_;
  SimConfig cfg_;
  ReprojectionMatrix q_;
  OccupancyGrid grid_;
  std::mt19937_64 compass_rng_;

  RobotState state_;
  Pose2D odometry_;
  EncoderModel left_encoder_;
  EncoderModel right_encoder_;
  PidController pid_;
  double heading_setpoint_ = 0.0;
  double turn_remaining_ = 0.0;
  double turn90_sign_ = -1.0;
  double turn_budget_ = 0.0;
  double turn_latch_ = 0.0;  // +1 left, -1 right, 0 free
  Decision previous_decision_ = Decision::Forward;

  double time_ = 0.0;
  long long ticks_ = 0;
  int collision_ticks_ = 0;
  std::vector<PoseLogRow> log_;
  std::vector<UltrasoundReading> readings_;
  std::vector<PointCloud> clouds_;
};

}  // namespace stereonav
