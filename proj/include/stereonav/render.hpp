#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "stereonav/geometry.hpp"
#include "stereonav/image.hpp"
#include "stereonav/pose.hpp"
#include "stereonav/world.hpp"

namespace stereonav {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline double lattice_value(std::uint64_t seed, std::int64_t ix, std::int64_t iy, int octave) {
  std::uint64_t h = splitmix64(seed ^ 0xA24BAED4963EE407ULL);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(iy) * 0x9FB21C651E98DF25ULL));
  h = splitmix64(h + static_cast<std::uint64_t>(octave));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

inline double value_noise(std::uint64_t seed, double u, double v, int octave) {
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const auto iu = static_cast<std::int64_t>(fu);
  const auto iv = static_cast<std::int64_t>(fv);
  double tu = u - fu;
  double tv = v - fv;
  tu = tu * tu * (3.0 - 2.0 * tu);
  tv = tv * tv * (3.0 - 2.0 * tv);
  const double a = lattice_value(seed, iu, iv, octave);
  const double b = lattice_value(seed, iu + 1, iv, octave);
  const double c = lattice_value(seed, iu, iv + 1, octave);
  const double d = lattice_value(seed, iu + 1, iv + 1, octave);
  return (a + (b - a) * tu) + ((c + (d - c) * tu) - (a + (b - a) * tu)) * tv;
}

}  // namespace detail

/// Band-limited value noise over surface coordinates in metres: three
/// octaves with 4, 2 and 1 cm lattice spacing. Deterministic in its inputs.
/// `footprint` is the surface extent of one image sample in metres; octaves
/// finer than about two footprints fade to their mean so distant or grazing
/// surfaces do not alias.
inline std::uint8_t procedural_texture(std::uint64_t seed, double u, double v, double footprint = 0.0) {
  constexpr double kCells[] = {0.04, 0.02, 0.01};
  constexpr double kWeights[] = {0.3, 0.3, 0.4};
  double n = 0.0;
  for (int o = 0; o < 3; ++o) {
    const double keep = footprint > 0.0 ? std::clamp(kCells[o] / footprint - 1.0, 0.0, 1.0) : 1.0;
    const double octave = keep > 0.0 ? detail::value_noise(seed, u / kCells[o], v / kCells[o], o) : 0.5;
    n += kWeights[o] * (0.5 + keep * (octave - 0.5));
  }
  const double stretched = 128.0 + (n - 0.5) * 2.2 * 255.0;
  return static_cast<std::uint8_t>(std::lround(std::clamp(stretched, 0.0, 255.0)));
}

inline Rgb surface_tint(std::uint64_t seed, std::uint8_t intensity) {
  const std::uint64_t h = detail::splitmix64(seed ^ 0x51ED27ULL);
  auto channel = [&](int shift) {
    const double t = 0.55 + 0.45 * static_cast<double>((h >> shift) & 0xFF) / 255.0;
    return static_cast<std::uint8_t>(std::lround(intensity * t));
  };
  return Rgb{channel(0), channel(8), channel(16)};
}

inline constexpr std::uint64_t kFloorSeed = 0xF1002;

struct Scene {
  const WorldModel* world = nullptr;
  Pose2D camera_pose;
  double camera_height = 0.25;
  /// Samples per pixel axis; the ground truth always uses the pixel centre.
  int supersample = 2;
  /// Test hook: shifts the right image down by this many pixels.
  double vertical_offset_px = 0.0;
  /// Test hook: additive Gaussian pixel noise.
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  std::uint8_t background = 40;
  int threads = 0;
};

struct RenderOutput {
  GrayImage left;
  GrayImage right;
  ColorImage left_color;
  ColorImage right_color;
  DisparityMap gt_disparity;
  /// Ray-cast depth along the optical axis per left pixel; 0 where nothing is hit.
  std::vector<double> gt_depth;
  /// Exact pixel disparity per left pixel; NaN where invalid.
  std::vector<double> gt_disparity_exact;
  /// Set where the left pixel's surface point is hidden from the right camera.
  BinaryMask occluded;
};

struct SurfaceHit {
  double t = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  double u = 0.0;
  double v = 0.0;
  /// |cos| of the angle between the ray and the surface normal.
  double cos_incidence = 1.0;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
};

/// Nearest surface along origin + t * dir for t > 0.
inline std::optional<SurfaceHit> cast_ray(const WorldModel& world, const Vec3& origin, const Vec3& dir) {
  SurfaceHit best;
  bool found = false;
  constexpr double kEps = 1e-12;
  for (const auto& b : world.boxes) {
    const double lo[3] = {b.x, b.y, 0.0};
    const double hi[3] = {b.x + b.w, b.y + b.h, b.height};
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    int axis = -1;
    bool miss = false;
    for (int a = 0; a < 3; ++a) {
      if (d[a] == 0.0) {
        if (o[a] < lo[a] || o[a] > hi[a]) miss = true;
        continue;
      }
      double ta = (lo[a] - o[a]) / d[a];
      double tb = (hi[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      if (ta > t0) {
        t0 = ta;
        axis = a;
      }
      t1 = std::min(t1, tb);
    }
    if (miss || axis < 0 || t0 > t1 || t0 <= kEps || t0 >= best.t) continue;
    const Vec3 p = origin + dir * t0;
    best.t = t0;
    best.seed = b.seed * 4 + static_cast<std::uint64_t>(axis);
    best.cos_incidence = std::abs(d[axis]) / std::sqrt(dir.dot(dir));
    if (axis == 0) {
      best.u = p.y;
      best.v = p.z;
    } else if (axis == 1) {
      best.u = p.x;
      best.v = p.z;
    } else {
      best.u = p.x;
      best.v = p.y;
    }
    found = true;
  }
  if (dir.z < 0.0 && origin.z > 0.0) {
    const double t = -origin.z / dir.z;
    const Vec3 p = origin + dir * t;
    if (t < best.t && p.x >= 0.0 && p.x <= world.floor_w && p.y >= 0.0 && p.y <= world.floor_h) {
      best = SurfaceHit{t, kFloorSeed, p.x, p.y, std::abs(dir.z) / std::sqrt(dir.dot(dir))};
      found = true;
    }
  }
  if (!found) return std::nullopt;
  return best;
}

/// Camera basis in world coordinates for a robot-mounted camera looking
/// along the pose heading: x right, y down, z forward.
struct CameraFrame {
  Vec3 origin;
  Vec3 right;
  Vec3 down;
  Vec3 forward;

  static CameraFrame at(const Pose2D& pose, double height) {
    const double c = std::cos(pose.theta);
    const double s = std::sin(pose.theta);
    return CameraFrame{{pose.x, pose.y, height}, {s, -c, 0.0}, {0.0, 0.0, -1.0}, {c, s, 0.0}};
  }
  // Ray whose parameter t equals optical-axis depth.
  Vec3 pixel_ray(const CameraIntrinsics& k, double px, double py, double cy_shift = 0.0) const {
    return right * ((px - k.cx) / k.f) + down * ((py - k.cy - cy_shift) / k.f) + forward;
  }
};

/// Ray-traces both views of an ideal horizontal rig, with ground-truth
/// disparity for every left pixel whose surface point the right camera sees.
inline RenderOutput render_stereo(const Scene& scene, const StereoRig& rig) {
  rig.validate();
  if (scene.world == nullptr) throw Error(ErrorCode::InvalidArgument, "scene has no world");
  if (scene.supersample < 1) throw Error(ErrorCode::InvalidArgument, "supersample must be >= 1");
  const WorldModel& world = *scene.world;
  const int w = rig.width();
  const int h = rig.height();
  const double f = rig.focal();
  const double t_base = rig.baseline_m;

  const CameraFrame left_cam = CameraFrame::at(scene.camera_pose, scene.camera_height);
  CameraFrame right_cam = left_cam;
  right_cam.origin = left_cam.origin + left_cam.right * t_base;

  RenderOutput out;
  out.left = GrayImage(w, h);
  out.right = GrayImage(w, h);
  out.left_color = ColorImage(w, h);
  out.right_color = ColorImage(w, h);
  out.gt_disparity = DisparityMap(w, h, 0, 0);
  out.gt_depth.assign(static_cast<std::size_t>(w) * h, 0.0);
  out.gt_disparity_exact.assign(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::quiet_NaN());
  out.occluded = BinaryMask(w, h);

  const int ss = scene.supersample;
  auto shade = [&](const CameraFrame& cam, const CameraIntrinsics& k, double cy_shift, int x, int y) {
    double sum = 0.0;
    double rgb[3] = {0.0, 0.0, 0.0};
    for (int sy = 0; sy < ss; ++sy) {
      for (int sx = 0; sx < ss; ++sx) {
        const double px = x + (sx + 0.5) / ss - 0.5;
        const double py = y + (sy + 0.5) / ss - 0.5;
        const Vec3 ray = cam.pixel_ray(k, px, py, cy_shift);
        const auto hit = cast_ray(world, cam.origin, ray);
        std::uint8_t value = scene.background;
        Rgb colour{scene.background, scene.background, scene.background};
        if (hit) {
          const double range = hit->t * std::sqrt(ray.dot(ray));
          const double footprint = range / (k.f * ss) / std::max(hit->cos_incidence, 0.05);
          value = procedural_texture(hit->seed, hit->u, hit->v, footprint);
          colour = surface_tint(hit->seed, value);
        }
        sum += value;
        rgb[0] += colour.r;
        rgb[1] += colour.g;
        rgb[2] += colour.b;
      }
    }
    const double n = ss * ss;
    return std::pair<std::uint8_t, Rgb>{
        static_cast<std::uint8_t>(std::lround(sum / n)),
        Rgb{static_cast<std::uint8_t>(std::lround(rgb[0] / n)), static_cast<std::uint8_t>(std::lround(rgb[1] / n)),
            static_cast<std::uint8_t>(std::lround(rgb[2] / n))}};
  };

  auto render_rows = [&](int y0, int y1) {
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        auto [gl, cl] = shade(left_cam, rig.left, 0.0, x, y);
        out.left.data[i] = gl;
        out.left_color.data[i] = cl;
        auto [gr, cr] = shade(right_cam, rig.right, scene.vertical_offset_px, x, y);
        out.right.data[i] = gr;
        out.right_color.data[i] = cr;

        const auto hit = cast_ray(world, left_cam.origin, left_cam.pixel_ray(rig.left, x, y));
        if (!hit) continue;
        const double z = hit->t;
        out.gt_depth[i] = z;
        const Vec3 p = left_cam.origin + left_cam.pixel_ray(rig.left, x, y) * z;
        const Vec3 rel = p - right_cam.origin;
        const double xr = rig.right.cx + f * rel.dot(right_cam.right) / rel.dot(right_cam.forward);
        bool visible = xr >= -0.5 && xr < w - 0.5;
        if (visible) {
          const double zr = rel.dot(right_cam.forward);
          const auto back = cast_ray(world, right_cam.origin, rel * (1.0 / zr));
          visible = back && back->t >= zr * (1.0 - 1e-7);
        }
        if (!visible) {
          out.occluded.bits[i] = 1;
          continue;
        }
        const double d = f * t_base / z + (rig.left.cx - rig.right.cx);
        out.gt_disparity_exact[i] = d;
        const long long d16 = std::llround(d * DisparityMap::kScale);
        if (d16 >= 0 && d16 < DisparityMap::kInvalid) out.gt_disparity.data[i] = static_cast<std::uint16_t>(d16);
      }
    }
  };

  int bands = scene.threads > 0 ? scene.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bands = std::clamp(bands, 1, std::max(1, h));
  if (bands == 1) {
    render_rows(0, h);
  } else {
    std::vector<std::thread> workers;
    for (int b = 0; b < bands; ++b) workers.emplace_back(render_rows, h * b / bands, h * (b + 1) / bands);
    for (auto& t : workers) t.join();
  }

  int max_d = 0;
  for (auto v : out.gt_disparity.data)
    if (v != DisparityMap::kInvalid) max_d = std::max<int>(max_d, (v + DisparityMap::kScale - 1) / DisparityMap::kScale);
  out.gt_disparity.max_disp = max_d;

  if (scene.noise_sigma > 0.0) {
    std::mt19937_64 rng(scene.noise_seed);
    std::normal_distribution<double> noise(0.0, scene.noise_sigma);
    for (auto* img : {&out.left, &out.right})
      for (auto& v : img->data) v = static_cast<std::uint8_t>(std::clamp(std::lround(v + noise(rng)), 0L, 255L));
  }
  return out;
}

}  // namespace stereonav
