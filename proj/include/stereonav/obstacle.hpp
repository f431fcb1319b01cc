#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stereonav/error.hpp"
#include "stereonav/geometry.hpp"
#include "stereonav/image.hpp"

namespace stereonav {

struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
  bool operator==(const BoundingBox&) const = default;
};

struct Blob {
  BoundingBox bbox;
  /// Centre of the bounding box.
  PixelCoord centroid;
  int area = 0;
};

enum class Decision { Forward, TurnLeft, TurnRight, Turn90, Stop };

inline constexpr Decision kAllDecisions[] = {Decision::Forward, Decision::TurnLeft, Decision::TurnRight,
                                             Decision::Turn90, Decision::Stop};

inline const char* to_string(Decision d) {
  switch (d) {
    case Decision::Forward: return "Forward";
    case Decision::TurnLeft: return "TurnLeft";
    case Decision::TurnRight: return "TurnRight";
    case Decision::Turn90: return "Turn90";
    case Decision::Stop: return "Stop";
  }
  return "Stop";
}

struct ObstacleParams {
  double z_near = 0.20;
  double z_far = 0.40;
  int min_area = 150;

  void validate() const {
    if (!(z_near > 0.0) || !(z_near < z_far))
      throw Error(ErrorCode::ValidationError, "obstacle band needs 0 < z_near < z_far");
    if (min_area < 1) throw Error(ErrorCode::ValidationError, "min_area must be >= 1");
  }
};

/// 3x3 rectangular dilation, neighbourhood clipped at the borders.
inline BinaryMask dilate3x3(const BinaryMask& m) {
  BinaryMask out(m.width, m.height);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.get(x, y)) continue;
      for (int yy = std::max(0, y - 1); yy <= std::min(m.height - 1, y + 1); ++yy)
        for (int xx = std::max(0, x - 1); xx <= std::min(m.width - 1, x + 1); ++xx) out.set(xx, yy);
    }
  }
  return out;
}

/// Inclusive fixed-point disparity bounds [lo, hi] (x16) for a depth band.
struct DisparityBand {
  int lo16 = 0;
  int hi16 = 0;
};

inline DisparityBand depth_band_to_disparity(const StereoRig& rig, double z_near, double z_far) {
  if (!(z_near > 0.0) || !(z_near < z_far))
    throw Error(ErrorCode::InvalidArgument, "depth band needs 0 < z_near < z_far");
  // The slack absorbs rounding in f*T/z so band edges that land exactly on a
  // 1/16 px step stay inclusive.
  constexpr double kSlack = 1e-9;
  const double lo = depth_to_disparity(rig.focal(), rig.baseline_m, z_far) * DisparityMap::kScale;
  const double hi = depth_to_disparity(rig.focal(), rig.baseline_m, z_near) * DisparityMap::kScale;
  return DisparityBand{static_cast<int>(std::ceil(lo - kSlack)), static_cast<int>(std::floor(hi + kSlack))};
}

/// False when the band reaches outside the map's search range, i.e. parts
/// of it can never be observed.
inline bool band_within_horopter(const DisparityMap& dm, const StereoRig& rig, double z_near, double z_far) {
  const auto band = depth_band_to_disparity(rig, z_near, z_far);
  return band.lo16 >= dm.min_disp * DisparityMap::kScale && band.hi16 <= dm.max_disp * DisparityMap::kScale;
}

/// Pixels whose disparity places them between z_near and z_far, dilated once.
inline BinaryMask segment_near(const DisparityMap& dm, const StereoRig& rig, double z_near = 0.20,
                               double z_far = 0.40) {
  const auto band = depth_band_to_disparity(rig, z_near, z_far);
  BinaryMask m(dm.width, dm.height);
  for (std::size_t i = 0; i < dm.data.size(); ++i) {
    const int v = dm.data[i];
    if (v != DisparityMap::kInvalid && v >= band.lo16 && v <= band.hi16) m.bits[i] = 1;
  }
  return dilate3x3(m);
}

/// 8-connected components of at least min_area pixels, in raster order of
/// their first pixel.
inline std::vector<Blob> find_blobs(const BinaryMask& m, int min_area) {
  std::vector<Blob> blobs;
  std::vector<std::uint8_t> seen(m.bits.size(), 0);
  std::vector<int> stack;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const std::size_t start = static_cast<std::size_t>(y) * m.width + x;
      if (!m.bits[start] || seen[start]) continue;
      Blob b;
      b.bbox = {x, y, x, y};
      seen[start] = 1;
      stack.assign(1, static_cast<int>(start));
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int px = idx % m.width;
        const int py = idx / m.width;
        ++b.area;
        b.bbox.x0 = std::min(b.bbox.x0, px);
        b.bbox.x1 = std::max(b.bbox.x1, px);
        b.bbox.y0 = std::min(b.bbox.y0, py);
        b.bbox.y1 = std::max(b.bbox.y1, py);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = px + dx;
            const int ny = py + dy;
            if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
            const std::size_t n = static_cast<std::size_t>(ny) * m.width + nx;
            if (m.bits[n] && !seen[n]) {
              seen[n] = 1;
              stack.push_back(static_cast<int>(n));
            }
          }
        }
      }
      if (b.area < min_area) continue;
      b.centroid = {0.5 * (b.bbox.x0 + b.bbox.x1), 0.5 * (b.bbox.y0 + b.bbox.y1)};
      blobs.push_back(b);
    }
  }
  return blobs;
}

/// Obstacles on the left steer right and vice versa; both sides means a
/// 90 degree turn. A centroid exactly on the midline counts as right.
inline Decision decide(const std::vector<Blob>& blobs, int image_width) {
  if (image_width <= 0) throw Error(ErrorCode::InvalidArgument, "image_width must be > 0");
  const double mid = image_width / 2.0;
  bool left = false;
  bool right = false;
  for (const auto& b : blobs) (b.centroid.x < mid ? left : right) = true;
  if (left && right) return Decision::Turn90;
  if (left) return Decision::TurnRight;
  if (right) return Decision::TurnLeft;
  return Decision::Forward;
}

struct ObstacleResult {
  BinaryMask mask;
  std::vector<Blob> blobs;
  Decision decision = Decision::Forward;
};

inline ObstacleResult detect_obstacles(const DisparityMap& dm, const StereoRig& rig, const ObstacleParams& p) {
  p.validate();
  ObstacleResult r;
  r.mask = segment_near(dm, rig, p.z_near, p.z_far);
  r.blobs = find_blobs(r.mask, p.min_area);
  r.decision = decide(r.blobs, dm.width);
  return r;
}

inline GrayImage mask_to_gray(const BinaryMask& m) {
  GrayImage g(m.width, m.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) g.data[i] = m.bits[i] ? 255 : 0;
  return g;
}

}  // namespace stereonav
