#pragma once

#include <array>
#include <cmath>
#include <string>

#include "stereonav/error.hpp"

namespace stereonav {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

struct PixelCoord {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Point3& a, const Point3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

/// Pinhole intrinsics. Pixel coordinates are continuous with integer values
/// at pixel centres.
struct CameraIntrinsics {
  double f = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  void validate() const {
    if (!(f > 0.0) || !std::isfinite(f)) throw Error(ErrorCode::InvalidArgument, "focal length must be > 0");
    if (width <= 0 || height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
    if (!(cx >= 0.0 && cx < width)) throw Error(ErrorCode::InvalidArgument, "cx must lie in [0, width)");
    if (!(cy >= 0.0 && cy < height)) throw Error(ErrorCode::InvalidArgument, "cy must lie in [0, height)");
  }
};

/// Horizontal stereo pair sharing one focal length. The right camera sits
/// baseline_m to the right of the left one with identical orientation.
struct StereoRig {
  CameraIntrinsics left;
  CameraIntrinsics right;
  double baseline_m = 0.063;

  double focal() const { return left.f; }
  double right_cx() const { return right.cx; }
  int width() const { return left.width; }
  int height() const { return left.height; }

  void validate() const {
    left.validate();
    right.validate();
    if (!(baseline_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "baseline_m must be > 0");
    if (left.f != right.f) throw Error(ErrorCode::InvalidArgument, "left and right focal lengths differ");
    if (left.width != right.width || left.height != right.height)
      throw Error(ErrorCode::InvalidArgument, "left and right image sizes differ");
  }
};

inline StereoRig make_rig(double f, double cx, double cy, double right_cx, double baseline_m, int width = 640,
                          int height = 480) {
  StereoRig rig;
  rig.left = CameraIntrinsics{f, cx, cy, width, height};
  rig.right = CameraIntrinsics{f, right_cx, cy, width, height};
  rig.baseline_m = baseline_m;
  rig.validate();
  return rig;
}

/// 640x480 rig with the 63 mm baseline and a 500 px focal length.
inline StereoRig default_rig() { return make_rig(500.0, 320.0, 240.0, 320.0, 0.063); }

/// Z = f * T / d.
inline double triangulate_depth(double f, double baseline_m, double d) {
  if (!(d > 0.0)) throw Error(ErrorCode::NonPositiveDisparity, "disparity must be > 0");
  if (!(f > 0.0) || !(baseline_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "f and baseline must be > 0");
  return f * baseline_m / d;
}

inline double depth_to_disparity(double f, double baseline_m, double z) {
  if (!(z > 0.0)) throw Error(ErrorCode::NonPositiveDepth, "depth must be > 0");
  if (!(f > 0.0) || !(baseline_m > 0.0)) throw Error(ErrorCode::InvalidArgument, "f and baseline must be > 0");
  return f * baseline_m / z;
}

struct ReprojectionMatrix {
  std::array<std::array<double, 4>, 4> q{};

  double operator()(int r, int c) const { return q[r][c]; }
};

// Layout:
//   [ 1  0  0      -cx           ]
//   [ 0  1  0      -cy           ]
//   [ 0  0  0       f            ]
//   [ 0  0  1/T   (c'x - cx)/T   ]
// The translation is taken as +T, so W = (d - (cx - c'x)) / T and the
// reprojected Z = f*T/d is positive for every positive disparity.
inline ReprojectionMatrix build_reprojection_matrix(const StereoRig& rig) {
  rig.validate();
  const double t = rig.baseline_m;
  ReprojectionMatrix m;
  m.q[0] = {1.0, 0.0, 0.0, -rig.left.cx};
  m.q[1] = {0.0, 1.0, 0.0, -rig.left.cy};
  m.q[2] = {0.0, 0.0, 0.0, rig.focal()};
  m.q[3] = {0.0, 0.0, 1.0 / t, (rig.right_cx() - rig.left.cx) / t};
  return m;
}

inline constexpr double kDegenerateWTolerance = 1e-12;

inline Point3 reproject_pixel(const ReprojectionMatrix& m, double x, double y, double d) {
  if (!(d > 0.0)) throw Error(ErrorCode::NonPositiveDisparity, "disparity must be > 0");
  const std::array<double, 4> in{x, y, d, 1.0};
  std::array<double, 4> out{};
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) out[r] += m.q[r][c] * in[c];
  if (std::abs(out[3]) < kDegenerateWTolerance) throw Error(ErrorCode::DegenerateW, "homogeneous W too small");
  return Point3{out[0] / out[3], out[1] / out[3], out[2] / out[3]};
}

inline PixelCoord project_point(const CameraIntrinsics& cam, const Point3& p) {
  if (!(p.z > 0.0)) throw Error(ErrorCode::BehindCamera, "point must have z > 0");
  return PixelCoord{cam.cx + cam.f * p.x / p.z, cam.cy + cam.f * p.y / p.z};
}

/// Projects a left-camera-frame point into the right camera.
inline PixelCoord project_point_right(const StereoRig& rig, const Point3& p) {
  return project_point(rig.right, Point3{p.x - rig.baseline_m, p.y, p.z});
}

}  // namespace stereonav
