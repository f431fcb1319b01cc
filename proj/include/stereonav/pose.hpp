#pragma once

#include <cmath>
#include <numbers>

namespace stereonav {

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

/// Planar pose in the world frame: x, y on the ground plane, theta measured
/// counter-clockwise from +x.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  bool operator==(const Pose2D&) const = default;
};

}  // namespace stereonav
