#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stereonav/error.hpp"
#include "stereonav/keyvalue.hpp"

namespace stereonav {

/// Axis-aligned box standing on the floor: footprint [x, x+w] x [y, y+h],
/// vertical extent [0, height]. `seed` selects its surface texture.
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;
  double height = 0.0;
  std::uint64_t seed = 0;

  bool contains(double px, double py) const { return px >= x && px <= x + w && py >= y && py <= y + h; }
};

struct WorldModel {
  double floor_w = 0.0;
  double floor_h = 0.0;
  std::vector<Box> boxes;

  void validate() const {
    if (floor_w < 0.0 || floor_h < 0.0) throw Error(ErrorCode::ValidationError, "floor extent must be >= 0");
    for (const auto& b : boxes) {
      if (!(b.w > 0.0) || !(b.h > 0.0) || !(b.height > 0.0))
        throw Error(ErrorCode::ValidationError, "box dimensions must be > 0");
      if (b.x < 0.0 || b.y < 0.0 || b.x + b.w > floor_w + 1e-9 || b.y + b.h > floor_h + 1e-9)
        throw Error(ErrorCode::ValidationError, "box lies outside the floor extent");
    }
  }
};

/// World files hold `floor w h` and `box x y w h height seed` lines (metres);
/// `#` starts a comment.
inline WorldModel parse_world(std::istream& in) {
  WorldModel world;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    std::istringstream ls(std::string(trim(std::string_view(line).substr(0, hash))));
    ls.imbue(std::locale::classic());
    std::string kind;
    if (!(ls >> kind)) continue;
    auto fail = [&](const std::string& msg) {
      throw Error(ErrorCode::ParseError, "world line " + std::to_string(lineno) + ": " + msg);
    };
    if (kind == "floor") {
      if (!(ls >> world.floor_w >> world.floor_h)) fail("expected 'floor w h'");
    } else if (kind == "box") {
      Box b;
      if (!(ls >> b.x >> b.y >> b.w >> b.h >> b.height >> b.seed)) fail("expected 'box x y w h height seed'");
      world.boxes.push_back(b);
    } else {
      fail("unknown entry '" + kind + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing text '" + extra + "'");
  }
  world.validate();
  return world;
}

inline WorldModel load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_world(in);
}

/// Entry distance along a planar ray into a box footprint, 0 when the origin
/// is already inside. Empty when the ray misses.
inline std::optional<double> ray_box_2d(double ox, double oy, double dx, double dy, const Box& b) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  const double lo[2] = {b.x, b.y};
  const double hi[2] = {b.x + b.w, b.y + b.h};
  const double o[2] = {ox, oy};
  const double d[2] = {dx, dy};
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return t0;
}

/// Distance from a point to the nearest box footprint (0 inside).
inline double point_box_distance(double px, double py, const Box& b) {
  const double dx = std::max({b.x - px, 0.0, px - (b.x + b.w)});
  const double dy = std::max({b.y - py, 0.0, py - (b.y + b.h)});
  return std::hypot(dx, dy);
}

inline double clearance(const WorldModel& world, double px, double py) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : world.boxes) best = std::min(best, point_box_distance(px, py, b));
  return best;
}

}  // namespace stereonav
