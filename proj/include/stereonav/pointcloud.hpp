#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <tuple>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "stereonav/error.hpp"
#include "stereonav/geometry.hpp"
#include "stereonav/image.hpp"
#include "stereonav/pnm.hpp"
#include "stereonav/pose.hpp"

namespace stereonav {

struct ColoredPoint {
  Point3 position;
  Rgb color;
};

struct PointCloud {
  std::vector<ColoredPoint> points;
  /// Odometric pose of the robot when the cloud was captured.
  Pose2D source_pose;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct CloudFilterParams {
  int min_cluster = 30;
  double cluster_radius = 0.05;
  double max_range = 5.0;

  void validate() const {
    if (min_cluster < 1) throw Error(ErrorCode::ValidationError, "min_cluster must be >= 1");
    if (!(cluster_radius > 0.0)) throw Error(ErrorCode::ValidationError, "cluster_radius must be > 0");
    if (!(max_range > 0.0)) throw Error(ErrorCode::ValidationError, "max_range must be > 0");
  }
};

/// Reprojects every valid, positive disparity into the left camera frame
/// (x right, y down, z forward) and colours it from `rgb`.
inline PointCloud cloud_from_disparity(const DisparityMap& dm, const ColorImage& rgb, const ReprojectionMatrix& q) {
  if (dm.width != rgb.width || dm.height != rgb.height)
    throw Error(ErrorCode::SizeMismatch, "disparity and colour images differ in size");
  PointCloud cloud;
  cloud.points.reserve(dm.valid_count());
  for (int y = 0; y < dm.height; ++y) {
    for (int x = 0; x < dm.width; ++x) {
      const std::uint16_t v = dm.at(x, y);
      if (v == DisparityMap::kInvalid || v == 0) continue;
      const double d = static_cast<double>(v) / DisparityMap::kScale;
      cloud.points.push_back({reproject_pixel(q, x, y, d), rgb.at(x, y)});
    }
  }
  return cloud;
}

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

inline std::uint64_t voxel_key(std::int64_t x, std::int64_t y, std::int64_t z) {
  constexpr std::int64_t bias = 1 << 20;
  return (static_cast<std::uint64_t>(x + bias) << 42) | (static_cast<std::uint64_t>(y + bias) << 21) |
         static_cast<std::uint64_t>(z + bias);
}

}  // namespace detail

/// Single-linkage cluster labels: points closer than `radius` share a label.
/// Voxels of side radius/sqrt(3) are internally connected, so only pairs of
/// neighbouring voxels need a point-level distance test.
inline std::vector<int> cluster_labels(const std::vector<ColoredPoint>& pts, double radius) {
  const std::size_t n = pts.size();
  std::vector<int> labels(n);
  if (n == 0) return labels;
  const double side = radius / std::sqrt(3.0);
  const double r2 = radius * radius;

  struct Voxel {
    std::int64_t ix, iy, iz;
    std::vector<int> members;
  };
  std::vector<Voxel> voxels;
  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(n / 4 + 16);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = pts[i].position;
    const auto ix = static_cast<std::int64_t>(std::floor(p.x / side));
    const auto iy = static_cast<std::int64_t>(std::floor(p.y / side));
    const auto iz = static_cast<std::int64_t>(std::floor(p.z / side));
    auto [it, inserted] = lookup.try_emplace(detail::voxel_key(ix, iy, iz), static_cast<int>(voxels.size()));
    if (inserted) voxels.push_back(Voxel{ix, iy, iz, {}});
    voxels[it->second].members.push_back(static_cast<int>(i));
  }

  detail::UnionFind uf(voxels.size());
  // Forward half of the neighbour offsets whose voxel gap can be <= radius.
  std::vector<std::array<int, 3>> offsets;
  for (int dx = -2; dx <= 2; ++dx)
    for (int dy = -2; dy <= 2; ++dy)
      for (int dz = -2; dz <= 2; ++dz) {
        if (std::make_tuple(dx, dy, dz) <= std::make_tuple(0, 0, 0)) continue;
        auto gap = [](int k) { return std::max(0, std::abs(k) - 1); };
        const double g = side * std::sqrt(double(gap(dx) * gap(dx) + gap(dy) * gap(dy) + gap(dz) * gap(dz)));
        if (g <= radius) offsets.push_back({dx, dy, dz});
      }

  for (std::size_t a = 0; a < voxels.size(); ++a) {
    const auto& va = voxels[a];
    for (const auto& o : offsets) {
      auto it = lookup.find(detail::voxel_key(va.ix + o[0], va.iy + o[1], va.iz + o[2]));
      if (it == lookup.end()) continue;
      const int b = it->second;
      if (uf.find(static_cast<int>(a)) == uf.find(b)) continue;
      bool linked = false;
      for (int i : va.members) {
        const auto& p = pts[i].position;
        for (int j : voxels[b].members) {
          const auto& q = pts[j].position;
          const double dx = p.x - q.x, dy = p.y - q.y, dz = p.z - q.z;
          if (dx * dx + dy * dy + dz * dz <= r2) {
            linked = true;
            break;
          }
        }
        if (linked) break;
      }
      if (linked) uf.unite(static_cast<int>(a), b);
    }
  }
  for (std::size_t v = 0; v < voxels.size(); ++v)
    for (int i : voxels[v].members) labels[i] = uf.find(static_cast<int>(v));
  return labels;
}

/// Drops points beyond max_range, then every single-linkage cluster with
/// fewer than min_cluster points. Survivors keep their input order.
inline PointCloud filter_cloud(const PointCloud& c, const CloudFilterParams& p) {
  p.validate();
  PointCloud in_range;
  in_range.source_pose = c.source_pose;
  for (const auto& pt : c.points) {
    const auto& q = pt.position;
    if (std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z) <= p.max_range) in_range.points.push_back(pt);
  }
  const auto labels = cluster_labels(in_range.points, p.cluster_radius);
  std::unordered_map<int, int> sizes;
  for (int l : labels) ++sizes[l];
  PointCloud out;
  out.source_pose = c.source_pose;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (sizes[labels[i]] >= p.min_cluster) out.points.push_back(in_range.points[i]);
  return out;
}

/// Camera frame (x right, y down, z forward) to the robot body frame
/// (x forward, y left, z up) for a camera mounted `camera_height` metres above
/// the ground at the robot origin.
inline PointCloud camera_to_body(const PointCloud& c, double camera_height) {
  PointCloud out;
  out.source_pose = c.source_pose;
  out.points.reserve(c.size());
  for (const auto& pt : c.points) {
    const auto& p = pt.position;
    out.points.push_back({Point3{p.z, -p.x, camera_height - p.y}, pt.color});
  }
  return out;
}

/// Planar rigid motion: rotation by pose.theta about the vertical axis, then
/// translation by (pose.x, pose.y). The vertical coordinate is untouched.
inline PointCloud transform_cloud(const PointCloud& c, const Pose2D& pose) {
  const double cs = std::cos(pose.theta);
  const double sn = std::sin(pose.theta);
  PointCloud out;
  out.source_pose = c.source_pose;
  out.points.reserve(c.size());
  for (const auto& pt : c.points) {
    const auto& p = pt.position;
    out.points.push_back({Point3{pose.x + cs * p.x - sn * p.y, pose.y + sn * p.x + cs * p.y, p.z}, pt.color});
  }
  return out;
}

inline PointCloud merge_clouds(const std::vector<PointCloud>& clouds) {
  PointCloud out;
  std::size_t total = 0;
  for (const auto& c : clouds) total += c.size();
  out.points.reserve(total);
  for (const auto& c : clouds) out.points.insert(out.points.end(), c.points.begin(), c.points.end());
  if (!clouds.empty()) out.source_pose = clouds.back().source_pose;
  return out;
}

/// ASCII PLY, coordinates with six decimals. The capture pose is recorded in
/// a comment line.
inline std::string encode_ply(const PointCloud& c) {
  std::string s;
  s.reserve(64 + c.size() * 40);
  char buf[160];
  s += "ply\nformat ascii 1.0\n";
  std::snprintf(buf, sizeof buf, "comment source_pose %.6f %.6f %.6f\n", c.source_pose.x, c.source_pose.y,
                c.source_pose.theta);
  s += buf;
  s += "element vertex " + std::to_string(c.size()) + "\n";
  s += "property float x\nproperty float y\nproperty float z\n";
  s += "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (const auto& pt : c.points) {
    std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %u %u %u\n", pt.position.x, pt.position.y, pt.position.z,
                  unsigned(pt.color.r), unsigned(pt.color.g), unsigned(pt.color.b));
    s += buf;
  }
  return s;
}

inline PointCloud decode_ply(const std::string& text) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw Error(ErrorCode::ParseError, "missing 'ply' magic");
  PointCloud c;
  long long count = -1;
  bool ascii = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string kind;
      ls >> kind;
      ascii = kind == "ascii";
    } else if (word == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw Error(ErrorCode::ParseError, "unsupported PLY element '" + name + "'");
    } else if (word == "comment") {
      std::string tag;
      ls >> tag;
      if (tag == "source_pose") ls >> c.source_pose.x >> c.source_pose.y >> c.source_pose.theta;
    }
  }
  if (!ascii || count < 0) throw Error(ErrorCode::ParseError, "expected ascii PLY with a vertex element");
  c.points.reserve(static_cast<std::size_t>(count));
  for (long long i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "truncated PLY vertex list");
    std::istringstream ls(line);
    ls.imbue(std::locale::classic());
    ColoredPoint pt;
    unsigned r = 0, g = 0, b = 0;
    if (!(ls >> pt.position.x >> pt.position.y >> pt.position.z >> r >> g >> b) || r > 255 || g > 255 || b > 255)
      throw Error(ErrorCode::ParseError, "malformed PLY vertex on line " + std::to_string(i + 1));
    pt.color = Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    c.points.push_back(pt);
  }
  return c;
}

inline void write_ply(const std::filesystem::path& path, const PointCloud& c) { write_file_atomic(path, encode_ply(c)); }
inline PointCloud read_ply(const std::filesystem::path& path) { return decode_ply(read_file(path)); }

}  // namespace stereonav
