#include <gtest/gtest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "stereonav/pointcloud.hpp"

using namespace stereonav;

namespace {

ColoredPoint pt(double x, double y, double z, std::uint8_t c = 0) { return {{x, y, z}, {c, c, c}}; }

std::vector<ColoredPoint> blob(int n, Point3 centre, double spread, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<ColoredPoint> out;
  for (int i = 0; i < n; ++i) out.push_back(pt(centre.x + u(rng), centre.y + u(rng), centre.z + u(rng)));
  return out;
}

// Single-linkage sizes by O(n^2) flood fill over pairwise distances.
std::vector<int> oracle_cluster_sizes(const std::vector<ColoredPoint>& pts, double radius) {
  const std::size_t n = pts.size();
  std::vector<int> label(n, -1), sizes;
  for (std::size_t s = 0; s < n; ++s) {
    if (label[s] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    sizes.push_back(0);
    std::vector<std::size_t> stack{s};
    label[s] = id;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      ++sizes[id];
      for (std::size_t j = 0; j < n; ++j)
        if (label[j] < 0 && distance(pts[i].position, pts[j].position) <= radius) {
          label[j] = id;
          stack.push_back(j);
        }
    }
  }
  std::vector<int> per_point(n);
  for (std::size_t i = 0; i < n; ++i) per_point[i] = sizes[label[i]];
  return per_point;
}

bool same_points(const PointCloud& a, const PointCloud& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p = a.points[i];
    const auto& q = b.points[i];
    if (p.position.x != q.position.x || p.position.y != q.position.y || p.position.z != q.position.z ||
        !(p.color == q.color))
      return false;
  }
  return true;
}

}  // namespace

TEST(CloudFromDisparity, PrincipalPoint) {
  const auto rig = default_rig();
  DisparityMap dm(640, 480, 0, 64);
  dm.at(320, 240) = static_cast<std::uint16_t>(depth_to_disparity(500, 0.063, 1.0) * 16);  // 31.5 px
  ColorImage rgb(640, 480);
  rgb.at(320, 240) = {10, 20, 30};
  const auto cloud = cloud_from_disparity(dm, rgb, build_reprojection_matrix(rig));
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_NEAR(cloud.points[0].position.x, 0.0, 1e-12);
  EXPECT_NEAR(cloud.points[0].position.y, 0.0, 1e-12);
  EXPECT_NEAR(cloud.points[0].position.z, 1.0, 1e-12);
  EXPECT_EQ(cloud.points[0].color, (Rgb{10, 20, 30}));
}

TEST(CloudFromDisparity, CountsAndDepthBound) {
  const auto rig = default_rig();
  const auto q = build_reprojection_matrix(rig);
  EXPECT_TRUE(cloud_from_disparity(DisparityMap(64, 48, 0, 64), ColorImage(64, 48), q).empty());
  std::mt19937_64 rng(3);
  DisparityMap dm(64, 48, 0, 64);
  std::size_t n = 0;
  int min_valid = 1 << 20;
  for (auto& v : dm.data)
    if (rng() % 3 == 0) {
      v = static_cast<std::uint16_t>(16 + rng() % (63 * 16));
      min_valid = std::min(min_valid, int(v));
      ++n;
    }
  const auto cloud = cloud_from_disparity(dm, ColorImage(64, 48), q);
  EXPECT_EQ(cloud.size(), n);
  const double z_max = 500 * 0.063 / (min_valid / 16.0);
  for (const auto& p : cloud.points) {
    EXPECT_GT(p.position.z, 0.0);
    EXPECT_LE(p.position.z, z_max + 1e-12);
  }
  EXPECT_THROW(cloud_from_disparity(dm, ColorImage(63, 48), q), Error);
}

TEST(FilterCloud, DropsIsolatedOutliers) {
  PointCloud c;
  c.points = blob(200, {0, 0, 1}, 0.05, 1);
  c.points.push_back(pt(1, 1, 2));
  c.points.push_back(pt(-1, 0.5, 2));
  c.points.push_back(pt(0.3, -1, 3));
  CloudFilterParams p;
  p.min_cluster = 10;
  const auto out = filter_cloud(c, p);
  EXPECT_EQ(out.size(), 200u);
  const auto sizes = oracle_cluster_sizes(c.points, p.cluster_radius);
  for (int i = 200; i < 203; ++i) EXPECT_EQ(sizes[i], 1);
}

TEST(FilterCloud, AgreesWithPairwiseOracle) {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    PointCloud c;
    for (int k = 0; k < 6; ++k) {
      auto b = blob(5 + static_cast<int>(rng() % 40), {u(rng), u(rng), 2 + u(rng)}, 0.03 + 0.03 * (k % 3), seed * 10 + k);
      c.points.insert(c.points.end(), b.begin(), b.end());
    }
    for (int k = 0; k < 30; ++k) c.points.push_back(pt(u(rng), u(rng), 2 + u(rng)));
    CloudFilterParams p;
    p.min_cluster = 12;
    p.cluster_radius = 0.04 + 0.01 * static_cast<double>(seed % 4);
    const auto sizes = oracle_cluster_sizes(c.points, p.cluster_radius);
    PointCloud expected;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (sizes[i] >= p.min_cluster) expected.points.push_back(c.points[i]);
    const auto out = filter_cloud(c, p);
    EXPECT_TRUE(same_points(out, expected)) << "seed " << seed;
    EXPECT_TRUE(same_points(filter_cloud(out, p), out)) << "idempotence, seed " << seed;
  }
}

TEST(FilterCloud, RangeCutAndEmpty) {
  PointCloud c;
  c.points = blob(50, {0, 0, 6}, 0.01, 2);
  CloudFilterParams p;
  p.min_cluster = 1;
  EXPECT_TRUE(filter_cloud(c, p).empty());
  p.max_range = 7;
  EXPECT_EQ(filter_cloud(c, p).size(), 50u);
  EXPECT_TRUE(filter_cloud(PointCloud{}, p).empty());
  p.cluster_radius = 0;
  EXPECT_THROW(filter_cloud(c, p), Error);
}

TEST(TransformCloud, Examples) {
  PointCloud c;
  c.points = blob(20, {1, 2, 0.5}, 1.0, 4);
  EXPECT_TRUE(same_points(transform_cloud(c, Pose2D{}), c));
  const auto shifted = transform_cloud(c, Pose2D{1, 2, 0});
  const auto flipped = transform_cloud(c, Pose2D{0, 0, std::numbers::pi});
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_DOUBLE_EQ(shifted.points[i].position.x, c.points[i].position.x + 1);
    EXPECT_DOUBLE_EQ(shifted.points[i].position.y, c.points[i].position.y + 2);
    EXPECT_EQ(shifted.points[i].position.z, c.points[i].position.z);
    EXPECT_NEAR(flipped.points[i].position.x, -c.points[i].position.x, 1e-12);
    EXPECT_NEAR(flipped.points[i].position.y, -c.points[i].position.y, 1e-12);
    EXPECT_EQ(flipped.points[i].position.z, c.points[i].position.z);
  }
}

TEST(TransformCloud, RigidMotion) {
  PointCloud c;
  c.points = blob(60, {0, 0, 0}, 3.0, 5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 20; ++k) {
    const auto t = transform_cloud(c, Pose2D{u(rng), u(rng), u(rng)});
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j)
        ASSERT_NEAR(distance(t.points[i].position, t.points[j].position),
                    distance(c.points[i].position, c.points[j].position), 1e-9);
  }
}

TEST(CameraToBody, Axes) {
  PointCloud c;
  c.points = {pt(0.1, -0.2, 2.0)};
  const auto b = camera_to_body(c, 0.25);
  EXPECT_DOUBLE_EQ(b.points[0].position.x, 2.0);
  EXPECT_DOUBLE_EQ(b.points[0].position.y, -0.1);
  EXPECT_DOUBLE_EQ(b.points[0].position.z, 0.45);
}

TEST(MergeClouds, Counts) {
  EXPECT_TRUE(merge_clouds({}).empty());
  PointCloud a, b;
  a.points = blob(100, {0, 0, 0}, 1, 7);
  b.points = blob(50, {0, 0, 0}, 1, 8);
  EXPECT_TRUE(same_points(merge_clouds({a}), a));
  const auto m = merge_clouds({a, b});
  EXPECT_EQ(m.size(), 150u);
  EXPECT_EQ(m.points[100].position.x, b.points[0].position.x);
}

TEST(Ply, RoundTrip) {
  std::mt19937_64 rng(9);
  PointCloud c;
  c.source_pose = Pose2D{1.5, -2.25, 0.5};
  for (int i = 0; i < 500; ++i) {
    auto q = [&] { return static_cast<double>(static_cast<long long>(rng() % 20000001) - 10000000) / 1e6; };
    c.points.push_back({{q(), q(), q()},
                        {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                         static_cast<std::uint8_t>(rng())}});
  }
  const auto dir = std::filesystem::temp_directory_path() / "stereonav_ply_test";
  write_ply(dir / "c.ply", c);
  const auto back = read_ply(dir / "c.ply");
  EXPECT_TRUE(same_points(back, c));
  EXPECT_EQ(back.source_pose.x, 1.5);
  EXPECT_EQ(back.source_pose.theta, 0.5);
  EXPECT_EQ(encode_ply(back), encode_ply(c));
  std::filesystem::remove_all(dir);

  const std::string text = encode_ply(c);
  EXPECT_EQ(text.rfind("ply\nformat ascii 1.0\n", 0), 0u);
  EXPECT_NE(text.find("element vertex 500\n"), std::string::npos);
  EXPECT_THROW(decode_ply("ply\nformat ascii 1.0\nelement vertex 2\nend_header\n1 2 3 4 5 6\n"), Error);
}
