#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "stereonav/mapping.hpp"

using namespace stereonav;

namespace {

OccupancyGrid centred_grid() { return OccupancyGrid(100, 100, 0.05, -2.5, -2.5); }

UltrasoundReading reading(double range, Pose2D pose, bool max_flag = false) {
  UltrasoundReading r;
  r.range = range;
  r.pose = pose;
  r.max_range_flag = max_flag;
  return r;
}

std::vector<UltrasoundReading> random_readings(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-1.5, 1.5), ang(-3.14, 3.14), range(0.2, 2.5);
  std::vector<UltrasoundReading> out;
  for (int i = 0; i < n; ++i) out.push_back(reading(range(rng), {pos(rng), pos(rng), ang(rng)}, rng() % 5 == 0));
  return out;
}

}  // namespace

TEST(IntegrateReading, RayMarchExample) {
  auto g = centred_grid();
  integrate_reading(g, reading(1.0, {0, 0, 0}), SensorGeometry{});
  const int j = g.cell_y(0.0);
  const int hit = g.cell_x(1.0);
  EXPECT_EQ(hit, 70);
  EXPECT_DOUBLE_EQ(g.log_odds(hit, j), 0.9);
  int free_cells = 0;
  for (int jj = 0; jj < g.rows(); ++jj)
    for (int i = 0; i < g.cols(); ++i) {
      const double v = g.log_odds(i, jj);
      if (v < 0) {
        ++free_cells;
        EXPECT_EQ(jj, j);
        EXPECT_GT(i, g.cell_x(0.0));
        EXPECT_LT(i, hit);
        EXPECT_DOUBLE_EQ(v, -0.4);
      }
    }
  EXPECT_EQ(free_cells, 19);
  EXPECT_EQ(query_cell(g, 0.5, 0.0), CellState::Unknown);  // one miss is not yet below -1
}

TEST(IntegrateReading, MaxRangeOnlyClears) {
  auto g = centred_grid();
  integrate_reading(g, reading(0, {0, 0, 0.3}, true), SensorGeometry{0.0, 2.0});
  EXPECT_TRUE(std::all_of(g.cells().begin(), g.cells().end(), [](double v) { return v <= 0.0; }));
  EXPECT_LT(*std::min_element(g.cells().begin(), g.cells().end()), 0.0);
}

TEST(IntegrateReading, Saturates) {
  auto g = centred_grid();
  for (int k = 0; k < 20; ++k) integrate_reading(g, reading(1.0, {0, 0, 0}, false), SensorGeometry{});
  EXPECT_DOUBLE_EQ(g.log_odds(70, 50), 4.0);
  EXPECT_DOUBLE_EQ(g.log_odds(60, 50), -4.0);
  EXPECT_EQ(query_cell(g, 1.02, 0.01), CellState::Occupied);
  EXPECT_EQ(query_cell(g, 0.5, 0.01), CellState::Free);
}

TEST(IntegrateReading, SensorAngleAndClipping) {
  auto g = centred_grid();
  integrate_reading(g, reading(1.0, {0, 0, 0}), SensorGeometry{std::numbers::pi / 2, 3.0});
  EXPECT_GT(g.log_odds(g.cell_x(0.0), g.cell_y(1.0)), 0.0);
  // A return far outside the grid only touches the cells inside.
  auto small = OccupancyGrid(10, 10, 0.05, 0, 0);
  integrate_reading(small, reading(2.0, {0.1, 0.1, 0}), SensorGeometry{});
  EXPECT_TRUE(std::all_of(small.cells().begin(), small.cells().end(), [](double v) { return v <= 0.0; }));
}

TEST(QueryCell, Examples) {
  auto g = centred_grid();
  EXPECT_EQ(query_cell(g, 0.3, 0.3), CellState::Unknown);
  EXPECT_EQ(query_cell(g, 100, 0), CellState::Unknown);
  EXPECT_EQ(query_cell(g, -2.51, 0), CellState::Unknown);
}

TEST(Mapping, OrderInvariantBelowSaturation) {
  const auto readings = random_readings(12, 3);
  auto a = centred_grid();
  for (const auto& r : readings) integrate_reading(a, r, SensorGeometry{});
  auto shuffled = readings;
  std::mt19937_64 rng(8);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto b = centred_grid();
    for (const auto& r : shuffled) integrate_reading(b, r, SensorGeometry{});
    for (std::size_t i = 0; i < a.cells().size(); ++i) {
      ASSERT_LT(std::abs(a.cells()[i]), 4.0);
      ASSERT_NEAR(a.cells()[i], b.cells()[i], 1e-12);
    }
  }
}

TEST(Mapping, ConservativeOccupancy) {
  const auto readings = random_readings(300, 4);
  auto g = centred_grid();
  std::set<std::pair<int, int>> hits;
  for (const auto& r : readings) {
    integrate_reading(g, r, SensorGeometry{});
    if (!r.max_range_flag) hits.emplace(g.cell_x(r.pose.x + r.range * std::cos(r.pose.theta)),
                                        g.cell_y(r.pose.y + r.range * std::sin(r.pose.theta)));
  }
  int occupied = 0;
  for (int j = 0; j < g.rows(); ++j)
    for (int i = 0; i < g.cols(); ++i)
      if (g.state(i, j) == CellState::Occupied) {
        ++occupied;
        EXPECT_TRUE(hits.count({i, j})) << i << "," << j;
      }
  EXPECT_GT(occupied, 0);
}

TEST(TraceCells, MatchesDenseSampling) {
  const auto g = centred_grid();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> pos(-1, 1), ang(-3.14, 3.14), len(0.1, 1.2);
  for (int k = 0; k < 200; ++k) {
    const double x0 = pos(rng), y0 = pos(rng), a = ang(rng), l = len(rng);
    const double dx = std::cos(a), dy = std::sin(a);
    const auto cells = detail::trace_cells(g, x0, y0, dx, dy, l);
    std::set<std::pair<int, int>> dda(cells.begin(), cells.end());
    for (int s = 0; s <= 4000; ++s) {
      const double t = l * s / 4000.0;
      const auto c = std::make_pair(g.cell_x(x0 + t * dx), g.cell_y(y0 + t * dy));
      ASSERT_TRUE(dda.count(c)) << "sample " << s << " of ray " << k;
    }
    for (std::size_t i = 1; i < cells.size(); ++i) {
      const int step = std::abs(cells[i].first - cells[i - 1].first) + std::abs(cells[i].second - cells[i - 1].second);
      ASSERT_EQ(step, 1);
    }
  }
}

TEST(OccupancyExport, PgmAndSidecar) {
  OccupancyGrid g(3, 2, 0.1, -0.1, -0.2);
  g.add(0, 0, 4.0);
  g.add(2, 1, -4.0);
  const auto img = occupancy_to_pgm(g);
  EXPECT_EQ(img.at(0, 1), 0);    // grid (0,0) is the bottom row
  EXPECT_EQ(img.at(2, 0), 255);
  EXPECT_EQ(img.at(1, 0), 128);
  EXPECT_EQ(occupancy_sidecar(g), "resolution = 0.100000\norigin_x = -0.100000\norigin_y = -0.200000\ncols = 3\nrows = 2\n");
}

TEST(Readings, CsvRoundTrip) {
  const auto readings = random_readings(20, 5);
  std::string csv = "sensor,range,x,y,theta\n";
  for (auto r : readings) csv += format_reading(r);
  std::istringstream in(csv);
  const auto back = parse_readings(in);
  ASSERT_EQ(back.size(), readings.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].max_range_flag, readings[i].max_range_flag);
    if (!back[i].max_range_flag) {
      EXPECT_NEAR(back[i].range, readings[i].range, 5e-7);
    }
    EXPECT_NEAR(back[i].pose.theta, readings[i].pose.theta, 5e-7);
  }
  std::istringstream bad("0,1.0,2,3\n");
  EXPECT_THROW(parse_readings(bad), Error);
  std::istringstream bad_sensor("7,1.0,2,3,0\n");
  EXPECT_THROW(parse_readings(bad_sensor), Error);
}
