#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "stereonav/error.hpp"
#include "stereonav/image.hpp"
#include "stereonav/keyvalue.hpp"
#include "stereonav/pnm.hpp"
#include "stereonav/pose.hpp"

namespace stereonav {

struct LogOddsModel {
  double hit = 0.9;
  double miss = -0.4;
  double clamp_min = -4.0;
  double clamp_max = 4.0;
  double threshold = 1.0;
};

enum class CellState { Occupied, Free, Unknown };

inline const char* to_string(CellState s) {
  switch (s) {
    case CellState::Occupied: return "Occupied";
    case CellState::Free: return "Free";
    case CellState::Unknown: return "Unknown";
  }
  return "Unknown";
}

/// Log-odds occupancy grid. Cell (i, j) covers
/// [origin_x + i*res, origin_x + (i+1)*res) x [origin_y + j*res, ...).
class OccupancyGrid {
 public:
  OccupancyGrid(int cols, int rows, double resolution, double origin_x, double origin_y, LogOddsModel model = {})
      : cols_(cols), rows_(rows), resolution_(resolution), origin_x_(origin_x), origin_y_(origin_y), model_(model),
        cells_(static_cast<std::size_t>(cols) * rows, 0.0) {
    if (cols <= 0 || rows <= 0) throw Error(ErrorCode::InvalidArgument, "grid size must be positive");
    if (!(resolution > 0.0)) throw Error(ErrorCode::InvalidArgument, "resolution must be > 0");
  }

  /// Grid covering a world rectangle with a margin of one cell.
  static OccupancyGrid covering(double width_m, double height_m, double resolution, LogOddsModel model = {}) {
    const int cols = static_cast<int>(std::ceil(width_m / resolution)) + 2;
    const int rows = static_cast<int>(std::ceil(height_m / resolution)) + 2;
    return OccupancyGrid(cols, rows, resolution, -resolution, -resolution, model);
  }

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  double resolution() const { return resolution_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  const LogOddsModel& model() const { return model_; }

  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < cols_ && j < rows_; }

  // The small bias keeps points that sit exactly on a cell edge (up to
  // rounding) in the cell they start.
  int cell_x(double x) const { return static_cast<int>(std::floor((x - origin_x_) / resolution_ + 1e-9)); }
  int cell_y(double y) const { return static_cast<int>(std::floor((y - origin_y_) / resolution_ + 1e-9)); }

  double log_odds(int i, int j) const { return cells_[index(i, j)]; }
  double cell_center_x(int i) const { return origin_x_ + (i + 0.5) * resolution_; }
  double cell_center_y(int j) const { return origin_y_ + (j + 0.5) * resolution_; }

  void add(int i, int j, double delta) {
    if (!in_bounds(i, j)) return;
    double& c = cells_[index(i, j)];
    c = std::clamp(c + delta, model_.clamp_min, model_.clamp_max);
  }

  CellState state(int i, int j) const {
    if (!in_bounds(i, j)) return CellState::Unknown;
    const double l = log_odds(i, j);
    if (l > model_.threshold) return CellState::Occupied;
    if (l < -model_.threshold) return CellState::Free;
    return CellState::Unknown;
  }

  const std::vector<double>& cells() const { return cells_; }

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * cols_ + i; }

  int cols_;
  int rows_;
  double resolution_;
  double origin_x_;
  double origin_y_;
  LogOddsModel model_;
  std::vector<double> cells_;
};

/// Mounting of one range sensor relative to the robot heading.
struct SensorGeometry {
  double angle = 0.0;
  double max_range = 3.0;
  /// Beam cone half-width; only 0 (single ray) is modelled.
  double cone_half_angle = 0.0;
};

struct UltrasoundReading {
  int sensor_index = 0;
  /// Metres; ignored when max_range_flag is set.
  double range = 0.0;
  bool max_range_flag = false;
  Pose2D pose;
};

namespace detail {

// Cells crossed by the segment from (x0, y0) along unit direction (dx, dy)
// for `length` metres, in traversal order (grid DDA).
inline std::vector<std::pair<int, int>> trace_cells(const OccupancyGrid& g, double x0, double y0, double dx, double dy,
                                                    double length) {
  std::vector<std::pair<int, int>> cells;
  int i = g.cell_x(x0);
  int j = g.cell_y(y0);
  cells.emplace_back(i, j);
  if (!(length > 0.0)) return cells;
  const double res = g.resolution();
  const int step_i = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_j = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const double inf = std::numeric_limits<double>::infinity();
  auto boundary = [&](double origin, double pos, int cell, int step, double dir) {
    if (step == 0) return inf;
    const double edge = origin + (cell + (step > 0 ? 1 : 0)) * res;
    return (edge - pos) / dir;
  };
  double t_max_x = boundary(g.origin_x(), x0, i, step_i, dx);
  double t_max_y = boundary(g.origin_y(), y0, j, step_j, dy);
  const double t_dx = step_i == 0 ? inf : res / std::abs(dx);
  const double t_dy = step_j == 0 ? inf : res / std::abs(dy);
  // An end point sitting on a cell edge belongs to the cell beyond it.
  const double t_end = length + 1e-9;
  while (true) {
    if (t_max_x < t_max_y) {
      if (t_max_x > t_end) break;
      i += step_i;
      t_max_x += t_dx;
    } else {
      if (t_max_y > t_end) break;
      j += step_j;
      t_max_y += t_dy;
    }
    cells.emplace_back(i, j);
  }
  return cells;
}

}  // namespace detail

/// Single-ray inverse sensor model. Cells from the one after the sensor's
/// own cell up to range - resolution become freer; the cell holding the
/// return becomes more occupied. Max-range readings only clear. Cells
/// outside the grid are skipped.
inline void integrate_reading(OccupancyGrid& g, const UltrasoundReading& r, const SensorGeometry& sensor) {
  const double heading = r.pose.theta + sensor.angle;
  const double dx = std::cos(heading);
  const double dy = std::sin(heading);
  const double range = r.max_range_flag ? sensor.max_range : std::clamp(r.range, 0.0, sensor.max_range);
  const int hit_i = g.cell_x(r.pose.x + dx * range);
  const int hit_j = g.cell_y(r.pose.y + dy * range);
  const double free_length = range - g.resolution();
  if (free_length > 0.0) {
    const auto cells = detail::trace_cells(g, r.pose.x, r.pose.y, dx, dy, free_length);
    for (std::size_t k = 1; k < cells.size(); ++k) {
      const auto [i, j] = cells[k];
      if (!r.max_range_flag && i == hit_i && j == hit_j) continue;
      g.add(i, j, g.model().miss);
    }
  }
  if (!r.max_range_flag) g.add(hit_i, hit_j, g.model().hit);
}

inline CellState query_cell(const OccupancyGrid& g, double x, double y) { return g.state(g.cell_x(x), g.cell_y(y)); }

/// Free=255, Unknown=128, Occupied=0; image row 0 is the grid's top (max y).
inline GrayImage occupancy_to_pgm(const OccupancyGrid& g) {
  GrayImage img(g.cols(), g.rows());
  for (int j = 0; j < g.rows(); ++j) {
    for (int i = 0; i < g.cols(); ++i) {
      const auto s = g.state(i, j);
      img.at(i, g.rows() - 1 - j) = s == CellState::Free ? 255 : (s == CellState::Occupied ? 0 : 128);
    }
  }
  return img;
}

inline std::string occupancy_sidecar(const OccupancyGrid& g) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "resolution = %.6f\norigin_x = %.6f\norigin_y = %.6f\ncols = %d\nrows = %d\n",
                g.resolution(), g.origin_x(), g.origin_y(), g.cols(), g.rows());
  return buf;
}

/// Writes `<stem>.pgm` and the `<stem>.txt` sidecar.
inline void write_occupancy(const std::filesystem::path& pgm_path, const OccupancyGrid& g) {
  write_pgm(pgm_path, occupancy_to_pgm(g));
  auto sidecar = pgm_path;
  sidecar.replace_extension(".txt");
  write_file_atomic(sidecar, occupancy_sidecar(g));
}

/// Reading log CSV: `sensor,range,x,y,theta` with `max` in the range column
/// for a max-range return.
inline std::string format_reading(const UltrasoundReading& r) {
  char buf[160];
  if (r.max_range_flag)
    std::snprintf(buf, sizeof buf, "%d,max,%.6f,%.6f,%.6f\n", r.sensor_index, r.pose.x, r.pose.y, r.pose.theta);
  else
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f,%.6f\n", r.sensor_index, r.range, r.pose.x, r.pose.y,
                  r.pose.theta);
  return buf;
}

inline std::vector<UltrasoundReading> parse_readings(std::istream& in) {
  std::vector<UltrasoundReading> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body(trim(line));
    if (body.empty() || body[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(body);
    std::string field;
    while (std::getline(ss, field, ',')) fields.emplace_back(trim(field));
    auto fail = [&] {
      throw Error(ErrorCode::ParseError, "readings line " + std::to_string(lineno) + ": expected sensor,range,x,y,theta");
    };
    if (fields.size() != 5) fail();
    if (lineno == 1 && fields[0] == "sensor") continue;
    UltrasoundReading r;
    try {
      std::size_t used = 0;
      r.sensor_index = std::stoi(fields[0], &used);
      if (used != fields[0].size()) fail();
      if (fields[1] == "max") {
        r.max_range_flag = true;
      } else {
        r.range = std::stod(fields[1]);
      }
      r.pose = Pose2D{std::stod(fields[2]), std::stod(fields[3]), std::stod(fields[4])};
    } catch (const std::logic_error&) {
      fail();
    }
    if (r.sensor_index < 0 || r.sensor_index > 2) fail();
    out.push_back(r);
  }
  return out;
}

}  // namespace stereonav
