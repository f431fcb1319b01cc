#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "stereonav/error.hpp"
#include "stereonav/image.hpp"

namespace stereonav {

struct MatcherParams {
  int window = 9;
  int min_disp = 0;
  int max_disp = 64;
  int prefilter_cap = 31;
  int texture_threshold = 10;
  int uniqueness_ratio = 15;
  /// Row bands matched in parallel; 0 picks the hardware concurrency. The
  /// output does not depend on this value.
  int threads = 0;

  void validate(int image_width) const {
    if (window < 3 || window % 2 == 0)
      throw Error(ErrorCode::ParamsInvalid, "window must be odd and >= 3 (got " + std::to_string(window) + ")");
    if (min_disp < 0 || min_disp >= max_disp || max_disp >= image_width)
      throw Error(ErrorCode::ParamsInvalid, "need 0 <= min_disp < max_disp < width");
    if (prefilter_cap < 1 || prefilter_cap > 127) throw Error(ErrorCode::ParamsInvalid, "prefilter_cap must be in [1, 127]");
    if (texture_threshold < 0) throw Error(ErrorCode::ParamsInvalid, "texture_threshold must be >= 0");
    if (uniqueness_ratio < 0 || uniqueness_ratio > 100)
      throw Error(ErrorCode::ParamsInvalid, "uniqueness_ratio must be in [0, 100]");
    if (threads < 0) throw Error(ErrorCode::ParamsInvalid, "threads must be >= 0");
  }
};

/// Clamped horizontal Sobel response re-centred on 128. Constant regions map
/// to exactly 128 and a brightness offset leaves the output unchanged.
inline GrayImage prefilter(const GrayImage& img, int cap) {
  if (cap < 1 || cap > 127) throw Error(ErrorCode::ParamsInvalid, "prefilter_cap must be in [1, 127]");
  GrayImage out(img.width, img.height, 128);
  if (img.width == 0 || img.height == 0) return out;
  auto px = [&](int x, int y) {
    x = std::clamp(x, 0, img.width - 1);
    y = std::clamp(y, 0, img.height - 1);
    return static_cast<int>(img.at(x, y));
  };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int g = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                    (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      out.at(x, y) = static_cast<std::uint8_t>(128 + std::clamp(g, -cap, cap));
    }
  }
  return out;
}

namespace detail {

// Rounds num/den to the nearest integer, halves away from zero. den > 0.
inline int round_div(int num, int den) {
  return num >= 0 ? (num + den / 2) / den : -((-num + den / 2) / den);
}

}  // namespace detail

/// Post-filter for one pixel. `costs[i]` is the window SAD at disparity
/// min_disp + i and `texture` the window's prefiltered texture energy.
/// Returns the x16 fixed-point disparity or DisparityMap::kInvalid.
inline std::uint16_t postfilter(std::span<const int> costs, int texture, const MatcherParams& p) {
  if (texture < p.texture_threshold || costs.empty()) return DisparityMap::kInvalid;
  const int n = static_cast<int>(costs.size());
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (costs[i] < costs[best]) best = i;
  const long long best_cost = costs[best];
  const long long limit = best_cost * (100 + p.uniqueness_ratio);
  for (int i = 0; i < n; ++i) {
    if (std::abs(i - best) <= 1) continue;
    if (static_cast<long long>(costs[i]) * 100 <= limit) return DisparityMap::kInvalid;
  }
  int d16 = (p.min_disp + best) * DisparityMap::kScale;
  // Parabolic refinement; skipped at the horopter ends and for exact matches.
  if (best > 0 && best < n - 1 && best_cost > 0) {
    const int prev = costs[best - 1];
    const int next = costs[best + 1];
    const int denom = prev + next - 2 * costs[best];
    if (denom > 0) d16 += detail::round_div(DisparityMap::kScale * (prev - next), 2 * denom);
  }
  return static_cast<std::uint16_t>(d16);
}

namespace detail {

inline void check_pair(const GrayImage& left, const GrayImage& right, const MatcherParams& p) {
  if (left.width != right.width || left.height != right.height)
    throw Error(ErrorCode::SizeMismatch, "left and right images differ in size");
  p.validate(left.width);
}

// Matches rows [y_begin, y_end), all of which have full vertical window support.
inline void match_rows(const GrayImage& left, const GrayImage& right, const MatcherParams& p, int y_begin, int y_end,
                       DisparityMap& out) {
  const int w = left.width;
  const int r = p.window / 2;
  const int nd = p.max_disp - p.min_disp + 1;
  const int x_first = p.max_disp + r;
  const int x_last = w - 1 - r;
  if (x_first > x_last || y_begin >= y_end) return;

  std::vector<int> colsum(static_cast<std::size_t>(nd) * w, 0);
  std::vector<int> texcol(w, 0);
  std::vector<int> cost(static_cast<std::size_t>(nd) * w, 0);
  std::vector<int> texture(w, 0);
  std::vector<int> curve(nd);

  auto accumulate_row = [&](int yy, int sign) {
    const std::uint8_t* lrow = left.data.data() + static_cast<std::size_t>(yy) * w;
    const std::uint8_t* rrow = right.data.data() + static_cast<std::size_t>(yy) * w;
    for (int k = 0; k < nd; ++k) {
      const int d = p.min_disp + k;
      int* cs = colsum.data() + static_cast<std::size_t>(k) * w;
      for (int x = d; x < w; ++x) cs[x] += sign * std::abs(static_cast<int>(lrow[x]) - static_cast<int>(rrow[x - d]));
    }
    for (int x = 0; x < w; ++x) texcol[x] += sign * std::abs(static_cast<int>(lrow[x]) - 128);
  };

  for (int yy = y_begin - r; yy <= y_begin + r; ++yy) accumulate_row(yy, +1);

  for (int y = y_begin; y < y_end; ++y) {
    for (int k = 0; k < nd; ++k) {
      const int* cs = colsum.data() + static_cast<std::size_t>(k) * w;
      int* c = cost.data() + static_cast<std::size_t>(k) * w;
      int s = 0;
      for (int x = x_first - r; x <= x_first + r; ++x) s += cs[x];
      c[x_first] = s;
      for (int x = x_first + 1; x <= x_last; ++x) {
        s += cs[x + r] - cs[x - r - 1];
        c[x] = s;
      }
    }
    {
      int s = 0;
      for (int x = x_first - r; x <= x_first + r; ++x) s += texcol[x];
      texture[x_first] = s;
      for (int x = x_first + 1; x <= x_last; ++x) {
        s += texcol[x + r] - texcol[x - r - 1];
        texture[x] = s;
      }
    }
    for (int x = x_first; x <= x_last; ++x) {
      for (int k = 0; k < nd; ++k) curve[k] = cost[static_cast<std::size_t>(k) * w + x];
      out.at(x, y) = postfilter(curve, texture[x], p);
    }
    if (y + 1 < y_end) {
      accumulate_row(y + r + 1, +1);
      accumulate_row(y - r, -1);
    }
  }
}

}  // namespace detail

/// Block matching of two prefiltered images: for every pixel with full
/// window support, the disparity in [min_disp, max_disp] minimising the
/// window SAD between left(x, y) and right(x - d, y), post-filtered.
inline DisparityMap match_sad(const GrayImage& left, const GrayImage& right, const MatcherParams& p) {
  detail::check_pair(left, right, p);
  DisparityMap out(left.width, left.height, p.min_disp, p.max_disp);
  const int r = p.window / 2;
  const int y_first = r;
  const int y_end = left.height - r;
  const int rows = y_end - y_first;
  if (rows <= 0) return out;

  int bands = p.threads > 0 ? p.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bands = std::clamp(bands, 1, rows);
  if (bands == 1) {
    detail::match_rows(left, right, p, y_first, y_end, out);
    return out;
  }
  std::vector<std::thread> workers;
  workers.reserve(bands);
  for (int b = 0; b < bands; ++b) {
    const int y0 = y_first + rows * b / bands;
    const int y1 = y_first + rows * (b + 1) / bands;
    workers.emplace_back([&, y0, y1] { detail::match_rows(left, right, p, y0, y1, out); });
  }
  for (auto& t : workers) t.join();
  return out;
}

/// Literal evaluation of the matching definition, one pixel, one disparity,
/// one window cell at a time. Reference semantics for match_sad.
inline DisparityMap brute_force_match(const GrayImage& left, const GrayImage& right, const MatcherParams& p) {
  detail::check_pair(left, right, p);
  DisparityMap out(left.width, left.height, p.min_disp, p.max_disp);
  const int r = p.window / 2;
  for (int y = r; y < left.height - r; ++y) {
    for (int x = p.max_disp + r; x < left.width - r; ++x) {
      int texture = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) texture += std::abs(static_cast<int>(left.at(x + dx, y + dy)) - 128);
      if (texture < p.texture_threshold) continue;

      std::vector<long long> sad;
      for (int d = p.min_disp; d <= p.max_disp; ++d) {
        long long s = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            s += std::abs(static_cast<int>(left.at(x + dx, y + dy)) - static_cast<int>(right.at(x + dx - d, y + dy)));
        sad.push_back(s);
      }
      std::size_t best = 0;
      for (std::size_t i = 0; i < sad.size(); ++i)
        if (sad[i] < sad[best]) best = i;

      bool unique = true;
      for (std::size_t i = 0; i < sad.size(); ++i) {
        const bool adjacent = i + 1 == best || i == best || i == best + 1;
        if (!adjacent && 100 * sad[i] <= (100 + p.uniqueness_ratio) * sad[best]) unique = false;
      }
      if (!unique) continue;

      long long d16 = 16LL * (p.min_disp + static_cast<long long>(best));
      if (best > 0 && best + 1 < sad.size() && sad[best] > 0) {
        const long long a = sad[best - 1];
        const long long b = sad[best + 1];
        const long long curvature = a + b - 2 * sad[best];
        if (curvature > 0) {
          const long long num = 16 * (a - b);
          const long long den = 2 * curvature;
          d16 += num >= 0 ? (num + den / 2) / den : -((-num + den / 2) / den);
        }
      }
      out.at(x, y) = static_cast<std::uint16_t>(d16);
    }
  }
  return out;
}

/// prefilter + match_sad on raw images.
inline DisparityMap compute_disparity(const GrayImage& left, const GrayImage& right, const MatcherParams& p) {
  detail::check_pair(left, right, p);
  return match_sad(prefilter(left, p.prefilter_cap), prefilter(right, p.prefilter_cap), p);
}

/// Visualisation: [min_disp, max_disp] maps linearly onto [1, 255], invalid
/// pixels are black.
inline GrayImage disparity_to_gray(const DisparityMap& dm) {
  GrayImage out(dm.width, dm.height, 0);
  const double lo = dm.min_disp;
  const double span = std::max(1, dm.max_disp - dm.min_disp);
  for (std::size_t i = 0; i < dm.data.size(); ++i) {
    if (dm.data[i] == DisparityMap::kInvalid) continue;
    const double d = static_cast<double>(dm.data[i]) / DisparityMap::kScale;
    const double t = std::clamp((d - lo) / span, 0.0, 1.0);
    out.data[i] = static_cast<std::uint8_t>(1 + static_cast<int>(t * 254.0 + 0.5));
  }
  return out;
}

}  // namespace stereonav
