#include <gtest/gtest.h>

#include <cmath>

#include "stereonav/stereo_match.hpp"
#include "test_util.hpp"

using namespace stereonav;

namespace {

// Literal 3x3 horizontal Sobel with replicated borders.
int sobel_x(const GrayImage& g, int x, int y) {
  auto px = [&](int xx, int yy) {
    return static_cast<int>(g.at(std::clamp(xx, 0, g.width - 1), std::clamp(yy, 0, g.height - 1)));
  };
  int s = 0;
  for (int dy = -1; dy <= 1; ++dy) s += (dy == 0 ? 2 : 1) * (px(x + 1, y + dy) - px(x - 1, y + dy));
  return s;
}

MatcherParams params(int window, int max_disp) {
  MatcherParams p;
  p.window = window;
  p.max_disp = max_disp;
  p.threads = 1;
  return p;
}

// A pair with structure: right is the left image shifted by `k`, with a
// third of the pixels replaced by fresh noise.
std::pair<GrayImage, GrayImage> noisy_pair(int w, int h, std::uint64_t seed, int k) {
  const GrayImage l = testutil::textured_image(w, h, seed);
  GrayImage r = testutil::shift_left(l, k, seed + 1);
  std::mt19937_64 rng(seed + 2);
  for (auto& v : r.data)
    if (rng() % 3 == 0) v = static_cast<std::uint8_t>(rng() & 0xFF);
  return {prefilter(l, 31), prefilter(r, 31)};
}

void expect_code(ErrorCode code, auto&& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

}  // namespace

TEST(Prefilter, ConstantMapsTo128) {
  for (int level : {0, 77, 255}) {
    const auto out = prefilter(GrayImage(20, 10, static_cast<std::uint8_t>(level)), 31);
    for (auto v : out.data) ASSERT_EQ(v, 128);
  }
}

TEST(Prefilter, BrightnessOffsetInvariance) {
  auto img = testutil::random_image(50, 30, 3);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(v % 200);
  auto brighter = img;
  for (auto& v : brighter.data) v = static_cast<std::uint8_t>(std::min(255, v + 10));
  EXPECT_EQ(prefilter(img, 31), prefilter(brighter, 31));
}

TEST(Prefilter, StepEdgeSaturates) {
  GrayImage img(40, 8, 50);
  for (int y = 0; y < 8; ++y)
    for (int x = 20; x < 40; ++x) img.at(x, y) = 150;
  const auto out = prefilter(img, 31);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 40; ++x) {
      const int expected = 128 + std::clamp(sobel_x(img, x, y), -31, 31);
      ASSERT_EQ(out.at(x, y), expected);
    }
  EXPECT_EQ(out.at(19, 4), 159);
  EXPECT_EQ(out.at(20, 4), 159);
  EXPECT_EQ(out.at(18, 4), 128);
  EXPECT_EQ(out.at(21, 4), 128);
}

TEST(Prefilter, MatchesLiteralSobelOnNoise) {
  const auto img = testutil::random_image(33, 21, 9);
  for (int cap : {1, 31, 127}) {
    const auto out = prefilter(img, cap);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) ASSERT_EQ(out.at(x, y), 128 + std::clamp(sobel_x(img, x, y), -cap, cap));
  }
}

TEST(MatchSad, EqualsBruteForceSmall) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    for (int window : {3, 9}) {
      const auto [l, r] = noisy_pair(64, 48, seed, 1 + static_cast<int>(seed % 14));
      const auto p = params(window, 16);
      const auto fast = match_sad(l, r, p);
      const auto slow = brute_force_match(l, r, p);
      ASSERT_EQ(fast, slow) << "seed " << seed << " window " << window;
      EXPECT_GT(fast.valid_count(), 0u);
    }
  }
}

TEST(MatchSad, EqualsBruteForceWide) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int window : {3, 9}) {
      const auto [l, r] = noisy_pair(128, 48, seed, 20 + static_cast<int>(seed) * 7);
      const auto p = params(window, 64);
      ASSERT_EQ(match_sad(l, r, p), brute_force_match(l, r, p)) << "seed " << seed;
    }
  }
}

TEST(MatchSad, EqualsBruteForceRawNoiseAndMinDisp) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto l = testutil::random_image(64, 48, seed);
    const auto r = testutil::random_image(64, 48, seed + 100);
    auto p = params(5, 30);
    p.min_disp = 4;
    p.uniqueness_ratio = 0;
    ASSERT_EQ(match_sad(l, r, p), brute_force_match(l, r, p));
  }
}

TEST(MatchSad, ShiftedPairRecoversShift) {
  const auto l = testutil::textured_image(320, 120, 5);
  for (int k : {5, 12, 40}) {
    const auto r = testutil::shift_left(l, k, 77);
    const auto dm = compute_disparity(l, r, params(9, 64));
    std::size_t hits = 0, total = 0;
    for (int y = 4; y < dm.height - 4; ++y)
      for (int x = 64 + 4; x < dm.width - 4; ++x) {
        ++total;
        hits += dm.at(x, y) == k * 16;
      }
    EXPECT_GE(static_cast<double>(hits), 0.99 * total) << "k=" << k;
  }
}

TEST(MatchSad, TexturelessIsInvalid) {
  const GrayImage flat(100, 40, 90);
  const auto dm = compute_disparity(flat, flat, params(9, 16));
  EXPECT_EQ(dm.valid_count(), 0u);
  const auto bf = brute_force_match(prefilter(flat, 31), prefilter(flat, 31), params(9, 16));
  EXPECT_EQ(bf.valid_count(), 0u);
}

TEST(MatchSad, BorderWithoutSupportIsInvalid) {
  const auto [l, r] = noisy_pair(64, 48, 3, 5);
  const auto p = params(9, 16);
  const auto dm = match_sad(l, r, p);
  for (int y = 0; y < dm.height; ++y)
    for (int x = 0; x < dm.width; ++x) {
      const bool supported = y >= 4 && y < 44 && x >= 20 && x < 60;
      if (supported) continue;
      ASSERT_FALSE(dm.valid(x, y)) << x << "," << y;
    }
}

TEST(MatchSad, IndependentOfBandCount) {
  const auto [l, r] = noisy_pair(160, 97, 8, 9);
  auto p = params(9, 32);
  const auto ref = match_sad(l, r, p);
  for (int t : {2, 3, 7, 16, 200}) {
    p.threads = t;
    ASSERT_EQ(match_sad(l, r, p), ref) << t;
  }
}

TEST(MatchSad, BrightnessInvariance) {
  auto l = testutil::textured_image(200, 60, 12);
  for (auto& v : l.data) v = static_cast<std::uint8_t>(v / 2 + 20);
  const auto r = testutil::shift_left(l, 9, 3);
  auto l2 = l, r2 = r;
  for (auto& v : l2.data) v = static_cast<std::uint8_t>(v + 25);
  for (auto& v : r2.data) v = static_cast<std::uint8_t>(std::min(255, v + 25));
  const auto p = params(9, 32);
  EXPECT_EQ(compute_disparity(l, r, p), compute_disparity(l2, r2, p));
}

TEST(MatchSad, ValuesStayInHoropter) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto [l, r] = noisy_pair(96, 48, seed, 11);
    auto p = params(5, 24);
    p.min_disp = 3;
    const auto dm = match_sad(l, r, p);
    for (auto v : dm.data) {
      if (v == DisparityMap::kInvalid) continue;
      ASSERT_GE(v, 3 * 16);
      ASSERT_LE(v, 24 * 16);
    }
  }
}

TEST(MatchSad, Errors) {
  const GrayImage a(64, 48), b(63, 48);
  expect_code(ErrorCode::SizeMismatch, [&] { match_sad(a, b, params(9, 16)); });
  expect_code(ErrorCode::ParamsInvalid, [&] { match_sad(a, a, params(8, 16)); });
  expect_code(ErrorCode::ParamsInvalid, [&] { match_sad(a, a, params(1, 16)); });
  expect_code(ErrorCode::ParamsInvalid, [&] { match_sad(a, a, params(9, 64)); });
  auto p = params(9, 16);
  p.min_disp = 16;
  expect_code(ErrorCode::ParamsInvalid, [&] { match_sad(a, a, p); });
}

TEST(Postfilter, FlatCurveRejected) {
  const std::vector<int> costs(20, 500);
  EXPECT_EQ(postfilter(costs, 1000, MatcherParams{}), DisparityMap::kInvalid);
}

TEST(Postfilter, ZeroTextureRejected) {
  const std::vector<int> costs{900, 900, 10, 900, 900};
  EXPECT_EQ(postfilter(costs, 0, MatcherParams{}), DisparityMap::kInvalid);
  EXPECT_EQ(postfilter(costs, 9, MatcherParams{}), DisparityMap::kInvalid);
  EXPECT_NE(postfilter(costs, 10, MatcherParams{}), DisparityMap::kInvalid);
}

TEST(Postfilter, SharpMinimumKeptWithParabola) {
  MatcherParams p;
  p.min_disp = 3;
  const std::vector<int> costs{400, 100, 50, 10, 30, 100, 400};
  // Vertex offset (prev - next) / (2 (prev + next - 2 c)) = 20 / 120 of a pixel.
  const int expected = (3 + 3) * 16 + static_cast<int>(std::lround(16.0 * 20 / 120));
  EXPECT_EQ(postfilter(costs, 500, p), expected);
}

TEST(Postfilter, NegativeOffsetRoundsAwayFromZero) {
  const std::vector<int> costs{400, 30, 10, 50, 400};
  // -20 * 16 / 120 = -2.67 -> -3
  EXPECT_EQ(postfilter(costs, 500, MatcherParams{}), 2 * 16 - 3);
}

TEST(Postfilter, UniquenessUsesNonAdjacentCosts) {
  MatcherParams p;
  p.uniqueness_ratio = 15;
  // Neighbour at 105 is adjacent and ignored; 114 at distance 2 fails 15%.
  EXPECT_EQ(postfilter(std::vector<int>{500, 105, 100, 105, 500}, 500, p), 2 * 16);
  EXPECT_EQ(postfilter(std::vector<int>{500, 105, 100, 105, 114}, 500, p), DisparityMap::kInvalid);
  EXPECT_NE(postfilter(std::vector<int>{500, 105, 100, 105, 116}, 500, p), DisparityMap::kInvalid);
  // Exactly at the margin is rejected.
  EXPECT_EQ(postfilter(std::vector<int>{500, 105, 100, 105, 115}, 500, p), DisparityMap::kInvalid);
}

TEST(Postfilter, EndpointsAndExactMatchesStayInteger) {
  EXPECT_EQ(postfilter(std::vector<int>{10, 60, 200, 300, 400}, 500, MatcherParams{}), 0);
  EXPECT_EQ(postfilter(std::vector<int>{400, 300, 200, 60, 10}, 500, MatcherParams{}), 4 * 16);
  EXPECT_EQ(postfilter(std::vector<int>{400, 300, 0, 60, 400}, 500, MatcherParams{}), 2 * 16);
}

TEST(Postfilter, TiesPickSmallestDisparity) {
  MatcherParams p;
  p.uniqueness_ratio = 0;
  EXPECT_EQ(postfilter(std::vector<int>{500, 10, 10, 500, 500}, 500, p) / 16, 1);
}

TEST(DisparityToGray, Examples) {
  DisparityMap dm(4, 1, 0, 64);
  EXPECT_EQ(disparity_to_gray(dm), GrayImage(4, 1, 0));
  dm.at(0, 0) = 64 * 16;
  dm.at(1, 0) = 32 * 16;
  dm.at(2, 0) = 0;
  const auto g = disparity_to_gray(dm);
  EXPECT_EQ(g.at(0, 0), 255);
  EXPECT_NEAR(g.at(1, 0), 128, 1);
  EXPECT_EQ(g.at(2, 0), 1);
  EXPECT_EQ(g.at(3, 0), 0);
}
