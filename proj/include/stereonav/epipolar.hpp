#pragma once

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "stereonav/error.hpp"
#include "stereonav/geometry.hpp"
#include "stereonav/keyvalue.hpp"

namespace stereonav {

struct Correspondence {
  PixelCoord left;
  PixelCoord right;
};

/// Rank-2 fundamental matrix with unit Frobenius norm; x_r^T F x_l = 0.
struct FundamentalMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
};

struct EssentialMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  /// Singular values of K_r^T F K_l before projection onto (s, s, 0).
  Eigen::Vector3d raw_singular_values = Eigen::Vector3d::Zero();
};

struct RansacConfig {
  int iterations = 500;
  double inlier_threshold_px = 1.0;
  std::uint64_t seed = 42;
  double min_inlier_fraction = 0.0;

  void validate() const {
    if (iterations < 1) throw Error(ErrorCode::InvalidArgument, "RANSAC iterations must be >= 1");
    if (!(inlier_threshold_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "inlier threshold must be > 0");
    if (min_inlier_fraction < 0.0 || min_inlier_fraction > 1.0)
      throw Error(ErrorCode::InvalidArgument, "min_inlier_fraction must be in [0, 1]");
  }
};

struct RansacResult {
  FundamentalMatrix f;
  std::vector<bool> inliers;
  std::size_t inlier_count = 0;
};

namespace detail {

// Similarity taking the points to zero centroid and RMS distance sqrt(2).
inline Eigen::Matrix3d hartley_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double sq = 0.0;
  for (const auto& p : pts) sq += (p - centroid).squaredNorm();
  const double rms = std::sqrt(sq / static_cast<double>(pts.size()));
  if (!(rms > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
  const double s = std::sqrt(2.0) / rms;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

inline Eigen::Matrix3d enforce_rank2(const Eigen::Matrix3d& f) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = svd.singularValues();
  s(2) = 0.0;
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

// Fixes the overall sign so the largest-magnitude entry is positive.
inline Eigen::Matrix3d canonical_sign(const Eigen::Matrix3d& f) {
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  f.cwiseAbs().maxCoeff(&r, &c);
  return f(r, c) < 0 ? Eigen::Matrix3d(-f) : f;
}

}  // namespace detail

/// Normalised 8-point solver.
inline FundamentalMatrix estimate_fundamental_8point(const std::vector<Correspondence>& corrs) {
  if (corrs.size() < 8)
    throw Error(ErrorCode::TooFewCorrespondences, "need >= 8 correspondences, got " + std::to_string(corrs.size()));
  const std::size_t n = corrs.size();
  std::vector<Eigen::Vector2d> lp(n), rp(n);
  for (std::size_t i = 0; i < n; ++i) {
    lp[i] = {corrs[i].left.x, corrs[i].left.y};
    rp[i] = {corrs[i].right.x, corrs[i].right.y};
  }
  const Eigen::Matrix3d tl = detail::hartley_transform(lp);
  const Eigen::Matrix3d tr = detail::hartley_transform(rp);

  Eigen::MatrixXd a(static_cast<Eigen::Index>(std::max<std::size_t>(n, 9)), 9);
  a.setZero();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d x = tl * Eigen::Vector3d(lp[i].x(), lp[i].y(), 1.0);
    const Eigen::Vector3d xr = tr * Eigen::Vector3d(rp[i].x(), rp[i].y(), 1.0);
    a.row(static_cast<Eigen::Index>(i)) << xr.x() * x.x(), xr.x() * x.y(), xr.x(), xr.y() * x.x(), xr.y() * x.y(),
        xr.y(), x.x(), x.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  // A usable design matrix has rank 8: a one-dimensional null space.
  if (sv(7) <= 1e-10 * sv(0)) throw Error(ErrorCode::DegenerateConfiguration, "design matrix rank below 8");

  const Eigen::VectorXd v = svd.matrixV().col(8);
  Eigen::Matrix3d fn;
  fn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  fn = detail::enforce_rank2(fn);
  Eigen::Matrix3d f = tr.transpose() * fn * tl;
  f = detail::enforce_rank2(f);
  f /= f.norm();
  return FundamentalMatrix{detail::canonical_sign(f)};
}

/// Symmetric epipolar distance: mean of the right point's distance to the
/// epiline F x_l and the left point's distance to F^T x_r.
inline double epipolar_residual(const FundamentalMatrix& f, const Correspondence& c) {
  const Eigen::Vector3d xl(c.left.x, c.left.y, 1.0);
  const Eigen::Vector3d xr(c.right.x, c.right.y, 1.0);
  const Eigen::Vector3d line_r = f.m * xl;
  const Eigen::Vector3d line_l = f.m.transpose() * xr;
  const double nr = std::hypot(line_r.x(), line_r.y());
  const double nl = std::hypot(line_l.x(), line_l.y());
  if (!(nr > 0.0) || !(nl > 0.0)) throw Error(ErrorCode::DegenerateLine, "epipolar line has zero normal");
  const double alg = xr.dot(line_r);
  return 0.5 * (std::abs(alg) / nr + std::abs(alg) / nl);
}

/// Algebraic residual x_r^T F x_l.
inline double algebraic_residual(const FundamentalMatrix& f, const Correspondence& c) {
  return Eigen::Vector3d(c.right.x, c.right.y, 1.0).dot(f.m * Eigen::Vector3d(c.left.x, c.left.y, 1.0));
}

namespace detail {

inline std::size_t mark_inliers(const FundamentalMatrix& f, const std::vector<Correspondence>& corrs, double threshold,
                                std::vector<bool>& mask) {
  mask.assign(corrs.size(), false);
  std::size_t count = 0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    double r = 0.0;
    try {
      r = epipolar_residual(f, corrs[i]);
    } catch (const Error&) {
      continue;
    }
    if (r <= threshold) {
      mask[i] = true;
      ++count;
    }
  }
  return count;
}

}  // namespace detail

/// RANSAC over 8-point minimal samples, then a refit on the consensus set.
/// Fully determined by cfg.seed.
inline RansacResult ransac_fundamental(const std::vector<Correspondence>& corrs, const RansacConfig& cfg) {
  cfg.validate();
  if (corrs.size() < 8)
    throw Error(ErrorCode::TooFewCorrespondences, "need >= 8 correspondences, got " + std::to_string(corrs.size()));
  std::mt19937_64 rng(cfg.seed);
  const std::size_t n = corrs.size();

  std::vector<bool> best_mask;
  std::size_t best_count = 0;
  bool have_model = false;
  std::vector<bool> mask;
  std::vector<std::size_t> idx(n);
  std::vector<Correspondence> sample(8);

  for (int it = 0; it < cfg.iterations; ++it) {
    // Partial Fisher-Yates for 8 distinct indices.
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < 8; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
      std::swap(idx[i], idx[j]);
      sample[i] = corrs[idx[i]];
    }
    FundamentalMatrix f;
    try {
      f = estimate_fundamental_8point(sample);
    } catch (const Error&) {
      continue;
    }
    const std::size_t count = detail::mark_inliers(f, corrs, cfg.inlier_threshold_px, mask);
    if (!have_model || count > best_count) {
      best_count = count;
      best_mask = mask;
      have_model = true;
    }
  }
  if (!have_model || best_count < 8)
    throw Error(ErrorCode::ConsensusTooSmall, "no model reached 8 inliers");

  const double fraction = static_cast<double>(best_count) / static_cast<double>(n);
  if (fraction < cfg.min_inlier_fraction)
    throw Error(ErrorCode::ConsensusTooSmall,
                "best inlier fraction " + std::to_string(fraction) + " below " + std::to_string(cfg.min_inlier_fraction));

  std::vector<Correspondence> consensus;
  for (std::size_t i = 0; i < n; ++i)
    if (best_mask[i]) consensus.push_back(corrs[i]);
  RansacResult result;
  result.f = estimate_fundamental_8point(consensus);
  result.inlier_count = detail::mark_inliers(result.f, corrs, cfg.inlier_threshold_px, result.inliers);
  return result;
}

/// E = K_r^T F K_l, projected onto singular values (s, s, 0).
inline EssentialMatrix essential_from_fundamental(const FundamentalMatrix& f, const CameraIntrinsics& left,
                                                  const CameraIntrinsics& right) {
  left.validate();
  right.validate();
  if (!(f.m.norm() > 0.0) || !f.m.allFinite())
    throw Error(ErrorCode::InvalidArgument, "fundamental matrix is zero or not finite");
  auto k = [](const CameraIntrinsics& c) {
    Eigen::Matrix3d m;
    m << c.f, 0, c.cx, 0, c.f, c.cy, 0, 0, 1;
    return m;
  };
  const Eigen::Matrix3d raw = k(right).transpose() * f.m * k(left);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(raw, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  const double sigma = 0.5 * (s(0) + s(1));
  EssentialMatrix e;
  e.raw_singular_values = s;
  e.m = svd.matrixU() * Eigen::Vector3d(sigma, sigma, 0.0).asDiagonal() * svd.matrixV().transpose();
  return e;
}

struct AlignmentReport {
  double mean_vertical = 0.0;
  double max_vertical = 0.0;
  bool pass = false;
};

/// Row alignment of a stereo pair measured on its correspondences.
inline AlignmentReport check_alignment(const std::vector<Correspondence>& corrs, double threshold_px = 1.0) {
  if (corrs.empty()) throw Error(ErrorCode::EmptyInput, "no correspondences");
  AlignmentReport rep;
  for (const auto& c : corrs) {
    const double dy = std::abs(c.right.y - c.left.y);
    rep.mean_vertical += dy;
    rep.max_vertical = std::max(rep.max_vertical, dy);
  }
  rep.mean_vertical /= static_cast<double>(corrs.size());
  rep.pass = rep.max_vertical <= threshold_px;
  return rep;
}

/// CSV with one `xl,yl,xr,yr` row per pair. Blank lines, `#` comments and a
/// non-numeric header row are skipped.
inline std::vector<Correspondence> parse_correspondences(std::istream& in) {
  std::vector<Correspondence> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body(trim(line));
    if (body.empty() || body[0] == '#') continue;
    std::istringstream ss(body);
    ss.imbue(std::locale::classic());
    double v[4];
    char comma = 0;
    bool ok = static_cast<bool>(ss >> v[0]);
    for (int i = 1; ok && i < 4; ++i) ok = (ss >> comma) && comma == ',' && (ss >> v[i]);
    if (ok) ok = (ss >> std::ws).eof();
    if (!ok) {
      if (lineno == 1 && std::isalpha(static_cast<unsigned char>(body[0]))) continue;
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected xl,yl,xr,yr");
    }
    out.push_back(Correspondence{{v[0], v[1]}, {v[2], v[3]}});
  }
  return out;
}

inline std::vector<Correspondence> load_correspondences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_correspondences(in);
}

}  // namespace stereonav
