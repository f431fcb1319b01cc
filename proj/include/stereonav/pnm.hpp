#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stereonav/error.hpp"
#include "stereonav/image.hpp"

namespace stereonav {

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never observes a half-written artifact.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  if (path.has_parent_path() && !path.parent_path().empty()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename to " + path.string() + " failed: " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::string comments;
  std::size_t data_offset = 0;
};

inline PnmHeader parse_pnm_header(const std::string& bytes) {
  PnmHeader h;
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        auto end = bytes.find('\n', pos);
        if (end == std::string::npos) end = bytes.size();
        h.comments += bytes.substr(pos + 1, end - pos - 1);
        h.comments += '\n';
        pos = end;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      throw Error(ErrorCode::ParseError, "malformed PNM header");
    long long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1 << 30)) throw Error(ErrorCode::ParseError, "PNM header value too large");
    }
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P') throw Error(ErrorCode::ParseError, "not a PNM file");
  h.magic = bytes.substr(0, 2);
  pos = 2;
  h.width = read_int();
  h.height = read_int();
  h.maxval = read_int();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw Error(ErrorCode::ParseError, "malformed PNM header");
  h.data_offset = pos + 1;
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
    throw Error(ErrorCode::ParseError, "invalid PNM dimensions or maxval");
  return h;
}

inline std::string pnm_header(const char* magic, int w, int h, int maxval, const std::string& comment = {}) {
  std::string s = std::string(magic) + "\n";
  if (!comment.empty()) s += "# " + comment + "\n";
  s += std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  return s;
}

}  // namespace detail

inline std::string encode_pgm(const GrayImage& img) {
  std::string s = detail::pnm_header("P5", img.width, img.height, 255);
  s.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  return s;
}

inline GrayImage decode_pgm(const std::string& bytes) {
  auto h = detail::parse_pnm_header(bytes);
  if (h.magic != "P5" || h.maxval > 255) throw Error(ErrorCode::ParseError, "expected 8-bit binary PGM (P5)");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + n) throw Error(ErrorCode::ParseError, "truncated PGM data");
  GrayImage img(h.width, h.height);
  std::copy_n(reinterpret_cast<const std::uint8_t*>(bytes.data() + h.data_offset), n, img.data.begin());
  return img;
}

inline std::string encode_ppm(const ColorImage& img) {
  std::string s = detail::pnm_header("P6", img.width, img.height, 255);
  s.reserve(s.size() + img.data.size() * 3);
  for (const auto& p : img.data) {
    s.push_back(static_cast<char>(p.r));
    s.push_back(static_cast<char>(p.g));
    s.push_back(static_cast<char>(p.b));
  }
  return s;
}

inline ColorImage decode_ppm(const std::string& bytes) {
  auto h = detail::parse_pnm_header(bytes);
  if (h.magic != "P6" || h.maxval > 255) throw Error(ErrorCode::ParseError, "expected 8-bit binary PPM (P6)");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + 3 * n) throw Error(ErrorCode::ParseError, "truncated PPM data");
  ColorImage img(h.width, h.height);
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + h.data_offset);
  for (std::size_t i = 0; i < n; ++i) img.data[i] = Rgb{p[3 * i], p[3 * i + 1], p[3 * i + 2]};
  return img;
}

/// 16-bit big-endian P5 with maxval 65535. The search range rides along in
/// a header comment; files without it get the range of their valid values.
inline std::string encode_disparity_pgm(const DisparityMap& dm) {
  std::string s = detail::pnm_header(
      "P5", dm.width, dm.height, 65535,
      "disparity x16 min_disp=" + std::to_string(dm.min_disp) + " max_disp=" + std::to_string(dm.max_disp));
  s.reserve(s.size() + dm.data.size() * 2);
  for (auto v : dm.data) {
    s.push_back(static_cast<char>(v >> 8));
    s.push_back(static_cast<char>(v & 0xFF));
  }
  return s;
}

inline DisparityMap decode_disparity_pgm(const std::string& bytes) {
  auto h = detail::parse_pnm_header(bytes);
  if (h.magic != "P5" || h.maxval != 65535)
    throw Error(ErrorCode::ParseError, "expected 16-bit PGM (P5, maxval 65535)");
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (bytes.size() < h.data_offset + 2 * n) throw Error(ErrorCode::ParseError, "truncated disparity data");
  DisparityMap dm(h.width, h.height, 0, 0);
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + h.data_offset);
  int lo = 1 << 30;
  int hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dm.data[i] = static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
    if (dm.data[i] != DisparityMap::kInvalid) {
      lo = std::min<int>(lo, dm.data[i] / DisparityMap::kScale);
      hi = std::max<int>(hi, (dm.data[i] + DisparityMap::kScale - 1) / DisparityMap::kScale);
    }
  }
  int min_d = 0;
  int max_d = 0;
  if (std::sscanf(h.comments.c_str(), " disparity x16 min_disp=%d max_disp=%d", &min_d, &max_d) == 2) {
    dm.min_disp = min_d;
    dm.max_disp = max_d;
  } else if (hi > 0) {
    dm.min_disp = lo;
    dm.max_disp = hi;
  }
  return dm;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) { write_file_atomic(path, encode_pgm(img)); }
inline void write_ppm(const std::filesystem::path& path, const ColorImage& img) { write_file_atomic(path, encode_ppm(img)); }
inline void write_disparity_pgm(const std::filesystem::path& path, const DisparityMap& dm) {
  write_file_atomic(path, encode_disparity_pgm(dm));
}
inline GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }
inline ColorImage read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }
inline DisparityMap read_disparity_pgm(const std::filesystem::path& path) {
  return decode_disparity_pgm(read_file(path));
}

}  // namespace stereonav
