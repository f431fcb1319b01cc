#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "stereonav/error.hpp"
#include "stereonav/geometry.hpp"

namespace stereonav {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Parsed `key = value` file. Remembers the line each key came from so
/// validation errors can point back at the source.
struct KeyValueFile {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  double get_double(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    return parse_double(key, it->second);
  }

  long long get_int(const std::string& key, long long fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    long long v = 0;
    const auto& s = it->second;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lines.at(key)) + ": '" + key +
                                             "' expects an integer, got '" + s + "'");
    return v;
  }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : it->second;
  }

  void reject_unknown(const std::set<std::string>& allowed) const {
    for (const auto& [key, _] : values)
      if (!allowed.count(key))
        throw Error(ErrorCode::ParseError, "line " + std::to_string(lines.at(key)) + ": unknown key '" + key + "'");
  }

 private:
  double parse_double(const std::string& key, const std::string& s) const {
    std::istringstream in(s);
    in.imbue(std::locale::classic());
    double v = 0.0;
    in >> v;
    if (in.fail() || !in.eof())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lines.at(key)) + ": '" + key +
                                             "' expects a number, got '" + s + "'");
    return v;
  }
};

inline KeyValueFile parse_key_value(std::istream& in) {
  KeyValueFile kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key(trim(body.substr(0, eq)));
    std::string value(trim(body.substr(eq + 1)));
    if (key.empty() || value.empty())
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": empty key or value");
    if (kv.values.count(key))
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.values[key] = value;
    kv.lines[key] = lineno;
  }
  return kv;
}

inline KeyValueFile read_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_key_value(in);
}

/// Calibration files carry exactly the keys f_px, cx, cy, right_cx,
/// baseline_m, width and height. One focal length serves both cameras.
inline StereoRig parse_calibration(std::istream& in) {
  const KeyValueFile kv = parse_key_value(in);
  kv.reject_unknown({"f_px", "cx", "cy", "right_cx", "baseline_m", "width", "height"});
  for (const char* key : {"f_px", "cx", "cy", "baseline_m", "width", "height"})
    if (!kv.has(key)) throw Error(ErrorCode::ParseError, std::string("missing calibration key '") + key + "'");
  const double cx = kv.get_double("cx", 0.0);
  try {
    return make_rig(kv.get_double("f_px", 0.0), cx, kv.get_double("cy", 0.0), kv.get_double("right_cx", cx),
                    kv.get_double("baseline_m", 0.0), static_cast<int>(kv.get_int("width", 0)),
                    static_cast<int>(kv.get_int("height", 0)));
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationError, e.what());
  }
}

inline StereoRig load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return parse_calibration(in);
}

inline std::string format_calibration(const StereoRig& rig) {
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(17);
  out << "f_px = " << rig.focal() << "\n"
      << "cx = " << rig.left.cx << "\n"
      << "cy = " << rig.left.cy << "\n"
      << "right_cx = " << rig.right_cx() << "\n"
      << "baseline_m = " << rig.baseline_m << "\n"
      << "width = " << rig.width() << "\n"
      << "height = " << rig.height() << "\n";
  return out.str();
}

}  // namespace stereonav
