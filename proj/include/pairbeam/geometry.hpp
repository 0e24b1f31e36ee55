/*
Copyright 2026 The pairbeam Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

// Microphone arrays, directions of arrival and the far-field pair delays
// derived from them.

#ifndef PAIRBEAM_GEOMETRY_HPP
#define PAIRBEAM_GEOMETRY_HPP

#include <json.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pairbeam/error.hpp"

namespace pairbeam {

using Vec3 = Eigen::Vector3d;

struct MicArray {
  std::string name;
  std::vector<Vec3> positions;  // meters

  std::size_t size() const { return positions.size(); }
  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : positions) c += p;
    return c / static_cast<double>(positions.size());
  }
};

inline void Validate(const MicArray& array) {
  PAIRBEAM_CHECK(array.size() >= 2, ErrorKind::kGeometry,
                 "an array needs at least two microphones");
  for (std::size_t i = 0; i < array.size(); ++i) {
    PAIRBEAM_CHECK(array.positions[i].allFinite(), ErrorKind::kGeometry,
                   "microphone position is not finite");
    for (std::size_t j = 0; j < i; ++j) {
      PAIRBEAM_CHECK((array.positions[i] - array.positions[j]).norm() > 1e-9,
                     ErrorKind::kGeometry,
                     "microphones " + std::to_string(j + 1) + " and " +
                         std::to_string(i + 1) + " coincide");
    }
  }
}

// Unit vector pointing from the array towards a source.
class Doa {
 public:
  static Doa FromUnitVector(const Vec3& v) {
    PAIRBEAM_CHECK(v.allFinite() && std::abs(v.norm() - 1.0) <= 1e-9,
                   ErrorKind::kArgument, "DOA must be a unit vector");
    return Doa(v);
  }

  static Doa FromVector(const Vec3& v) {
    const double n = v.norm();
    PAIRBEAM_CHECK(std::isfinite(n) && n > 0.0, ErrorKind::kArgument,
                   "DOA direction has zero length");
    return Doa(v / n);
  }

  // Azimuth counter-clockwise from +x in the xy-plane, elevation towards +z.
  static Doa FromAzimuthElevation(double azimuth_deg, double elevation_deg) {
    const double az = azimuth_deg * std::numbers::pi / 180.0;
    const double el = elevation_deg * std::numbers::pi / 180.0;
    return FromVector(Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az),
                           std::sin(el)));
  }

  const Vec3& vector() const { return dir_; }

 private:
  explicit Doa(const Vec3& v) : dir_(v) {}
  Vec3 dir_;
};

// Zero-based microphone indices with u < v.
struct MicPair {
  std::size_t u = 0;
  std::size_t v = 0;
  friend bool operator==(const MicPair&, const MicPair&) = default;
};

inline std::vector<MicPair> enumerate_pairs(const MicArray& array) {
  PAIRBEAM_CHECK(array.size() >= 2, ErrorKind::kGeometry,
                 "an array needs at least two microphones");
  std::vector<MicPair> pairs;
  pairs.reserve(array.size() * (array.size() - 1) / 2);
  for (std::size_t u = 0; u < array.size(); ++u) {
    for (std::size_t v = u + 1; v < array.size(); ++v) pairs.push_back({u, v});
  }
  return pairs;
}

// Far-field TDOA in (fractional) samples: fs/c * (r_u - r_v) . theta.
inline double tdoa(const MicArray& array, std::size_t u, std::size_t v, const Doa& doa,
                   double sample_rate, double speed_of_sound) {
  PAIRBEAM_CHECK(u < array.size() && v < array.size(), ErrorKind::kArgument,
                 "microphone index out of range");
  PAIRBEAM_CHECK(speed_of_sound > 0.0, ErrorKind::kArgument,
                 "speed of sound must be positive");
  return sample_rate / speed_of_sound *
         (array.positions[u] - array.positions[v]).dot(doa.vector());
}

inline double tdoa(const MicArray& array, const MicPair& pair, const Doa& doa,
                   double sample_rate, double speed_of_sound) {
  return tdoa(array, pair.u, pair.v, doa, sample_rate, speed_of_sound);
}

// A(f) = exp(j 2 pi f tau / N), f = 0 .. num_bins-1.
inline Eigen::VectorXcd steering_vector(double tau, std::size_t frame_size,
                                        std::size_t num_bins) {
  PAIRBEAM_CHECK(num_bins == frame_size / 2 + 1, ErrorKind::kArgument,
                 "bin count must be frame_size/2 + 1");
  Eigen::VectorXcd a(static_cast<Eigen::Index>(num_bins));
  for (std::size_t f = 0; f < num_bins; ++f) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(f) * tau /
                         static_cast<double>(frame_size);
    a(static_cast<Eigen::Index>(f)) = std::polar(1.0, phase);
  }
  return a;
}

// |TDOA(target) - TDOA(interference)| for one pair, in samples.
inline double tdoa_gap(const MicArray& array, const MicPair& pair, const Doa& target,
                       const Doa& interference, double sample_rate,
                       double speed_of_sound) {
  PAIRBEAM_CHECK(pair.u < array.size() && pair.v < array.size(), ErrorKind::kArgument,
                 "microphone index out of range");
  PAIRBEAM_CHECK(speed_of_sound > 0.0, ErrorKind::kArgument,
                 "speed of sound must be positive");
  const Vec3 baseline = array.positions[pair.u] - array.positions[pair.v];
  return sample_rate / speed_of_sound *
         std::abs((target.vector() - interference.vector()).dot(baseline));
}

namespace geometry_detail {

inline MicArray Ring(std::string name, std::size_t count, double radius,
                     bool with_center = false) {
  MicArray a;
  a.name = std::move(name);
  for (std::size_t i = 0; i < count; ++i) {
    const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) /
                       static_cast<double>(count);
    a.positions.emplace_back(radius * std::cos(phi), radius * std::sin(phi), 0.0);
  }
  if (with_center) a.positions.emplace_back(0.0, 0.0, 0.0);
  return a;
}

}  // namespace geometry_detail

// Planar commercial arrays reconstructed from published vendor dimensions.
// These are approximations, not measured coordinates:
//   respeaker_usb   4 mics on a 32 mm radius (45 mm square, 64 mm diagonal)
//   respeaker_core  6 mics on a 46.3 mm radius
//   matrix_creator  8 mics on a 54 mm radius
//   matrix_voice    8 mics on a 49 mm radius
//   minidsp_uma     6 mics on a 43 mm radius plus a centre mic
//   kinect          4-mic linear array at x = -113, 36, 76, 113 mm
inline MicArray PresetGeometry(const std::string& name) {
  using geometry_detail::Ring;
  if (name == "respeaker_usb") return Ring(name, 4, 0.032);
  if (name == "respeaker_core") return Ring(name, 6, 0.0463);
  if (name == "matrix_creator") return Ring(name, 8, 0.054);
  if (name == "matrix_voice") return Ring(name, 8, 0.049);
  if (name == "minidsp_uma") return Ring(name, 6, 0.043, true);
  if (name == "kinect") {
    MicArray a;
    a.name = name;
    for (double x : {-0.113, 0.036, 0.076, 0.113}) a.positions.emplace_back(x, 0.0, 0.0);
    return a;
  }
  throw Error(ErrorKind::kConfig, "unknown geometry preset '" + name + "'");
}

inline std::vector<std::string> PresetNames() {
  return {"respeaker_usb", "respeaker_core", "matrix_creator",
          "matrix_voice",  "minidsp_uma",    "kinect"};
}

inline bool IsPresetName(const std::string& name) {
  for (const auto& p : PresetNames()) {
    if (p == name) return true;
  }
  return false;
}

// Parses `key = value` lines whose values are JSON literals; values may span
// lines until their brackets close. `#` starts a comment outside strings.
inline std::map<std::string, nlohmann::json> ParseKeyValueConfig(const std::string& text) {
  std::string cleaned;
  {
    bool in_string = false;
    bool in_comment = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char ch = text[i];
      if (in_comment) {
        if (ch == '\n') {
          in_comment = false;
          cleaned += ch;
        }
        continue;
      }
      if (ch == '"' && (i == 0 || text[i - 1] != '\\')) in_string = !in_string;
      if (ch == '#' && !in_string) {
        in_comment = true;
        continue;
      }
      cleaned += ch;
    }
  }

  std::map<std::string, nlohmann::json> out;
  std::istringstream lines(cleaned);
  std::string line;
  int line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    PAIRBEAM_CHECK(eq != std::string::npos, ErrorKind::kConfig,
                   "line " + std::to_string(line_no) + ": expected key = value");
    std::string key = line.substr(0, eq);
    key.erase(0, key.find_first_not_of(" \t"));
    key.erase(key.find_last_not_of(" \t") + 1);
    PAIRBEAM_CHECK(!key.empty(), ErrorKind::kConfig,
                   "line " + std::to_string(line_no) + ": empty key");
    std::string value = line.substr(eq + 1);
    auto depth = [](const std::string& s) {
      int d = 0;
      for (char c : s) d += (c == '[' || c == '{') - (c == ']' || c == '}');
      return d;
    };
    while (depth(value) > 0 && std::getline(lines, line)) {
      ++line_no;
      value += "\n" + line;
    }
    try {
      out[key] = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorKind::kConfig, "line " + std::to_string(line_no) +
                                          ": cannot parse value of '" + key + "'");
    }
  }
  return out;
}

inline MicArray load_geometry(const std::string& config_text) {
  const auto kv = ParseKeyValueConfig(config_text);
  auto it = kv.find("mics");
  PAIRBEAM_CHECK(it != kv.end() && it->second.is_array(), ErrorKind::kConfig,
                 "geometry needs a 'mics' list");
  MicArray array;
  if (auto n = kv.find("name"); n != kv.end()) {
    PAIRBEAM_CHECK(n->second.is_string(), ErrorKind::kConfig, "'name' must be a string");
    array.name = n->second.get<std::string>();
  }
  for (const auto& m : it->second) {
    PAIRBEAM_CHECK(m.is_array() && m.size() == 3, ErrorKind::kConfig,
                   "each microphone must be [x, y, z]");
    Vec3 p;
    for (int k = 0; k < 3; ++k) {
      PAIRBEAM_CHECK(m[k].is_number(), ErrorKind::kConfig, "coordinate is not a number");
      p[k] = m[k].get<double>();
    }
    array.positions.push_back(p);
  }
  PAIRBEAM_CHECK(array.size() >= 2, ErrorKind::kConfig,
                 "geometry lists fewer than two microphones");
  try {
    Validate(array);
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  return array;
}

// Accepts a preset name or a path to a geometry file.
inline MicArray ResolveGeometry(const std::string& preset_or_path) {
  if (IsPresetName(preset_or_path)) return PresetGeometry(preset_or_path);
  std::ifstream in(preset_or_path);
  PAIRBEAM_CHECK(in.good(), ErrorKind::kIo,
                 "cannot open geometry '" + preset_or_path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  MicArray array = load_geometry(ss.str());
  if (array.name.empty()) array.name = std::filesystem::path(preset_or_path).stem().string();
  return array;
}

inline std::string FormatGeometry(const MicArray& array) {
  std::ostringstream os;
  os.precision(17);
  os << "name = \"" << array.name << "\"\nmics = [\n";
  for (std::size_t i = 0; i < array.size(); ++i) {
    const auto& p = array.positions[i];
    os << "  [" << p.x() << ", " << p.y() << ", " << p.z() << "]"
       << (i + 1 < array.size() ? "," : "") << "\n";
  }
  os << "]\n";
  return os.str();
}

}  // namespace pairbeam

#endif  // PAIRBEAM_GEOMETRY_HPP
