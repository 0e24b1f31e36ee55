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

// Shoebox room simulation with the image-source method, randomised scene
// sampling and multichannel mixture synthesis.

#ifndef PAIRBEAM_ROOM_HPP
#define PAIRBEAM_ROOM_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "pairbeam/audio.hpp"
#include "pairbeam/defaults.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/geometry.hpp"
#include "pairbeam/random.hpp"

namespace pairbeam {

struct RoomSpec {
  double length = 0.0;  // x extent, meters
  double width = 0.0;   // y extent
  double height = 0.0;  // z extent
  double reflection_coeff = 0.0;
  double speed_of_sound = defaults::kSpeedOfSoundNominal;

  Vec3 dims() const { return {length, width, height}; }
};

inline void Validate(const RoomSpec& room) {
  PAIRBEAM_CHECK(room.length > 0 && room.width > 0 && room.height > 0,
                 ErrorKind::kGeometry, "room dimensions must be positive");
  PAIRBEAM_CHECK(room.reflection_coeff >= 0.0 && room.reflection_coeff < 1.0,
                 ErrorKind::kGeometry, "reflection coefficient must be in [0, 1)");
  PAIRBEAM_CHECK(room.speed_of_sound > 0.0, ErrorKind::kGeometry,
                 "speed of sound must be positive");
}

inline bool StrictlyInside(const RoomSpec& room, const Vec3& p) {
  return p.x() > 0 && p.y() > 0 && p.z() > 0 && p.x() < room.length &&
         p.y() < room.width && p.z() < room.height;
}

inline double SurfaceDistance(const RoomSpec& room, const Vec3& p) {
  return std::min({p.x(), p.y(), p.z(), room.length - p.x(), room.width - p.y(),
                   room.height - p.z()});
}

enum class SceneMode { kPair, kArray };

inline const char* ToString(SceneMode mode) {
  return mode == SceneMode::kPair ? "pair" : "array";
}

struct Scene {
  RoomSpec room;
  MicArray array;  // positions in room coordinates
  Vec3 target_pos = Vec3::Zero();
  Vec3 interference_pos = Vec3::Zero();
  double snr_db = 0.0;
  std::vector<double> per_mic_gains;  // linear
  double noise_variance = 1.0;
  double overall_gain = 1.0;
  std::uint64_t seed = 0;
  SceneMode mode = SceneMode::kArray;
  double sample_rate = defaults::kSampleRate;

  Doa target_doa() const { return Doa::FromVector(target_pos - array.centroid()); }
  Doa interference_doa() const {
    return Doa::FromVector(interference_pos - array.centroid());
  }
};

// Pair mode draws a fresh two-microphone array with random spacing; array
// mode places a copy of `array`.
struct SceneTemplate {
  SceneMode mode = SceneMode::kArray;
  MicArray array;
  double spacing_min = defaults::kMicSpacingMin;
  double spacing_max = defaults::kMicSpacingMax;
  double sample_rate = defaults::kSampleRate;
  // Array mode only: reject scenes in which no pair separates the two
  // sources, i.e. every pair has sigmoid gain above kDiscriminativeGain.
  double alpha = defaults::kAlpha;
  double beta = defaults::kBeta;
  bool require_discriminative_pair = true;
};

inline double MinDiscriminativeGap(double alpha, double beta) {
  const double g = defaults::kDiscriminativeGain;
  return beta + std::log((1.0 - g) / g) / alpha;
}

inline void ValidateScene(const Scene& scene) {
  Validate(scene.room);
  Validate(scene.array);
  for (const auto& p : scene.array.positions) {
    PAIRBEAM_CHECK(SurfaceDistance(scene.room, p) >= defaults::kMinSurfaceDistance - 1e-12,
                   ErrorKind::kGeometry, "microphone too close to a surface");
  }
  for (const Vec3* s : {&scene.target_pos, &scene.interference_pos}) {
    PAIRBEAM_CHECK(StrictlyInside(scene.room, *s), ErrorKind::kGeometry,
                   "source outside the room");
    const double d = (*s - scene.array.centroid()).norm();
    PAIRBEAM_CHECK(d >= defaults::kSourceDistanceMin - 1e-12 &&
                       d <= defaults::kSourceDistanceMax + 1e-12,
                   ErrorKind::kGeometry, "source-array distance out of range");
  }
  PAIRBEAM_CHECK(scene.per_mic_gains.size() == scene.array.size(), ErrorKind::kShape,
                 "one gain per microphone required");
}

inline Scene sample_scene(std::uint64_t seed, const SceneTemplate& tmpl) {
  namespace d = defaults;
  Rng rng(seed);
  Scene s;
  s.seed = seed;
  s.mode = tmpl.mode;
  s.sample_rate = tmpl.sample_rate;
  s.room.length = rng.uniform(d::kRoomLengthMin, d::kRoomLengthMax);
  s.room.width = rng.uniform(d::kRoomWidthMin, d::kRoomWidthMax);
  s.room.height = rng.uniform(d::kRoomHeightMin, d::kRoomHeightMax);
  s.room.reflection_coeff = rng.uniform(d::kReflectionMin, d::kReflectionMax);
  s.room.speed_of_sound = rng.uniform(d::kSpeedOfSoundMin, d::kSpeedOfSoundMax);
  s.snr_db = rng.uniform(d::kSnrDbMin, d::kSnrDbMax);
  s.noise_variance = rng.uniform(d::kNoiseVarianceMin, d::kNoiseVarianceMax);
  s.overall_gain = rng.uniform(d::kOverallGainMin, d::kOverallGainMax);

  // Array centred on the origin, before placement.
  std::vector<Vec3> local;
  std::string name;
  if (tmpl.mode == SceneMode::kPair) {
    const double spacing = rng.uniform(tmpl.spacing_min, tmpl.spacing_max);
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const Vec3 axis(r * std::cos(phi), r * std::sin(phi), z);
    local = {0.5 * spacing * axis, -0.5 * spacing * axis};
    name = "pair";
  } else {
    Validate(tmpl.array);
    const Vec3 c = tmpl.array.centroid();
    const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
    for (const auto& p : tmpl.array.positions) local.push_back(rot * (p - c));
    name = tmpl.array.name;
  }
  s.per_mic_gains.resize(local.size());
  for (auto& g : s.per_mic_gains) {
    g = std::pow(10.0, rng.uniform(d::kMicGainDbMin, d::kMicGainDbMax) / 20.0);
  }

  const double margin = d::kMinSurfaceDistance;
  auto random_point = [&] {
    return Vec3(rng.uniform(margin, s.room.length - margin),
                rng.uniform(margin, s.room.width - margin),
                rng.uniform(margin, s.room.height - margin));
  };

  for (int attempt = 0; attempt < d::kMaxSceneRetries; ++attempt) {
    const Vec3 center = random_point();
    MicArray placed{name, {}};
    bool ok = true;
    for (const auto& p : local) {
      placed.positions.push_back(center + p);
      ok = ok && SurfaceDistance(s.room, placed.positions.back()) >= margin;
    }
    if (!ok) continue;
    const Vec3 target = random_point();
    const Vec3 interf = random_point();
    const double dt = (target - center).norm();
    const double di = (interf - center).norm();
    if (dt < d::kSourceDistanceMin || dt > d::kSourceDistanceMax ||
        di < d::kSourceDistanceMin || di > d::kSourceDistanceMax) {
      continue;
    }
    s.array = std::move(placed);
    s.target_pos = target;
    s.interference_pos = interf;
    if (tmpl.mode == SceneMode::kArray && tmpl.require_discriminative_pair) {
      const double need = MinDiscriminativeGap(tmpl.alpha, tmpl.beta);
      const Doa td = s.target_doa();
      const Doa id = s.interference_doa();
      double widest = 0.0;
      for (const auto& pair : enumerate_pairs(s.array)) {
        widest = std::max(widest, tdoa_gap(s.array, pair, td, id, s.sample_rate,
                                           s.room.speed_of_sound));
      }
      if (widest < need) continue;
    }
    return s;
  }
  throw Error(ErrorKind::kSampling, "no valid scene after " +
                                        std::to_string(d::kMaxSceneRetries) +
                                        " attempts (seed " + std::to_string(seed) + ")");
}

// Per-microphone impulse responses, one row per microphone.
struct Rir {
  Eigen::MatrixXd taps;  // D x L
  double sample_rate = 0.0;
};

namespace room_detail {

struct AxisImage {
  double sign;    // +1 or -1 applied to the source coordinate
  double offset;  // 2 n L
  int reflections;
};

inline std::vector<AxisImage> AxisImages(double extent, int max_order) {
  std::vector<AxisImage> out;
  for (int n = -max_order; n <= max_order; ++n) {
    for (int q = 0; q <= 1; ++q) {
      const int refl = std::abs(n - q) + std::abs(n);
      if (refl <= max_order) out.push_back({1.0 - 2.0 * q, 2.0 * n * extent, refl});
    }
  }
  return out;
}

inline double Sinc(double x) {
  if (x == 0.0) return 1.0;
  if (x == std::round(x)) return 0.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace room_detail

// Image-source room impulse responses. Each image contributes
// reflection_coeff^(reflections) / (4 pi distance), placed at
// distance * fs / c samples by a Hann-windowed sinc of `interp_taps` taps.
inline Rir simulate_rir(const RoomSpec& room, const Vec3& source, const MicArray& array,
                        double sample_rate, int max_order = defaults::kMaxReflectionOrder,
                        std::size_t interp_taps = defaults::kFractionalDelayTaps) {
  using namespace room_detail;
  Validate(room);
  PAIRBEAM_CHECK(max_order >= 0, ErrorKind::kArgument, "reflection order must be >= 0");
  PAIRBEAM_CHECK(interp_taps % 2 == 1, ErrorKind::kArgument,
                 "interpolation filter needs an odd tap count");
  PAIRBEAM_CHECK(StrictlyInside(room, source), ErrorKind::kGeometry,
                 "source outside the room");
  for (const auto& m : array.positions) {
    PAIRBEAM_CHECK(StrictlyInside(room, m), ErrorKind::kGeometry,
                   "microphone outside the room");
  }

  const auto xs = AxisImages(room.length, max_order);
  const auto ys = AxisImages(room.width, max_order);
  const auto zs = AxisImages(room.height, max_order);
  const double beta = room.reflection_coeff;
  std::vector<double> beta_pow(static_cast<std::size_t>(max_order) + 1, 1.0);
  for (int k = 1; k <= max_order; ++k) beta_pow[k] = beta_pow[k - 1] * beta;

  struct Arrival {
    double delay;
    double gain;
  };
  const double samples_per_meter = sample_rate / room.speed_of_sound;
  std::vector<std::vector<Arrival>> arrivals(array.size());
  double max_delay = 0.0;
  for (std::size_t m = 0; m < array.size(); ++m) {
    const Vec3& mic = array.positions[m];
    for (const auto& ix : xs) {
      const double dx = ix.sign * source.x() + ix.offset - mic.x();
      for (const auto& iy : ys) {
        const int rxy = ix.reflections + iy.reflections;
        if (rxy > max_order) continue;
        const double dy = iy.sign * source.y() + iy.offset - mic.y();
        for (const auto& iz : zs) {
          const int refl = rxy + iz.reflections;
          if (refl > max_order) continue;
          // 0^0 == 1 keeps the direct path when beta == 0.
          if (beta_pow[refl] == 0.0) continue;
          const double dz = iz.sign * source.z() + iz.offset - mic.z();
          const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);
          double delay = dist * samples_per_meter;
          // Snap rounding noise so integer delays give single-tap impulses.
          if (std::abs(delay - std::round(delay)) < 1e-9) delay = std::round(delay);
          arrivals[m].push_back({delay, beta_pow[refl] / (4.0 * std::numbers::pi * dist)});
          max_delay = std::max(max_delay, delay);
        }
      }
    }
  }

  const long half = static_cast<long>(interp_taps / 2);
  const long length = static_cast<long>(std::ceil(max_delay)) + half + 2;
  Rir rir;
  rir.sample_rate = sample_rate;
  rir.taps = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(array.size()), length);
  const double window_half_width = static_cast<double>(half + 1);
  for (std::size_t m = 0; m < array.size(); ++m) {
    for (const auto& a : arrivals[m]) {
      const long center = std::lround(a.delay);
      for (long n = std::max(0L, center - half); n <= center + half; ++n) {
        const double x = static_cast<double>(n) - a.delay;
        const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * x / window_half_width));
        rir.taps(static_cast<Eigen::Index>(m), n) += a.gain * w * Sinc(x);
      }
    }
  }
  return rir;
}

inline std::size_t NextPowerOfTwo(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Linear convolution of `signal` with each row of `filters`, truncated to
// `out_len` samples.
inline std::vector<std::vector<double>> ConvolveRows(const std::vector<double>& signal,
                                                     const Eigen::MatrixXd& filters,
                                                     std::size_t out_len) {
  const std::size_t taps = static_cast<std::size_t>(filters.cols());
  const std::size_t nfft = NextPowerOfTwo(signal.size() + taps - 1);
  Eigen::FFT<double> fft;
  std::vector<double> padded(nfft, 0.0);
  std::copy(signal.begin(), signal.end(), padded.begin());
  std::vector<std::complex<double>> sig_f, filt_f, prod(nfft);
  fft.fwd(sig_f, padded);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(filters.rows()));
  std::vector<double> time;
  for (Eigen::Index r = 0; r < filters.rows(); ++r) {
    std::fill(padded.begin(), padded.end(), 0.0);
    for (std::size_t k = 0; k < taps; ++k) padded[k] = filters(r, static_cast<Eigen::Index>(k));
    fft.fwd(filt_f, padded);
    for (std::size_t k = 0; k < nfft; ++k) prod[k] = sig_f[k] * filt_f[k];
    fft.inv(time, prod);
    time.resize(out_len, 0.0);
    out[static_cast<std::size_t>(r)] = time;
  }
  return out;
}

struct MixtureComponents {
  MultichannelAudio mixture;
  MultichannelAudio target;
  MultichannelAudio interference;
  MultichannelAudio noise;
};

inline double Energy(const MultichannelAudio& audio) {
  double e = 0.0;
  for (const auto& ch : audio.channels) {
    for (double v : ch) e += v * v;
  }
  return e;
}

inline void Scale(MultichannelAudio& audio, double gain) {
  for (auto& ch : audio.channels) {
    for (auto& v : ch) v *= gain;
  }
}

// Renders a scene: both sources are convolved with their room responses,
// microphone gains are applied, the interference is scaled so that the
// target-to-interference energy ratio equals scene.snr_db, white noise is
// added and every component is scaled by one common gain so that the
// mixture peak equals scene.overall_gain. Components sum to the mixture.
inline MixtureComponents synthesize_mixture(
    const Scene& scene, const AudioBuffer& target_audio,
    const AudioBuffer& interference_audio, double duration_s = defaults::kSegmentSeconds,
    int max_order = defaults::kMaxReflectionOrder,
    std::size_t interp_taps = defaults::kFractionalDelayTaps) {
  const double fs = scene.sample_rate;
  const auto length = static_cast<std::size_t>(std::llround(duration_s * fs));
  PAIRBEAM_CHECK(target_audio.size() >= length && interference_audio.size() >= length,
                 ErrorKind::kLength,
                 "source segments shorter than " + std::to_string(duration_s) + " s");
  PAIRBEAM_CHECK(target_audio.sample_rate == fs && interference_audio.sample_rate == fs,
                 ErrorKind::kArgument, "source sample rate does not match the scene");
  PAIRBEAM_CHECK(scene.per_mic_gains.size() == scene.array.size(), ErrorKind::kShape,
                 "one gain per microphone required");

  const std::size_t mics = scene.array.size();
  auto render = [&](const AudioBuffer& src, const Vec3& pos) {
    const Rir rir = simulate_rir(scene.room, pos, scene.array, fs, max_order, interp_taps);
    std::vector<double> head(src.samples.begin(),
                             src.samples.begin() + static_cast<std::ptrdiff_t>(length));
    MultichannelAudio img{ConvolveRows(head, rir.taps, length), fs};
    for (std::size_t m = 0; m < mics; ++m) {
      for (auto& v : img.channels[m]) v *= scene.per_mic_gains[m];
    }
    return img;
  };

  MixtureComponents out;
  out.target = render(target_audio, scene.target_pos);
  out.interference = render(interference_audio, scene.interference_pos);

  const double target_energy = Energy(out.target);
  PAIRBEAM_CHECK(target_energy > 0.0, ErrorKind::kNumeric, "target image is silent");
  Scale(out.target, std::sqrt(static_cast<double>(mics * length) / target_energy));
  const double interf_energy = Energy(out.interference);
  if (interf_energy > 0.0) {
    const double wanted = static_cast<double>(mics * length) *
                          std::pow(10.0, -scene.snr_db / 10.0);
    Scale(out.interference, std::sqrt(wanted / interf_energy));
  }

  Rng noise_rng(DeriveSeed(scene.seed, 0x6e6f697365ull));
  const double noise_std =
      std::sqrt(scene.noise_variance * std::pow(10.0, defaults::kNoiseFloorDb / 10.0));
  out.noise.sample_rate = fs;
  out.noise.channels.assign(mics, std::vector<double>(length));
  for (auto& ch : out.noise.channels) {
    for (auto& v : ch) v = noise_std * noise_rng.normal();
  }

  out.mixture.sample_rate = fs;
  out.mixture.channels.assign(mics, std::vector<double>(length));
  double peak = 0.0;
  for (std::size_t m = 0; m < mics; ++m) {
    for (std::size_t n = 0; n < length; ++n) {
      const double v = out.target.channels[m][n] + out.interference.channels[m][n] +
                       out.noise.channels[m][n];
      out.mixture.channels[m][n] = v;
      peak = std::max(peak, std::abs(v));
    }
  }
  const double gain = scene.overall_gain / peak;
  for (auto* a : {&out.mixture, &out.target, &out.interference, &out.noise}) Scale(*a, gain);
  // Rebuild the mixture from the scaled parts so the sum holds to rounding.
  for (std::size_t m = 0; m < mics; ++m) {
    for (std::size_t n = 0; n < length; ++n) {
      out.mixture.channels[m][n] = out.target.channels[m][n] +
                                   out.interference.channels[m][n] +
                                   out.noise.channels[m][n];
    }
  }
  return out;
}

}  // namespace pairbeam

#endif  // PAIRBEAM_ROOM_HPP
