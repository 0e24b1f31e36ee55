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

// Short-time Fourier analysis and weighted overlap-add synthesis.
//
// Frames are taken fully inside the signal (no padding). The analysis window
// is a periodic Hann window; the synthesis window is the analysis window
// divided by the overlapped sum of squared windows, which makes
// istft(stft(x)) == x everywhere at least frame_size - hop samples from the
// ends.

#ifndef PAIRBEAM_SPECTRAL_HPP
#define PAIRBEAM_SPECTRAL_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "pairbeam/audio.hpp"
#include "pairbeam/error.hpp"

namespace pairbeam {

using Complex = std::complex<double>;

// One-sided complex spectrogram, frames along rows and bins along columns.
struct Spectrogram {
  Eigen::MatrixXcd bins;  // T x F
  std::size_t frame_size = 0;
  std::size_t hop = 0;
  double sample_rate = 0.0;

  Eigen::Index num_frames() const { return bins.rows(); }
  Eigen::Index num_bins() const { return bins.cols(); }
};

inline bool IsPowerOfTwo(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline std::vector<double> HannWindow(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

inline std::vector<double> SynthesisWindow(std::size_t frame_size, std::size_t hop) {
  const auto w = HannWindow(frame_size);
  std::vector<double> norm(hop, 0.0);
  for (std::size_t i = 0; i < frame_size; ++i) norm[i % hop] += w[i] * w[i];
  std::vector<double> s(frame_size);
  for (std::size_t i = 0; i < frame_size; ++i) s[i] = w[i] / norm[i % hop];
  return s;
}

inline std::size_t NumFrames(std::size_t length, std::size_t frame_size, std::size_t hop) {
  return length < frame_size ? 0 : (length - frame_size) / hop + 1;
}

inline void CheckFraming(std::size_t frame_size, std::size_t hop) {
  PAIRBEAM_CHECK(IsPowerOfTwo(frame_size), ErrorKind::kFormat,
                 "frame size must be a power of two");
  PAIRBEAM_CHECK(hop > 0 && hop <= frame_size && frame_size % hop == 0,
                 ErrorKind::kFormat, "hop must divide the frame size");
}

inline Spectrogram stft(const AudioBuffer& audio, std::size_t frame_size,
                        std::size_t hop) {
  CheckFraming(frame_size, hop);
  PAIRBEAM_CHECK(audio.size() >= frame_size, ErrorKind::kLength,
                 "audio shorter than one frame (" + std::to_string(audio.size()) +
                     " < " + std::to_string(frame_size) + ")");
  const std::size_t frames = NumFrames(audio.size(), frame_size, hop);
  const std::size_t num_bins = frame_size / 2 + 1;
  const auto window = HannWindow(frame_size);

  Spectrogram spec;
  spec.frame_size = frame_size;
  spec.hop = hop;
  spec.sample_rate = audio.sample_rate;
  spec.bins.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(num_bins));

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(frame_size);
  std::vector<Complex> out;
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = audio.samples.data() + t * hop;
    for (std::size_t n = 0; n < frame_size; ++n) frame[n] = src[n] * window[n];
    fft.fwd(out, frame);
    for (std::size_t k = 0; k < num_bins; ++k) {
      spec.bins(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = out[k];
    }
  }
  return spec;
}

inline AudioBuffer istft(const Spectrogram& spec) {
  CheckFraming(spec.frame_size, spec.hop);
  const std::size_t num_bins = spec.frame_size / 2 + 1;
  PAIRBEAM_CHECK(static_cast<std::size_t>(spec.num_bins()) == num_bins,
                 ErrorKind::kFormat, "bin count does not match frame size");
  PAIRBEAM_CHECK(spec.num_frames() > 0, ErrorKind::kFormat, "spectrogram has no frames");
  const std::size_t frames = static_cast<std::size_t>(spec.num_frames());
  const std::size_t length = (frames - 1) * spec.hop + spec.frame_size;
  const auto synth = SynthesisWindow(spec.frame_size, spec.hop);

  AudioBuffer audio;
  audio.sample_rate = spec.sample_rate;
  audio.samples.assign(length, 0.0);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<Complex> half(num_bins);
  std::vector<double> frame;
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < num_bins; ++k) {
      half[k] = spec.bins(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
    }
    // DC and Nyquist of a real frame are real.
    half.front().imag(0.0);
    half.back().imag(0.0);
    fft.inv(frame, half, static_cast<Eigen::Index>(spec.frame_size));
    double* dst = audio.samples.data() + t * spec.hop;
    for (std::size_t n = 0; n < spec.frame_size; ++n) dst[n] += frame[n] * synth[n];
  }
  return audio;
}

inline std::vector<Spectrogram> stft(const MultichannelAudio& audio, std::size_t frame_size,
                                     std::size_t hop) {
  std::vector<Spectrogram> specs;
  specs.reserve(audio.num_channels());
  for (std::size_t c = 0; c < audio.num_channels(); ++c) {
    specs.push_back(stft(audio.channel(c), frame_size, hop));
  }
  return specs;
}

}  // namespace pairbeam

#endif  // PAIRBEAM_SPECTRAL_HPP
