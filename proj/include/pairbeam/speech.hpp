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

// Source material for scene synthesis: a WAV corpus directory, or a seeded
// generator of speech-like signals (harmonic voiced syllables with moving
// formants, noisy fricatives and pauses) for corpus-free runs.

#ifndef PAIRBEAM_SPEECH_HPP
#define PAIRBEAM_SPEECH_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pairbeam/audio.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/random.hpp"

namespace pairbeam {

inline AudioBuffer SpeechLikeSignal(std::uint64_t seed, double duration_s,
                                    double sample_rate) {
  Rng rng(seed);
  const auto length = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  AudioBuffer out{std::vector<double>(length, 0.0), sample_rate};

  const double f0_base = rng.uniform(90.0, 250.0);
  const double nyquist_guard = 0.45 * sample_rate;
  double phase = 0.0;
  std::size_t pos = static_cast<std::size_t>(rng.uniform(0.0, 0.1) * sample_rate);

  while (pos < length) {
    const auto syl_len = static_cast<std::size_t>(rng.uniform(0.12, 0.35) * sample_rate);
    const bool voiced = rng.uniform() < 0.8;
    const double level = rng.uniform(0.3, 1.0);
    const std::size_t end = std::min(length, pos + syl_len);
    const double attack = 0.2 * static_cast<double>(syl_len);

    if (voiced) {
      // Formant tracks move linearly across the syllable.
      const double f1a = rng.uniform(300, 900), f1b = rng.uniform(300, 900);
      const double f2a = rng.uniform(900, 2500), f2b = rng.uniform(900, 2500);
      const double f3a = rng.uniform(2400, 3400), f3b = rng.uniform(2400, 3400);
      const double glide = rng.uniform(-0.15, 0.15);
      const double vib_rate = rng.uniform(3.0, 6.0);
      for (std::size_t n = pos; n < end; ++n) {
        const double x = static_cast<double>(n - pos) / static_cast<double>(syl_len);
        const double f0 =
            f0_base * (1.0 + glide * x + 0.03 * std::sin(2.0 * std::numbers::pi * vib_rate *
                                                         static_cast<double>(n) / sample_rate));
        phase += 2.0 * std::numbers::pi * f0 / sample_rate;
        if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
        const double formants[3] = {f1a + (f1b - f1a) * x, f2a + (f2b - f2a) * x,
                                    f3a + (f3b - f3a) * x};
        const double widths[3] = {80.0, 120.0, 180.0};
        const double weights[3] = {1.0, 0.6, 0.3};
        double v = 0.0;
        for (int k = 1; f0 * k < nyquist_guard && k <= 60; ++k) {
          const double fk = f0 * k;
          double amp = 0.02;
          for (int r = 0; r < 3; ++r) {
            const double dfq = (fk - formants[r]) / widths[r];
            amp += weights[r] / (1.0 + dfq * dfq);
          }
          v += amp * std::sin(k * phase) / std::sqrt(static_cast<double>(k));
        }
        const double t = static_cast<double>(n - pos);
        const double env = std::min({1.0, t / attack, static_cast<double>(end - n) / attack});
        out.samples[n] += level * 0.15 * env * v;
      }
    } else {
      // Band-passed noise burst (RBJ biquad).
      const double fc = rng.uniform(2500.0, std::min(6500.0, 0.4 * sample_rate));
      const double q = 2.0;
      const double w0 = 2.0 * std::numbers::pi * fc / sample_rate;
      const double alpha = std::sin(w0) / (2.0 * q);
      const double a0 = 1.0 + alpha;
      const double b0 = alpha / a0, b2 = -alpha / a0;
      const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
      double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
      for (std::size_t n = pos; n < end; ++n) {
        const double xin = rng.normal();
        const double y = b0 * xin + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = xin;
        y2 = y1;
        y1 = y;
        const double t = static_cast<double>(n - pos);
        const double env = std::min({1.0, t / attack, static_cast<double>(end - n) / attack});
        out.samples[n] += level * 0.3 * env * y;
      }
    }
    const double gap = rng.uniform() < 0.15 ? rng.uniform(0.2, 0.45) : rng.uniform(0.0, 0.12);
    pos = end + static_cast<std::size_t>(gap * sample_rate);
  }
  return out;
}

// WAV files grouped by speaker: the first directory level below the root
// names the speaker (LibriSpeech style); files directly in the root are
// each their own speaker.
class SpeechCorpus {
 public:
  explicit SpeechCorpus(const std::filesystem::path& root) : root_(root) {
    namespace fs = std::filesystem;
    PAIRBEAM_CHECK(fs::is_directory(root), ErrorKind::kIo,
                   "corpus directory '" + root.string() + "' does not exist");
    std::map<std::string, std::vector<fs::path>> by_speaker;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext != ".wav") continue;
      const auto rel = fs::relative(entry.path(), root);
      const std::string speaker =
          std::distance(rel.begin(), rel.end()) > 1 ? rel.begin()->string()
                                                     : rel.stem().string();
      by_speaker[speaker].push_back(entry.path());
    }
    for (auto& [speaker, files] : by_speaker) {
      std::sort(files.begin(), files.end());
      speakers_.emplace_back(speaker, std::move(files));
    }
    PAIRBEAM_CHECK(speakers_.size() >= 2, ErrorKind::kIo,
                   "corpus needs WAV files from at least two speakers");
  }

  std::size_t num_speakers() const { return speakers_.size(); }

  // Draws a target and an interference segment of `length` samples from two
  // different speakers. Files shorter than `length` are skipped.
  std::pair<AudioBuffer, AudioBuffer> DrawPair(Rng& rng, std::size_t length,
                                               double sample_rate) const {
    const std::size_t a = rng.index(speakers_.size());
    std::size_t b = rng.index(speakers_.size() - 1);
    if (b >= a) ++b;
    return {DrawSegment(rng, a, length, sample_rate), DrawSegment(rng, b, length, sample_rate)};
  }

 private:
  AudioBuffer DrawSegment(Rng& rng, std::size_t speaker, std::size_t length,
                          double sample_rate) const {
    const auto& files = speakers_[speaker].second;
    const std::size_t start = rng.index(files.size());
    for (std::size_t k = 0; k < files.size(); ++k) {
      const auto audio = ReadWav(files[(start + k) % files.size()]);
      if (audio.sample_rate != sample_rate || audio.num_samples() < length) continue;
      const std::size_t offset = rng.index(audio.num_samples() - length + 1);
      const auto& ch = audio.channels.front();
      return {std::vector<double>(ch.begin() + static_cast<std::ptrdiff_t>(offset),
                                  ch.begin() + static_cast<std::ptrdiff_t>(offset + length)),
              sample_rate};
    }
    throw Error(ErrorKind::kLength, "speaker '" + speakers_[speaker].first +
                                        "' has no file with enough samples at the "
                                        "required rate");
  }

  std::filesystem::path root_;
  std::vector<std::pair<std::string, std::vector<std::filesystem::path>>> speakers_;
};

}  // namespace pairbeam

#endif  // PAIRBEAM_SPEECH_HPP
