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

// Time-domain audio containers and a minimal RIFF/WAVE reader and writer
// (16-bit PCM, 24/32-bit PCM on read, 32-bit IEEE float; little-endian).

#ifndef PAIRBEAM_AUDIO_HPP
#define PAIRBEAM_AUDIO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pairbeam/error.hpp"

namespace pairbeam {

struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 0.0;

  std::size_t size() const { return samples.size(); }
};

// Channel-major multichannel audio; all channels share one length.
struct MultichannelAudio {
  std::vector<std::vector<double>> channels;
  double sample_rate = 0.0;

  std::size_t num_channels() const { return channels.size(); }
  std::size_t num_samples() const {
    return channels.empty() ? 0 : channels.front().size();
  }
  AudioBuffer channel(std::size_t c) const { return {channels.at(c), sample_rate}; }
};

inline void Validate(const AudioBuffer& audio) {
  PAIRBEAM_CHECK(audio.sample_rate > 0.0, ErrorKind::kArgument,
                 "sample rate must be positive");
  PAIRBEAM_CHECK(!audio.samples.empty(), ErrorKind::kLength,
                 "audio buffer is empty");
  for (double s : audio.samples) {
    PAIRBEAM_CHECK(std::isfinite(s), ErrorKind::kNumeric,
                   "audio contains non-finite samples");
  }
}

inline void Validate(const MultichannelAudio& audio) {
  PAIRBEAM_CHECK(!audio.channels.empty(), ErrorKind::kArgument,
                 "audio has no channels");
  for (const auto& ch : audio.channels) {
    PAIRBEAM_CHECK(ch.size() == audio.num_samples(), ErrorKind::kShape,
                   "channels have different lengths");
    Validate(AudioBuffer{ch, audio.sample_rate});
  }
}

enum class SampleFormat { kPcm16, kFloat32 };

namespace wav_detail {

inline void PutU16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void PutTag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

inline std::uint32_t GetU32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t GetU16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace wav_detail

inline std::vector<std::uint8_t> EncodeWav(const MultichannelAudio& audio,
                                           SampleFormat format) {
  using namespace wav_detail;
  const std::size_t channels = audio.num_channels();
  const std::size_t frames = audio.num_samples();
  PAIRBEAM_CHECK(channels > 0 && channels < 65536, ErrorKind::kArgument,
                 "bad channel count for WAV output");
  const std::uint16_t bits = format == SampleFormat::kPcm16 ? 16 : 32;
  const std::uint32_t block_align = static_cast<std::uint32_t>(channels * bits / 8);
  const std::uint64_t data_bytes = static_cast<std::uint64_t>(frames) * block_align;
  PAIRBEAM_CHECK(data_bytes < 0xFFFFFFF0ull, ErrorKind::kArgument,
                 "audio too long for a RIFF file");
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  PutTag(out, "RIFF");
  PutU32(out, static_cast<std::uint32_t>(36 + data_bytes));
  PutTag(out, "WAVE");
  PutTag(out, "fmt ");
  PutU32(out, 16);
  PutU16(out, format == SampleFormat::kPcm16 ? kFormatPcm : kFormatFloat);
  PutU16(out, static_cast<std::uint16_t>(channels));
  PutU32(out, rate);
  PutU32(out, rate * block_align);
  PutU16(out, static_cast<std::uint16_t>(block_align));
  PutU16(out, bits);
  PutTag(out, "data");
  PutU32(out, static_cast<std::uint32_t>(data_bytes));

  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double s = audio.channels[c][n];
      if (format == SampleFormat::kPcm16) {
        const long q = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
        const auto v = static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L));
        PutU16(out, static_cast<std::uint16_t>(v));
      } else {
        const float f = static_cast<float>(s);
        std::uint32_t bitsv;
        std::memcpy(&bitsv, &f, sizeof(bitsv));
        PutU32(out, bitsv);
      }
    }
  }
  return out;
}

inline MultichannelAudio DecodeWav(const std::vector<std::uint8_t>& bytes) {
  using namespace wav_detail;
  PAIRBEAM_CHECK(bytes.size() >= 12 && std::memcmp(bytes.data(), "RIFF", 4) == 0 &&
                     std::memcmp(bytes.data() + 8, "WAVE", 4) == 0,
                 ErrorKind::kFormat, "not a RIFF/WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = GetU32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      PAIRBEAM_CHECK(size >= 16 && avail >= 16, ErrorKind::kFormat, "short fmt chunk");
      format = GetU16(chunk + 8);
      channels = GetU16(chunk + 10);
      rate = GetU32(chunk + 12);
      bits = GetU16(chunk + 22);
      if (format == kFormatExtensible) {
        PAIRBEAM_CHECK(size >= 40 && avail >= 40, ErrorKind::kFormat,
                       "short extensible fmt chunk");
        format = GetU16(chunk + 32);
      }
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = std::min<std::size_t>(size, avail);
      break;
    }
    pos = body + size + (size & 1u);
  }
  PAIRBEAM_CHECK(channels > 0 && rate > 0, ErrorKind::kFormat, "missing fmt chunk");
  PAIRBEAM_CHECK(data != nullptr, ErrorKind::kFormat, "missing data chunk");
  const bool supported = (format == kFormatPcm && (bits == 16 || bits == 24 || bits == 32)) ||
                         (format == kFormatFloat && bits == 32);
  PAIRBEAM_CHECK(supported, ErrorKind::kFormat,
                 "unsupported sample format " + std::to_string(format) + "/" +
                     std::to_string(bits) + " bit");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * channels);
  MultichannelAudio audio;
  audio.sample_rate = rate;
  audio.channels.assign(channels, std::vector<double>(frames));
  for (std::size_t n = 0; n < frames; ++n) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::uint8_t* p = data + (n * channels + c) * bytes_per_sample;
      double v = 0.0;
      if (format == kFormatFloat) {
        const std::uint32_t raw = GetU32(p);
        float f;
        std::memcpy(&f, &raw, sizeof(f));
        v = f;
      } else if (bits == 16) {
        v = static_cast<std::int16_t>(GetU16(p)) / 32768.0;
      } else if (bits == 24) {
        std::int32_t raw = p[0] | (p[1] << 8) | (p[2] << 16);
        if (raw & 0x800000) raw -= 0x1000000;
        v = raw / 8388608.0;
      } else {
        v = static_cast<std::int32_t>(GetU32(p)) / 2147483648.0;
      }
      audio.channels[c][n] = v;
    }
  }
  return audio;
}

inline MultichannelAudio ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  PAIRBEAM_CHECK(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return DecodeWav(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

// Writes through a temporary sibling and renames, so readers never observe
// a partially written file.
inline void WriteFileAtomic(const std::filesystem::path& path,
                            const std::vector<std::uint8_t>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    PAIRBEAM_CHECK(out.good(), ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    PAIRBEAM_CHECK(out.good(), ErrorKind::kIo, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  PAIRBEAM_CHECK(!ec, ErrorKind::kIo, "rename failed for " + path.string());
}

inline void WriteWav(const std::filesystem::path& path, const MultichannelAudio& audio,
                     SampleFormat format = SampleFormat::kFloat32) {
  WriteFileAtomic(path, EncodeWav(audio, format));
}

inline void WriteWav(const std::filesystem::path& path, const AudioBuffer& audio,
                     SampleFormat format = SampleFormat::kFloat32) {
  WriteWav(path, MultichannelAudio{{audio.samples}, audio.sample_rate}, format);
}

}  // namespace pairbeam

#endif  // PAIRBEAM_AUDIO_HPP
