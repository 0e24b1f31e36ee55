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

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <fstream>

#include "testing.hpp"

namespace pairbeam {
namespace {

TEST(Wav, FloatRoundTripExact) {
  testing::TempDir dir("wav");
  Rng rng(1);
  MultichannelAudio a{{}, 16000.0};
  for (int c = 0; c < 3; ++c) {
    std::vector<double> ch(1000);
    for (auto& v : ch) v = static_cast<float>(0.3 * rng.normal());
    a.channels.push_back(ch);
  }
  WriteWav(dir / "a.wav", a);
  const auto b = ReadWav(dir / "a.wav");
  EXPECT_EQ(b.sample_rate, 16000.0);
  EXPECT_EQ(b.channels, a.channels);
}

TEST(Wav, Pcm16RoundTrip) {
  MultichannelAudio a{{std::vector<double>{0.0, 0.5, -0.5, 0.999, -1.0}}, 8000.0};
  const auto b = DecodeWav(EncodeWav(a, SampleFormat::kPcm16));
  ASSERT_EQ(b.num_samples(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(b.channels[0][i], a.channels[0][i], 1.0 / 32768);
}

TEST(Wav, Pcm24Decode) {
  // Hand-built mono 24-bit file with samples 0x400000 (0.5) and 0xC00000 (-0.5).
  std::vector<std::uint8_t> bytes;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto u16 = [&](std::uint16_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto tag = [&](const char* t) { bytes.insert(bytes.end(), t, t + 4); };
  tag("RIFF");
  u32(36 + 6);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(1);
  u16(1);
  u32(16000);
  u32(16000 * 3);
  u16(3);
  u16(24);
  tag("data");
  u32(6);
  for (std::uint8_t b : {0x00, 0x00, 0x40, 0x00, 0x00, 0xC0}) bytes.push_back(b);
  const auto a = DecodeWav(bytes);
  ASSERT_EQ(a.num_samples(), 2u);
  EXPECT_DOUBLE_EQ(a.channels[0][0], 0.5);
  EXPECT_DOUBLE_EQ(a.channels[0][1], -0.5);
}

TEST(Wav, Errors) {
  try {
    DecodeWav({'R', 'I', 'F', 'F'});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
  try {
    ReadWav("/nonexistent/x.wav");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(TensorFile, RoundTrip) {
  TensorFile f;
  f.metadata["k"] = "v with spaces";
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  f.Put("m", ToTensor(m));
  f.Put("v", ToTensor(Eigen::VectorXd(Eigen::VectorXd::LinSpaced(4, 0, 1))));
  const auto bytes = EncodeTensorFile(f);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "STRN");
  const TensorFile g = DecodeTensorFile(bytes);
  EXPECT_EQ(*g.Meta("k"), "v with spaces");
  EXPECT_EQ(ToMatrix(g.Get("m")), m);
  EXPECT_EQ(g.Get("v").dims, std::vector<std::uint64_t>{4});
  EXPECT_EQ(g.tensors[0].first, "m");
  EXPECT_EQ(EncodeTensorFile(g), bytes);
}

TEST(TensorFile, Errors) {
  const auto bytes = EncodeTensorFile(TensorFile{});
  auto cut = bytes;
  cut.pop_back();
  try {
    DecodeTensorFile(cut);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.issue(), FormatIssue::kTruncated);
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
  }
  EXPECT_THROW(ReadTensorFile("/nonexistent/w.strn"), Error);
}

TEST(Random, Determinism) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(DeriveSeed(1, 0), DeriveSeed(1, 1));
  EXPECT_NE(DeriveSeed(1, 0), DeriveSeed(2, 0));
  Rng c(3);
  double mean = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = c.normal();
    mean += v;
    sq += v * v;
  }
  EXPECT_NEAR(mean / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(c.index(5), 5u);
  }
}

TEST(Parallel, CoversEveryIndexAndRethrows) {
  for (std::size_t workers : {1u, 3u}) {
    std::vector<std::atomic<int>> hits(50);
    ParallelFor(50, workers, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
    EXPECT_THROW(ParallelFor(10, workers,
                             [](std::size_t i) {
                               if (i == 4) throw Error(ErrorKind::kNumeric, "boom");
                             }),
                 Error);
  }
}

}  // namespace
}  // namespace pairbeam
