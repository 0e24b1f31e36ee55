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

#include <cmath>
#include <numbers>

#include "testing.hpp"

namespace pairbeam {
namespace {

MicArray TwoMics(Vec3 a, Vec3 b) { return MicArray{"pair", {a, b}}; }

TEST(Pairs, Enumeration) {
  const MicArray two = TwoMics(Vec3(0, 0, 0), Vec3(0.1, 0, 0));
  EXPECT_EQ(enumerate_pairs(two), (std::vector<MicPair>{{0, 1}}));
  const MicArray four = PresetGeometry("respeaker_usb");
  EXPECT_EQ(enumerate_pairs(four),
            (std::vector<MicPair>{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}));
  EXPECT_EQ(enumerate_pairs(PresetGeometry("matrix_voice")).size(), 28u);
  try {
    enumerate_pairs(MicArray{"one", {Vec3::Zero()}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kGeometry);
  }
}

TEST(Tdoa, WorkedValue) {
  const MicArray a = TwoMics(Vec3(0.05, 0, 0), Vec3(-0.05, 0, 0));
  const Doa d = Doa::FromUnitVector(Vec3(1, 0, 0));
  EXPECT_NEAR(tdoa(a, 0, 1, d, 16000.0, 343.0), 16000.0 / 343.0 * 0.1, 1e-12);
  EXPECT_NEAR(tdoa(a, 0, 1, d, 16000.0, 343.0), 4.6647, 1e-4);
  EXPECT_EQ(tdoa(a, 0, 1, Doa::FromUnitVector(Vec3(0, 1, 0)), 16000.0, 343.0), 0.0);
}

TEST(Tdoa, AntisymmetricAndBounded) {
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const MicArray a = TwoMics(Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.1,
                               Vec3(rng.normal(), rng.normal(), rng.normal()) * 0.1);
    const Doa d = Doa::FromVector(testing::RandomDirection(rng));
    const double uv = tdoa(a, 0, 1, d, 16000.0, 343.0);
    EXPECT_DOUBLE_EQ(uv, -tdoa(a, 1, 0, d, 16000.0, 343.0));
    EXPECT_LE(std::abs(uv),
              16000.0 / 343.0 * (a.positions[0] - a.positions[1]).norm() + 1e-12);
  }
}

TEST(Steering, Values) {
  const auto a0 = steering_vector(0.0, 512, 257);
  for (Eigen::Index f = 0; f < a0.size(); ++f) EXPECT_EQ(a0(f), std::complex<double>(1.0, 0.0));
  const auto a = steering_vector(256.0, 512, 257);
  EXPECT_NEAR(std::abs(a(1) - std::complex<double>(-1.0, 0.0)), 0.0, 1e-12);
  const auto p = steering_vector(2.3, 512, 257), m = steering_vector(-2.3, 512, 257);
  EXPECT_LT((p.conjugate() - m).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(steering_vector(1.0, 512, 256), Error);
}

TEST(TdoaGap, WorkedValues) {
  const MicArray a = TwoMics(Vec3(0.1, 0, 0), Vec3(0, 0, 0));
  const Doa t = Doa::FromUnitVector(Vec3(1, 0, 0));
  const Doa i = Doa::FromUnitVector(Vec3(-1, 0, 0));
  EXPECT_NEAR(tdoa_gap(a, {0, 1}, t, i, 16000.0, 343.0), 9.3294, 1e-4);
  EXPECT_EQ(tdoa_gap(a, {0, 1}, t, t, 16000.0, 343.0), 0.0);
}

TEST(Doa, Construction) {
  EXPECT_THROW(Doa::FromUnitVector(Vec3(1, 1, 0)), Error);
  EXPECT_THROW(Doa::FromVector(Vec3::Zero()), Error);
  const Doa d = Doa::FromAzimuthElevation(90.0, 0.0);
  EXPECT_NEAR((d.vector() - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
}

TEST(Presets, Shapes) {
  EXPECT_EQ(PresetGeometry("respeaker_usb").size(), 4u);
  EXPECT_EQ(PresetGeometry("matrix_voice").size(), 8u);
  for (const auto& name : PresetNames()) {
    const MicArray a = PresetGeometry(name);
    EXPECT_NO_THROW(Validate(a)) << name;
    EXPECT_EQ(a.name, name);
  }
  for (const auto& name : {"respeaker_usb", "matrix_voice"}) {
    for (const auto& p : PresetGeometry(name).positions) EXPECT_EQ(p.z(), 0.0);
  }
  EXPECT_THROW(PresetGeometry("nope"), Error);
}

TEST(GeometryConfig, Parses) {
  const MicArray a = load_geometry(
      "# two mics\n"
      "name = \"bench\"\n"
      "mics = [[0, 0, 0],\n"
      "        [0.05, 0, 0]]\n");
  EXPECT_EQ(a.name, "bench");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a.positions[1], Vec3(0.05, 0, 0));
}

TEST(GeometryConfig, Errors) {
  for (const char* text : {"mics = [[0, 0, 0]]\n", "mics = [[0, 0, 0], [0, 0, 0]]\n",
                           "mics = [[0, 0], [1, 0]]\n", "mics = [[0,0,0],\n", "nonsense\n",
                           "name = \"x\"\n"}) {
    try {
      load_geometry(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConfig) << text;
    }
  }
}

TEST(GeometryConfig, FormatRoundTrip) {
  const MicArray a = PresetGeometry("minidsp_uma");
  const MicArray b = load_geometry(FormatGeometry(a));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.positions[i], b.positions[i]);
}

}  // namespace
}  // namespace pairbeam
