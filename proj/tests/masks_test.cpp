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
#include <complex>
#include <numbers>

#include "testing.hpp"

namespace pairbeam {
namespace {

using testing::RandomSpectrogram;

// Per-cell evaluation of the pair mask written directly from the scalar
// definitions.
double ScalarPairMask(std::complex<double> su, std::complex<double> sv,
                      std::complex<double> iu, std::complex<double> iv,
                      std::complex<double> bu, std::complex<double> bv, double g, double eps) {
  const double ps_u = su.real() * su.real() + su.imag() * su.imag();
  const double pi_u = iu.real() * iu.real() + iu.imag() * iu.imag();
  const double pb_u = bu.real() * bu.real() + bu.imag() * bu.imag();
  const double ps_v = sv.real() * sv.real() + sv.imag() * sv.imag();
  const double pi_v = iv.real() * iv.real() + iv.imag() * iv.imag();
  const double pb_v = bv.real() * bv.real() + bv.imag() * bv.imag();
  const double mu = (ps_u + g * pi_u) / (ps_u + pi_u + pb_u + eps);
  const double mv = (ps_v + g * pi_v) / (ps_v + pi_v + pb_v + eps);
  return mu * mv;
}

Spectrogram Filled(Eigen::Index t, Eigen::Index f, std::complex<double> v) {
  Spectrogram s;
  s.frame_size = static_cast<std::size_t>(2 * (f - 1));
  s.hop = s.frame_size / 4;
  s.bins = Eigen::MatrixXcd::Constant(t, f, v);
  return s;
}

TEST(CrossSpectrum, SelfIsPowerWithZeroPhase) {
  Rng rng(1);
  const Spectrogram y = RandomSpectrogram(rng, 5, 9);
  const auto c = steered_cross_spectrum(y, y, steering_vector(0.0, 16, 9));
  for (Eigen::Index t = 0; t < 5; ++t) {
    for (Eigen::Index f = 0; f < 9; ++f) {
      EXPECT_NEAR(c.bins(t, f).real(), std::norm(y.bins(t, f)), 1e-12);
      EXPECT_EQ(c.bins(t, f).imag(), 0.0);
    }
  }
}

TEST(CrossSpectrum, DelayedCopyPhaseCancels) {
  Rng rng(2);
  const double tau = 3.7;
  const Spectrogram yu = RandomSpectrogram(rng, 4, 257);
  Spectrogram yv = yu;
  for (Eigen::Index f = 0; f < 257; ++f) {
    yv.bins.col(f) *= std::polar(1.0, -2.0 * std::numbers::pi * f * tau / 512.0);
  }
  const auto c = steered_cross_spectrum(yu, yv, steering_vector(tau, 512, 257));
  for (Eigen::Index t = 0; t < 4; ++t) {
    for (Eigen::Index f = 0; f < 257; ++f) EXPECT_NEAR(std::arg(c.bins(t, f)), 0.0, 1e-9);
  }
}

TEST(CrossSpectrum, AnechoicArrivalPhaseCancels) {
  // Plane wave from the target direction sampled at both microphones; the
  // steered cross-spectrum of a bin-centred tone must be real-positive.
  const MicArray a{"pair", {Vec3(0.04, 0, 0), Vec3(-0.04, 0, 0)}};
  const Doa doa = Doa::FromAzimuthElevation(30.0, 10.0);
  const double tau = tdoa(a, 0, 1, doa, 16000.0, 343.0);
  const std::size_t k0 = 37;
  auto tone = [&](double delay) {
    std::vector<double> x(4096);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = std::cos(2.0 * std::numbers::pi * k0 * (i - delay) / 512.0);
    }
    return AudioBuffer{x, 16000.0};
  };
  // Mic u is closer to the source by tau samples when tau > 0.
  const auto su = stft(tone(-tau / 2), 512, 128), sv = stft(tone(tau / 2), 512, 128);
  const auto c = steered_cross_spectrum(su, sv, steering_vector(tau, 512, 257));
  for (Eigen::Index t = 0; t < c.bins.rows(); ++t) {
    EXPECT_NEAR(std::arg(c.bins(t, k0)), 0.0, 1e-9);
  }
}

TEST(CrossSpectrum, ShapeErrors) {
  Rng rng(3);
  const Spectrogram a = RandomSpectrogram(rng, 4, 9), b = RandomSpectrogram(rng, 5, 9);
  try {
    steered_cross_spectrum(a, b, steering_vector(0.0, 16, 9));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
  EXPECT_THROW(steered_cross_spectrum(a, a, Eigen::VectorXcd::Ones(8)), Error);
}

TEST(SigmoidGain, Values) {
  EXPECT_EQ(sigmoid_gain(1.0, 10.0, 1.0), 0.5);
  EXPECT_NEAR(sigmoid_gain(0.0, 10.0, 1.0), std::exp(10.0) / (1.0 + std::exp(10.0)), 1e-15);
  EXPECT_NEAR(sigmoid_gain(0.0, 10.0, 1.0), 0.9999546, 1e-7);
  const double far = sigmoid_gain(10.0, 10.0, 1.0);
  EXPECT_GE(far, 0.0);
  EXPECT_LT(far, 1e-38);
  EXPECT_EQ(sigmoid_gain(1e6, 10.0, 1.0), 0.0);
  EXPECT_EQ(sigmoid_gain(-1e6, 10.0, 1.0), 1.0);
  EXPECT_THROW(sigmoid_gain(0.0, 0.0, 1.0), Error);
}

TEST(OracleMask, LimitCases) {
  const auto one = Filled(3, 5, {1.0, 2.0}), zero = Filled(3, 5, 0.0);
  const auto i = Filled(3, 5, {0.5, -1.0});
  // G = 1, B = 0
  EXPECT_EQ(oracle_pair_mask(one, one, i, i, zero, zero, 1.0, 0.0).values.minCoeff(), 1.0);
  // pure target cell
  EXPECT_EQ(oracle_pair_mask(one, one, zero, zero, zero, zero, 0.0, 0.0).values.minCoeff(), 1.0);
  // pure interference cell
  EXPECT_EQ(oracle_pair_mask(zero, zero, i, i, zero, zero, 0.0).values.maxCoeff(), 0.0);
  // silent cell stays finite
  const auto silent = oracle_pair_mask(zero, zero, zero, zero, zero, zero, 0.5);
  EXPECT_TRUE(silent.values.allFinite());
  EXPECT_THROW(oracle_pair_mask(one, one, i, i, zero, zero, 1.5), Error);
}

TEST(OracleMask, MatchesScalarOracle) {
  Rng rng(4);
  const int t = 7, f = 11;
  std::vector<Spectrogram> s;
  for (int k = 0; k < 6; ++k) s.push_back(RandomSpectrogram(rng, t, f, std::exp(rng.normal())));
  for (double g : {0.0, 0.5, 0.25, 1.0}) {
    const auto m = oracle_pair_mask(s[0], s[1], s[2], s[3], s[4], s[5], g);
    for (int a = 0; a < t; ++a) {
      for (int b = 0; b < f; ++b) {
        const double ref = ScalarPairMask(s[0].bins(a, b), s[1].bins(a, b), s[2].bins(a, b),
                                          s[3].bins(a, b), s[4].bins(a, b), s[5].bins(a, b),
                                          g, 1e-20);
        EXPECT_NEAR(m.values(a, b), ref, 1e-12);
        EXPECT_GE(m.values(a, b), 0.0);
        EXPECT_LE(m.values(a, b), 1.0);
      }
    }
  }
}

TEST(OracleMask, ScaleInvariant) {
  Rng rng(5);
  std::vector<Spectrogram> s;
  for (int k = 0; k < 6; ++k) s.push_back(RandomSpectrogram(rng, 6, 9));
  const auto m = oracle_pair_mask(s[0], s[1], s[2], s[3], s[4], s[5], 0.3);
  for (double c : {1e-2, 7.0, 1e3}) {
    auto scaled = s;
    for (auto& x : scaled) x.bins *= c;
    const auto mc =
        oracle_pair_mask(scaled[0], scaled[1], scaled[2], scaled[3], scaled[4], scaled[5], 0.3);
    EXPECT_LT((m.values - mc.values).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(OracleMask, MonotoneInGain) {
  Rng rng(6);
  std::vector<Spectrogram> s;
  for (int k = 0; k < 6; ++k) s.push_back(RandomSpectrogram(rng, 5, 9));
  Eigen::MatrixXd prev = oracle_pair_mask(s[0], s[1], s[2], s[3], s[4], s[5], 0.0).values;
  for (double g = 0.1; g <= 1.0; g += 0.1) {
    const auto m = oracle_pair_mask(s[0], s[1], s[2], s[3], s[4], s[5], g).values;
    EXPECT_TRUE((m.array() >= prev.array()).all());
    prev = m;
  }
}

TEST(Features, Values) {
  CrossSpectrum c;
  c.bins.resize(1, 4);
  c.bins << 0.0, 1.0, -1.0, std::complex<double>(0.0, 2.0);
  const FeatureBlock fb = extract_features(c);
  ASSERT_EQ(fb.values.cols(), 8);
  EXPECT_EQ(fb.values(0, 0), 0.0);
  EXPECT_EQ(fb.values(0, 4), 0.0);
  EXPECT_NEAR(fb.values(0, 1), 20.0 * std::log(10.0), 1e-9);
  EXPECT_NEAR(fb.values(0, 1), 46.0517, 1e-4);
  EXPECT_DOUBLE_EQ(fb.values(0, 6), std::numbers::pi);
  EXPECT_NEAR(fb.values(0, 7), std::numbers::pi / 2, 1e-15);
  EXPECT_NEAR(fb.values(0, 3), std::log(4.0 + 1e-20) - std::log(1e-20), 1e-9);
  // -pi from a negative zero imaginary part maps to +pi as well.
  c.bins(0, 2) = std::complex<double>(-1.0, -0.0);
  EXPECT_DOUBLE_EQ(extract_features(c).values(0, 6), std::numbers::pi);
  EXPECT_EQ(LogMagnitude(fb).cols(), 4);
}

TEST(Features, Width) {
  Rng rng(7);
  CrossSpectrum c{RandomSpectrogram(rng, 3, 257).bins, {0, 1}};
  const auto fb = extract_features(c);
  EXPECT_EQ(fb.values.cols(), 514);
  EXPECT_GE(fb.values.leftCols(257).minCoeff(), 0.0);
  EXPECT_LE(fb.values.rightCols(257).maxCoeff(), std::numbers::pi);
  EXPECT_GT(fb.values.rightCols(257).minCoeff(), -std::numbers::pi);
  c.bins(1, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    extract_features(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
}

TEST(Fuse, Cases) {
  EXPECT_THROW(fuse_masks({}), Error);
  Rng rng(8);
  PairwiseMask a{Eigen::MatrixXd::Random(4, 5).cwiseAbs(), {0, 1}};
  EXPECT_EQ(fuse_masks({a}).values, a.values);
  PairwiseMask zeros{Eigen::MatrixXd::Zero(4, 5), {0, 1}};
  PairwiseMask ones{Eigen::MatrixXd::Ones(4, 5), {0, 2}};
  EXPECT_EQ(fuse_masks({zeros, ones}).values, Eigen::MatrixXd::Constant(4, 5, 0.5));
  std::vector<PairwiseMask> six;
  for (int k = 0; k < 6; ++k) {
    Eigen::MatrixXd m(4, 5);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
    six.push_back({m, {0, 1}});
  }
  const auto fused = fuse_masks(six);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) {
      double sum = 0.0;
      for (const auto& m : six) sum += m.values(i, j);
      EXPECT_NEAR(fused.values(i, j), sum / 6.0, 1e-12);
    }
  }
  six[2].values.resize(3, 5);
  EXPECT_THROW(fuse_masks(six), Error);
}

// Oracle backend on a rendered scene reproduces the scalar composition
// with the gain recomputed from scene geometry.
TEST(OracleBackend, SceneMatchesScalarComposition) {
  SceneTemplate tmpl;
  tmpl.array = PresetGeometry("respeaker_usb");
  const Scene scene = sample_scene(21, tmpl);
  const auto src_a = SpeechLikeSignal(1, 1.0, 16000.0);
  const auto src_b = SpeechLikeSignal(2, 1.0, 16000.0);
  const auto mix = synthesize_mixture(scene, src_a, src_b, 1.0, 3);
  const auto st = stft(mix.target, 512, 128), si = stft(mix.interference, 512, 128),
             sn = stft(mix.noise, 512, 128), sm = stft(mix.mixture, 512, 128);
  const PropagationParams prop{16000.0, scene.room.speed_of_sound};
  OracleMaskEstimator backend(st, si, sn, scene.array, scene.target_doa(),
                              scene.interference_doa(), prop);
  const auto masks = estimate_pair_masks(sm, scene.array, scene.target_doa(), backend, prop);
  ASSERT_EQ(masks.size(), 6u);
  const Vec3 t = scene.target_doa().vector(), i = scene.interference_doa().vector();
  for (const auto& m : masks) {
    const Vec3 baseline = scene.array.positions[m.pair.u] - scene.array.positions[m.pair.v];
    const double dtau = 16000.0 / scene.room.speed_of_sound * std::abs((t - i).dot(baseline));
    const double g = std::exp(-10.0 * (dtau - 1.0)) / (1.0 + std::exp(-10.0 * (dtau - 1.0)));
    for (Eigen::Index a = 0; a < m.values.rows(); a += 5) {
      for (Eigen::Index b = 0; b < m.values.cols(); b += 7) {
        const auto u = m.pair.u, v = m.pair.v;
        const double ref =
            ScalarPairMask(st[u].bins(a, b), st[v].bins(a, b), si[u].bins(a, b),
                           si[v].bins(a, b), sn[u].bins(a, b), sn[v].bins(a, b), g, 1e-20);
        EXPECT_NEAR(m.values(a, b), ref, 1e-12);
      }
    }
  }
  const auto fused = estimate_masks(sm, scene.array, scene.target_doa(), backend, prop, 3);
  EXPECT_LT((fused.values - fuse_masks(masks).values).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(OracleBackend, TwoMicsGiveOnePair) {
  Rng rng(9);
  const MicArray a{"pair", {Vec3(0, 0, 0), Vec3(0.1, 0, 0)}};
  std::vector<Spectrogram> s;
  for (int k = 0; k < 2; ++k) s.push_back(RandomSpectrogram(rng, 3, 257));
  const Doa d = Doa::FromUnitVector(Vec3(1, 0, 0));
  OracleMaskEstimator backend(s, s, s, a, d, Doa::FromUnitVector(Vec3(0, 1, 0)), {});
  const auto masks = estimate_pair_masks(s, a, d, backend);
  ASSERT_EQ(masks.size(), 1u);
  EXPECT_EQ(estimate_masks(s, a, d, backend).values, masks[0].values);
}

}  // namespace
}  // namespace pairbeam
