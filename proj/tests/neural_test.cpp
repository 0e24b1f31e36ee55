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
#include <cstring>
#include <vector>

#include "testing.hpp"

namespace pairbeam {
namespace {

using Vec = std::vector<double>;

double Logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar LSTM over a T x n sequence stored as nested vectors.
std::vector<Vec> ScalarLstm(const LstmDirection& w, const std::vector<Vec>& x, bool reverse) {
  const std::size_t hidden = static_cast<std::size_t>(w.w_hh.cols());
  std::vector<Vec> out(x.size(), Vec(hidden));
  Vec h(hidden, 0.0), c(hidden, 0.0);
  for (std::size_t step = 0; step < x.size(); ++step) {
    const std::size_t t = reverse ? x.size() - 1 - step : step;
    Vec z(4 * hidden);
    for (std::size_t r = 0; r < 4 * hidden; ++r) {
      double acc = w.b_ih(r) + w.b_hh(r);
      for (std::size_t k = 0; k < x[t].size(); ++k) acc += w.w_ih(r, k) * x[t][k];
      for (std::size_t k = 0; k < hidden; ++k) acc += w.w_hh(r, k) * h[k];
      z[r] = acc;
    }
    Vec h_new(hidden);
    for (std::size_t k = 0; k < hidden; ++k) {
      const double ig = Logistic(z[k]);
      const double fg = Logistic(z[hidden + k]);
      const double gg = std::tanh(z[2 * hidden + k]);
      const double og = Logistic(z[3 * hidden + k]);
      c[k] = fg * c[k] + ig * gg;
      h_new[k] = og * std::tanh(c[k]);
    }
    h = h_new;
    out[t] = h;
  }
  return out;
}

std::vector<Vec> Concat(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  std::vector<Vec> out(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    out[t] = a[t];
    out[t].insert(out[t].end(), b[t].begin(), b[t].end());
  }
  return out;
}

Eigen::MatrixXd ScalarForward(const WeightsBundle& b, const Eigen::MatrixXd& x) {
  std::vector<Vec> seq(static_cast<std::size_t>(x.rows()), Vec(static_cast<std::size_t>(x.cols())));
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      seq[t][k] = (x(t, k) - b.bn_mean(k)) / std::sqrt(b.bn_var(k) + b.bn_epsilon) *
                      b.bn_scale(k) + b.bn_shift(k);
    }
  }
  const auto l1 = Concat(ScalarLstm(b.layer0_fwd, seq, false), ScalarLstm(b.layer0_bwd, seq, true));
  const auto l2 = Concat(ScalarLstm(b.layer1_fwd, l1, false), ScalarLstm(b.layer1_bwd, l1, true));
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(b.num_bins));
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    for (Eigen::Index f = 0; f < out.cols(); ++f) {
      double acc = b.out_bias(f);
      for (std::size_t k = 0; k < l2[t].size(); ++k) acc += b.out_weight(f, k) * l2[t][k];
      out(t, f) = Logistic(acc);
    }
  }
  return out;
}

FeatureBlock RandomFeatures(std::uint64_t seed, Eigen::Index frames, Eigen::Index width) {
  Rng rng(seed);
  FeatureBlock fb;
  fb.values.resize(frames, width);
  for (Eigen::Index i = 0; i < fb.values.size(); ++i) fb.values.data()[i] = 3.0 * rng.normal();
  return fb;
}

TEST(Forward, ZeroBundleGivesHalf) {
  const WeightsBundle b = ZeroWeights();
  const auto m = forward(b, RandomFeatures(1, 20, 514));
  ASSERT_EQ(m.values.rows(), 20);
  ASSERT_EQ(m.values.cols(), 257);
  EXPECT_EQ(m.values.minCoeff(), 0.5);
  EXPECT_EQ(m.values.maxCoeff(), 0.5);
}

TEST(Forward, MatchesScalarOracle) {
  const WeightsBundle b = RandomWeights(42, 16, 5);
  const FeatureBlock x = RandomFeatures(2, 9, 18);
  const auto m = forward(b, x);
  const Eigen::MatrixXd ref = ScalarForward(b, x.values);
  EXPECT_LT((m.values - ref).cwiseAbs().maxCoeff(), 1e-12);
}

// Reversing time and swapping the two directions of every layer (with the
// matching column permutations) must reverse the output in time.
TEST(Forward, DirectionSwapSymmetry) {
  const std::size_t h = 4;
  const WeightsBundle b = RandomWeights(5, 16, h);
  WeightsBundle s = b;
  std::swap(s.layer0_fwd, s.layer0_bwd);
  std::swap(s.layer1_fwd, s.layer1_bwd);
  const auto hh = static_cast<Eigen::Index>(h);
  auto swap_halves = [hh](Eigen::MatrixXd& m) {
    const Eigen::MatrixXd left = m.leftCols(hh);
    m.leftCols(hh) = m.rightCols(hh);
    m.rightCols(hh) = left;
  };
  swap_halves(s.layer1_fwd.w_ih);
  swap_halves(s.layer1_bwd.w_ih);
  swap_halves(s.out_weight);
  const FeatureBlock x = RandomFeatures(6, 11, 18);
  FeatureBlock xr{x.values.colwise().reverse()};
  const auto y = forward(b, x), yr = forward(s, xr);
  EXPECT_LT((y.values.colwise().reverse() - yr.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, DeterministicAndBounded) {
  const WeightsBundle b = RandomWeights(42);
  const FeatureBlock x = RandomFeatures(3, 30, 514);
  const auto a = forward(b, x), c = forward(RandomWeights(42), x);
  EXPECT_EQ(std::memcmp(a.values.data(), c.values.data(), sizeof(double) * a.values.size()), 0);
  EXPECT_GT(a.values.minCoeff(), 0.0);
  EXPECT_LT(a.values.maxCoeff(), 1.0);
}

TEST(Forward, InputErrors) {
  const WeightsBundle b = ZeroWeights(16, 3);
  FeatureBlock x = RandomFeatures(4, 5, 18);
  x.values(2, 3) = std::numeric_limits<double>::infinity();
  try {
    forward(b, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
  EXPECT_THROW(forward(b, RandomFeatures(4, 5, 20)), Error);
}

TEST(Weights, SaveLoadBitExact) {
  testing::TempDir dir("weights");
  WeightsBundle b = RandomWeights(42);
  b.extra_metadata["trainer.epochs"] = "3";
  save_weights(dir / "w.strn", b);
  const WeightsBundle r = load_weights(dir / "w.strn");
  EXPECT_EQ(r.extra_metadata.at("trainer.epochs"), "3");
  const TensorFile a = ToTensorFile(b), c = ToTensorFile(r);
  ASSERT_EQ(a.tensors.size(), c.tensors.size());
  ASSERT_EQ(a.tensors.size(), 22u);
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    EXPECT_EQ(a.tensors[i].first, c.tensors[i].first);
    EXPECT_EQ(a.tensors[i].second.dims, c.tensors[i].second.dims);
    EXPECT_EQ(a.tensors[i].second.data, c.tensors[i].second.data);
  }
  const FeatureBlock x = RandomFeatures(7, 6, 514);
  EXPECT_EQ(forward(b, x).values, forward(r, x).values);
}

TEST(Weights, TensorShapes) {
  const TensorFile f = ToTensorFile(ZeroWeights());
  auto dims = [&](const std::string& n) { return f.Get(n).dims; };
  using D = std::vector<std::uint64_t>;
  EXPECT_EQ(dims("bn.running_var"), D{514});
  EXPECT_EQ(dims("lstm.weight_ih_l0"), (D{512, 514}));
  EXPECT_EQ(dims("lstm.weight_hh_l0_reverse"), (D{512, 128}));
  EXPECT_EQ(dims("lstm.weight_ih_l1"), (D{512, 256}));
  EXPECT_EQ(dims("fc.weight"), (D{257, 256}));
  EXPECT_EQ(dims("fc.bias"), D{257});
  EXPECT_EQ(*f.Meta("gate_order"), "ifgo");
}

FormatIssue IssueOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const FormatError& e) {
    return e.issue();
  }
  ADD_FAILURE() << "no format error";
  return FormatIssue::kBadMagic;
}

TEST(Weights, DistinctFormatErrors) {
  testing::TempDir dir("badweights");
  const auto bytes = EncodeTensorFile(ToTensorFile(RandomWeights(1, 16, 3)));

  auto truncated = bytes;
  truncated.resize(bytes.size() - 10);
  try {
    FromTensorFile(DecodeTensorFile(truncated));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.issue(), FormatIssue::kTruncated);
    EXPECT_NE(std::string(e.what()).find("fc.bias"), std::string::npos) << e.what();
  }

  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(IssueOf([&] { DecodeTensorFile(bad_magic); }), FormatIssue::kBadMagic);

  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(IssueOf([&] { DecodeTensorFile(bad_version); }), FormatIssue::kVersion);

  TensorFile missing = ToTensorFile(RandomWeights(1, 16, 3));
  missing.tensors.pop_back();
  EXPECT_EQ(IssueOf([&] { FromTensorFile(missing); }), FormatIssue::kMissingTensor);

  TensorFile shape = ToTensorFile(RandomWeights(1, 16, 3));
  shape.Put("fc.bias", ToTensor(Eigen::VectorXd(Eigen::VectorXd::Zero(8))));
  EXPECT_EQ(IssueOf([&] { FromTensorFile(shape); }), FormatIssue::kShapeMismatch);

  TensorFile nonfinite = ToTensorFile(RandomWeights(1, 16, 3));
  Eigen::VectorXd nan_bias = Eigen::VectorXd::Zero(9);
  nan_bias(3) = std::nan("");
  nonfinite.Put("fc.bias", ToTensor(nan_bias));
  EXPECT_EQ(IssueOf([&] { FromTensorFile(nonfinite); }), FormatIssue::kNonFinite);

  // A bundle built for N = 1024 is rejected by the N = 512 pipeline.
  save_weights(dir / "n1024.strn", ZeroWeights(1024, 4));
  EXPECT_EQ(IssueOf([&] { load_weights(dir / "n1024.strn", 512); }), FormatIssue::kMetadata);
  EXPECT_NO_THROW(load_weights(dir / "n1024.strn", 1024));
}

TEST(NeuralBackend, PipelineShapes) {
  Rng rng(10);
  const MicArray a = PresetGeometry("respeaker_usb");
  MultichannelAudio mix;
  mix.sample_rate = 16000.0;
  for (int c = 0; c < 4; ++c) mix.channels.push_back(testing::RandomSignal(rng, 8000));
  const auto bundle = std::make_shared<const WeightsBundle>(RandomWeights(3, 512, 8));
  NeuralMaskEstimator backend(bundle);
  const auto r = separate_detailed(mix, a, Doa::FromAzimuthElevation(45, 0), backend);
  EXPECT_EQ(r.pair_masks.size(), 6u);
  EXPECT_EQ(r.mask.values.cols(), 257);
  EXPECT_EQ(r.audio.size(), (NumFrames(8000, 512, 128) - 1) * 128 + 512);
  EXPECT_THROW(NeuralMaskEstimator(nullptr), Error);
}

}  // namespace
}  // namespace pairbeam
