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

// Inference for the pairwise mask network: input batch norm (running
// statistics), two bidirectional LSTM layers, a linear projection to F bins
// and a sigmoid. Tensor names, shapes and gate order follow PyTorch's
// nn.BatchNorm1d / nn.LSTM(bidirectional=True, num_layers=2) / nn.Linear so
// exported state dicts load directly. See docs/tensor_format.md.

#ifndef PAIRBEAM_NEURAL_HPP
#define PAIRBEAM_NEURAL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>
#include <string>

#include "pairbeam/defaults.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/masks.hpp"
#include "pairbeam/random.hpp"
#include "pairbeam/tensor_file.hpp"

namespace pairbeam {

// Gates are stacked [input, forget, cell, output] along the rows.
struct LstmDirection {
  Eigen::MatrixXd w_ih;  // 4H x input
  Eigen::MatrixXd w_hh;  // 4H x H
  Eigen::VectorXd b_ih;  // 4H
  Eigen::VectorXd b_hh;  // 4H
};

struct WeightsBundle {
  std::size_t frame_size = defaults::kFrameSize;
  std::size_t num_bins = defaults::kNumBins;
  std::size_t hidden = defaults::kHiddenSize;
  double bn_epsilon = defaults::kBatchNormEpsilon;

  Eigen::VectorXd bn_scale, bn_shift, bn_mean, bn_var;  // 2F each
  LstmDirection layer0_fwd, layer0_bwd;                 // input 2F
  LstmDirection layer1_fwd, layer1_bwd;                 // input 2H
  Eigen::MatrixXd out_weight;                           // F x 2H
  Eigen::VectorXd out_bias;                             // F

  // Free-form metadata carried through save/load (trainer settings etc.).
  std::map<std::string, std::string> extra_metadata;
};

namespace neural_detail {

inline const char* kDirectionNames[4] = {"l0", "l0_reverse", "l1", "l1_reverse"};

inline LstmDirection* Direction(WeightsBundle& b, int i) {
  LstmDirection* d[4] = {&b.layer0_fwd, &b.layer0_bwd, &b.layer1_fwd, &b.layer1_bwd};
  return d[i];
}

inline const LstmDirection* Direction(const WeightsBundle& b, int i) {
  const LstmDirection* d[4] = {&b.layer0_fwd, &b.layer0_bwd, &b.layer1_fwd, &b.layer1_bwd};
  return d[i];
}

inline double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline std::size_t ParseSize(const TensorFile& f, const std::string& key) {
  auto v = f.Meta(key);
  if (!v) throw FormatError(FormatIssue::kMetadata, "missing metadata '" + key + "'");
  try {
    return static_cast<std::size_t>(std::stoull(*v));
  } catch (const std::exception&) {
    throw FormatError(FormatIssue::kMetadata, "bad metadata '" + key + "' = " + *v);
  }
}

inline Eigen::MatrixXd Matrix(const TensorFile& f, const std::string& name, std::size_t rows,
                              std::size_t cols) {
  const Tensor& t = f.Get(name);
  if (t.dims != std::vector<std::uint64_t>{rows, cols}) {
    throw FormatError(FormatIssue::kShapeMismatch, "tensor '" + name + "' has wrong shape");
  }
  return ToMatrix(t);
}

inline Eigen::VectorXd Vector(const TensorFile& f, const std::string& name, std::size_t n) {
  const Tensor& t = f.Get(name);
  if (t.dims != std::vector<std::uint64_t>{n}) {
    throw FormatError(FormatIssue::kShapeMismatch, "tensor '" + name + "' has wrong shape");
  }
  return ToMatrix(t).col(0);
}

// One direction over the whole sequence; `reverse` walks t = T-1 .. 0.
inline Eigen::MatrixXd RunDirection(const LstmDirection& w, const Eigen::MatrixXd& input,
                                    bool reverse) {
  const Eigen::Index frames = input.rows();
  const Eigen::Index hidden = w.w_hh.cols();
  Eigen::MatrixXd pre = input * w.w_ih.transpose();
  pre.rowwise() += (w.b_ih + w.b_hh).transpose();
  Eigen::MatrixXd out(frames, hidden);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd gates(4 * hidden);
  for (Eigen::Index step = 0; step < frames; ++step) {
    const Eigen::Index t = reverse ? frames - 1 - step : step;
    gates.noalias() = pre.row(t).transpose() + w.w_hh * h;
    for (Eigen::Index k = 0; k < hidden; ++k) {
      const double i = Sigmoid(gates(k));
      const double f = Sigmoid(gates(hidden + k));
      const double g = std::tanh(gates(2 * hidden + k));
      const double o = Sigmoid(gates(3 * hidden + k));
      c(k) = f * c(k) + i * g;
      h(k) = o * std::tanh(c(k));
    }
    out.row(t) = h.transpose();
  }
  return out;
}

inline Eigen::MatrixXd RunBidirectional(const LstmDirection& fwd, const LstmDirection& bwd,
                                        const Eigen::MatrixXd& input) {
  const Eigen::MatrixXd a = RunDirection(fwd, input, false);
  const Eigen::MatrixXd b = RunDirection(bwd, input, true);
  Eigen::MatrixXd out(input.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace neural_detail

inline void Validate(const WeightsBundle& b) {
  const auto f2 = static_cast<Eigen::Index>(2 * b.num_bins);
  const auto h = static_cast<Eigen::Index>(b.hidden);
  PAIRBEAM_CHECK(b.num_bins == b.frame_size / 2 + 1, ErrorKind::kFormat,
                 "num_bins must equal frame_size/2 + 1");
  auto check = [](bool ok, const std::string& what) {
    if (!ok) throw FormatError(FormatIssue::kShapeMismatch, what + " has wrong shape");
  };
  check(b.bn_scale.size() == f2 && b.bn_shift.size() == f2 && b.bn_mean.size() == f2 &&
            b.bn_var.size() == f2,
        "batch norm");
  for (int i = 0; i < 4; ++i) {
    const auto* d = neural_detail::Direction(b, i);
    const Eigen::Index in = i < 2 ? f2 : 2 * h;
    const std::string name = std::string("lstm ") + neural_detail::kDirectionNames[i];
    check(d->w_ih.rows() == 4 * h && d->w_ih.cols() == in, name + " weight_ih");
    check(d->w_hh.rows() == 4 * h && d->w_hh.cols() == h, name + " weight_hh");
    check(d->b_ih.size() == 4 * h && d->b_hh.size() == 4 * h, name + " bias");
    if (!(d->w_ih.allFinite() && d->w_hh.allFinite() && d->b_ih.allFinite() &&
          d->b_hh.allFinite())) {
      throw FormatError(FormatIssue::kNonFinite, name + " has non-finite values");
    }
  }
  check(b.out_weight.rows() == static_cast<Eigen::Index>(b.num_bins) &&
            b.out_weight.cols() == 2 * h && b.out_bias.size() == static_cast<Eigen::Index>(b.num_bins),
        "output projection");
  if (!(b.bn_scale.allFinite() && b.bn_shift.allFinite() && b.bn_mean.allFinite() &&
        b.bn_var.allFinite() && b.out_weight.allFinite() && b.out_bias.allFinite())) {
    throw FormatError(FormatIssue::kNonFinite, "bundle has non-finite values");
  }
  if ((b.bn_var.array() <= 0.0).any()) {
    throw FormatError(FormatIssue::kNonFinite, "batch norm running variance must be positive");
  }
}

// All weights and biases zero, identity normalisation statistics.
inline WeightsBundle ZeroWeights(std::size_t frame_size = defaults::kFrameSize,
                                 std::size_t hidden = defaults::kHiddenSize) {
  WeightsBundle b;
  b.frame_size = frame_size;
  b.num_bins = frame_size / 2 + 1;
  b.hidden = hidden;
  const auto f2 = static_cast<Eigen::Index>(2 * b.num_bins);
  const auto h = static_cast<Eigen::Index>(hidden);
  b.bn_scale = Eigen::VectorXd::Zero(f2);
  b.bn_shift = Eigen::VectorXd::Zero(f2);
  b.bn_mean = Eigen::VectorXd::Zero(f2);
  b.bn_var = Eigen::VectorXd::Ones(f2);
  for (int i = 0; i < 4; ++i) {
    auto* d = neural_detail::Direction(b, i);
    const Eigen::Index in = i < 2 ? f2 : 2 * h;
    d->w_ih = Eigen::MatrixXd::Zero(4 * h, in);
    d->w_hh = Eigen::MatrixXd::Zero(4 * h, h);
    d->b_ih = Eigen::VectorXd::Zero(4 * h);
    d->b_hh = Eigen::VectorXd::Zero(4 * h);
  }
  b.out_weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.num_bins), 2 * h);
  b.out_bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.num_bins));
  return b;
}

// Uniform(-1/sqrt(H), 1/sqrt(H)) weights as PyTorch initialises LSTMs;
// values are rounded to float32 so the bundle survives a save/load cycle.
inline WeightsBundle RandomWeights(std::uint64_t seed,
                                   std::size_t frame_size = defaults::kFrameSize,
                                   std::size_t hidden = defaults::kHiddenSize) {
  WeightsBundle b = ZeroWeights(frame_size, hidden);
  Rng rng(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  auto fill = [&](auto& m, double lo, double hi) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<float>(rng.uniform(lo, hi));
    }
  };
  fill(b.bn_scale, 0.5, 1.5);
  fill(b.bn_shift, -0.1, 0.1);
  fill(b.bn_mean, -1.0, 1.0);
  fill(b.bn_var, 0.5, 2.0);
  for (int i = 0; i < 4; ++i) {
    auto* d = neural_detail::Direction(b, i);
    fill(d->w_ih, -k, k);
    fill(d->w_hh, -k, k);
    fill(d->b_ih, -k, k);
    fill(d->b_hh, -k, k);
  }
  const double kf = 1.0 / std::sqrt(static_cast<double>(2 * hidden));
  fill(b.out_weight, -kf, kf);
  fill(b.out_bias, -kf, kf);
  return b;
}

inline TensorFile ToTensorFile(const WeightsBundle& b) {
  Validate(b);
  TensorFile f;
  f.metadata = b.extra_metadata;
  f.metadata["format"] = "pairbeam-blstm-mask";
  f.metadata["frame_size"] = std::to_string(b.frame_size);
  f.metadata["num_bins"] = std::to_string(b.num_bins);
  f.metadata["hidden"] = std::to_string(b.hidden);
  {
    std::ostringstream eps;
    eps.precision(17);
    eps << b.bn_epsilon;
    f.metadata["batchnorm_eps"] = eps.str();
  }
  f.metadata["batchnorm_placement"] = "input";
  f.metadata["gate_order"] = "ifgo";
  f.metadata["output_activation"] = "sigmoid";
  f.Put("bn.weight", ToTensor(Eigen::VectorXd(b.bn_scale)));
  f.Put("bn.bias", ToTensor(Eigen::VectorXd(b.bn_shift)));
  f.Put("bn.running_mean", ToTensor(Eigen::VectorXd(b.bn_mean)));
  f.Put("bn.running_var", ToTensor(Eigen::VectorXd(b.bn_var)));
  for (int i = 0; i < 4; ++i) {
    const auto* d = neural_detail::Direction(b, i);
    const std::string s = neural_detail::kDirectionNames[i];
    f.Put("lstm.weight_ih_" + s, ToTensor(d->w_ih));
    f.Put("lstm.weight_hh_" + s, ToTensor(d->w_hh));
    f.Put("lstm.bias_ih_" + s, ToTensor(Eigen::VectorXd(d->b_ih)));
    f.Put("lstm.bias_hh_" + s, ToTensor(Eigen::VectorXd(d->b_hh)));
  }
  f.Put("fc.weight", ToTensor(b.out_weight));
  f.Put("fc.bias", ToTensor(Eigen::VectorXd(b.out_bias)));
  return f;
}

// Rebuilds and validates a bundle. When `expected_frame_size` is non-zero
// the bundle must have been trained for that STFT size.
inline WeightsBundle FromTensorFile(const TensorFile& f, std::size_t expected_frame_size = 0) {
  using namespace neural_detail;
  if (auto fmt = f.Meta("format"); fmt && *fmt != "pairbeam-blstm-mask") {
    throw FormatError(FormatIssue::kMetadata, "not a mask-network bundle: " + *fmt);
  }
  if (auto gates = f.Meta("gate_order"); gates && *gates != "ifgo") {
    throw FormatError(FormatIssue::kMetadata, "unsupported gate order " + *gates);
  }
  if (auto bn = f.Meta("batchnorm_placement"); bn && *bn != "input") {
    throw FormatError(FormatIssue::kMetadata, "unsupported batch norm placement " + *bn);
  }
  WeightsBundle b;
  b.frame_size = ParseSize(f, "frame_size");
  b.num_bins = ParseSize(f, "num_bins");
  b.hidden = ParseSize(f, "hidden");
  if (auto eps = f.Meta("batchnorm_eps")) b.bn_epsilon = std::stod(*eps);
  if (expected_frame_size != 0 && b.frame_size != expected_frame_size) {
    throw FormatError(FormatIssue::kMetadata,
                      "bundle was built for frame size " + std::to_string(b.frame_size) +
                          ", pipeline uses " + std::to_string(expected_frame_size));
  }
  if (b.num_bins != b.frame_size / 2 + 1) {
    throw FormatError(FormatIssue::kMetadata, "num_bins inconsistent with frame_size");
  }
  const std::size_t f2 = 2 * b.num_bins, h = b.hidden;
  b.bn_scale = Vector(f, "bn.weight", f2);
  b.bn_shift = Vector(f, "bn.bias", f2);
  b.bn_mean = Vector(f, "bn.running_mean", f2);
  b.bn_var = Vector(f, "bn.running_var", f2);
  for (int i = 0; i < 4; ++i) {
    auto* d = Direction(b, i);
    const std::string s = kDirectionNames[i];
    const std::size_t in = i < 2 ? f2 : 2 * h;
    d->w_ih = Matrix(f, "lstm.weight_ih_" + s, 4 * h, in);
    d->w_hh = Matrix(f, "lstm.weight_hh_" + s, 4 * h, h);
    d->b_ih = Vector(f, "lstm.bias_ih_" + s, 4 * h);
    d->b_hh = Vector(f, "lstm.bias_hh_" + s, 4 * h);
  }
  b.out_weight = Matrix(f, "fc.weight", b.num_bins, 2 * h);
  b.out_bias = Vector(f, "fc.bias", b.num_bins);
  static const char* kKnown[] = {"format", "frame_size", "num_bins", "hidden",
                                 "batchnorm_eps", "batchnorm_placement", "gate_order",
                                 "output_activation"};
  for (const auto& [k, v] : f.metadata) {
    bool known = false;
    for (const char* kk : kKnown) known = known || k == kk;
    if (!known) b.extra_metadata[k] = v;
  }
  Validate(b);
  return b;
}

inline void save_weights(const std::filesystem::path& path, const WeightsBundle& b) {
  WriteTensorFile(path, ToTensorFile(b));
}

inline WeightsBundle load_weights(const std::filesystem::path& path,
                                  std::size_t expected_frame_size = defaults::kFrameSize) {
  try {
    return FromTensorFile(ReadTensorFile(path), expected_frame_size);
  } catch (const FormatError& e) {
    throw FormatError(e.issue(), path.string() + ": " + e.what());
  }
}

// Features (T x 2F) to a mask (T x F) with values in (0, 1).
inline PairwiseMask forward(const WeightsBundle& b, const FeatureBlock& features,
                            MicPair pair = {0, 1}) {
  using namespace neural_detail;
  const Eigen::MatrixXd& x = features.values;
  PAIRBEAM_CHECK(x.cols() == static_cast<Eigen::Index>(2 * b.num_bins), ErrorKind::kShape,
                 "feature width " + std::to_string(x.cols()) + " does not match bundle (" +
                     std::to_string(2 * b.num_bins) + ")");
  PAIRBEAM_CHECK(x.rows() >= 1, ErrorKind::kShape, "feature block has no frames");
  PAIRBEAM_CHECK(x.allFinite(), ErrorKind::kNumeric, "features contain non-finite values");

  const Eigen::RowVectorXd scale =
      (b.bn_scale.array() / (b.bn_var.array() + b.bn_epsilon).sqrt()).transpose();
  Eigen::MatrixXd normed = x;
  normed.rowwise() -= b.bn_mean.transpose();
  normed.array().rowwise() *= scale.array();
  normed.rowwise() += b.bn_shift.transpose();

  const Eigen::MatrixXd h1 = RunBidirectional(b.layer0_fwd, b.layer0_bwd, normed);
  const Eigen::MatrixXd h2 = RunBidirectional(b.layer1_fwd, b.layer1_bwd, h1);
  Eigen::MatrixXd logits = h2 * b.out_weight.transpose();
  logits.rowwise() += b.out_bias.transpose();

  PairwiseMask mask;
  mask.pair = pair;
  mask.values = logits.unaryExpr([](double v) { return Sigmoid(v); });
  return mask;
}

class NeuralMaskEstimator : public MaskEstimator {
 public:
  explicit NeuralMaskEstimator(std::shared_ptr<const WeightsBundle> bundle,
                               double epsilon = defaults::kFeatureEpsilon)
      : bundle_(std::move(bundle)), epsilon_(epsilon) {
    PAIRBEAM_CHECK(bundle_ != nullptr, ErrorKind::kConfig,
                   "neural backend requires a weights bundle");
  }

  std::string kind() const override { return "neural"; }

  PairwiseMask EstimatePair(const PairInput& input) const override {
    PAIRBEAM_CHECK(input.cross != nullptr, ErrorKind::kArgument, "missing cross-spectrum");
    return forward(*bundle_, extract_features(*input.cross, epsilon_), input.pair);
  }

 private:
  std::shared_ptr<const WeightsBundle> bundle_;
  double epsilon_;
};

}  // namespace pairbeam

#endif  // PAIRBEAM_NEURAL_HPP
