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

// Pairwise time-frequency masks: steered cross-spectra, network input
// features, oracle ratio masks with the sigmoid TDOA gain, and fusion of the
// per-pair masks into one target mask.

#ifndef PAIRBEAM_MASKS_HPP
#define PAIRBEAM_MASKS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "pairbeam/defaults.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/geometry.hpp"
#include "pairbeam/parallel.hpp"
#include "pairbeam/spectral.hpp"

namespace pairbeam {

struct CrossSpectrum {
  Eigen::MatrixXcd bins;  // T x F
  MicPair pair;
};

// Log-magnitude (first F columns) followed by phase (last F columns).
struct FeatureBlock {
  Eigen::MatrixXd values;  // T x 2F
};

struct PairwiseMask {
  Eigen::MatrixXd values;  // T x F, in [0, 1]
  MicPair pair;
};

struct FusedMask {
  Eigen::MatrixXd values;  // T x F, in [0, 1]
};

inline void CheckSameShape(const Spectrogram& a, const Spectrogram& b) {
  PAIRBEAM_CHECK(a.num_frames() == b.num_frames() && a.num_bins() == b.num_bins(),
                 ErrorKind::kShape, "spectrogram shapes differ");
}

// Cross-spectrum of the pair steered towards the target: the target's
// inter-microphone phase is removed, leaving ~0 phase on target-dominated
// cells. With the e^{-j} analysis DFT a microphone lagging by tau samples
// carries exp(-j 2 pi f tau / N), so the conjugate goes on Y_u.
inline CrossSpectrum steered_cross_spectrum(const Spectrogram& spec_u,
                                            const Spectrogram& spec_v,
                                            const Eigen::VectorXcd& steering,
                                            MicPair pair = {0, 1}) {
  CheckSameShape(spec_u, spec_v);
  PAIRBEAM_CHECK(steering.size() == spec_u.num_bins(), ErrorKind::kShape,
                 "steering vector length differs from bin count");
  CrossSpectrum out;
  out.pair = pair;
  out.bins = spec_u.bins.conjugate().cwiseProduct(spec_v.bins);
  out.bins.array().rowwise() *= steering.transpose().array();
  return out;
}

// Logistic gain exp(-a(d-b)) / (1 + exp(-a(d-b))), evaluated without
// overflow for large |a(d-b)|.
inline double sigmoid_gain(double delta_tau, double alpha = defaults::kAlpha,
                           double beta = defaults::kBeta) {
  PAIRBEAM_CHECK(alpha > 0.0, ErrorKind::kArgument, "alpha must be positive");
  const double z = -alpha * (delta_tau - beta);
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Oracle mask for one pair: the product of the two per-microphone ratio
// masks (|S|^2 + G|I|^2) / (|S|^2 + |I|^2 + |B|^2 + eps).
inline PairwiseMask oracle_pair_mask(const Spectrogram& target_u, const Spectrogram& target_v,
                                     const Spectrogram& interf_u, const Spectrogram& interf_v,
                                     const Spectrogram& noise_u, const Spectrogram& noise_v,
                                     double gain, double epsilon = defaults::kMaskEpsilon,
                                     MicPair pair = {0, 1}) {
  for (const Spectrogram* s : {&target_v, &interf_u, &interf_v, &noise_u, &noise_v}) {
    CheckSameShape(target_u, *s);
  }
  PAIRBEAM_CHECK(gain >= 0.0 && gain <= 1.0, ErrorKind::kArgument, "gain must lie in [0, 1]");
  auto ratio = [&](const Spectrogram& s, const Spectrogram& i, const Spectrogram& b) {
    const Eigen::ArrayXXd ps = s.bins.array().abs2();
    const Eigen::ArrayXXd pi = i.bins.array().abs2();
    const Eigen::ArrayXXd pb = b.bins.array().abs2();
    return ((ps + gain * pi) / (ps + pi + pb + epsilon)).eval();
  };
  PairwiseMask mask;
  mask.pair = pair;
  mask.values = (ratio(target_u, interf_u, noise_u) * ratio(target_v, interf_v, noise_v)).matrix();
  return mask;
}

inline double WrapPhase(double angle) {
  return angle <= -std::numbers::pi ? std::numbers::pi : angle;
}

inline FeatureBlock extract_features(const CrossSpectrum& cross,
                                     double epsilon = defaults::kFeatureEpsilon) {
  const Eigen::Index frames = cross.bins.rows();
  const Eigen::Index bins = cross.bins.cols();
  FeatureBlock out;
  out.values.resize(frames, 2 * bins);
  const double log_eps = std::log(epsilon);
  for (Eigen::Index f = 0; f < bins; ++f) {
    for (Eigen::Index t = 0; t < frames; ++t) {
      const std::complex<double> y = cross.bins(t, f);
      PAIRBEAM_CHECK(std::isfinite(y.real()) && std::isfinite(y.imag()), ErrorKind::kNumeric,
                     "non-finite cross-spectrum");
      out.values(t, f) = std::log(std::norm(y) + epsilon) - log_eps;
      out.values(t, bins + f) = WrapPhase(std::arg(y));
    }
  }
  return out;
}

// Log-magnitude half of the features; the training loss weight.
inline Eigen::MatrixXd LogMagnitude(const FeatureBlock& features) {
  return features.values.leftCols(features.values.cols() / 2);
}

inline FusedMask fuse_masks(const std::vector<PairwiseMask>& masks) {
  PAIRBEAM_CHECK(!masks.empty(), ErrorKind::kArgument, "no masks to fuse");
  FusedMask out;
  out.values = masks.front().values;
  for (std::size_t i = 1; i < masks.size(); ++i) {
    PAIRBEAM_CHECK(masks[i].values.rows() == out.values.rows() &&
                       masks[i].values.cols() == out.values.cols(),
                   ErrorKind::kShape, "mask shapes differ");
    out.values += masks[i].values;
  }
  out.values /= static_cast<double>(masks.size());
  return out;
}

// Everything a backend may need for one pair.
struct PairInput {
  MicPair pair;
  double tau = 0.0;  // target TDOA in samples
  const CrossSpectrum* cross = nullptr;
};

class MaskEstimator {
 public:
  virtual ~MaskEstimator() = default;
  virtual std::string kind() const = 0;
  virtual PairwiseMask EstimatePair(const PairInput& input) const = 0;
};

struct PropagationParams {
  double sample_rate = defaults::kSampleRate;
  double speed_of_sound = defaults::kSpeedOfSoundNominal;
};

// Ground-truth masks from the separated scene components and the true
// interference direction.
class OracleMaskEstimator : public MaskEstimator {
 public:
  OracleMaskEstimator(std::vector<Spectrogram> target, std::vector<Spectrogram> interference,
                      std::vector<Spectrogram> noise, MicArray array, Doa target_doa,
                      Doa interference_doa, PropagationParams prop,
                      double alpha = defaults::kAlpha, double beta = defaults::kBeta)
      : target_(std::move(target)),
        interference_(std::move(interference)),
        noise_(std::move(noise)),
        array_(std::move(array)),
        target_doa_(target_doa),
        interference_doa_(interference_doa),
        prop_(prop),
        alpha_(alpha),
        beta_(beta) {
    PAIRBEAM_CHECK(target_.size() == array_.size() && interference_.size() == array_.size() &&
                       noise_.size() == array_.size(),
                   ErrorKind::kArgument, "oracle backend needs one reference per microphone");
  }

  std::string kind() const override { return "oracle"; }

  double Gain(const MicPair& pair) const {
    return sigmoid_gain(tdoa_gap(array_, pair, target_doa_, interference_doa_,
                                 prop_.sample_rate, prop_.speed_of_sound),
                        alpha_, beta_);
  }

  PairwiseMask EstimatePair(const PairInput& input) const override {
    const auto [u, v] = input.pair;
    return oracle_pair_mask(target_[u], target_[v], interference_[u], interference_[v],
                            noise_[u], noise_[v], Gain(input.pair), defaults::kMaskEpsilon,
                            input.pair);
  }

 private:
  std::vector<Spectrogram> target_, interference_, noise_;
  MicArray array_;
  Doa target_doa_, interference_doa_;
  PropagationParams prop_;
  double alpha_, beta_;
};

// Per-pair masks in enumerate_pairs order.
inline std::vector<PairwiseMask> estimate_pair_masks(const std::vector<Spectrogram>& specs,
                                                     const MicArray& array,
                                                     const Doa& target_doa,
                                                     const MaskEstimator& backend,
                                                     const PropagationParams& prop = {},
                                                     std::size_t workers = 1) {
  PAIRBEAM_CHECK(specs.size() == array.size(), ErrorKind::kShape,
                 "one spectrogram per microphone required");
  for (const auto& s : specs) CheckSameShape(specs.front(), s);
  const auto pairs = enumerate_pairs(array);
  std::vector<PairwiseMask> masks(pairs.size());
  const auto frame_size = specs.front().frame_size;
  const auto bins = static_cast<std::size_t>(specs.front().num_bins());
  ParallelFor(pairs.size(), workers, [&](std::size_t i) {
    const MicPair& p = pairs[i];
    const double tau = tdoa(array, p, target_doa, prop.sample_rate, prop.speed_of_sound);
    const CrossSpectrum cross =
        steered_cross_spectrum(specs[p.u], specs[p.v], steering_vector(tau, frame_size, bins), p);
    masks[i] = backend.EstimatePair({p, tau, &cross});
    PAIRBEAM_CHECK(masks[i].values.rows() == specs.front().num_frames() &&
                       masks[i].values.cols() == specs.front().num_bins(),
                   ErrorKind::kShape, backend.kind() + " backend returned a mis-shaped mask");
  });
  return masks;
}

inline FusedMask estimate_masks(const std::vector<Spectrogram>& specs, const MicArray& array,
                                const Doa& target_doa, const MaskEstimator& backend,
                                const PropagationParams& prop = {}, std::size_t workers = 1) {
  return fuse_masks(estimate_pair_masks(specs, array, target_doa, backend, prop, workers));
}

}  // namespace pairbeam

#endif  // PAIRBEAM_MASKS_HPP
