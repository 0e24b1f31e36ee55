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

// Mask-driven GEV beamforming with blind analytic normalisation.

#ifndef PAIRBEAM_BEAMFORMER_HPP
#define PAIRBEAM_BEAMFORMER_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "pairbeam/audio.hpp"
#include "pairbeam/defaults.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/geometry.hpp"
#include "pairbeam/masks.hpp"
#include "pairbeam/spectral.hpp"

namespace pairbeam {

// Per-bin target and noise spatial covariances (F matrices of D x D each).
struct CovariancePair {
  std::vector<Eigen::MatrixXcd> phi_xx;
  std::vector<Eigen::MatrixXcd> phi_nn;
};

struct BeamformerWeights {
  Eigen::MatrixXcd f_gev;       // F x D, one unit-norm filter per row
  Eigen::VectorXd g_ban;        // F
  std::vector<bool> degenerate;  // per bin: fallback filter or guarded gain used
};

inline Eigen::MatrixXcd Hermitian(const Eigen::MatrixXcd& m) {
  return 0.5 * (m + m.adjoint());
}

// Unnormalised mask-weighted sums of Y Y^H with weights M and 1 - M.
inline CovariancePair masked_covariances(const std::vector<Spectrogram>& specs,
                                         const FusedMask& mask) {
  PAIRBEAM_CHECK(!specs.empty(), ErrorKind::kArgument, "no spectrograms");
  const Eigen::Index frames = specs.front().num_frames();
  const Eigen::Index bins = specs.front().num_bins();
  for (const auto& s : specs) {
    PAIRBEAM_CHECK(s.num_frames() == frames && s.num_bins() == bins, ErrorKind::kShape,
                   "spectrogram shapes differ");
  }
  PAIRBEAM_CHECK(mask.values.rows() == frames && mask.values.cols() == bins, ErrorKind::kShape,
                 "mask shape does not match the spectrograms");
  PAIRBEAM_CHECK((mask.values.array() >= 0.0).all() && (mask.values.array() <= 1.0).all(),
                 ErrorKind::kContract, "mask values must lie in [0, 1]");

  const auto mics = static_cast<Eigen::Index>(specs.size());
  CovariancePair cov;
  cov.phi_xx.resize(static_cast<std::size_t>(bins));
  cov.phi_nn.resize(static_cast<std::size_t>(bins));
  Eigen::MatrixXcd y(frames, mics);
  for (Eigen::Index f = 0; f < bins; ++f) {
    for (Eigen::Index d = 0; d < mics; ++d) y.col(d) = specs[static_cast<std::size_t>(d)].bins.col(f);
    const Eigen::VectorXd m = mask.values.col(f);
    const Eigen::VectorXd n = (1.0 - m.array()).matrix();
    // sum_t w(t) y(t) y(t)^H == Y^T diag(w) conj(Y)
    cov.phi_xx[static_cast<std::size_t>(f)] =
        Hermitian(y.transpose() * (m.asDiagonal() * y.conjugate()));
    cov.phi_nn[static_cast<std::size_t>(f)] =
        Hermitian(y.transpose() * (n.asDiagonal() * y.conjugate()));
  }
  return cov;
}

// phi_nn + loading * (tr(phi_nn)/D + delta) I
inline Eigen::MatrixXcd LoadedNoiseCovariance(const Eigen::MatrixXcd& phi_nn, double loading,
                                              double delta) {
  Eigen::MatrixXcd reg = Hermitian(phi_nn);
  const double tr = phi_nn.trace().real();
  reg.diagonal().array() += loading * (tr / static_cast<double>(phi_nn.rows()) + delta);
  return reg;
}

struct GevResult {
  Eigen::VectorXcd vector;
  bool degenerate = false;
};

// Principal generalized eigenvector of (phi_xx, phi_nn): the unit-norm f
// maximising f^H phi_xx f / f^H phi_nn f. phi_nn is loaded with
// loading * (tr(phi_nn)/D + delta) on the diagonal, factored by Cholesky and
// the problem reduced to an ordinary Hermitian one. The phase is aligned
// with microphone 0 through phi_xx.
inline GevResult gev_principal(const Eigen::MatrixXcd& phi_xx, const Eigen::MatrixXcd& phi_nn,
                               double loading = defaults::kDiagonalLoading,
                               double delta = defaults::kDelta) {
  const Eigen::Index d = phi_xx.rows();
  PAIRBEAM_CHECK(d >= 1 && phi_xx.cols() == d && phi_nn.rows() == d && phi_nn.cols() == d,
                 ErrorKind::kShape, "covariances must be square and of equal size");
  PAIRBEAM_CHECK(loading >= 0.0, ErrorKind::kArgument, "diagonal loading must be >= 0");

  const double tr_xx = phi_xx.trace().real();
  const double tr_nn = phi_nn.trace().real();
  GevResult result;
  if (!(std::abs(tr_xx) + std::abs(tr_nn) > delta)) {
    result.vector = Eigen::VectorXcd::Unit(d, 0);
    result.degenerate = true;
    return result;
  }

  Eigen::MatrixXcd reg = LoadedNoiseCovariance(phi_nn, loading, delta);
  Eigen::LLT<Eigen::MatrixXcd> chol(reg);
  if (chol.info() != Eigen::Success) {
    // Not positive definite after loading (e.g. loading == 0 on a singular
    // noise covariance): retry with the absolute floor.
    reg.diagonal().array() += delta + 1e-10 * std::abs(tr_nn);
    chol.compute(reg);
    if (chol.info() != Eigen::Success) {
      result.vector = Eigen::VectorXcd::Unit(d, 0);
      result.degenerate = true;
      return result;
    }
  }
  const auto lower = chol.matrixL();
  // C = L^-1 phi_xx L^-H
  Eigen::MatrixXcd tmp = lower.solve(Hermitian(phi_xx));
  Eigen::MatrixXcd c = lower.solve(tmp.adjoint()).adjoint();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(Hermitian(c));
  PAIRBEAM_CHECK(eig.info() == Eigen::Success, ErrorKind::kNumeric,
                 "Hermitian eigensolver did not converge");
  const Eigen::VectorXcd principal = eig.eigenvectors().col(d - 1);
  Eigen::VectorXcd f = chol.matrixU().solve(principal);
  const double norm = f.norm();
  PAIRBEAM_CHECK(std::isfinite(norm) && norm > 0.0, ErrorKind::kNumeric,
                 "generalized eigenvector is degenerate");
  f /= norm;
  // Rotate so the target-weighted correlation f^H phi_xx e_0 between the
  // output and microphone 0 is real and positive. Bins where it vanishes
  // fall back to the first non-negligible component.
  const std::complex<double> ref = f.dot(Hermitian(phi_xx).col(0));
  if (std::abs(ref) > 1e-12 * std::abs(tr_xx) && std::isfinite(std::abs(ref))) {
    f *= ref / std::abs(ref);
    result.vector = f;
    return result;
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    const double mag = std::abs(f(k));
    if (mag > 1e-12) {
      f *= std::conj(f(k)) / mag;
      f(k) = mag;
      break;
    }
  }
  result.vector = f;
  return result;
}

struct BanResult {
  double gain = 0.0;
  bool degenerate = false;
};

// sqrt(f^H phi phi f) / (f^H phi f * D^2). The ratio does not depend on the
// scale of phi, so phi is divided by its trace and delta guards the
// normalised quadratic form.
inline BanResult ban_gain(const Eigen::VectorXcd& f_gev, const Eigen::MatrixXcd& phi_nn,
                          std::size_t num_mics, double delta = defaults::kDelta) {
  PAIRBEAM_CHECK(f_gev.allFinite(), ErrorKind::kNumeric, "non-finite beamformer filter");
  PAIRBEAM_CHECK(phi_nn.rows() == f_gev.size() && phi_nn.cols() == f_gev.size(),
                 ErrorKind::kShape, "filter and covariance sizes differ");
  const double trace = phi_nn.trace().real();
  if (!(trace > 0.0) || !std::isfinite(trace)) return {0.0, true};
  const Eigen::VectorXcd pf = (phi_nn / trace) * f_gev;
  const double quad = f_gev.dot(pf).real();
  if (!(quad > delta * f_gev.squaredNorm())) return {0.0, true};
  const double num = std::sqrt(std::max(0.0, pf.squaredNorm()));
  const double d2 = static_cast<double>(num_mics) * static_cast<double>(num_mics);
  const double g = num / (quad * d2);
  PAIRBEAM_CHECK(std::isfinite(g), ErrorKind::kNumeric, "non-finite BAN gain");
  return {g, false};
}

inline BeamformerWeights compute_beamformer(const CovariancePair& cov,
                                            double loading = defaults::kDiagonalLoading,
                                            double delta = defaults::kDelta) {
  const std::size_t bins = cov.phi_xx.size();
  PAIRBEAM_CHECK(bins > 0 && cov.phi_nn.size() == bins, ErrorKind::kShape,
                 "covariance bin counts differ");
  const Eigen::Index mics = cov.phi_xx.front().rows();
  BeamformerWeights w;
  w.f_gev.resize(static_cast<Eigen::Index>(bins), mics);
  w.g_ban.resize(static_cast<Eigen::Index>(bins));
  w.degenerate.assign(bins, false);
  for (std::size_t f = 0; f < bins; ++f) {
    try {
      const GevResult gev = gev_principal(cov.phi_xx[f], cov.phi_nn[f], loading, delta);
      // BAN sees the same loaded noise covariance as the GEV step, so a
      // noise-free bin keeps a finite gain.
      const BanResult ban =
          ban_gain(gev.vector, LoadedNoiseCovariance(cov.phi_nn[f], loading, delta),
                   static_cast<std::size_t>(mics), delta);
      w.f_gev.row(static_cast<Eigen::Index>(f)) = gev.vector.transpose();
      w.g_ban(static_cast<Eigen::Index>(f)) = ban.gain;
      w.degenerate[f] = gev.degenerate || ban.degenerate;
    } catch (const Error& e) {
      throw Error(e.kind(), "bin " + std::to_string(f) + ": " + e.what());
    }
  }
  return w;
}

// Z(t,f) = g(f) f(f)^H Y(t,f)
inline Spectrogram apply_beamformer(const std::vector<Spectrogram>& specs,
                                    const BeamformerWeights& weights) {
  PAIRBEAM_CHECK(!specs.empty(), ErrorKind::kArgument, "no spectrograms");
  const Eigen::Index frames = specs.front().num_frames();
  const Eigen::Index bins = specs.front().num_bins();
  PAIRBEAM_CHECK(weights.f_gev.rows() == bins && weights.g_ban.size() == bins &&
                     weights.f_gev.cols() == static_cast<Eigen::Index>(specs.size()),
                 ErrorKind::kShape, "beamformer weights do not match the spectrograms");
  Spectrogram out;
  out.frame_size = specs.front().frame_size;
  out.hop = specs.front().hop;
  out.sample_rate = specs.front().sample_rate;
  out.bins = Eigen::MatrixXcd::Zero(frames, bins);
  for (std::size_t d = 0; d < specs.size(); ++d) {
    const auto& s = specs[d];
    PAIRBEAM_CHECK(s.num_frames() == frames && s.num_bins() == bins, ErrorKind::kShape,
                   "spectrogram shapes differ");
    const Eigen::RowVectorXcd coeff =
        (weights.f_gev.col(static_cast<Eigen::Index>(d)).conjugate().array() *
         weights.g_ban.array().cast<std::complex<double>>())
            .matrix()
            .transpose();
    out.bins.array() += s.bins.array().rowwise() * coeff.array();
  }
  return out;
}

struct SeparateOptions {
  std::size_t frame_size = defaults::kFrameSize;
  std::size_t hop = defaults::kHop;
  PropagationParams propagation;
  double loading = defaults::kDiagonalLoading;
  double delta = defaults::kDelta;
  std::size_t workers = 1;
};

struct SeparationResult {
  AudioBuffer audio;
  FusedMask mask;
  std::vector<PairwiseMask> pair_masks;
  BeamformerWeights weights;
};

inline SeparationResult separate_detailed(const MultichannelAudio& mixture,
                                          const MicArray& array, const Doa& target_doa,
                                          const MaskEstimator& backend,
                                          const SeparateOptions& opt = {}) {
  PAIRBEAM_CHECK(mixture.num_channels() >= 2, ErrorKind::kConfig,
                 "separation needs at least two channels");
  PAIRBEAM_CHECK(mixture.num_channels() == array.size(), ErrorKind::kConfig,
                 "mixture has " + std::to_string(mixture.num_channels()) +
                     " channels but the geometry has " + std::to_string(array.size()) +
                     " microphones");
  Validate(mixture);
  Validate(array);
  PropagationParams prop = opt.propagation;
  prop.sample_rate = mixture.sample_rate;

  SeparationResult r;
  const auto specs = stft(mixture, opt.frame_size, opt.hop);
  r.pair_masks = estimate_pair_masks(specs, array, target_doa, backend, prop, opt.workers);
  r.mask = fuse_masks(r.pair_masks);
  const CovariancePair cov = masked_covariances(specs, r.mask);
  r.weights = compute_beamformer(cov, opt.loading, opt.delta);
  r.audio = istft(apply_beamformer(specs, r.weights));
  return r;
}

inline AudioBuffer separate(const MultichannelAudio& mixture, const MicArray& array,
                            const Doa& target_doa, const MaskEstimator& backend,
                            const SeparateOptions& opt = {}) {
  return separate_detailed(mixture, array, target_doa, backend, opt).audio;
}

}  // namespace pairbeam

#endif  // PAIRBEAM_BEAMFORMER_HPP
