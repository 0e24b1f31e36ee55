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

// Signal-to-distortion ratio in the BSS Eval sense: the estimate is
// projected onto the span of delayed copies of the reference (an FIR
// distortion filter of `filter_len` taps, fitted by least squares); the
// projection is the target part and everything else is distortion.

#ifndef PAIRBEAM_SDR_HPP
#define PAIRBEAM_SDR_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "pairbeam/audio.hpp"
#include "pairbeam/defaults.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/room.hpp"

namespace pairbeam {

inline double sdr(const std::vector<double>& estimate, const std::vector<double>& reference,
                  std::size_t filter_len = defaults::kSdrFilterLength) {
  PAIRBEAM_CHECK(filter_len >= 1, ErrorKind::kArgument, "filter length must be >= 1");
  const std::size_t n = std::min(estimate.size(), reference.size());
  PAIRBEAM_CHECK(n > 0, ErrorKind::kLength, "empty signals");
  double ref_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) ref_energy += reference[i] * reference[i];
  PAIRBEAM_CHECK(ref_energy > 0.0, ErrorKind::kNumeric, "SDR undefined for a silent reference");

  const std::size_t full = n + filter_len - 1;
  const std::size_t nfft = NextPowerOfTwo(n + filter_len);
  Eigen::FFT<double> fft;
  std::vector<double> rp(nfft, 0.0), ep(nfft, 0.0);
  std::copy_n(reference.begin(), n, rp.begin());
  std::copy_n(estimate.begin(), n, ep.begin());
  std::vector<std::complex<double>> rf, ef;
  fft.fwd(rf, rp);
  fft.fwd(ef, ep);

  // Autocorrelation of the zero-padded reference and its correlation with
  // the estimate, lags 0 .. filter_len-1.
  std::vector<std::complex<double>> prod(nfft);
  std::vector<double> auto_corr, cross_corr;
  for (std::size_t k = 0; k < nfft; ++k) prod[k] = rf[k] * std::conj(rf[k]);
  fft.inv(auto_corr, prod);
  for (std::size_t k = 0; k < nfft; ++k) prod[k] = ef[k] * std::conj(rf[k]);
  fft.inv(cross_corr, prod);

  const auto taps = static_cast<Eigen::Index>(filter_len);
  Eigen::MatrixXd gram(taps, taps);
  Eigen::VectorXd rhs(taps);
  for (Eigen::Index i = 0; i < taps; ++i) {
    rhs(i) = cross_corr[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < taps; ++j) {
      gram(i, j) = auto_corr[static_cast<std::size_t>(std::abs(i - j))];
    }
  }
  const Eigen::VectorXd h = gram.ldlt().solve(rhs);

  // Target component: reference filtered by h, over the padded length.
  std::vector<double> hp(nfft, 0.0);
  for (Eigen::Index i = 0; i < taps; ++i) hp[static_cast<std::size_t>(i)] = h(i);
  std::vector<std::complex<double>> hf;
  fft.fwd(hf, hp);
  for (std::size_t k = 0; k < nfft; ++k) prod[k] = rf[k] * hf[k];
  std::vector<double> target;
  fft.inv(target, prod);

  double target_energy = 0.0, error_energy = 0.0;
  for (std::size_t i = 0; i < full; ++i) {
    const double e = (i < n ? estimate[i] : 0.0) - target[i];
    target_energy += target[i] * target[i];
    error_energy += e * e;
  }
  PAIRBEAM_CHECK(std::isfinite(target_energy) && std::isfinite(error_energy),
                 ErrorKind::kNumeric, "non-finite SDR intermediate");
  if (target_energy <= 0.0) return -300.0;
  error_energy = std::max(error_energy, 1e-30 * target_energy);
  return 10.0 * std::log10(target_energy / error_energy);
}

inline double sdr(const AudioBuffer& estimate, const AudioBuffer& reference,
                  std::size_t filter_len = defaults::kSdrFilterLength) {
  return sdr(estimate.samples, reference.samples, filter_len);
}

}  // namespace pairbeam

#endif  // PAIRBEAM_SDR_HPP
