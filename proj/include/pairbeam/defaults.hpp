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

// Default values for every tunable in the pipeline. The CLI records any
// override of these in its output metadata.

#ifndef PAIRBEAM_DEFAULTS_HPP
#define PAIRBEAM_DEFAULTS_HPP

#include <cstddef>

namespace pairbeam::defaults {

// Time-frequency analysis.
inline constexpr double kSampleRate = 16000.0;
inline constexpr std::size_t kFrameSize = 512;
inline constexpr std::size_t kHop = 128;
inline constexpr std::size_t kNumBins = kFrameSize / 2 + 1;

// Sigmoid TDOA gain: steepness and offset (samples).
inline constexpr double kAlpha = 10.0;
inline constexpr double kBeta = 1.0;

// Log-magnitude feature floor.
inline constexpr double kFeatureEpsilon = 1e-20;
// Guard added to oracle ratio-mask denominators.
inline constexpr double kMaskEpsilon = 1e-20;

// Network shape.
inline constexpr std::size_t kHiddenSize = 128;
inline constexpr double kBatchNormEpsilon = 1e-5;

// GEV regularisation: relative diagonal loading and absolute floor.
inline constexpr double kDiagonalLoading = 1e-6;
inline constexpr double kDelta = 1e-12;

// Room simulation.
inline constexpr int kMaxReflectionOrder = 10;
inline constexpr std::size_t kFractionalDelayTaps = 81;
inline constexpr double kSegmentSeconds = 5.0;
inline constexpr int kMaxSceneRetries = 10000;

// Scene parameter ranges (uniformly sampled).
inline constexpr double kRoomLengthMin = 5.0, kRoomLengthMax = 10.0;
inline constexpr double kRoomWidthMin = 5.0, kRoomWidthMax = 10.0;
inline constexpr double kRoomHeightMin = 2.0, kRoomHeightMax = 5.0;
inline constexpr double kReflectionMin = 0.2, kReflectionMax = 0.8;
inline constexpr double kSpeedOfSoundMin = 340.0, kSpeedOfSoundMax = 355.0;
inline constexpr double kMicSpacingMin = 0.04, kMicSpacingMax = 0.20;
inline constexpr double kMinSurfaceDistance = 0.5;
inline constexpr double kSourceDistanceMin = 1.0, kSourceDistanceMax = 5.0;
inline constexpr double kNoiseVarianceMin = 0.5, kNoiseVarianceMax = 2.0;
inline constexpr double kSnrDbMin = -5.0, kSnrDbMax = 5.0;
inline constexpr double kOverallGainMin = 0.01, kOverallGainMax = 0.99;

// Not part of the published ranges: per-microphone gain spread and the
// noise floor that the white-noise variance multiplies.
inline constexpr double kMicGainDbMin = -3.0, kMicGainDbMax = 3.0;
inline constexpr double kNoiseFloorDb = -20.0;

// A test scene must contain a pair whose sigmoid gain is at most this.
inline constexpr double kDiscriminativeGain = 0.01;

// Distortion filter length for SDR.
inline constexpr std::size_t kSdrFilterLength = 512;

inline constexpr double kSpeedOfSoundNominal = 343.0;

}  // namespace pairbeam::defaults

#endif  // PAIRBEAM_DEFAULTS_HPP
