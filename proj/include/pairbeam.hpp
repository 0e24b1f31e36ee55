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

#ifndef PAIRBEAM_PAIRBEAM_HPP
#define PAIRBEAM_PAIRBEAM_HPP

#include "pairbeam/audio.hpp"
#include "pairbeam/beamformer.hpp"
#include "pairbeam/dataset.hpp"
#include "pairbeam/defaults.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/evaluation.hpp"
#include "pairbeam/geometry.hpp"
#include "pairbeam/masks.hpp"
#include "pairbeam/neural.hpp"
#include "pairbeam/parallel.hpp"
#include "pairbeam/random.hpp"
#include "pairbeam/room.hpp"
#include "pairbeam/sdr.hpp"
#include "pairbeam/spectral.hpp"
#include "pairbeam/speech.hpp"
#include "pairbeam/tensor_file.hpp"

#endif  // PAIRBEAM_PAIRBEAM_HPP
