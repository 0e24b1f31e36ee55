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

// Scene- and batch-level SDR evaluation. The reference is the reverberant
// target image at microphone 1; the input SDR uses mixture channel 1.

#ifndef PAIRBEAM_EVALUATION_HPP
#define PAIRBEAM_EVALUATION_HPP

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "pairbeam/beamformer.hpp"
#include "pairbeam/dataset.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/neural.hpp"
#include "pairbeam/sdr.hpp"

namespace pairbeam {

struct SdrReport {
  std::string scene_id;
  std::uint64_t seed = 0;
  std::string geometry;
  double sdr_in = 0.0;
  double sdr_out = 0.0;
  double delta_sdr = 0.0;
};

inline SdrReport MakeReport(std::string id, std::uint64_t seed, std::string geometry,
                            double sdr_in, double sdr_out) {
  return {std::move(id), seed, std::move(geometry), sdr_in, sdr_out, sdr_out - sdr_in};
}

// All three signals are cut to the length of the separated output.
inline SdrReport evaluate_scene(const SceneRecord& record, const MultichannelAudio& mixture,
                                const MultichannelAudio& target, const AudioBuffer& separated,
                                std::size_t filter_len = defaults::kSdrFilterLength) {
  const std::size_t n = std::min({separated.size(), mixture.num_samples(), target.num_samples()});
  PAIRBEAM_CHECK(n > 0, ErrorKind::kLength, "nothing to evaluate");
  auto head = [n](const std::vector<double>& v) {
    return std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n));
  };
  const auto ref = head(target.channels.at(0));
  const double in = sdr(head(mixture.channels.at(0)), ref, filter_len);
  const double out = sdr(head(separated.samples), ref, filter_len);
  return MakeReport(record.id, record.scene.seed, record.scene.array.name, in, out);
}

inline SdrReport evaluate_scene(const std::filesystem::path& scene_dir,
                                const AudioBuffer& separated,
                                std::size_t filter_len = defaults::kSdrFilterLength) {
  const SceneRecord rec = ReadSceneRecord(scene_dir);
  return evaluate_scene(rec, ReadWav(scene_dir / "mixture.wav"),
                        ReadWav(scene_dir / "target.wav"), separated, filter_len);
}

enum class BackendKind { kOracle, kNeural };

struct EvalOptions {
  BackendKind backend = BackendKind::kOracle;
  std::shared_ptr<const WeightsBundle> weights;  // neural backend
  FramingOptions framing;
  double loading = defaults::kDiagonalLoading;
  double delta = defaults::kDelta;
  std::size_t filter_len = defaults::kSdrFilterLength;
  std::size_t workers = 1;
};

inline SeparationResult SeparateScene(const LoadedScene& scene, const EvalOptions& opt) {
  const Scene& s = scene.record.scene;
  SeparateOptions sep;
  sep.frame_size = opt.framing.frame_size;
  sep.hop = opt.framing.hop;
  sep.propagation = {s.sample_rate, s.room.speed_of_sound};
  sep.loading = opt.loading;
  sep.delta = opt.delta;
  std::unique_ptr<MaskEstimator> backend;
  if (opt.backend == BackendKind::kOracle) {
    backend = MakeOracleBackend(scene, opt.framing);
  } else {
    PAIRBEAM_CHECK(opt.weights != nullptr, ErrorKind::kConfig,
                   "neural backend requires --weights");
    backend = std::make_unique<NeuralMaskEstimator>(opt.weights, opt.framing.epsilon);
  }
  return separate_detailed(scene.mixture, s.array, s.target_doa(), *backend, sep);
}

struct BatchSummary {
  std::string geometry;
  std::string backend;
  std::vector<SdrReport> reports;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
  std::size_t positive = 0;
};

inline BatchSummary Summarize(std::vector<SdrReport> reports, std::string geometry,
                              std::string backend) {
  PAIRBEAM_CHECK(!reports.empty(), ErrorKind::kArgument, "no scenes to summarise");
  std::sort(reports.begin(), reports.end(),
            [](const SdrReport& a, const SdrReport& b) { return a.scene_id < b.scene_id; });
  BatchSummary s;
  s.geometry = std::move(geometry);
  s.backend = std::move(backend);
  std::vector<double> d;
  for (const auto& r : reports) d.push_back(r.delta_sdr);
  const double n = static_cast<double>(d.size());
  s.mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double var = 0.0;
  for (double v : d) var += (v - s.mean) * (v - s.mean);
  s.stddev = d.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  std::vector<double> sorted = d;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  s.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  s.positive = static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [](double v) { return v > 0.0; }));
  s.reports = std::move(reports);
  return s;
}

inline BatchSummary evaluate_batch(const std::filesystem::path& dataset, const EvalOptions& opt,
                                   const std::function<void(const SdrReport&)>& progress = {}) {
  const auto scenes = ListScenes(dataset);
  PAIRBEAM_CHECK(!scenes.empty(), ErrorKind::kArgument,
                 "dataset '" + dataset.string() + "' has no scenes");
  std::vector<SdrReport> reports(scenes.size());
  std::mutex progress_mutex;
  ParallelFor(scenes.size(), opt.workers, [&](std::size_t i) {
    // References are read for scoring in every case; the separation itself
    // only sees them with the oracle backend.
    const LoadedScene scene = LoadScene(scenes[i], true);
    LoadedScene blind = scene;
    if (opt.backend != BackendKind::kOracle) blind.components.reset();
    const SeparationResult sep = SeparateScene(blind, opt);
    reports[i] = evaluate_scene(scene.record, scene.mixture, scene.components->target, sep.audio,
                                opt.filter_len);
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(reports[i]);
    }
  });
  const std::string geometry = reports.front().geometry;
  return Summarize(std::move(reports), geometry,
                   opt.backend == BackendKind::kOracle ? "oracle" : "neural");
}

inline std::string FormatDb(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%+.2f", v);
  return buf;
}

inline std::string SummaryCsv(const BatchSummary& s) {
  std::ostringstream os;
  os.precision(10);
  os << "scene,seed,geometry,sdr_in,sdr_out,delta_sdr\n";
  for (const auto& r : s.reports) {
    os << r.scene_id << "," << r.seed << "," << r.geometry << "," << r.sdr_in << ","
       << r.sdr_out << "," << r.delta_sdr << "\n";
  }
  return os.str();
}

inline nlohmann::json SummaryJson(const BatchSummary& s) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& r : s.reports) {
    scenes.push_back({{"scene", r.scene_id},
                      {"seed", r.seed},
                      {"geometry", r.geometry},
                      {"sdr_in", r.sdr_in},
                      {"sdr_out", r.sdr_out},
                      {"delta_sdr", r.delta_sdr}});
  }
  return {{"geometry", s.geometry},
          {"backend", s.backend},
          {"count", s.reports.size()},
          {"mean_delta_sdr", s.mean},
          {"median_delta_sdr", s.median},
          {"std_delta_sdr", s.stddev},
          {"positive_fraction", static_cast<double>(s.positive) / static_cast<double>(s.reports.size())},
          {"scenes", scenes}};
}

// Two-column "Microphone Array | dSDR (dB)" table, one row per geometry.
inline std::string SummaryTable(const std::vector<BatchSummary>& rows) {
  std::size_t width = std::string("Microphone Array").size();
  for (const auto& r : rows) width = std::max(width, r.geometry.size());
  std::ostringstream os;
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  os << "| " << pad("Microphone Array") << " | dSDR (dB) |\n";
  os << "|-" << std::string(width, '-') << "-|-----------|\n";
  for (const auto& r : rows) {
    const std::string v = FormatDb(r.mean);
    os << "| " << pad(r.geometry) << " | " << std::string(9 - std::min<std::size_t>(9, v.size()), ' ')
       << v << " |\n";
  }
  return os.str();
}

}  // namespace pairbeam

#endif  // PAIRBEAM_EVALUATION_HPP
