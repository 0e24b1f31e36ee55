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

// pairbeam command-line tool: dataset generation, training-sample export,
// separation and batch evaluation.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pairbeam.hpp"

namespace {

namespace fs = std::filesystem;
using namespace pairbeam;

// Numeric knobs shared by several subcommands; any value that differs from
// the documented default is reported as an override.
struct Knobs {
  std::size_t frame_size = defaults::kFrameSize;
  std::size_t hop = defaults::kHop;
  double alpha = defaults::kAlpha;
  double beta = defaults::kBeta;
  double epsilon = defaults::kFeatureEpsilon;
  int max_order = defaults::kMaxReflectionOrder;
  double loading = defaults::kDiagonalLoading;
  std::size_t filter_len = defaults::kSdrFilterLength;
  double duration = defaults::kSegmentSeconds;

  std::vector<std::string> Overrides() const {
    std::vector<std::string> out;
    auto note = [&](bool changed, const std::string& name, const auto& value) {
      if (!changed) return;
      std::ostringstream os;
      os << name << "=" << value;
      out.push_back(os.str());
    };
    note(frame_size != defaults::kFrameSize, "frame_size", frame_size);
    note(hop != defaults::kHop, "hop", hop);
    note(alpha != defaults::kAlpha, "alpha", alpha);
    note(beta != defaults::kBeta, "beta", beta);
    note(epsilon != defaults::kFeatureEpsilon, "epsilon", epsilon);
    note(max_order != defaults::kMaxReflectionOrder, "max_order", max_order);
    note(loading != defaults::kDiagonalLoading, "loading", loading);
    note(filter_len != defaults::kSdrFilterLength, "filter_len", filter_len);
    note(duration != defaults::kSegmentSeconds, "duration", duration);
    return out;
  }

  FramingOptions Framing() const { return {frame_size, hop, alpha, beta, epsilon}; }

  void Validate() const {
    PAIRBEAM_CHECK(alpha > 0.0, ErrorKind::kConfig, "--alpha must be positive");
    PAIRBEAM_CHECK(IsPowerOfTwo(frame_size) && hop > 0 && frame_size % hop == 0,
                   ErrorKind::kConfig, "--frame-size must be a power of two divisible by --hop");
  }
};

void Log(const std::string& msg) { std::cerr << "[pairbeam] " << msg << "\n"; }

void ReportOverrides(const Knobs& k) {
  for (const auto& o : k.Overrides()) Log("override: " + o);
}

void AddFramingFlags(CLI::App* cmd, Knobs& k) {
  cmd->add_option("--frame-size", k.frame_size, "STFT frame size (samples)")->capture_default_str();
  cmd->add_option("--hop", k.hop, "STFT hop (samples)")->capture_default_str();
  cmd->add_option("--alpha", k.alpha, "Sigmoid gain steepness")->capture_default_str();
  cmd->add_option("--beta", k.beta, "Sigmoid gain offset (samples)")->capture_default_str();
}

Doa ParseDoa(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, "bad --doa component '" + item + "'");
    }
  }
  PAIRBEAM_CHECK(v.size() == 3, ErrorKind::kConfig, "--doa expects x,y,z");
  return Doa::FromVector(Vec3(v[0], v[1], v[2]));
}

std::shared_ptr<const WeightsBundle> LoadBundle(const std::string& path, const Knobs& k) {
  PAIRBEAM_CHECK(!path.empty(), ErrorKind::kConfig,
                 "the neural backend needs --weights FILE (export one with the trainer, or "
                 "use --backend oracle with --scene-dir)");
  return std::make_shared<const WeightsBundle>(load_weights(path, k.frame_size));
}

void WriteMaskDump(const fs::path& path, const SeparationResult& r, const Knobs& k) {
  TensorFile f;
  f.metadata["frame_size"] = std::to_string(k.frame_size);
  f.metadata["hop"] = std::to_string(k.hop);
  for (const auto& o : k.Overrides()) f.metadata["override." + o.substr(0, o.find('='))] = o;
  f.Put("fused_mask", ToTensor(r.mask.values));
  for (const auto& m : r.pair_masks) {
    f.Put("pair_mask_" + std::to_string(m.pair.u + 1) + "_" + std::to_string(m.pair.v + 1),
          ToTensor(m.values));
  }
  WriteTensorFile(path, f);
}

int Run(int argc, char** argv) {
  CLI::App app{"Direction-informed multichannel speech separation with pairwise masks and "
               "GEV-BAN beamforming"};
  app.require_subcommand(1);
  Knobs knobs;

  // make-dataset
  auto* mk = app.add_subcommand("make-dataset", "Simulate rooms and write mixture scenes");
  std::size_t count = 10;
  std::string mode = "pair", geometry, corpus = "synthetic", out_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  mk->add_option("--count", count, "Number of scenes")->capture_default_str();
  mk->add_option("--mode", mode, "pair | array")
      ->check(CLI::IsMember({"pair", "array"}))
      ->capture_default_str();
  mk->add_option("--geometry", geometry, "Geometry file or preset (array mode)");
  mk->add_option("--corpus", corpus, "Directory of 16 kHz WAV speech, or 'synthetic'")
      ->capture_default_str();
  mk->add_option("--out", out_dir, "Output dataset directory")->required();
  mk->add_option("--seed", seed, "Run seed")->capture_default_str();
  mk->add_option("--max-order", knobs.max_order, "Image-method reflection order")
      ->capture_default_str();
  mk->add_option("--duration", knobs.duration, "Segment length (s)")->capture_default_str();
  mk->add_option("--alpha", knobs.alpha, "Sigmoid gain steepness (scene acceptance)")
      ->capture_default_str();
  mk->add_option("--beta", knobs.beta, "Sigmoid gain offset (scene acceptance)")
      ->capture_default_str();
  mk->add_option("--jobs", jobs, "Worker threads")->capture_default_str();

  // export-features
  auto* ex = app.add_subcommand("export-features",
                                "Write features, oracle labels and loss weights per scene");
  std::string dataset_dir;
  ex->add_option("--dataset", dataset_dir, "Pair-mode dataset directory")->required();
  ex->add_option("--out", out_dir, "Output directory for .strn samples")->required();
  ex->add_option("--epsilon", knobs.epsilon, "Log-magnitude floor")->capture_default_str();
  ex->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  AddFramingFlags(ex, knobs);

  // separate
  auto* sp = app.add_subcommand("separate", "Extract the target talker from a recording");
  std::string input, output, doa_text, backend = "neural", weights, scene_dir, mask_dump;
  std::optional<double> azimuth, elevation;
  double speed_of_sound = defaults::kSpeedOfSoundNominal;
  sp->add_option("--input", input, "D-channel WAV (defaults to <scene-dir>/mixture.wav)");
  sp->add_option("--geometry", geometry, "Geometry file or preset");
  sp->add_option("--doa", doa_text, "Target direction x,y,z");
  sp->add_option("--azimuth", azimuth, "Target azimuth (degrees)");
  sp->add_option("--elevation", elevation, "Target elevation (degrees)");
  sp->add_option("--backend", backend, "oracle | neural")
      ->check(CLI::IsMember({"oracle", "neural"}))
      ->capture_default_str();
  sp->add_option("--weights", weights, "Network weights (neural backend)");
  sp->add_option("--scene-dir", scene_dir, "Simulated scene (oracle references and metadata)");
  sp->add_option("--out", output, "Output mono WAV")->required();
  sp->add_option("--mask-dump", mask_dump, "Write per-pair and fused masks to this file");
  sp->add_option("--speed-of-sound", speed_of_sound, "m/s, when no scene metadata is used")
      ->capture_default_str();
  sp->add_option("--loading", knobs.loading, "GEV diagonal loading")->capture_default_str();
  sp->add_option("--epsilon", knobs.epsilon, "Log-magnitude floor")->capture_default_str();
  AddFramingFlags(sp, knobs);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Separate every scene and report SDR improvement");
  std::string summary_prefix;
  ev->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  ev->add_option("--backend", backend, "oracle | neural")
      ->check(CLI::IsMember({"oracle", "neural"}))
      ->capture_default_str();
  ev->add_option("--weights", weights, "Network weights (neural backend)");
  ev->add_option("--geometry", geometry, "Label for the summary row (default: from scenes)");
  ev->add_option("--out", summary_prefix, "Write <prefix>.csv and <prefix>.json");
  ev->add_option("--filter-len", knobs.filter_len, "SDR distortion filter taps")
      ->capture_default_str();
  ev->add_option("--loading", knobs.loading, "GEV diagonal loading")->capture_default_str();
  ev->add_option("--epsilon", knobs.epsilon, "Log-magnitude floor")->capture_default_str();
  ev->add_option("--jobs", jobs, "Worker threads")->capture_default_str();
  AddFramingFlags(ev, knobs);

  // make-weights
  auto* mw = app.add_subcommand("make-weights",
                                "Write an untrained (zero or random) weights bundle");
  std::string kind = "random";
  mw->add_option("--kind", kind, "zero | random")
      ->check(CLI::IsMember({"zero", "random"}))
      ->capture_default_str();
  mw->add_option("--seed", seed, "Seed for random weights")->capture_default_str();
  mw->add_option("--out", output, "Output weights file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  knobs.Validate();
  ReportOverrides(knobs);

  if (mk->parsed()) {
    DatasetConfig cfg;
    cfg.count = count;
    cfg.mode = mode == "pair" ? SceneMode::kPair : SceneMode::kArray;
    if (cfg.mode == SceneMode::kArray) {
      PAIRBEAM_CHECK(!geometry.empty(), ErrorKind::kConfig, "array mode needs --geometry");
      cfg.geometry = ResolveGeometry(geometry);
    }
    cfg.corpus = corpus;
    cfg.out = out_dir;
    cfg.seed = seed;
    cfg.duration_s = knobs.duration;
    cfg.max_order = knobs.max_order;
    cfg.alpha = knobs.alpha;
    cfg.beta = knobs.beta;
    cfg.workers = jobs;
    cfg.overrides = knobs.Overrides();
    const std::size_t n = make_dataset(cfg, [](const std::string& id) { Log("wrote " + id); });
    Log("generated " + std::to_string(n) + " scene(s) in " + out_dir);
    return 0;
  }

  if (ex->parsed()) {
    const std::size_t n = export_features(dataset_dir, out_dir, knobs.Framing(), jobs);
    Log("exported " + std::to_string(n) + " sample(s) to " + out_dir);
    return 0;
  }

  if (sp->parsed()) {
    std::optional<LoadedScene> scene;
    if (!scene_dir.empty()) scene = LoadScene(scene_dir, backend == "oracle");
    PAIRBEAM_CHECK(backend != "oracle" || scene.has_value(), ErrorKind::kConfig,
                   "the oracle backend needs --scene-dir with component references");

    MultichannelAudio mixture;
    if (!input.empty()) {
      mixture = ReadWav(input);
    } else {
      PAIRBEAM_CHECK(scene.has_value(), ErrorKind::kConfig, "give --input or --scene-dir");
      mixture = scene->mixture;
    }

    MicArray array;
    PropagationParams prop{mixture.sample_rate, speed_of_sound};
    if (scene) {
      // Scene metadata holds the placed array and the true propagation speed.
      array = scene->record.scene.array;
      prop.speed_of_sound = scene->record.scene.room.speed_of_sound;
      if (!geometry.empty()) {
        PAIRBEAM_CHECK(ResolveGeometry(geometry).size() == array.size(), ErrorKind::kConfig,
                       "--geometry does not match the scene's microphone count");
      }
    } else {
      PAIRBEAM_CHECK(!geometry.empty(), ErrorKind::kConfig, "--geometry is required");
      array = ResolveGeometry(geometry);
    }
    PAIRBEAM_CHECK(mixture.num_channels() == array.size(), ErrorKind::kConfig,
                   "input has " + std::to_string(mixture.num_channels()) +
                       " channel(s) but the geometry has " + std::to_string(array.size()) +
                       " microphones");

    std::optional<Doa> doa;
    if (!doa_text.empty()) {
      doa = ParseDoa(doa_text);
    } else if (azimuth) {
      doa = Doa::FromAzimuthElevation(*azimuth, elevation.value_or(0.0));
    } else if (scene) {
      doa = scene->record.scene.target_doa();
    }
    PAIRBEAM_CHECK(doa.has_value(), ErrorKind::kConfig,
                   "give the target direction with --doa or --azimuth/--elevation");

    std::unique_ptr<MaskEstimator> estimator;
    if (backend == "oracle") {
      LoadedScene s = *scene;
      s.mixture = mixture;
      estimator = MakeOracleBackend(s, knobs.Framing());
    } else {
      estimator = std::make_unique<NeuralMaskEstimator>(LoadBundle(weights, knobs), knobs.epsilon);
    }
    SeparateOptions opt;
    opt.frame_size = knobs.frame_size;
    opt.hop = knobs.hop;
    opt.propagation = prop;
    opt.loading = knobs.loading;
    const SeparationResult r = separate_detailed(mixture, array, *doa, *estimator, opt);
    WriteWav(output, r.audio);
    if (!mask_dump.empty()) WriteMaskDump(mask_dump, r, knobs);
    std::size_t flagged = 0;
    for (bool b : r.weights.degenerate) flagged += b;
    if (flagged > 0) Log(std::to_string(flagged) + " degenerate frequency bin(s)");
    Log("wrote " + output + " (" + std::to_string(r.audio.size()) + " samples)");
    return 0;
  }

  if (ev->parsed()) {
    EvalOptions opt;
    opt.backend = backend == "oracle" ? BackendKind::kOracle : BackendKind::kNeural;
    if (opt.backend == BackendKind::kNeural) opt.weights = LoadBundle(weights, knobs);
    opt.framing = knobs.Framing();
    opt.loading = knobs.loading;
    opt.filter_len = knobs.filter_len;
    opt.workers = jobs;
    BatchSummary summary = evaluate_batch(dataset_dir, opt, [](const SdrReport& r) {
      Log(r.scene_id + " dSDR " + FormatDb(r.delta_sdr) + " dB");
    });
    if (!geometry.empty()) summary.geometry = geometry;
    if (!summary_prefix.empty()) {
      WriteTextAtomic(summary_prefix + ".csv", SummaryCsv(summary));
      auto j = SummaryJson(summary);
      j["overrides"] = knobs.Overrides();
      WriteTextAtomic(summary_prefix + ".json", j.dump(2) + "\n");
    }
    std::cout << SummaryTable({summary});
    std::printf("scenes=%zu mean=%s median=%s std=%.2f positive=%zu/%zu\n",
                summary.reports.size(), FormatDb(summary.mean).c_str(),
                FormatDb(summary.median).c_str(), summary.stddev, summary.positive,
                summary.reports.size());
    return 0;
  }

  if (mw->parsed()) {
    save_weights(output, kind == "zero" ? ZeroWeights() : RandomWeights(seed));
    Log("wrote " + output);
    return 0;
  }
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const pairbeam::Error& e) {
    std::cerr << "pairbeam: " << e.what() << "\n";
    return pairbeam::ExitCode(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "pairbeam: " << e.what() << "\n";
    return 1;
  }
}
