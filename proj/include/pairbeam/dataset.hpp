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

// On-disk datasets: one directory per scene holding mixture.wav,
// target.wav, interference.wav, noise.wav (D channels, float32) and
// scene.json. Also the training-sample export for pair-mode datasets.

#ifndef PAIRBEAM_DATASET_HPP
#define PAIRBEAM_DATASET_HPP

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "pairbeam/audio.hpp"
#include "pairbeam/beamformer.hpp"
#include "pairbeam/defaults.hpp"
#include "pairbeam/error.hpp"
#include "pairbeam/geometry.hpp"
#include "pairbeam/masks.hpp"
#include "pairbeam/neural.hpp"
#include "pairbeam/parallel.hpp"
#include "pairbeam/random.hpp"
#include "pairbeam/room.hpp"
#include "pairbeam/speech.hpp"
#include "pairbeam/tensor_file.hpp"

namespace pairbeam {

namespace fs = std::filesystem;
using nlohmann::json;

inline json ToJson(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 Vec3FromJson(const json& j) {
  PAIRBEAM_CHECK(j.is_array() && j.size() == 3, ErrorKind::kFormat, "expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

// Scene parameters plus how it was rendered.
struct SceneRecord {
  std::string id;
  Scene scene;
  double duration_s = defaults::kSegmentSeconds;
  int max_order = defaults::kMaxReflectionOrder;
  std::size_t interp_taps = defaults::kFractionalDelayTaps;
  std::string source_kind = "synthetic";
  std::vector<std::string> overrides;
};

inline json SceneToJson(const SceneRecord& rec) {
  const Scene& s = rec.scene;
  json mics = json::array();
  for (const auto& p : s.array.positions) mics.push_back(ToJson(p));
  json j;
  j["id"] = rec.id;
  j["seed"] = s.seed;
  j["mode"] = ToString(s.mode);
  j["geometry"] = s.array.name;
  j["sample_rate"] = s.sample_rate;
  j["room"] = {{"length", s.room.length},
               {"width", s.room.width},
               {"height", s.room.height},
               {"reflection_coeff", s.room.reflection_coeff},
               {"speed_of_sound", s.room.speed_of_sound}};
  j["mics"] = mics;
  j["array_center"] = ToJson(s.array.centroid());
  j["target_pos"] = ToJson(s.target_pos);
  j["interference_pos"] = ToJson(s.interference_pos);
  j["target_doa"] = ToJson(s.target_doa().vector());
  j["interference_doa"] = ToJson(s.interference_doa().vector());
  j["snr_db"] = s.snr_db;
  j["per_mic_gains"] = s.per_mic_gains;
  j["noise_variance"] = s.noise_variance;
  j["overall_gain"] = s.overall_gain;
  j["duration_s"] = rec.duration_s;
  j["max_order"] = rec.max_order;
  j["interp_taps"] = rec.interp_taps;
  j["source"] = rec.source_kind;
  j["overrides"] = rec.overrides;
  return j;
}

inline SceneRecord SceneFromJson(const json& j) {
  try {
    SceneRecord rec;
    Scene& s = rec.scene;
    rec.id = j.at("id").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    const auto mode = j.at("mode").get<std::string>();
    PAIRBEAM_CHECK(mode == "pair" || mode == "array", ErrorKind::kFormat,
                   "unknown scene mode '" + mode + "'");
    s.mode = mode == "pair" ? SceneMode::kPair : SceneMode::kArray;
    s.sample_rate = j.at("sample_rate").get<double>();
    const auto& room = j.at("room");
    s.room.length = room.at("length").get<double>();
    s.room.width = room.at("width").get<double>();
    s.room.height = room.at("height").get<double>();
    s.room.reflection_coeff = room.at("reflection_coeff").get<double>();
    s.room.speed_of_sound = room.at("speed_of_sound").get<double>();
    s.array.name = j.at("geometry").get<std::string>();
    for (const auto& m : j.at("mics")) s.array.positions.push_back(Vec3FromJson(m));
    s.target_pos = Vec3FromJson(j.at("target_pos"));
    s.interference_pos = Vec3FromJson(j.at("interference_pos"));
    s.snr_db = j.at("snr_db").get<double>();
    s.per_mic_gains = j.at("per_mic_gains").get<std::vector<double>>();
    s.noise_variance = j.at("noise_variance").get<double>();
    s.overall_gain = j.at("overall_gain").get<double>();
    rec.duration_s = j.value("duration_s", defaults::kSegmentSeconds);
    rec.max_order = j.value("max_order", defaults::kMaxReflectionOrder);
    rec.interp_taps = j.value("interp_taps", defaults::kFractionalDelayTaps);
    rec.source_kind = j.value("source", std::string("unknown"));
    rec.overrides = j.value("overrides", std::vector<std::string>{});
    return rec;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad scene metadata: ") + e.what());
  }
}

inline void WriteTextAtomic(const fs::path& path, const std::string& text) {
  WriteFileAtomic(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline std::string ReadText(const fs::path& path) {
  std::ifstream in(path);
  PAIRBEAM_CHECK(in.good(), ErrorKind::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string SceneId(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%05zu", index);
  return buf;
}

// Writes the scene into `<root>/<id>.partial` and renames it into place, so a
// scene directory that exists is complete.
inline void WriteSceneDir(const fs::path& root, const SceneRecord& rec,
                          const MixtureComponents& parts) {
  const fs::path final_dir = root / rec.id;
  const fs::path tmp_dir = root / (rec.id + ".partial");
  std::error_code ec;
  fs::remove_all(tmp_dir, ec);
  fs::create_directories(tmp_dir, ec);
  PAIRBEAM_CHECK(!ec, ErrorKind::kIo, "cannot create " + tmp_dir.string());
  WriteWav(tmp_dir / "mixture.wav", parts.mixture);
  WriteWav(tmp_dir / "target.wav", parts.target);
  WriteWav(tmp_dir / "interference.wav", parts.interference);
  WriteWav(tmp_dir / "noise.wav", parts.noise);
  WriteTextAtomic(tmp_dir / "scene.json", SceneToJson(rec).dump(2) + "\n");
  fs::remove_all(final_dir, ec);
  fs::rename(tmp_dir, final_dir, ec);
  PAIRBEAM_CHECK(!ec, ErrorKind::kIo, "cannot move scene into " + final_dir.string());
}

struct LoadedScene {
  fs::path dir;
  SceneRecord record;
  MultichannelAudio mixture;
  std::optional<MixtureComponents> components;  // loaded for oracle use only
};

inline SceneRecord ReadSceneRecord(const fs::path& dir) {
  try {
    return SceneFromJson(json::parse(ReadText(dir / "scene.json")));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, (dir / "scene.json").string() + ": " + e.what());
  }
}

inline LoadedScene LoadScene(const fs::path& dir, bool with_components) {
  PAIRBEAM_CHECK(fs::is_directory(dir), ErrorKind::kIo, "no scene directory " + dir.string());
  LoadedScene s;
  s.dir = dir;
  s.record = ReadSceneRecord(dir);
  s.mixture = ReadWav(dir / "mixture.wav");
  if (with_components) {
    MixtureComponents c;
    c.mixture = s.mixture;
    c.target = ReadWav(dir / "target.wav");
    c.interference = ReadWav(dir / "interference.wav");
    c.noise = ReadWav(dir / "noise.wav");
    s.components = std::move(c);
  }
  return s;
}

// Complete scene directories (those with scene.json) in name order.
inline std::vector<fs::path> ListScenes(const fs::path& root) {
  PAIRBEAM_CHECK(fs::is_directory(root), ErrorKind::kIo,
                 "dataset directory '" + root.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && e.path().extension() != ".partial" &&
        fs::exists(e.path() / "scene.json")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct DatasetConfig {
  std::size_t count = 10;
  SceneMode mode = SceneMode::kPair;
  MicArray geometry;           // array mode
  std::string corpus = "synthetic";  // directory, or "synthetic"
  fs::path out;
  std::uint64_t seed = 0;
  double duration_s = defaults::kSegmentSeconds;
  int max_order = defaults::kMaxReflectionOrder;
  std::size_t interp_taps = defaults::kFractionalDelayTaps;
  double alpha = defaults::kAlpha;
  double beta = defaults::kBeta;
  std::size_t workers = 1;
  std::vector<std::string> overrides;
};

inline SceneTemplate TemplateFor(const DatasetConfig& cfg) {
  SceneTemplate t;
  t.mode = cfg.mode;
  t.array = cfg.geometry;
  t.alpha = cfg.alpha;
  t.beta = cfg.beta;
  return t;
}

// Renders scene `index` of a run in memory. Every random draw derives from
// (run seed, index), so results do not depend on processing order.
inline std::pair<SceneRecord, MixtureComponents> RenderScene(const DatasetConfig& cfg,
                                                             std::size_t index,
                                                             const SpeechCorpus* corpus) {
  SceneRecord rec;
  rec.id = SceneId(index);
  const std::uint64_t scene_seed = DeriveSeed(cfg.seed, index);
  rec.scene = sample_scene(scene_seed, TemplateFor(cfg));
  rec.duration_s = cfg.duration_s;
  rec.max_order = cfg.max_order;
  rec.interp_taps = cfg.interp_taps;
  rec.overrides = cfg.overrides;
  const double fs = rec.scene.sample_rate;
  const auto length = static_cast<std::size_t>(std::llround(cfg.duration_s * fs));
  AudioBuffer target, interference;
  if (corpus == nullptr) {
    rec.source_kind = "synthetic";
    target = SpeechLikeSignal(DeriveSeed(scene_seed, 1), cfg.duration_s, fs);
    interference = SpeechLikeSignal(DeriveSeed(scene_seed, 2), cfg.duration_s, fs);
  } else {
    rec.source_kind = "corpus";
    Rng rng(DeriveSeed(scene_seed, 3));
    std::tie(target, interference) = corpus->DrawPair(rng, length, fs);
  }
  auto parts = synthesize_mixture(rec.scene, target, interference, cfg.duration_s,
                                  cfg.max_order, cfg.interp_taps);
  return {std::move(rec), std::move(parts)};
}

// Generates `count` scenes under cfg.out, skipping scenes already present.
// Returns the number of scenes written.
inline std::size_t make_dataset(const DatasetConfig& cfg,
                                const std::function<void(const std::string&)>& log = {}) {
  PAIRBEAM_CHECK(!cfg.out.empty(), ErrorKind::kConfig, "no output directory");
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  PAIRBEAM_CHECK(!ec && fs::is_directory(cfg.out), ErrorKind::kIo,
                 "cannot create " + cfg.out.string());
  if (cfg.mode == SceneMode::kArray) Validate(cfg.geometry);
  std::unique_ptr<SpeechCorpus> corpus;
  if (cfg.corpus != "synthetic") corpus = std::make_unique<SpeechCorpus>(cfg.corpus);

  std::atomic<std::size_t> written{0};
  std::mutex log_mutex;
  ParallelFor(cfg.count, cfg.workers, [&](std::size_t i) {
    const std::string id = SceneId(i);
    if (fs::exists(cfg.out / id / "scene.json")) return;
    auto [rec, parts] = RenderScene(cfg, i, corpus.get());
    WriteSceneDir(cfg.out, rec, parts);
    ++written;
    if (log) {
      std::lock_guard<std::mutex> lock(log_mutex);
      log(id);
    }
  });
  return written;
}

// Spectrograms of every channel of a multichannel signal.
inline std::vector<Spectrogram> ChannelSpectra(const MultichannelAudio& audio,
                                               std::size_t frame_size, std::size_t hop) {
  return stft(audio, frame_size, hop);
}

struct FramingOptions {
  std::size_t frame_size = defaults::kFrameSize;
  std::size_t hop = defaults::kHop;
  double alpha = defaults::kAlpha;
  double beta = defaults::kBeta;
  double epsilon = defaults::kFeatureEpsilon;
};

inline std::unique_ptr<OracleMaskEstimator> MakeOracleBackend(const LoadedScene& scene,
                                                              const FramingOptions& opt) {
  PAIRBEAM_CHECK(scene.components.has_value(), ErrorKind::kConfig,
                 "oracle backend requires the scene's component references");
  const Scene& s = scene.record.scene;
  const auto& c = *scene.components;
  return std::make_unique<OracleMaskEstimator>(
      stft(c.target, opt.frame_size, opt.hop), stft(c.interference, opt.frame_size, opt.hop),
      stft(c.noise, opt.frame_size, opt.hop), s.array, s.target_doa(), s.interference_doa(),
      PropagationParams{s.sample_rate, s.room.speed_of_sound}, opt.alpha, opt.beta);
}

// Training sample for one pair-mode scene: features (T x 2F), oracle mask
// label (T x F) and the log-magnitude loss weight (T x F).
inline TensorFile ExportSceneFeatures(const LoadedScene& scene, const FramingOptions& opt) {
  const Scene& s = scene.record.scene;
  PAIRBEAM_CHECK(s.mode == SceneMode::kPair && s.array.size() == 2, ErrorKind::kMode,
                 scene.dir.string() + " is not a pair-mode scene");
  const auto specs = stft(scene.mixture, opt.frame_size, opt.hop);
  const auto backend = MakeOracleBackend(scene, opt);
  const MicPair pair{0, 1};
  const double tau = tdoa(s.array, pair, s.target_doa(), s.sample_rate, s.room.speed_of_sound);
  const auto cross = steered_cross_spectrum(
      specs[0], specs[1],
      steering_vector(tau, opt.frame_size, static_cast<std::size_t>(specs[0].num_bins())), pair);
  const FeatureBlock features = extract_features(cross, opt.epsilon);
  const PairwiseMask label = backend->EstimatePair({pair, tau, &cross});

  TensorFile f;
  f.metadata["scene"] = scene.record.id;
  f.metadata["seed"] = std::to_string(s.seed);
  f.metadata["frame_size"] = std::to_string(opt.frame_size);
  f.metadata["hop"] = std::to_string(opt.hop);
  std::ostringstream num;
  num.precision(17);
  num << tau;
  f.metadata["tau"] = num.str();
  num.str("");
  num << backend->Gain(pair);
  f.metadata["gain"] = num.str();
  f.Put("features", ToTensor(features.values));
  f.Put("mask", ToTensor(label.values));
  f.Put("weight", ToTensor(LogMagnitude(features)));
  return f;
}

inline std::size_t export_features(const fs::path& dataset, const fs::path& out,
                                   const FramingOptions& opt, std::size_t workers = 1) {
  const auto scenes = ListScenes(dataset);
  PAIRBEAM_CHECK(!scenes.empty(), ErrorKind::kArgument,
                 "dataset '" + dataset.string() + "' has no scenes");
  for (const auto& dir : scenes) {
    PAIRBEAM_CHECK(ReadSceneRecord(dir).scene.mode == SceneMode::kPair, ErrorKind::kMode,
                   "export needs a pair-mode dataset; " + dir.filename().string() +
                       " is array-mode");
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  PAIRBEAM_CHECK(!ec, ErrorKind::kIo, "cannot create " + out.string());
  ParallelFor(scenes.size(), workers, [&](std::size_t i) {
    const LoadedScene scene = LoadScene(scenes[i], true);
    WriteTensorFile(out / (scene.record.id + ".strn"), ExportSceneFeatures(scene, opt));
  });
  return scenes.size();
}

}  // namespace pairbeam

#endif  // PAIRBEAM_DATASET_HPP
