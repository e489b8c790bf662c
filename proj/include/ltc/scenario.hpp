#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "ltc/metrics.hpp"
#include "ltc/pipeline.hpp"
#include "ltc/scene.hpp"
#include "ltc/training.hpp"

// Scenario files: line-oriented `key = value` pairs grouped in sections.
// `#` starts a comment. Sections:
//
//   [scene NAME]          SceneConfig fields, background.* keys
//   [object SCENE]        one ObjectSpec appended to SCENE
//   [drift SCENE]         one DriftEntry appended to SCENE
//   [pretrain]            scenes = NAME..., sampling of pretraining frames
//   [train]               TrainConfig for pretraining
//   [network]             preset = constrained | rich, then overrides
//   [pipeline]            scene = NAME, run parameters
//
// A line `include PATH` splices another scenario file in place (PATH is
// relative to the including file). Unknown sections and keys are errors
// carrying the file and line number.
namespace ltc {

struct Scenario {
  std::map<std::string, SceneConfig> scenes;
  std::string main_scene = "main";
  std::vector<std::string> pretrain_scenes;
  PretrainConfig pretrain;
  int conv_layers = 2;
  std::uint64_t student_seed = 1;
  NetworkConfig network;
  PipelineConfig pipeline;
  std::string mode = "ltc";
  // `th = auto` (the default): calibrate on calibration_frames() before a run.
  bool calibrate_th = true;
  double calibration_target_f1 = 0.9;
  int calibration_batches = 2;

  const SceneConfig& scene() const;
  std::vector<SceneConfig> pretraining_scenes() const;
  // Footage for threshold calibration: the main scene under a derived seed
  // and without its drift schedule, so it never overlaps a run.
  std::vector<std::vector<LabeledFrame>> calibration_frames() const;
  // Threshold chosen by calibrate_threshold on calibration_frames().
  double calibrated_threshold(const StudentNet& student) const;
  // Reseeds the main scene, the student initialisation and training.
  void apply_seed(std::uint64_t seed);
  void validate() const;
};

// `origin` names the stream in errors; includes resolve against `base_dir`.
Scenario parse_scenario(std::istream& in, const std::string& origin = "scenario", const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

// Modes accepted by `run` and `compare`.
const std::vector<std::string>& run_modes();

}  // namespace ltc
