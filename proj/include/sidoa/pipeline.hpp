// include/sidoa/pipeline.hpp

// Copyright 2026  sidoa authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidoa/corpus.hpp"
#include "sidoa/features.hpp"
#include "sidoa/nn.hpp"
#include "sidoa/room.hpp"

namespace sidoa {

inline constexpr std::size_t kDeskSamplesPerEpoch = 5000;
inline constexpr int kDeskEpochs = 10;
inline constexpr int kDeskTrialsPerCondition = 100;
// 1560 steps at 1e-4 with 50% dropout on 16 channels does not leave the
// uniform-guess loss; the desk preset trains faster and drops less.
inline constexpr double kDeskLearningRate = 1e-3;
inline constexpr double kDeskDropoutRate = 0.1;

struct TrainConfig {
  std::size_t samples_per_epoch = 100000;
  int epochs = 10;
  int batch_size = 32;
  double lr = 1e-4;
  std::uint64_t seed = 1;
  std::string corpus_dir;
  double white_noise_fraction = 0.5;  // share of white-noise source signals
  bool desk_scale = false;            // caps samples_per_epoch at the desk size
  // Draw a fresh data set every epoch instead of reusing the first one.
  bool regenerate_each_epoch = false;
  double source_seconds = 1.0;  // length of each rendered training signal
  int jobs = 1;
  ScenarioConfig scenario = ScenarioConfig::training();
  nn::ModelConfig model;

  static TrainConfig desk();
  std::size_t effective_samples_per_epoch() const;
  // Throws ConfigError before any work is done.
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

// Overrides for tests and diagnostics.
struct SampleOptions {
  std::optional<bool> speech_source;  // force the source type
  bool anechoic = false;
  bool noiseless = false;
};

struct TrainingSample {
  GccFeatureMap features;
  int label = 0;
  bool speech_source = false;
  NoiseKind noise;
  double snr_db = 0.0;
  Scenario scenario;  // without RIRs
};

// One single-source frame: samples a scenario, renders it, and returns the
// unmasked feature map of a frame in which the source is active (first
// array microphone above -60 dB) together with the desired class.
TrainingSample gen_training_sample(const TrainConfig& cfg, const SpeechCorpus* corpus, Rng& rng,
                                   const SampleOptions& opts = {});

// Sample `index` of the data stream keyed by (seed, epoch, index).
TrainingSample gen_indexed_sample(const TrainConfig& cfg, const SpeechCorpus* corpus,
                                  std::uint64_t epoch, std::uint64_t index);

// Feature maps stored as float, row-major, with their labels.
struct FeatureDataset {
  std::vector<float> features;  // size() x kFeatureSize
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

// The samples of `epoch` (0 for a reused data set), generated on cfg.jobs
// threads; identical for any thread count.
FeatureDataset build_dataset(const TrainConfig& cfg, const SpeechCorpus* corpus, std::uint64_t epoch);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

struct TrainHooks {
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints
  std::filesystem::path log_path;        // line-delimited JSON progress
  bool resume = false;                   // continue from checkpoint_dir/last.ckpt
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  nn::Model model;
  std::vector<EpochStats> epochs;
  std::uint64_t steps = 0;
};

// Trains on `cached` for every epoch when given, else on generated data.
TrainResult train(const TrainConfig& cfg, const SpeechCorpus* corpus, const TrainHooks& hooks = {},
                  const FeatureDataset* cached = nullptr);

struct Trial {
  Scenario scenario;
  std::vector<TimeSignal> channels;  // 16 rendered channels, 5 s
  int ground_truth_class = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> recordings;  // corpus indices, desired first
};

inline constexpr double kTrialSeconds = 5.0;

// Evaluation trial with `J` interferers, t60 0.5 s and SNR 20 dB unless
// `cfg` says otherwise. Sources are distinct corpus recordings.
Trial gen_eval_trial(int J, Rng& rng, const SpeechCorpus& corpus,
                     const ScenarioConfig& cfg = ScenarioConfig::evaluation());

// Frames whose energy is at least the global level minus 4 dB, where the
// global level is 10 log10 of the mean linear frame power.
std::vector<std::size_t> detect_speech_frames(const TimeSignal& ext);

// Absolute angular error in degrees, [0, 180].
double angular_error(double est_deg, double truth_deg);

// Median of angles: the sample minimizing the summed circular distance to
// all others. Ties go to the candidate closest to the circular mean, then
// to the smallest angle.
double circular_median_deg(std::span<const double> angles_deg);

struct TrialResult {
  std::vector<int> frame_predictions;
  std::vector<std::size_t> speech_frames;  // frames that were classified
  double estimate_deg = 0.0;
  double error_deg = 0.0;
  bool valid = false;  // false when no frame could be classified
  int alignment_lag = 0;
};

// Aligns the external channel to the center microphone, gates speech
// frames on it and classifies each one. `mask_percentile` enables the
// informed features; the noise draws for frame f come from (seed, f).
TrialResult evaluate_trial(const nn::Model& model, const Trial& trial,
                           std::optional<double> mask_percentile, std::uint64_t seed = 0);

struct BenchmarkConfig {
  std::vector<int> interferer_counts{0, 1, 2, 4};
  int trials_per_count = kDeskTrialsPerCondition;
  // Masked conditions; the unmasked condition is always evaluated.
  std::vector<double> percentiles{50.0};
  std::uint64_t seed = 1000;
  int jobs = 1;
  ScenarioConfig scenario = ScenarioConfig::evaluation();

  void validate() const;
};

void to_json(nlohmann::json& j, const BenchmarkConfig& cfg);
void from_json(const nlohmann::json& j, BenchmarkConfig& cfg);

struct TrialRow {
  int J = 0;
  std::string condition;  // "unmasked" or "P<x>"
  std::uint64_t seed = 0;
  double truth_deg = 0.0;
  double estimate_deg = 0.0;
  double error_deg = 0.0;
  std::size_t speech_frames = 0;
  bool valid = false;
};

struct AggregateRow {
  int J = 0;
  std::string condition;
  std::size_t trials = 0;
  std::size_t invalid = 0;
  double median_error = 0.0;
  double mean_error = 0.0;
  std::vector<std::size_t> histogram;  // 5 degree bins over [0, 180]
};

struct BenchmarkResult {
  std::vector<TrialRow> trials;        // ordered by (J, trial, condition)
  std::vector<AggregateRow> aggregates;  // ordered by (J, condition)

  const AggregateRow& aggregate(int J, const std::string& condition) const;
  std::string trials_tsv() const;
  std::string aggregates_tsv() const;
  nlohmann::json to_json() const;
};

std::string condition_name(std::optional<double> percentile);

// Every trial is rendered once and evaluated under all conditions, so the
// conditions are compared on identical scenes.
BenchmarkResult run_benchmark(const nn::Model& model, const SpeechCorpus& corpus,
                              const BenchmarkConfig& cfg);

double median(std::vector<double> values);

}  // namespace sidoa
