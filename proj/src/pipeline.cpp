// src/pipeline.cpp

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

#include "sidoa/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "sidoa/error.hpp"
#include "sidoa/parallel.hpp"

namespace sidoa {

namespace {

// Stream keys for derive_rng; never reorder.
enum StreamKey : std::uint64_t {
  kInitStream = 1,
  kDataStream = 2,
  kShuffleStream = 3,
  kDropoutStream = 4,
};

constexpr double kActivityFloorDb = -60.0;
constexpr double kSpeechGateDb = 4.0;
constexpr int kMaxSampleRedraws = 100;

double wrap180(double deg) {
  double d = std::fmod(deg, 360.0);
  if (d > 180.0) d -= 360.0;
  if (d <= -180.0) d += 360.0;
  return d;
}

std::vector<double> white_source(std::size_t n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = gauss(rng);
  return x;
}

std::vector<SpectralFrame> array_spectra(std::span<const TimeSignal> channels, std::size_t frame) {
  std::vector<SpectralFrame> specs;
  specs.reserve(kNumArrayMics);
  for (int c = 0; c < kNumArrayMics; ++c)
    specs.push_back(forward_spectrum(frame_view(channels[static_cast<std::size_t>(c)], frame), frame));
  return specs;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os << text;
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

// ---- configuration -------------------------------------------------------

TrainConfig TrainConfig::desk() {
  TrainConfig cfg;
  cfg.samples_per_epoch = kDeskSamplesPerEpoch;
  cfg.epochs = kDeskEpochs;
  cfg.desk_scale = true;
  cfg.lr = kDeskLearningRate;
  cfg.model.dropout_rate = kDeskDropoutRate;
  return cfg;
}

std::size_t TrainConfig::effective_samples_per_epoch() const {
  return desk_scale ? std::min(samples_per_epoch, kDeskSamplesPerEpoch) : samples_per_epoch;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("train config: " + what); };
  if (samples_per_epoch < 1) fail("samples_per_epoch must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(lr >= 0) || !std::isfinite(lr)) fail("lr must be a finite value >= 0");
  if (!(white_noise_fraction >= 0 && white_noise_fraction <= 1)) fail("white_noise_fraction must be in [0, 1]");
  if (!(source_seconds >= 0.1)) fail("source_seconds must be >= 0.1");
  if (jobs < 1) fail("jobs must be >= 1");
  scenario.validate();
  model.validate();
  if (model.height != kNumArrayMics || model.width != kNumArrayMics || model.in_channels != kNumLags)
    fail("model input must be 15 x 15 x 24");
  if (model.classes != kNumClasses) fail("model must have 72 classes");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"samples_per_epoch", c.samples_per_epoch},
                     {"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"lr", c.lr},
                     {"seed", c.seed},
                     {"corpus_dir", c.corpus_dir},
                     {"white_noise_fraction", c.white_noise_fraction},
                     {"desk_scale", c.desk_scale},
                     {"regenerate_each_epoch", c.regenerate_each_epoch},
                     {"source_seconds", c.source_seconds},
                     {"jobs", c.jobs},
                     {"scenario", c.scenario},
                     {"model",
                      {{"conv_channels", c.model.conv_channels},
                       {"fc_widths", c.model.fc_widths},
                       {"pools", c.model.pools},
                       {"kernel", c.model.kernel},
                       {"leaky_slope", c.model.leaky_slope},
                       {"dropout_rate", c.model.dropout_rate}}}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("samples_per_epoch", c.samples_per_epoch);
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("lr", c.lr);
  get("seed", c.seed);
  get("corpus_dir", c.corpus_dir);
  get("white_noise_fraction", c.white_noise_fraction);
  get("desk_scale", c.desk_scale);
  get("regenerate_each_epoch", c.regenerate_each_epoch);
  get("source_seconds", c.source_seconds);
  get("jobs", c.jobs);
  if (j.contains("scenario")) from_json(j.at("scenario"), c.scenario);
  if (j.contains("model")) {
    const auto& m = j.at("model");
    if (m.contains("conv_channels")) m.at("conv_channels").get_to(c.model.conv_channels);
    if (m.contains("fc_widths")) m.at("fc_widths").get_to(c.model.fc_widths);
    if (m.contains("pools")) m.at("pools").get_to(c.model.pools);
    if (m.contains("kernel")) m.at("kernel").get_to(c.model.kernel);
    if (m.contains("leaky_slope")) m.at("leaky_slope").get_to(c.model.leaky_slope);
    if (m.contains("dropout_rate")) m.at("dropout_rate").get_to(c.model.dropout_rate);
  }
}

void BenchmarkConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("benchmark config: " + what); };
  if (interferer_counts.empty()) fail("interferer_counts is empty");
  for (int J : interferer_counts)
    if (J < 0 || J > 8) fail("interferer count out of [0, 8]");
  if (trials_per_count < 1) fail("trials_per_count must be >= 1");
  for (double x : percentiles)
    if (!(x >= 0 && x <= 100)) fail("percentiles must be in [0, 100]");
  if (jobs < 1) fail("jobs must be >= 1");
  scenario.validate();
}

void to_json(nlohmann::json& j, const BenchmarkConfig& c) {
  j = nlohmann::json{{"interferer_counts", c.interferer_counts},
                     {"trials_per_count", c.trials_per_count},
                     {"percentiles", c.percentiles},
                     {"seed", c.seed},
                     {"jobs", c.jobs},
                     {"scenario", c.scenario}};
}

void from_json(const nlohmann::json& j, BenchmarkConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("interferer_counts", c.interferer_counts);
  get("trials_per_count", c.trials_per_count);
  get("percentiles", c.percentiles);
  get("seed", c.seed);
  get("jobs", c.jobs);
  if (j.contains("scenario")) from_json(j.at("scenario"), c.scenario);
}

// ---- training data ---------------------------------------------------------

TrainingSample gen_training_sample(const TrainConfig& cfg, const SpeechCorpus* corpus, Rng& rng,
                                   const SampleOptions& opts) {
  const auto length = static_cast<std::size_t>(std::llround(cfg.source_seconds * kSampleRate));
  for (int attempt = 0; attempt < kMaxSampleRedraws; ++attempt) {
    Scenario scn = sample_scenario_layout(cfg.scenario, 0, rng);
    if (opts.anechoic) scn.room.absorption = 1.0;
    if (opts.noiseless) scn.snr_db = std::numeric_limits<double>::infinity();
    attach_rirs(scn);

    const bool speech = opts.speech_source ? *opts.speech_source : !coin(rng, cfg.white_noise_fraction);
    TimeSignal src;
    if (speech) {
      if (corpus == nullptr || corpus->empty())
        throw ConfigError("speech source drawn but no speech corpus is loaded");
      const auto idx = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(corpus->size()) - 1));
      src.samples = corpus->segment(idx, length, rng);
    } else {
      src.samples = white_source(length, rng);
    }
    const RenderedScene scene = render(scn, src, {}, rng, corpus);

    // Frame 0 is skipped: the direct sound has not reached every mic yet.
    std::vector<std::size_t> active;
    const std::size_t frames = num_frames(scene.desired_image[0]);
    for (std::size_t f = 1; f < frames; ++f)
      if (frame_energy_db(frame_view(scene.desired_image[0], f)) > kActivityFloorDb) active.push_back(f);
    if (active.empty()) continue;
    const std::size_t frame =
        active[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(active.size()) - 1))];

    TrainingSample out;
    const auto specs = array_spectra(scene.channels, frame);
    out.features = feature_map(specs, nullptr, rng);
    out.label = scn.desired_class;
    out.speech_source = speech;
    out.noise = scn.noise_kind;
    out.snr_db = scn.snr_db;
    scn.rirs.clear();
    out.scenario = std::move(scn);
    return out;
  }
  throw Error("no active source frame after " + std::to_string(kMaxSampleRedraws) + " draws");
}

TrainingSample gen_indexed_sample(const TrainConfig& cfg, const SpeechCorpus* corpus,
                                  std::uint64_t epoch, std::uint64_t index) {
  Rng rng = derive_rng(cfg.seed, {kDataStream, epoch, index});
  return gen_training_sample(cfg, corpus, rng);
}

// ---- training loop -------------------------------------------------------

namespace {

// Speech sources and babble noise both draw from the corpus; fail before
// any sample is rendered rather than on the first such draw.
void require_corpus(const TrainConfig& cfg, const SpeechCorpus* corpus) {
  if (corpus != nullptr && !corpus->empty()) return;
  if (cfg.white_noise_fraction < 1.0)
    throw ConfigError("speech sources requested but no speech corpus is loaded");
  const auto& fixed = cfg.scenario.fixed_noise;
  if (!fixed || fixed->spectrum == NoiseSpectrum::kBabble)
    throw ConfigError("babble noise possible but no speech corpus is loaded; fix scenario.fixed_noise to white");
}

}  // namespace

FeatureDataset build_dataset(const TrainConfig& cfg, const SpeechCorpus* corpus, std::uint64_t epoch) {
  cfg.validate();
  require_corpus(cfg, corpus);
  const std::size_t n = cfg.effective_samples_per_epoch();
  FeatureDataset ds;
  ds.features.resize(n * kFeatureSize);
  ds.labels.resize(n);
  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    const auto s = gen_indexed_sample(cfg, corpus, epoch, i);
    std::copy(s.features.values.begin(), s.features.values.end(),
              ds.features.begin() + static_cast<std::ptrdiff_t>(i * kFeatureSize));
    ds.labels[i] = s.label;
  });
  return ds;
}

namespace {

struct ResumeState {
  int next_epoch = 0;
  std::uint64_t steps = 0;
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const SpeechCorpus* corpus, const TrainHooks& hooks,
                  const FeatureDataset* cached) {
  cfg.validate();
  if (cached && (cached->size() == 0 || cached->features.size() != cached->size() * kFeatureSize))
    throw ConfigError("cached data set is empty or malformed");
  if (!cached) require_corpus(cfg, corpus);
  using Clock = std::chrono::steady_clock;
  const auto t_start = Clock::now();

  TrainResult result;
  result.model = nn::model_init(cfg.model, derive_rng(cfg.seed, {kInitStream})());
  nn::AdamState adam = nn::AdamState::for_model(result.model, cfg.lr);
  ResumeState state;

  const bool checkpoints = !hooks.checkpoint_dir.empty();
  if (checkpoints) std::filesystem::create_directories(hooks.checkpoint_dir);
  const auto ckpt_path = hooks.checkpoint_dir / "last.ckpt";
  const auto state_path = hooks.checkpoint_dir / "last.json";

  if (hooks.resume) {
    if (!checkpoints) throw ConfigError("resume requested without a checkpoint directory");
    if (std::filesystem::exists(ckpt_path)) {
      auto ck = nn::load_checkpoint(ckpt_path);
      if (!ck.has_optimizer) throw IoError("checkpoint has no optimizer state: " + ckpt_path.string());
      std::ifstream is(state_path);
      if (!is) throw IoError("missing checkpoint state file " + state_path.string());
      const auto j = nlohmann::json::parse(is);
      state.next_epoch = j.at("next_epoch").get<int>();
      state.steps = j.at("steps").get<std::uint64_t>();
      if (state.steps != ck.adam.step)
        throw IoError("checkpoint step " + std::to_string(ck.adam.step) + " does not match state file");
      result.model = std::move(ck.model);
      ck.adam.lr = cfg.lr;
      adam = std::move(ck.adam);
      result.steps = state.steps;
    }
  }

  std::ofstream log;
  if (!hooks.log_path.empty()) {
    log.open(hooks.log_path, hooks.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot open training log " + hooks.log_path.string());
  }

  const std::size_t n = cached ? cached->size() : cfg.effective_samples_per_epoch();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  FeatureDataset generated;
  bool have_data = false;
  std::vector<double> inputs;
  std::vector<int> labels;

  for (int epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
    const auto t_epoch = Clock::now();
    if (!cached && (cfg.regenerate_each_epoch || !have_data)) {
      generated = build_dataset(cfg, corpus, cfg.regenerate_each_epoch ? static_cast<std::uint64_t>(epoch) : 0);
      have_data = true;
    }
    const FeatureDataset& data = cached ? *cached : generated;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = derive_rng(cfg.seed, {kShuffleStream, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      inputs.resize(b * kFeatureSize);
      labels.resize(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(data.features.begin() + static_cast<std::ptrdiff_t>(src * kFeatureSize), kFeatureSize,
                    inputs.begin() + static_cast<std::ptrdiff_t>(i * kFeatureSize));
        labels[i] = data.labels[src];
      }
      Rng dropout = derive_rng(cfg.seed, {kDropoutStream, result.steps});
      const double loss = nn::train_step(result.model, adam, inputs, labels, dropout);
      ++result.steps;
      loss_sum += loss * static_cast<double>(b);
      loss_count += b;
      if (log.is_open()) {
        const double wall = std::chrono::duration<double>(Clock::now() - t_start).count();
        log << nlohmann::json{{"step", result.steps}, {"epoch", epoch}, {"loss", loss}, {"wall_time", wall}}.dump()
            << '\n';
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, loss_count));
    stats.seconds = std::chrono::duration<double>(Clock::now() - t_epoch).count();
    result.epochs.push_back(stats);
    if (log.is_open()) {
      log << nlohmann::json{{"epoch_end", epoch}, {"mean_loss", stats.mean_loss}, {"seconds", stats.seconds}}.dump()
          << '\n';
      log.flush();
    }
    if (checkpoints) {
      nn::save_model(result.model, ckpt_path, &adam);
      write_text_atomic(state_path,
                        nlohmann::json{{"next_epoch", epoch + 1}, {"steps", result.steps}}.dump() + "\n");
    }
    if (hooks.on_epoch) hooks.on_epoch(stats);
  }
  return result;
}

// ---- evaluation ------------------------------------------------------------

Trial gen_eval_trial(int J, Rng& rng, const SpeechCorpus& corpus, const ScenarioConfig& cfg) {
  if (J < 0) throw ConfigError("interferer count must be >= 0");
  if (corpus.size() < static_cast<std::size_t>(J) + 1)
    throw ConfigError("corpus too small: " + std::to_string(J + 1) + " distinct recordings needed, " +
                      std::to_string(corpus.size()) + " available");
  Trial trial;
  trial.scenario = sample_scenario(cfg, J, rng);
  trial.ground_truth_class = trial.scenario.desired_class;

  std::vector<std::size_t> pool(corpus.size());
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i <= J; ++i) {
    const auto k = static_cast<std::size_t>(uniform_int(rng, i, static_cast<int>(pool.size()) - 1));
    std::swap(pool[static_cast<std::size_t>(i)], pool[k]);
    trial.recordings.push_back(pool[static_cast<std::size_t>(i)]);
  }

  const auto length = static_cast<std::size_t>(std::llround(kTrialSeconds * kSampleRate));
  TimeSignal desired{corpus.segment(trial.recordings[0], length, rng), kSampleRate};
  std::vector<TimeSignal> interferers;
  for (int j = 1; j <= J; ++j)
    interferers.push_back(
        TimeSignal{corpus.segment(trial.recordings[static_cast<std::size_t>(j)], length, rng), kSampleRate});
  auto scene = render(trial.scenario, desired, interferers, rng, &corpus);
  trial.channels = std::move(scene.channels);
  return trial;
}

std::vector<std::size_t> detect_speech_frames(const TimeSignal& ext) {
  const std::size_t frames = num_frames(ext);
  std::vector<std::size_t> keep;
  if (frames == 0) return keep;
  double total = 0.0;
  for (std::size_t f = 0; f < frames; ++f) total += mean_power(frame_view(ext, f));
  const double global_db = 10.0 * std::log10(total / static_cast<double>(frames) + kEnergyFloor);
  for (std::size_t f = 0; f < frames; ++f)
    if (frame_energy_db(frame_view(ext, f)) >= global_db - kSpeechGateDb) keep.push_back(f);
  return keep;
}

double angular_error(double est_deg, double truth_deg) { return std::abs(wrap180(est_deg - truth_deg)); }

double circular_median_deg(std::span<const double> angles) {
  if (angles.empty()) throw Error("circular median of an empty set");
  double sx = 0, sy = 0;
  for (double a : angles) {
    sx += std::cos(a * std::numbers::pi / 180.0);
    sy += std::sin(a * std::numbers::pi / 180.0);
  }
  const bool has_mean = std::hypot(sx, sy) > 1e-9 * static_cast<double>(angles.size());
  const double mean = has_mean ? std::atan2(sy, sx) * 180.0 / std::numbers::pi : 0.0;

  double best = 0.0, best_cost = std::numeric_limits<double>::infinity();
  double best_to_mean = std::numeric_limits<double>::infinity();
  for (double cand : angles) {
    double cost = 0.0;
    for (double a : angles) cost += angular_error(cand, a);
    const double to_mean = has_mean ? angular_error(cand, mean) : 0.0;
    const double tol = 1e-9 * static_cast<double>(angles.size());
    bool better = cost < best_cost - tol;
    if (!better && std::abs(cost - best_cost) <= tol) {
      if (to_mean < best_to_mean - 1e-9) better = true;
      else if (std::abs(to_mean - best_to_mean) <= 1e-9 && cand < best) better = true;
    }
    if (better) {
      best = cand;
      best_cost = cost;
      best_to_mean = to_mean;
    }
  }
  return best;
}

TrialResult evaluate_trial(const nn::Model& model, const Trial& trial,
                           std::optional<double> mask_percentile, std::uint64_t seed) {
  if (trial.channels.size() != static_cast<std::size_t>(kNumChannels))
    throw ConfigError("trial must have 16 channels");
  TrialResult res;
  const auto al = align_external(trial.channels[kExternalChannel], trial.channels[kCenterMic]);
  res.alignment_lag = al.lag;
  const auto gated = detect_speech_frames(al.aligned);

  std::vector<double> inputs;
  for (std::size_t f : gated) {
    double energy = 0.0;
    for (int c = 0; c < kNumArrayMics; ++c) energy += mean_power(frame_view(trial.channels[static_cast<std::size_t>(c)], f));
    if (energy <= 0.0) continue;
    const auto specs = array_spectra(trial.channels, f);
    Rng rng = derive_rng(seed, {f});
    GccFeatureMap map;
    if (mask_percentile) {
      const BinaryMask mask = compute_mask(forward_spectrum(frame_view(al.aligned, f), f), *mask_percentile);
      map = feature_map(specs, &mask, rng);
    } else {
      map = feature_map(specs, nullptr, rng);
    }
    inputs.insert(inputs.end(), map.values.begin(), map.values.end());
    res.speech_frames.push_back(f);
  }
  if (res.speech_frames.empty()) return res;

  res.frame_predictions = nn::predict_batch(model, inputs, res.speech_frames.size());
  std::vector<double> angles;
  angles.reserve(res.frame_predictions.size());
  for (int p : res.frame_predictions) angles.push_back(class_to_azimuth(p));
  res.estimate_deg = circular_median_deg(angles);
  res.error_deg = angular_error(res.estimate_deg, class_to_azimuth(trial.ground_truth_class));
  res.valid = true;
  return res;
}

// ---- benchmark ---------------------------------------------------------------

std::string condition_name(std::optional<double> percentile) {
  if (!percentile) return "unmasked";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "P%g", *percentile);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

const AggregateRow& BenchmarkResult::aggregate(int J, const std::string& condition) const {
  for (const auto& a : aggregates)
    if (a.J == J && a.condition == condition) return a;
  throw Error("no aggregate for J=" + std::to_string(J) + " condition " + condition);
}

std::string BenchmarkResult::trials_tsv() const {
  std::string s = "J\tcondition\tseed\ttruth_deg\testimate_deg\terror_deg\tspeech_frames\tvalid\n";
  for (const auto& r : trials) {
    s += std::to_string(r.J) + '\t' + r.condition + '\t' + std::to_string(r.seed) + '\t' + fmt(r.truth_deg) +
         '\t' + (r.valid ? fmt(r.estimate_deg) : "nan") + '\t' + (r.valid ? fmt(r.error_deg) : "nan") + '\t' +
         std::to_string(r.speech_frames) + '\t' + (r.valid ? "1" : "0") + '\n';
  }
  return s;
}

std::string BenchmarkResult::aggregates_tsv() const {
  std::string s = "J\tcondition\ttrials\tinvalid\tmedian_error_deg\tmean_error_deg\n";
  for (const auto& a : aggregates)
    s += std::to_string(a.J) + '\t' + a.condition + '\t' + std::to_string(a.trials) + '\t' +
         std::to_string(a.invalid) + '\t' + fmt(a.median_error) + '\t' + fmt(a.mean_error) + '\n';
  return s;
}

nlohmann::json BenchmarkResult::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : trials) {
    rows.push_back({{"J", r.J},
                    {"condition", r.condition},
                    {"seed", r.seed},
                    {"truth_deg", r.truth_deg},
                    {"estimate_deg", r.valid ? nlohmann::json(r.estimate_deg) : nlohmann::json(nullptr)},
                    {"error_deg", r.valid ? nlohmann::json(r.error_deg) : nlohmann::json(nullptr)},
                    {"speech_frames", r.speech_frames},
                    {"valid", r.valid}});
  }
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : aggregates) {
    aggs.push_back({{"J", a.J},
                    {"condition", a.condition},
                    {"trials", a.trials},
                    {"invalid", a.invalid},
                    {"median_error_deg", a.median_error},
                    {"mean_error_deg", a.mean_error},
                    {"histogram_5deg", a.histogram}});
  }
  return {{"trials", rows}, {"aggregates", aggs}};
}

BenchmarkResult run_benchmark(const nn::Model& model, const SpeechCorpus& corpus, const BenchmarkConfig& cfg) {
  cfg.validate();
  std::vector<std::optional<double>> conditions{std::nullopt};
  for (double x : cfg.percentiles) conditions.emplace_back(x);

  struct Job {
    int J;
    int t;
  };
  std::vector<Job> jobs;
  for (int J : cfg.interferer_counts)
    for (int t = 0; t < cfg.trials_per_count; ++t) jobs.push_back({J, t});

  std::vector<std::vector<TrialRow>> rows(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const auto [J, t] = jobs[i];
    const std::uint64_t trial_seed = cfg.seed + static_cast<std::uint64_t>(t);
    Rng rng = derive_rng(trial_seed, {static_cast<std::uint64_t>(J)});
    const Trial trial = gen_eval_trial(J, rng, corpus, cfg.scenario);
    for (const auto& cond : conditions) {
      const auto res = evaluate_trial(model, trial, cond, trial_seed);
      TrialRow row;
      row.J = J;
      row.condition = condition_name(cond);
      row.seed = trial_seed;
      row.truth_deg = class_to_azimuth(trial.ground_truth_class);
      row.estimate_deg = res.estimate_deg;
      row.error_deg = res.error_deg;
      row.speech_frames = res.speech_frames.size();
      row.valid = res.valid;
      rows[i].push_back(row);
    }
  });

  BenchmarkResult out;
  for (auto& r : rows) out.trials.insert(out.trials.end(), r.begin(), r.end());
  for (int J : cfg.interferer_counts) {
    for (const auto& cond : conditions) {
      AggregateRow agg;
      agg.J = J;
      agg.condition = condition_name(cond);
      agg.histogram.assign(36, 0);
      std::vector<double> errs;
      for (const auto& r : out.trials) {
        if (r.J != J || r.condition != agg.condition) continue;
        ++agg.trials;
        if (!r.valid) {
          ++agg.invalid;
          continue;
        }
        errs.push_back(r.error_deg);
        ++agg.histogram[std::min<std::size_t>(35, static_cast<std::size_t>(r.error_deg / 5.0))];
      }
      agg.median_error = median(errs);
      agg.mean_error = errs.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
      out.aggregates.push_back(std::move(agg));
    }
  }
  return out;
}

}  // namespace sidoa
