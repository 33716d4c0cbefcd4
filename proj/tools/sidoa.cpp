// tools/sidoa.cpp

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

// Command-line front end: simulate, generate data sets, train, evaluate and
// sweep mask thresholds. Every command writes config.resolved.json next to
// its outputs.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "sidoa/error.hpp"
#include "sidoa/features.hpp"
#include "sidoa/nn.hpp"
#include "sidoa/pipeline.hpp"
#include "sidoa/room.hpp"
#include "sidoa/speech_synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sidoa;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<int> jobs;
  bool desk_scale = false;
};

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

// JSON type errors inside a config are configuration errors too.
template <typename T>
T config_from(const json& j) {
  T value;
  try {
    from_json(j, value);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return value;
}

void prepare_out(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
  const auto probe = dir / ".write_probe";
  {
    std::ofstream os(probe);
    if (!os) throw IoError("output directory is not writable: " + dir.string());
  }
  fs::remove(probe);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
  if (!os) throw IoError("write failed: " + path.string());
}

void write_snapshot(const fs::path& dir, const std::string& command, const json& resolved) {
  write_text(dir / "config.resolved.json", json{{"command", command}, {"config", resolved}}.dump(2) + "\n");
}

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

SpeechCorpus load_corpus_if_any(const std::string& dir) {
  if (dir.empty()) return {};
  return SpeechCorpus::load(dir);
}

TrainConfig resolve_train(const CommonOptions& o) {
  TrainConfig cfg = config_from<TrainConfig>(read_config(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.desk_scale) {
    const json j = read_config(o.config);
    cfg.desk_scale = true;
    if (!j.contains("samples_per_epoch")) cfg.samples_per_epoch = kDeskSamplesPerEpoch;
    if (!j.contains("lr")) cfg.lr = kDeskLearningRate;
    if (!j.contains("model") || !j.at("model").contains("dropout_rate")) cfg.model.dropout_rate = kDeskDropoutRate;
  }
  cfg.validate();
  return cfg;
}

BenchmarkConfig resolve_bench(const CommonOptions& o) {
  const json j = read_config(o.config);
  BenchmarkConfig cfg = config_from<BenchmarkConfig>(j);
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.desk_scale && !j.contains("trials_per_count")) cfg.trials_per_count = kDeskTrialsPerCondition;
  cfg.validate();
  return cfg;
}

// ---- commands ----------------------------------------------------------------

void cmd_gen_data(const CommonOptions& o, std::optional<std::size_t> count) {
  TrainConfig cfg = resolve_train(o);
  if (count) {
    cfg.samples_per_epoch = *count;
    cfg.desk_scale = false;
  }
  cfg.validate();
  const fs::path out = o.out;
  prepare_out(out);
  json snap = cfg;
  write_snapshot(out, "gen-data", snap);
  const SpeechCorpus corpus = load_corpus_if_any(cfg.corpus_dir);

  const FeatureDataset ds = build_dataset(cfg, corpus.empty() ? nullptr : &corpus, 0);
  std::vector<GccFeatureMap> maps(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    maps[i].frame_index = i;
    for (std::size_t k = 0; k < kFeatureSize; ++k) maps[i].values[k] = ds.features[i * kFeatureSize + k];
  }
  write_feature_records(out / "features.gccf", maps);
  std::string labels;
  for (int l : ds.labels) labels += std::to_string(l) + "\n";
  write_text(out / "labels.txt", labels);

  const std::uint64_t digest = fnv1a(labels, fnv1a(read_bytes(out / "features.gccf")));
  json manifest{{"seed", cfg.seed},
                {"count", ds.size()},
                {"features_file", "features.gccf"},
                {"labels_file", "labels.txt"},
                {"digest_fnv1a64", hex64(digest)},
                {"scenario_ranges", cfg.scenario},
                {"white_noise_fraction", cfg.white_noise_fraction},
                {"source_seconds", cfg.source_seconds}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << ds.size() << " samples, digest " << hex64(digest) << "\n";
}

FeatureDataset load_cached(const fs::path& dir) {
  const auto maps = read_feature_records(dir / "features.gccf");
  std::ifstream is(dir / "labels.txt");
  if (!is) throw IoError("missing labels.txt in " + dir.string());
  FeatureDataset ds;
  int label;
  while (is >> label) {
    if (label < 0 || label >= kNumClasses) throw IoError("label out of range in labels.txt");
    ds.labels.push_back(label);
  }
  if (ds.labels.size() != maps.size()) throw IoError("labels.txt and features.gccf disagree in count");
  ds.features.reserve(maps.size() * kFeatureSize);
  for (const auto& m : maps)
    for (double v : m.values) ds.features.push_back(static_cast<float>(v));
  return ds;
}

void cmd_train(const CommonOptions& o, bool resume, const std::string& data_dir) {
  const TrainConfig cfg = resolve_train(o);
  const fs::path out = o.out;
  prepare_out(out);
  json snap = cfg;
  snap["data_dir"] = data_dir;
  write_snapshot(out, "train", snap);

  FeatureDataset cached;
  if (!data_dir.empty()) cached = load_cached(data_dir);
  const SpeechCorpus corpus = data_dir.empty() ? load_corpus_if_any(cfg.corpus_dir) : SpeechCorpus{};

  TrainHooks hooks;
  hooks.checkpoint_dir = out / "checkpoints";
  hooks.log_path = out / "train_log.jsonl";
  hooks.resume = resume;
  hooks.on_epoch = [](const EpochStats& s) {
    std::cout << "epoch " << s.epoch << " mean loss " << s.mean_loss << " (" << s.seconds << " s)\n" << std::flush;
  };
  const auto res = train(cfg, corpus.empty() ? nullptr : &corpus, hooks, data_dir.empty() ? nullptr : &cached);
  nn::save_model(res.model, out / "model.bin");
  json summary{{"steps", res.steps}, {"param_count", nn::param_count(res.model)}};
  json epochs = json::array();
  for (const auto& e : res.epochs) epochs.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}});
  summary["epochs"] = epochs;
  write_text(out / "train_summary.json", summary.dump(2) + "\n");
}

void write_benchmark(const fs::path& out, const BenchmarkResult& res) {
  write_text(out / "trials.tsv", res.trials_tsv());
  write_text(out / "aggregates.tsv", res.aggregates_tsv());
  write_text(out / "metrics.json", res.to_json().dump(2) + "\n");
  std::string hist = "J\tcondition\tbin_lo_deg\tbin_hi_deg\tcount\n";
  for (const auto& a : res.aggregates)
    for (std::size_t b = 0; b < a.histogram.size(); ++b)
      hist += std::to_string(a.J) + '\t' + a.condition + '\t' + std::to_string(5 * b) + '\t' +
              std::to_string(5 * (b + 1)) + '\t' + std::to_string(a.histogram[b]) + '\n';
  write_text(out / "histogram.tsv", hist);
}

nn::Model load_model_checked(const std::string& path) {
  if (path.empty()) throw ConfigError("--model is required");
  if (!fs::exists(path)) throw IoError("model file not found: " + path);
  return nn::load_model(path);
}

void cmd_eval(const CommonOptions& o, const std::string& model_path, const std::string& corpus_dir) {
  const BenchmarkConfig cfg = resolve_bench(o);
  if (corpus_dir.empty()) throw ConfigError("--corpus is required for evaluation");
  const fs::path out = o.out;
  prepare_out(out);
  json snap = cfg;
  snap["model"] = model_path;
  snap["corpus"] = corpus_dir;
  write_snapshot(out, "eval", snap);
  const auto model = load_model_checked(model_path);
  const auto corpus = SpeechCorpus::load(corpus_dir);
  const auto res = run_benchmark(model, corpus, cfg);
  write_benchmark(out, res);
  std::cout << res.aggregates_tsv();
}

void cmd_sweep(const CommonOptions& o, const std::string& model_path, const std::string& corpus_dir) {
  BenchmarkConfig cfg = resolve_bench(o);
  if (!read_config(o.config).contains("percentiles")) cfg.percentiles = {0, 33, 50, 66, 90};
  cfg.validate();
  if (corpus_dir.empty()) throw ConfigError("--corpus is required for the sweep");
  const fs::path out = o.out;
  prepare_out(out);
  json snap = cfg;
  snap["model"] = model_path;
  snap["corpus"] = corpus_dir;
  write_snapshot(out, "sweep", snap);
  const auto model = load_model_checked(model_path);
  const auto corpus = SpeechCorpus::load(corpus_dir);
  const auto res = run_benchmark(model, corpus, cfg);
  write_benchmark(out, res);

  // Median error matrix: one row per J, one column per condition.
  std::string table = "J\tunmasked";
  for (double x : cfg.percentiles) table += '\t' + condition_name(x);
  table += '\n';
  json cells = json::array();
  for (int J : cfg.interferer_counts) {
    table += std::to_string(J) + '\t' + std::to_string(res.aggregate(J, "unmasked").median_error);
    for (double x : cfg.percentiles) {
      const auto& a = res.aggregate(J, condition_name(x));
      table += '\t' + std::to_string(a.median_error);
      cells.push_back({{"J", J}, {"percentile", x}, {"median_error_deg", a.median_error}});
    }
    table += '\n';
  }
  write_text(out / "sweep.tsv", table);
  write_text(out / "sweep.json", json{{"cells", cells}}.dump(2) + "\n");
  std::cout << table;
}

void cmd_rir_check(const CommonOptions& o) {
  const json j = read_config(o.config);
  const std::uint64_t seed = o.seed.value_or(j.value("seed", std::uint64_t{1}));
  Rng rng = derive_rng(seed);
  auto vec = [&](const char* key, Vec3 fallback) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw ConfigError(std::string(key) + " must be a 3-element array");
    return Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  };
  const Vec3 dims = vec("room", {uniform(rng, 8, 10), uniform(rng, 4, 6), uniform(rng, 2.5, 3.5)});
  const double t60 = j.value("t60", uniform(rng, 0.13, 1.0));
  if (!(t60 > 0)) throw ConfigError("t60 must be > 0");
  const Vec3 src = vec("source", {dims.x * 0.3, dims.y * 0.4, 1.5});
  const Vec3 mic = vec("mic", {dims.x * 0.6, dims.y * 0.55, 1.4});
  const fs::path out = o.out;
  prepare_out(out);
  json snap{{"room", {dims.x, dims.y, dims.z}},
            {"t60", t60},
            {"source", {src.x, src.y, src.z}},
            {"mic", {mic.x, mic.y, mic.z}},
            {"seed", seed}};
  write_snapshot(out, "rir-check", snap);

  const Room room = make_room(dims, t60);
  const auto rir = simulate_rir(room, src, mic);
  const double estimate = schroeder_t60(rir.taps);
  const double delay = (src - mic).norm() / kSpeedOfSound * kSampleRate;
  std::string taps;
  for (double v : rir.taps) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g\n", v);
    taps += buf;
  }
  write_text(out / "rir.txt", taps);
  json report{{"t60_target", t60},
              {"t60_schroeder", estimate},
              {"absorption", room.absorption},
              {"direct_delay_samples", delay},
              {"taps", rir.taps.size()}};
  write_text(out / "rir.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
}

void cmd_make_corpus(const CommonOptions& o, std::size_t speakers, double seconds) {
  if (speakers < 1) throw ConfigError("--speakers must be >= 1");
  if (!(seconds > 0)) throw ConfigError("--seconds must be > 0");
  const fs::path out = o.out;
  prepare_out(out);
  const std::uint64_t seed = o.seed.value_or(1);
  write_snapshot(out, "make-corpus", json{{"speakers", speakers}, {"seconds", seconds}, {"seed", seed}});
  write_synthetic_corpus(out, speakers, seconds, seed);
  std::cout << "wrote " << speakers << " recordings to " << out.string() << "\n";
}

void add_common(CLI::App* sub, CommonOptions& o, bool with_desk = true) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--seed", o.seed, "global seed (overrides the config)");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  if (with_desk) sub->add_flag("--desk-scale", o.desk_scale, "desk-scale sizes");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sidoa: signal-informed DOA estimation toolkit"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* gen = app.add_subcommand("gen-data", "generate a cached training data set");
  add_common(gen, common);
  std::optional<std::size_t> count;
  gen->add_option("--count", count, "number of samples");

  auto* tr = app.add_subcommand("train", "train a model");
  add_common(tr, common);
  bool resume = false;
  std::string data_dir;
  tr->add_flag("--resume", resume, "continue from the last checkpoint in --out");
  tr->add_option("--data", data_dir, "train on a gen-data cache instead of generating");

  std::string model_path, corpus_dir;
  auto* ev = app.add_subcommand("eval", "evaluate a model on simulated trials");
  add_common(ev, common);
  ev->add_option("--model", model_path, "model file")->required();
  ev->add_option("--corpus", corpus_dir, "speech corpus directory")->required();

  auto* sw = app.add_subcommand("sweep", "mask threshold sweep");
  add_common(sw, common);
  sw->add_option("--model", model_path, "model file")->required();
  sw->add_option("--corpus", corpus_dir, "speech corpus directory")->required();

  auto* rc = app.add_subcommand("rir-check", "dump one RIR and its T60 estimate");
  add_common(rc, common, false);

  std::size_t speakers = 40;
  double seconds = 12.0;
  auto* mc = app.add_subcommand("make-corpus", "write a synthetic speech corpus");
  add_common(mc, common, false);
  mc->add_option("--speakers", speakers, "number of recordings");
  mc->add_option("--seconds", seconds, "length of each recording");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc_parse = app.exit(e);
    return rc_parse == 0 ? 0 : kExitConfig;
  }

  try {
    if (gen->parsed()) cmd_gen_data(common, count);
    else if (tr->parsed()) cmd_train(common, resume, data_dir);
    else if (ev->parsed()) cmd_eval(common, model_path, corpus_dir);
    else if (sw->parsed()) cmd_sweep(common, model_path, corpus_dir);
    else if (rc->parsed()) cmd_rir_check(common);
    else if (mc->parsed()) cmd_make_corpus(common, speakers, seconds);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
