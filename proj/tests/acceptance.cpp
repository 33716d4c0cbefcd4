// tests/acceptance.cpp

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

// End-to-end acceptance run. Prints one PASS or FAIL line per criterion
// and exits non-zero when any of them fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "sidoa/error.hpp"
#include "sidoa/features.hpp"
#include "sidoa/nn.hpp"
#include "sidoa/pipeline.hpp"
#include "sidoa/room.hpp"
#include "sidoa/speech_synth.hpp"

#ifndef SIDOA_CLI_PATH
#define SIDOA_CLI_PATH "sidoa"
#endif

namespace fs = std::filesystem;
using namespace sidoa;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::vector<double> white(std::size_t n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

// ---- 1 ---------------------------------------------------------------------

Outcome gcc_oracle() {
  const auto t0 = Clock::now();
  const auto w = hann_window();
  const int n = static_cast<int>(kFrameLength);
  Rng rng(20260101);
  int match = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // The lag window is -12 .. +11, so +12 is not representable.
    const int d = uniform_int(rng, -kMaxLag, kMaxLag - 1);
    const auto x = white(kFrameLength, rng);
    std::vector<double> y(kFrameLength);
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(((i + d) % n + n) % n)] = x[static_cast<std::size_t>(i)];
    const auto g = gcc_phat(forward_spectrum(x), forward_spectrum(y));
    const int got = index_to_lag(static_cast<int>(std::max_element(g.begin(), g.end()) - g.begin()));

    // Circular cross-correlation of the windowed frames over every lag.
    int best = 0;
    double best_v = -1e300;
    for (int tau = -n / 2; tau < n / 2; ++tau) {
      double r = 0;
      for (int i = 0; i < n; ++i) {
        const int j = ((i + tau) % n + n) % n;
        r += x[static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)];
      }
      if (r > best_v) {
        best_v = r;
        best = tau;
      }
    }
    if (got == best) ++match;
  }
  const double secs = seconds_since(t0);
  return {match == 100 && secs < 10.0, std::to_string(match) + "/100 match, " + fmt("%.2f s", secs)};
}

// ---- 2 ---------------------------------------------------------------------

Outcome masking_identity(const SpeechCorpus& corpus) {
  Rng rng(77);
  const auto trial = gen_eval_trial(2, rng, corpus);
  std::size_t frames = 0, equal = 0;
  for (std::size_t f = 1; f < num_frames(trial.channels[0]); f += 7) {
    std::vector<SpectralFrame> specs;
    for (int m = 0; m < kNumArrayMics; ++m) specs.push_back(forward_spectrum(frame_view(trial.channels[static_cast<std::size_t>(m)], f)));
    const auto ext = forward_spectrum(frame_view(trial.channels[kExternalChannel], f));
    const auto mask = compute_mask(ext, 0.0);
    Rng r1 = derive_rng(1, {f}), r2 = derive_rng(2, {f});
    const auto plain = feature_map(specs, nullptr, r1);
    const auto informed = feature_map(specs, &mask, r2);
    ++frames;
    if (plain.values == informed.values) ++equal;
  }
  return {equal == frames && frames > 0, std::to_string(equal) + "/" + std::to_string(frames) + " frames bitwise equal"};
}

// ---- 3 ---------------------------------------------------------------------

Outcome percentile_property() {
  Rng rng(3);
  int worst_off = 0;
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    SpectralFrame s;
    // Distinct magnitudes with random phases.
    std::vector<double> mags(kNumBins);
    std::iota(mags.begin(), mags.end(), 1.0);
    std::shuffle(mags.begin(), mags.end(), rng);
    for (double m : mags) s.bins.push_back(std::polar(m * uniform(rng, 0.999, 1.0), uniform(rng, -M_PI, M_PI)));
    for (double x : {33.0, 50.0, 66.0, 90.0}) {
      const double expected = kNumBins * (100.0 - x) / 100.0;
      const double got = static_cast<double>(compute_mask(s, x).count());
      const double off = std::abs(got - expected);
      worst_off = std::max(worst_off, static_cast<int>(std::ceil(off - 1e-9)));
      if (off > 1.0 + 1e-9) ++bad;
    }
  }
  return {bad == 0, std::to_string(bad) + " of 4000 outside +-1 bin (worst " + std::to_string(worst_off) + ")"};
}

// ---- 4 ---------------------------------------------------------------------

Outcome angular_suite() {
  const double a = angular_error(355, 0), b = angular_error(137.5, 137.5), c = angular_error(270, 90);
  return {a == 5.0 && b == 0.0 && c == 180.0,
          "(355,0)->" + fmt("%g", a) + " (t,t)->" + fmt("%g", b) + " (270,90)->" + fmt("%g", c)};
}

// ---- 5 ---------------------------------------------------------------------

std::string layer_type(const std::string& name) {
  if (name.rfind("conv", 0) == 0) return "conv";
  if (name.rfind("bn", 0) == 0) return "batchnorm";
  return "dense";
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  std::map<std::string, double> worst;
  double worst_abs = 0.0;
  // A central difference at h = 1e-5 cannot resolve gradients below 1e-6
  // (conv biases feeding batch norm have exactly zero gradient); those are
  // held to an absolute bound of 1e-9 instead.
  auto check = [&](nn::ModelConfig cfg, std::uint64_t seed, std::size_t per_tensor) {
    auto model = nn::model_init(cfg, seed);
    Rng rng(seed + 1);
    for (auto& t : model.params)
      for (double& v : t.data) v += uniform(rng, -0.1, 0.1);
    std::vector<double> x(4 * cfg.input_size());
    for (double& v : x) v = uniform(rng, -1, 1);
    std::vector<int> y(4);
    for (int& v : y) v = uniform_int(rng, 0, cfg.classes - 1);
    Rng unused(0);
    const nn::LossOptions no_dropout{false};
    const auto res = nn::loss_and_grads(model, x, y, unused, no_dropout);
    const double h = 1e-5;
    for (std::size_t p = 0; p < model.params.size(); ++p) {
      auto& w = model.params[p].data;
      std::vector<std::size_t> idx(w.size());
      std::iota(idx.begin(), idx.end(), 0);
      if (per_tensor && idx.size() > per_tensor) {
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(per_tensor);
      }
      for (std::size_t i : idx) {
        const double saved = w[i];
        w[i] = saved + h;
        const double up = nn::loss_and_grads(model, x, y, unused, no_dropout).loss;
        w[i] = saved - h;
        const double down = nn::loss_and_grads(model, x, y, unused, no_dropout).loss;
        w[i] = saved;
        const double num = (up - down) / (2 * h), ana = res.grads[p][i];
        const double scale = std::max(std::abs(num), std::abs(ana));
        if (scale < 1e-6) {
          worst_abs = std::max(worst_abs, std::abs(num - ana));
          continue;
        }
        const double rel = std::abs(num - ana) / scale;
        auto& slot = worst[layer_type(model.params[p].name)];
        slot = std::max(slot, rel);
      }
    }
  };
  // Every parameter of a reduced net, then a sample of the full-size net.
  nn::ModelConfig tiny;
  tiny.height = tiny.width = 6;
  tiny.in_channels = 3;
  tiny.conv_channels = {2, 3, 2};
  tiny.pools = {2, 1, 3};
  tiny.fc_widths = {5, 4};
  tiny.classes = 7;
  check(tiny, 5, 0);
  check(nn::ModelConfig{}, 6, 40);
  const double secs = seconds_since(t0);
  bool ok = secs < 120.0 && worst_abs < 1e-9;
  std::string detail;
  for (const auto& [type, rel] : worst) {
    ok = ok && rel < 1e-4;
    detail += type + " " + fmt("%.1e", rel) + ", ";
  }
  return {ok && worst.size() == 3, detail + fmt("vanishing %.1e abs, ", worst_abs) + fmt("%.1f s", secs)};
}

// ---- 6 ---------------------------------------------------------------------

Outcome param_budget() {
  const auto n = nn::param_count(nn::model_init(nn::ModelConfig{}, 0));
  const double rel = (static_cast<double>(n) - 36008.0) / 36008.0;
  return {n == nn::kAuditedParamCount && std::abs(rel) <= 0.02,
          std::to_string(n) + " learnable, " + fmt("%+.2f%% vs 36008", 100 * rel)};
}

// ---- 7 ---------------------------------------------------------------------

Outcome rir_fidelity() {
  const auto cfg = ScenarioConfig::training();
  Rng rng(707);
  int t60_ok = 0;
  double worst_t60 = 0;
  for (int i = 0; i < 50; ++i) {
    const auto scn = sample_scenario_layout(cfg, 0, rng);
    const auto h = simulate_rir(scn.room, scn.desired_position, scn.array.position(kCenterMic));
    const double est = schroeder_t60(h.taps);
    const double rel = std::abs(est - scn.room.t60) / scn.room.t60;
    worst_t60 = std::max(worst_t60, std::isfinite(rel) ? rel : 1e9);
    if (rel <= 0.25) ++t60_ok;
  }
  int delay_ok = 0;
  double worst_delay = 0;
  for (int i = 0; i < 100; ++i) {
    const auto scn = sample_scenario_layout(cfg, 0, rng);
    const Vec3 src = scn.desired_position, mic = scn.array.position(kCenterMic);
    const auto h = simulate_rir(scn.room, src, mic);
    const double t = (src - mic).norm() / kSpeedOfSound * kSampleRate;
    // Earliest first-order reflection bounds the search, so a strong
    // reflection cannot be mistaken for the direct sound.
    double t1 = 1e300;
    const Vec3& L = scn.room.dims;
    for (int axis = 0; axis < 3; ++axis)
      for (int wall = 0; wall < 2; ++wall) {
        Vec3 img = src;
        double* p = axis == 0 ? &img.x : axis == 1 ? &img.y : &img.z;
        const double len = axis == 0 ? L.x : axis == 1 ? L.y : L.z;
        *p = wall ? 2 * len - *p : -*p;
        t1 = std::min(t1, (img - mic).norm() / kSpeedOfSound * kSampleRate);
      }
    const auto hi = std::min(h.taps.size(), static_cast<std::size_t>((t + t1) / 2));
    std::size_t peak = 0;
    for (std::size_t k = 0; k < hi; ++k)
      if (std::abs(h.taps[k]) > std::abs(h.taps[peak])) peak = k;
    const double err = std::abs(static_cast<double>(peak) - t);
    worst_delay = std::max(worst_delay, err);
    if (err <= 1.0) ++delay_ok;
  }
  return {t60_ok == 50 && delay_ok == 100,
          "T60 " + std::to_string(t60_ok) + "/50 within 25% (worst " + fmt("%.1f%%", 100 * worst_t60) + "), delay " +
              std::to_string(delay_ok) + "/100 within 1 sample (worst " + fmt("%.2f", worst_delay) + ")"};
}

// ---- 11 --------------------------------------------------------------------

int run_cli(const std::string& cli, const std::string& args) {
  const std::string cmd = "'" + cli + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return "<missing " + p.string() + ">";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  fs::remove_all(work);
  fs::create_directories(work);
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  auto write = [](const fs::path& p, const std::string& s) { std::ofstream(p) << s; };
  write(work / "gen.json", R"({"white_noise_fraction": 0.5, "corpus_dir": ")" + (work / "corpus").string() + "\"}");
  write(work / "train.json", R"({"epochs": 2, "batch_size": 8})");
  write(work / "eval.json", R"({"interferer_counts": [0, 2], "trials_per_count": 3, "percentiles": [0, 50]})");
  if (run_cli(cli, "make-corpus --speakers 6 --seconds 6 --seed 4 --out " + q(work / "corpus")) != 0)
    return {false, "make-corpus failed"};

  std::size_t compared = 0, identical = 0;
  for (int rep = 0; rep < 2; ++rep) {
    const auto dir = work / ("run" + std::to_string(rep));
    const bool ok =
        run_cli(cli, "gen-data --count 24 --seed 31 --config " + q(work / "gen.json") + " --out " + q(dir / "data")) == 0 &&
        run_cli(cli, "train --seed 31 --config " + q(work / "train.json") + " --data " + q(dir / "data") + " --out " +
                         q(dir / "train")) == 0 &&
        run_cli(cli, "eval --seed 32 --config " + q(work / "eval.json") + " --model " + q(dir / "train" / "model.bin") +
                         " --corpus " + q(work / "corpus") + " --out " + q(dir / "eval")) == 0;
    if (!ok) return {false, "CLI run " + std::to_string(rep) + " failed"};
  }
  for (const char* f : {"data/features.gccf", "data/labels.txt", "data/manifest.json", "train/model.bin",
                        "train/train_summary.json", "eval/trials.tsv", "eval/aggregates.tsv", "eval/metrics.json",
                        "eval/histogram.tsv"}) {
    ++compared;
    if (slurp(work / "run0" / f) == slurp(work / "run1" / f)) ++identical;
  }
  return {identical == compared, std::to_string(identical) + "/" + std::to_string(compared) + " artifacts byte-identical"};
}

// ---- 12 --------------------------------------------------------------------

Outcome serialization(const nn::Model& model, const fs::path& work) {
  fs::create_directories(work);
  const auto path = work / "roundtrip.bin";
  nn::save_model(model, path);
  const auto back = nn::load_model(path);
  Rng rng(12);
  std::vector<double> x(100 * kFeatureSize);
  for (double& v : x) v = uniform(rng, -1, 1);
  Rng unused(0);
  const auto za = nn::forward(model, x, 100, nn::Mode::kInference, unused);
  const auto zb = nn::forward(back, x, 100, nn::Mode::kInference, unused);
  const auto pa = nn::predict_batch(model, x, 100), pb = nn::predict_batch(back, x, 100);
  std::size_t same = 0;
  for (std::size_t i = 0; i < 100; ++i) same += pa[i] == pb[i] ? 1 : 0;
  return {za == zb && same == 100, std::to_string(same) + "/100 predictions identical, logits " +
                                       (za == zb ? "bit-identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sidoa acceptance run"};
  std::string model_cache, corpus_dir, cli = SIDOA_CLI_PATH;
  fs::path work = fs::temp_directory_path() / "sidoa_acceptance";
  int jobs = 1;
  int trials = kDeskTrialsPerCondition;
  app.add_option("--model-cache", model_cache, "reuse this desk model if present, else train and store it");
  app.add_option("--corpus", corpus_dir, "speech corpus directory (default: synthetic corpus)");
  app.add_option("--cli", cli, "sidoa executable");
  app.add_option("--work", work, "scratch directory");
  app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--trials", trials, "trials per condition")->check(CLI::Range(100, 100000));
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << "  " << name << ": " << o.detail << std::endl;
    if (!o.pass) ++failures;
  };
  auto guarded = [](const std::function<Outcome()>& fn) {
    try {
      return fn();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  fs::create_directories(work);
  const SpeechCorpus corpus = corpus_dir.empty() ? synthetic_corpus(40, 12.0, 2026) : SpeechCorpus::load(corpus_dir);

  report(1, "gcc-phat oracle equivalence", guarded(gcc_oracle));
  report(2, "masking identity at x=0", guarded([&] { return masking_identity(corpus); }));
  report(3, "percentile pass fraction", guarded(percentile_property));
  report(4, "angular error suite", guarded(angular_suite));
  report(5, "gradient check", guarded(gradient_check));
  report(6, "parameter budget", guarded(param_budget));
  report(7, "rir fidelity", guarded(rir_fidelity));

  // Desk-scale model shared by criteria 8 to 10 and 12.
  nn::Model model;
  std::string train_note;
  double train_minutes = 0.0;  // zero for a cached model
  bool have_model = false;
  try {
    if (!model_cache.empty() && fs::exists(model_cache)) {
      model = nn::load_model(model_cache);
      train_note = "cached model";
    } else {
      TrainConfig cfg = TrainConfig::desk();
      cfg.seed = 2026;
      cfg.jobs = jobs;
      const auto t0 = Clock::now();
      TrainHooks hooks;
      hooks.on_epoch = [](const EpochStats& s) {
        std::cerr << "  desk epoch " << s.epoch << " loss " << s.mean_loss << " (" << s.seconds << " s)\n";
      };
      auto res = train(cfg, &corpus, hooks);
      train_minutes = seconds_since(t0) / 60.0;
      model = std::move(res.model);
      train_note = fmt("trained in %.1f min", train_minutes);
      if (!model_cache.empty()) nn::save_model(model, model_cache);
    }
    have_model = true;
  } catch (const std::exception& e) {
    train_note = std::string("training failed: ") + e.what();
  }

  BenchmarkResult bench;
  bool have_bench = false;
  if (have_model) {
    try {
      BenchmarkConfig b;
      b.interferer_counts = {0, 2};
      b.trials_per_count = trials;
      b.percentiles = {0.0, 33.0, 50.0, 66.0};
      b.jobs = jobs;
      bench = run_benchmark(model, corpus, b);
      have_bench = true;
      std::cerr << bench.aggregates_tsv();
    } catch (const std::exception& e) {
      train_note += std::string(", benchmark failed: ") + e.what();
    }
  }

  if (have_bench) {
    const auto& j0 = bench.aggregate(0, "unmasked");
    report(8, "desk-scale single-source accuracy",
           {j0.median_error <= 10.0 && train_minutes <= 30.0, fmt("J=0 median %.2f deg", j0.median_error) + " over " + std::to_string(j0.trials) +
                                         " trials (" + std::to_string(j0.invalid) + " invalid), " + train_note});
    const auto& u2 = bench.aggregate(2, "unmasked");
    const auto& p50 = bench.aggregate(2, condition_name(50.0));
    report(9, "masking benefit at J=2",
           {p50.median_error < u2.median_error,
            fmt("P50 %.2f deg", p50.median_error) + fmt(" vs unmasked %.2f deg", u2.median_error) + " over " +
                std::to_string(u2.trials) + " trials"});
    double best = 1e300;
    std::string best_name;
    for (double x : {33.0, 50.0, 66.0}) {
      const auto& a = bench.aggregate(2, condition_name(x));
      if (a.median_error < best) {
        best = a.median_error;
        best_name = a.condition;
      }
    }
    bool zero_equal = true;
    for (std::size_t i = 0; i + 1 < bench.trials.size(); ++i) {
      const auto& r = bench.trials[i];
      if (r.condition != "unmasked") continue;
      const auto& z = bench.trials[i + 1];
      if (z.condition != condition_name(0.0) || z.seed != r.seed || z.estimate_deg != r.estimate_deg ||
          z.error_deg != r.error_deg || z.speech_frames != r.speech_frames)
        zero_equal = false;
    }
    report(10, "threshold sweep sanity",
           {best <= u2.median_error && zero_equal,
            "best masked " + best_name + fmt(" %.2f deg", best) + fmt(" vs unmasked %.2f deg", u2.median_error) +
                ", P0 column " + (zero_equal ? "bit-equal to unmasked" : "differs from unmasked")});
  } else {
    report(8, "desk-scale single-source accuracy", {false, train_note});
    report(9, "masking benefit at J=2", {false, "no benchmark"});
    report(10, "threshold sweep sanity", {false, "no benchmark"});
  }

  report(11, "determinism", guarded([&] { return determinism(cli, work / "determinism"); }));
  if (have_model) report(12, "serialization round trip", guarded([&] { return serialization(model, work); }));
  else report(12, "serialization round trip", {false, "no model"});

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
