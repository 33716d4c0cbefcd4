// tests/test_cli.cpp

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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "test_helpers.hpp"

#ifndef SIDOA_CLI_PATH
#error "SIDOA_CLI_PATH must point at the sidoa executable"
#endif

namespace fs = std::filesystem;
using sidoa::test::TempDir;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SIDOA_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage and configuration errors exit with 2") {
    TempDir dir("cli_err");
    CHECK(run("") == 2);
    CHECK(run("no-such-command") == 2);
    CHECK(run("gen-data --bogus") == 2);
    CHECK(run("gen-data --jobs 0 --out " + q(dir / "a")) == 2);
    write(dir / "bad.json", "{ not json");
    CHECK(run("gen-data --config " + q(dir / "bad.json") + " --out " + q(dir / "b")) == 2);
    write(dir / "neg.json", R"({"batch_size": 0})");
    CHECK(run("train --config " + q(dir / "neg.json") + " --out " + q(dir / "c")) == 2);
    write(dir / "type.json", R"({"epochs": "many"})");
    CHECK(run("train --config " + q(dir / "type.json") + " --out " + q(dir / "d")) == 2);
    CHECK(run("eval --model x.bin") == 2);
    CHECK(run("--help") == 0);
  }

  TEST_CASE("runtime failures exit with 3") {
    TempDir dir("cli_rt");
    CHECK(run("make-corpus --speakers 2 --seconds 3 --out " + q(dir / "corpus")) == 0);
    CHECK(run("eval --model " + q(dir / "missing.bin") + " --corpus " + q(dir / "corpus") + " --out " +
              q(dir / "e")) == 3);
    write(dir / "junk.bin", "definitely not a model");
    CHECK(run("eval --model " + q(dir / "junk.bin") + " --corpus " + q(dir / "corpus") + " --out " +
              q(dir / "e")) == 3);
  }

  TEST_CASE("gen-data is byte-reproducible and seed-sensitive") {
    TempDir dir("cli_gen");
    write(dir / "cfg.json", R"({"white_noise_fraction": 1.0, "scenario": {"fixed_noise": "white-diffuse"}})");
    const std::string base = "gen-data --count 4 --config " + q(dir / "cfg.json");
    REQUIRE(run(base + " --seed 5 --out " + q(dir / "a")) == 0);
    REQUIRE(run(base + " --seed 5 --jobs 2 --out " + q(dir / "b")) == 0);
    REQUIRE(run(base + " --seed 6 --out " + q(dir / "c")) == 0);
    for (const char* f : {"features.gccf", "labels.txt", "manifest.json"})
      CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    const auto ma = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
    const auto mc = nlohmann::json::parse(slurp(dir / "c" / "manifest.json"));
    CHECK(ma.at("count") == 4);
    CHECK(ma.at("seed") == 5);
    CHECK(ma.at("digest_fnv1a64") != mc.at("digest_fnv1a64"));
    CHECK(fs::exists(dir / "a" / "config.resolved.json"));
  }

  TEST_CASE("train, resume and eval are byte-reproducible") {
    TempDir dir("cli_train");
    write(dir / "gen.json", R"({"white_noise_fraction": 1.0, "scenario": {"fixed_noise": "white-diffuse"}})");
    REQUIRE(run("gen-data --count 6 --seed 3 --config " + q(dir / "gen.json") + " --out " + q(dir / "data")) == 0);
    write(dir / "train.json", R"({"epochs": 2, "batch_size": 4, "lr": 0.001})");
    const std::string train = "train --seed 3 --config " + q(dir / "train.json") + " --data " + q(dir / "data");
    REQUIRE(run(train + " --out " + q(dir / "t1")) == 0);
    REQUIRE(run(train + " --out " + q(dir / "t2")) == 0);
    CHECK(slurp(dir / "t1" / "model.bin") == slurp(dir / "t2" / "model.bin"));
    CHECK(slurp(dir / "t1" / "train_summary.json") == slurp(dir / "t2" / "train_summary.json"));

    // One epoch, then resume to two: same weights as the straight run.
    write(dir / "one.json", R"({"epochs": 1, "batch_size": 4, "lr": 0.001})");
    REQUIRE(run("train --seed 3 --config " + q(dir / "one.json") + " --data " + q(dir / "data") + " --out " +
                q(dir / "t3")) == 0);
    REQUIRE(run(train + " --resume --out " + q(dir / "t3")) == 0);
    CHECK(slurp(dir / "t1" / "model.bin") == slurp(dir / "t3" / "model.bin"));

    REQUIRE(run("make-corpus --speakers 4 --seconds 6 --seed 2 --out " + q(dir / "corpus")) == 0);
    write(dir / "eval.json", R"({"interferer_counts": [0, 1], "trials_per_count": 2, "percentiles": [0, 50]})");
    const std::string eval = "eval --seed 11 --config " + q(dir / "eval.json") + " --model " +
                             q(dir / "t1" / "model.bin") + " --corpus " + q(dir / "corpus");
    REQUIRE(run(eval + " --out " + q(dir / "e1")) == 0);
    REQUIRE(run(eval + " --out " + q(dir / "e2")) == 0);
    for (const char* f : {"trials.tsv", "aggregates.tsv", "metrics.json", "histogram.tsv"})
      CHECK(slurp(dir / "e1" / f) == slurp(dir / "e2" / f));

    REQUIRE(run("sweep --seed 11 --config " + q(dir / "eval.json") + " --model " + q(dir / "t1" / "model.bin") +
                " --corpus " + q(dir / "corpus") + " --out " + q(dir / "s")) == 0);
    const auto sweep = slurp(dir / "s" / "sweep.tsv");
    CHECK(sweep.rfind("J\tunmasked\tP0\tP50\n", 0) == 0);
  }

  TEST_CASE("rir-check reports the target and estimate") {
    TempDir dir("cli_rir");
    write(dir / "rir.json", R"({"room": [9, 5, 3], "t60": 0.6})");
    REQUIRE(run("rir-check --config " + q(dir / "rir.json") + " --out " + q(dir / "o")) == 0);
    const auto report = nlohmann::json::parse(slurp(dir / "o" / "rir.json"));
    CHECK(report.at("t60_target").get<double>() == 0.6);
    CHECK(std::abs(report.at("t60_schroeder").get<double>() - 0.6) < 0.15);
    CHECK(report.at("taps").get<std::size_t>() == 5760);
  }
}
