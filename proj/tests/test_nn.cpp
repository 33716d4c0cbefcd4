// tests/test_nn.cpp

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

#include <cmath>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "sidoa/error.hpp"
#include "sidoa/nn.hpp"
#include "test_helpers.hpp"

using namespace sidoa;
using namespace sidoa::nn;

namespace {

std::vector<double> random_inputs(const ModelConfig& cfg, std::size_t batch, Rng& rng) {
  std::vector<double> x(batch * cfg.input_size());
  for (double& v : x) v = uniform(rng, -1.0, 1.0);
  return x;
}

std::vector<int> random_labels(const ModelConfig& cfg, std::size_t batch, Rng& rng) {
  std::vector<int> y(batch);
  for (int& v : y) v = uniform_int(rng, 0, cfg.classes - 1);
  return y;
}

// Small net with every layer type and a non-trivial pooling chain
// (6 -> 3 -> 3 -> 1), cheap enough for a full finite-difference sweep.
ModelConfig tiny_config() {
  ModelConfig c;
  c.height = 6;
  c.width = 6;
  c.in_channels = 3;
  c.conv_channels = {2, 3, 2};
  c.pools = {2, 1, 3};
  c.fc_widths = {5, 4};
  c.classes = 7;
  return c;
}

// Moves every parameter off its initial value so the check
// also covers scale != 1 and shift != 0.
void perturb(Model& m, Rng& rng) {
  for (auto& t : m.params)
    for (double& v : t.data) v += uniform(rng, -0.1, 0.1);
}

struct GradCheck {
  double worst = 0.0;      // relative error on resolvable gradients
  double worst_abs = 0.0;  // absolute error on vanishing ones
  std::string worst_tensor;
  std::size_t checked = 0;
};

// Below this magnitude a central difference at h = 1e-5 cannot resolve the
// gradient (conv biases feeding batch norm have exactly zero gradient), so
// such entries are held to an absolute bound instead.
constexpr double kResolvable = 1e-6;

// Central differences, h = 1e-5, on `per_tensor` entries of each tensor
// (all of them when zero).
GradCheck check_gradients(Model model, std::span<const double> x, std::span<const int> y, std::size_t per_tensor,
                          Rng& pick) {
  Rng unused(0);
  const auto res = loss_and_grads(model, x, y, unused, LossOptions{false});
  const double h = 1e-5;
  GradCheck out;
  for (std::size_t p = 0; p < model.params.size(); ++p) {
    auto& w = model.params[p].data;
    std::vector<std::size_t> idx(w.size());
    std::iota(idx.begin(), idx.end(), 0);
    if (per_tensor && per_tensor < idx.size()) {
      std::shuffle(idx.begin(), idx.end(), pick);
      idx.resize(per_tensor);
    }
    for (std::size_t i : idx) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = loss_and_grads(model, x, y, unused, LossOptions{false}).loss;
      w[i] = saved - h;
      const double down = loss_and_grads(model, x, y, unused, LossOptions{false}).loss;
      w[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double analytic = res.grads[p][i];
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      if (scale < kResolvable) {
        out.worst_abs = std::max(out.worst_abs, std::abs(numeric - analytic));
        ++out.checked;
        continue;
      }
      const double rel = std::abs(numeric - analytic) / scale;
      if (rel > out.worst) {
        out.worst = rel;
        out.worst_tensor = model.params[p].name;
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("neuralnet") {
  TEST_CASE("initialization is deterministic and conventional") {
    const ModelConfig cfg;
    const auto a = model_init(cfg, 42), b = model_init(cfg, 42), c = model_init(cfg, 43);
    for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i].data == b.params[i].data);
    CHECK(a.params[0].data != c.params[0].data);
    for (const auto& t : a.params) {
      if (t.name.find("gamma") != std::string::npos)
        for (double v : t.data) CHECK(v == 1.0);
      if (t.name.find("beta") != std::string::npos || t.name.find("bias") != std::string::npos)
        for (double v : t.data) CHECK(v == 0.0);
    }
  }

  TEST_CASE("conv1 weights are centred across seeds") {
    const ModelConfig cfg;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto m = model_init(cfg, seed);
      const auto& w = m.params[0].data;
      const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
      CHECK(std::abs(mean) < 0.01);
    }
  }

  TEST_CASE("parameter budget matches the audit") {
    const ModelConfig cfg;
    const auto m = model_init(cfg, 1);
    CHECK(param_count(m) == kAuditedParamCount);
    CHECK(param_count(cfg) == kAuditedParamCount);
    CHECK(std::abs(static_cast<double>(kAuditedParamCount) - 36008.0) / 36008.0 < 0.02);
    std::size_t out_layer = 0, fc2 = 0;
    for (const auto& t : m.params) {
      if (t.name.rfind("out.", 0) == 0) out_layer += t.data.size();
      if (t.name.rfind("fc2.", 0) == 0) fc2 += t.data.size();
    }
    CHECK(out_layer == 9288);
    CHECK(fc2 == 16512);
  }

  TEST_CASE("shape chain is validated") {
    const ModelConfig cfg;
    const auto chain = cfg.spatial_chain();
    CHECK(chain[1] == std::array<int, 2>{7, 7});
    CHECK(chain[2] == std::array<int, 2>{3, 3});
    CHECK(chain[3] == std::array<int, 2>{1, 1});
    ModelConfig bad = cfg;
    bad.pools = {2, 2, 4};
    CHECK_THROWS_AS(model_init(bad, 0), ConfigError);
    bad = cfg;
    bad.height = 5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("inference logits are well formed") {
    const ModelConfig cfg;
    const auto m = model_init(cfg, 3);
    Rng rng(4);
    const auto x = random_inputs(cfg, 5, rng);
    const auto z = forward(m, x, 5, Mode::kInference, rng);
    REQUIRE(z.size() == 5 * 72);
    for (std::size_t b = 0; b < 5; ++b) {
      double mx = -1e300, sum = 0;
      for (int c = 0; c < 72; ++c) mx = std::max(mx, z[b * 72 + c]);
      for (int c = 0; c < 72; ++c) sum += std::exp(z[b * 72 + c] - mx);
      double total = 0;
      for (int c = 0; c < 72; ++c) total += std::exp(z[b * 72 + c] - mx) / sum;
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
    CHECK(forward(m, x, 5, Mode::kInference, rng) == z);
    CHECK_THROWS_AS(forward(m, x, 4, Mode::kInference, rng), ConfigError);

    const std::vector<double> zero(cfg.input_size(), 0.0);
    for (double v : forward(m, zero, 1, Mode::kInference, rng)) CHECK(v == 0.0);
  }

  TEST_CASE("cross entropy reference values") {
    const std::vector<double> flat(72, 0.3);
    const std::vector<int> label{5};
    CHECK(softmax_cross_entropy(flat, label, 72) == doctest::Approx(std::log(72.0)).epsilon(1e-12));
    std::vector<double> sharp(72, 0.0);
    sharp[5] = 60.0;
    CHECK(softmax_cross_entropy(sharp, label, 72) < 1e-20);
  }

  TEST_CASE("gradients match central differences on every parameter of a small net") {
    const auto cfg = tiny_config();
    auto m = model_init(cfg, 11);
    Rng rng(12);
    perturb(m, rng);
    const auto x = random_inputs(cfg, 4, rng);
    const auto y = random_labels(cfg, 4, rng);
    const auto gc = check_gradients(m, x, y, 0, rng);
    CHECK(gc.checked == param_count(m));
    INFO("worst tensor " << gc.worst_tensor);
    CHECK(gc.worst < 1e-4);
    CHECK(gc.worst_abs < 1e-9);
  }

  TEST_CASE("gradients match central differences on the full-size net") {
    const ModelConfig cfg;
    auto m = model_init(cfg, 13);
    Rng rng(14);
    perturb(m, rng);
    const auto x = random_inputs(cfg, 4, rng);
    const auto y = random_labels(cfg, 4, rng);
    const auto gc = check_gradients(m, x, y, 12, rng);
    INFO("worst tensor " << gc.worst_tensor);
    CHECK(gc.worst < 1e-4);
    CHECK(gc.worst_abs < 1e-9);
  }

  TEST_CASE("dropout drops half and rescales survivors") {
    Rng rng(15);
    const auto d = dropout_mask(100000, 0.5, rng);
    std::size_t zeros = 0;
    for (double v : d) {
      if (v == 0.0) ++zeros;
      else if (v != 2.0) FAIL("survivor scale " << v);
    }
    CHECK(std::abs(static_cast<double>(zeros) / 1e5 - 0.5) < 0.03);
  }

  TEST_CASE("training forward is stochastic, inference is not") {
    const ModelConfig cfg;
    const auto m = model_init(cfg, 16);
    Rng rng(17);
    const auto x = random_inputs(cfg, 2, rng);
    Rng r1(1), r2(2);
    CHECK(forward(m, x, 2, Mode::kTraining, r1) != forward(m, x, 2, Mode::kTraining, r2));
  }

  TEST_CASE("zero learning rate leaves parameters unchanged") {
    const auto cfg = tiny_config();
    auto m = model_init(cfg, 18);
    const auto before = m.params;
    auto adam = AdamState::for_model(m, 0.0);
    Rng rng(19);
    const auto x = random_inputs(cfg, 8, rng);
    const auto y = random_labels(cfg, 8, rng);
    for (int i = 0; i < 5; ++i) train_step(m, adam, x, y, rng);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(m.params[i].data == before[i].data);
    CHECK(adam.step == 5);
  }

  TEST_CASE("a fixed batch can be memorized") {
    ModelConfig cfg;
    cfg.dropout_rate = 0.0;
    auto m = model_init(cfg, 20);
    auto adam = AdamState::for_model(m, 1e-3);
    Rng rng(21);
    const auto x = random_inputs(cfg, 32, rng);
    const auto y = random_labels(cfg, 32, rng);
    double loss = 0;
    for (int step = 0; step < 500; ++step) loss = train_step(m, adam, x, y, rng);
    Rng unused(0);
    loss = loss_and_grads(m, x, y, unused, LossOptions{false}).loss;
    CHECK(loss < 0.1);
  }

  TEST_CASE("training stays finite on random data") {
    const auto cfg = tiny_config();
    auto m = model_init(cfg, 22);
    auto adam = AdamState::for_model(m, 1e-3);
    Rng rng(23);
    bool finite = true;
    for (int step = 0; step < 1000; ++step) {
      const auto x = random_inputs(cfg, 8, rng);
      const auto y = random_labels(cfg, 8, rng);
      finite = finite && std::isfinite(train_step(m, adam, x, y, rng));
    }
    CHECK(finite);
  }

  TEST_CASE("identical seeds give identical training runs") {
    const auto cfg = tiny_config();
    Rng data(24);
    const auto x = random_inputs(cfg, 8, data);
    const auto y = random_labels(cfg, 8, data);
    auto run = [&] {
      auto m = model_init(cfg, 25);
      auto adam = AdamState::for_model(m, 1e-3);
      Rng rng(26);
      for (int i = 0; i < 20; ++i) train_step(m, adam, x, y, rng);
      return m;
    };
    const auto a = run(), b = run();
    for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i].data == b.params[i].data);
    for (std::size_t i = 0; i < a.buffers.size(); ++i) CHECK(a.buffers[i].data == b.buffers[i].data);
  }

  TEST_CASE("argmax breaks ties toward the lowest index") {
    std::vector<double> z(72, 0.0);
    z[17] = 1.0;
    CHECK(argmax(z) == 17);
    z.assign(72, 0.0);
    z[3] = z[40] = 2.0;
    CHECK(argmax(z) == 3);
    for (double& v : z) v += 123.0;
    CHECK(argmax(z) == 3);
  }

  TEST_CASE("save and load round trip keeps predictions") {
    test::TempDir dir("nn");
    const ModelConfig cfg;
    auto m = model_init(cfg, 27);
    Rng rng(28);
    // A few steps so the running statistics are not at their defaults.
    auto adam = AdamState::for_model(m);
    for (int i = 0; i < 3; ++i) train_step(m, adam, random_inputs(cfg, 4, rng), random_labels(cfg, 4, rng), rng);
    save_model(m, dir / "m.bin", &adam);
    const auto back = load_model(dir / "m.bin");
    const auto x = random_inputs(cfg, 100, rng);
    Rng unused(0);
    CHECK(forward(m, x, 100, Mode::kInference, unused) == forward(back, x, 100, Mode::kInference, unused));
    CHECK(predict_batch(m, x, 100) == predict_batch(back, x, 100));

    const auto ck = load_checkpoint(dir / "m.bin");
    CHECK(ck.has_optimizer);
    CHECK(ck.adam.step == 3);
    CHECK(ck.adam.m == adam.m);
  }

  TEST_CASE("damaged model files raise distinct errors") {
    test::TempDir dir("nnbad");
    const auto m = model_init(tiny_config(), 29);
    save_model(m, dir / "m.bin");
    std::ifstream in(dir / "m.bin", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});

    auto write = [&](const std::string& name, const std::string& content) {
      std::ofstream(dir / name, std::ios::binary) << content;
      return dir / name;
    };
    CHECK_THROWS_AS(load_model(write("trunc.bin", bytes.substr(0, bytes.size() / 2))), CorruptModelError);
    std::string foreign = bytes;
    foreign[0] = 'X';
    CHECK_THROWS_AS(load_model(write("foreign.bin", foreign)), NotAModelError);
    std::string version = bytes;
    version[8] = 9;
    CHECK_THROWS_AS(load_model(write("version.bin", version)), ModelVersionError);
    // The stored parameter count follows the 8-byte magic, the version and
    // the 84-byte config block.
    std::string count = bytes;
    count[96] = static_cast<char>(count[96] + 1);
    CHECK_THROWS_AS(load_model(write("count.bin", count)), ParamCountError);
    CHECK_THROWS_AS(load_model(write("tail.bin", bytes + "x")), CorruptModelError);
    CHECK_THROWS_AS(load_model(dir / "missing.bin"), IoError);
  }
}
