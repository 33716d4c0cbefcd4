// include/sidoa/nn.hpp

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

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sidoa/random.hpp"

namespace sidoa::nn {

// Three conv stages (conv 3x3 "same" -> batch norm -> max pool -> dropout ->
// leaky ReLU), then two leaky-ReLU dense layers and a linear output layer.
// Tensors are channels-last: index ((b * H + y) * W + x) * C + c.
struct ModelConfig {
  int height = 15;
  int width = 15;
  int in_channels = 24;
  std::array<int, 3> conv_channels{16, 16, 16};
  int kernel = 3;
  std::array<int, 3> pools{2, 2, 3};
  std::array<int, 2> fc_widths{128, 128};
  int classes = 72;
  double leaky_slope = 0.01;
  double dropout_rate = 0.5;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-5;

  std::size_t input_size() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(in_channels);
  }

  // Spatial size entering each stage plus the final one; throws ConfigError
  // naming the failing stage when the chain collapses.
  std::array<std::array<int, 2>, 4> spatial_chain() const;
  void validate() const;
};

struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
};

struct Model {
  ModelConfig config;
  std::vector<Tensor> params;   // learnable, in declared order
  std::vector<Tensor> buffers;  // batch-norm running mean / variance
};

using Gradients = std::vector<std::vector<double>>;

Model model_init(const ModelConfig& cfg, std::uint64_t seed);

// Learnable scalars: weights, biases, batch-norm scale and shift.
std::size_t param_count(const Model& model);
std::size_t param_count(const ModelConfig& cfg);

// Parameter count of the default configuration, audited by hand:
//   conv1 3*3*24*16 + 16 = 3472, bn1 32
//   conv2 3*3*16*16 + 16 = 2320, bn2 32
//   conv3 3*3*16*16 + 16 = 2320, bn3 32
//   fc1   16*128 + 128   = 2176
//   fc2   128*128 + 128  = 16512
//   out   128*72 + 72    = 9288
//   total                = 36184
inline constexpr std::size_t kAuditedParamCount = 36184;

enum class Mode { kInference, kTraining };

// Logits, batch x classes. `inputs` holds `batch` channels-last maps.
// Training mode uses batch statistics and dropout; inference uses the
// running statistics and no dropout.
std::vector<double> forward(const Model& model, std::span<const double> inputs, std::size_t batch,
                            Mode mode, Rng& rng);

struct LossOptions {
  bool dropout = true;
};

struct LossResult {
  double loss = 0.0;
  Gradients grads;
  // Per-stage batch mean / variance used in the pass, for running updates.
  std::vector<std::vector<double>> batch_mean;
  std::vector<std::vector<double>> batch_var;
};

// Mean softmax cross-entropy (training-mode batch norm) and its exact
// gradient with respect to every learnable parameter.
LossResult loss_and_grads(const Model& model, std::span<const double> inputs,
                          std::span<const int> labels, Rng& rng, const LossOptions& opts = {});

double softmax_cross_entropy(std::span<const double> logits, std::span<const int> labels,
                             int classes);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_model(const Model& model, double lr = 1e-4);
};

// One Adam update on a mini-batch; also advances the batch-norm running
// statistics. Returns the batch loss before the update.
double train_step(Model& model, AdamState& adam, std::span<const double> inputs,
                  std::span<const int> labels, Rng& rng);

// Inverted-dropout multipliers: 0 with probability `rate`, else 1/(1-rate).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);

// Argmax of the logits; ties go to the lowest index.
int argmax(std::span<const double> logits);
int predict(const Model& model, std::span<const double> input);
std::vector<int> predict_batch(const Model& model, std::span<const double> inputs, std::size_t batch);

// Versioned little-endian container:
//   8 bytes magic "SIDOANN1", u32 version, config block, u64 learnable
//   parameter count, u32 flags (bit 0: optimizer state follows), then every
//   parameter tensor and every buffer as f64 in declared order, then the
//   optional optimizer block (u64 step, f64 lr, moments m and v).
void save_model(const Model& model, const std::filesystem::path& path,
                const AdamState* adam = nullptr);
Model load_model(const std::filesystem::path& path);

struct Checkpoint {
  Model model;
  AdamState adam;
  bool has_optimizer = false;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sidoa::nn
