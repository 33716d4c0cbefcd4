// src/nn.cpp

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

#include "sidoa/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "sidoa/error.hpp"

namespace sidoa::nn {

namespace {

constexpr int kStages = 3;
constexpr char kMagic[8] = {'S', 'I', 'D', 'O', 'A', 'N', 'N', '1'};
constexpr std::uint32_t kFormatVersion = 1;

// Parameter slots in declared order.
constexpr std::size_t conv_w(int s) { return static_cast<std::size_t>(4 * s); }
constexpr std::size_t conv_b(int s) { return static_cast<std::size_t>(4 * s + 1); }
constexpr std::size_t bn_gamma(int s) { return static_cast<std::size_t>(4 * s + 2); }
constexpr std::size_t bn_beta(int s) { return static_cast<std::size_t>(4 * s + 3); }
constexpr std::size_t fc_w(int i) { return static_cast<std::size_t>(4 * kStages + 2 * i); }
constexpr std::size_t fc_b(int i) { return static_cast<std::size_t>(4 * kStages + 2 * i + 1); }
constexpr std::size_t run_mean(int s) { return static_cast<std::size_t>(2 * s); }
constexpr std::size_t run_var(int s) { return static_cast<std::size_t>(2 * s + 1); }
constexpr int kDenseLayers = 3;  // fc1, fc2, output

double leaky(double v, double slope) { return v > 0.0 ? v : slope * v; }

struct StageDims {
  int h, w, cin, cout, pool, ph, pw;
};

std::array<StageDims, kStages> stage_dims(const ModelConfig& cfg) {
  const auto chain = cfg.spatial_chain();
  std::array<StageDims, kStages> d{};
  int cin = cfg.in_channels;
  for (int s = 0; s < kStages; ++s) {
    d[s] = {chain[s][0], chain[s][1], cin, cfg.conv_channels[s], cfg.pools[s], chain[s + 1][0], chain[s + 1][1]};
    cin = cfg.conv_channels[s];
  }
  return d;
}

std::array<int, kDenseLayers + 1> dense_widths(const ModelConfig& cfg) {
  const auto chain = cfg.spatial_chain();
  const int flat = chain[3][0] * chain[3][1] * cfg.conv_channels[2];
  return {flat, cfg.fc_widths[0], cfg.fc_widths[1], cfg.classes};
}

// Activations kept for the backward pass.
struct StageCache {
  std::vector<double> input;   // B x h x w x cin
  std::vector<double> zhat;    // normalized conv output
  std::vector<double> inv_std; // per channel
  std::vector<double> mean, var;
  std::vector<std::size_t> argmax;  // pooled element -> index into B x h x w x cout
  std::vector<double> drop;    // dropout multipliers, empty when off
  std::vector<double> pre_act; // pooled (and dropped) values before leaky ReLU
};

struct DenseCache {
  std::vector<double> input;
  std::vector<double> pre_act;
};

struct ForwardCache {
  std::array<StageCache, kStages> stages;
  std::array<DenseCache, kDenseLayers> dense;
  std::vector<double> logits;
};

void conv_forward(const StageDims& d, std::size_t batch, const double* in, const double* weight,
                  const double* bias, int kernel, double* out) {
  const int pad = kernel / 2;
  for (std::size_t b = 0; b < batch; ++b)
    for (int y = 0; y < d.h; ++y)
      for (int x = 0; x < d.w; ++x) {
        double* o = out + ((b * d.h + y) * d.w + x) * d.cout;
        for (int co = 0; co < d.cout; ++co) o[co] = bias[co];
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= d.h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = x + kx - pad;
            if (ix < 0 || ix >= d.w) continue;
            const double* ip = in + ((b * d.h + iy) * d.w + ix) * d.cin;
            const double* wp = weight + static_cast<std::size_t>((ky * kernel + kx) * d.cin) * d.cout;
            for (int ci = 0; ci < d.cin; ++ci) {
              const double v = ip[ci];
              const double* wr = wp + static_cast<std::size_t>(ci) * d.cout;
              for (int co = 0; co < d.cout; ++co) o[co] += v * wr[co];
            }
          }
        }
      }
}

void conv_backward(const StageDims& d, std::size_t batch, const double* in, const double* weight,
                   const double* dout, int kernel, double* dweight, double* dbias, double* din) {
  const int pad = kernel / 2;
  for (std::size_t b = 0; b < batch; ++b)
    for (int y = 0; y < d.h; ++y)
      for (int x = 0; x < d.w; ++x) {
        const double* g = dout + ((b * d.h + y) * d.w + x) * d.cout;
        for (int co = 0; co < d.cout; ++co) dbias[co] += g[co];
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = y + ky - pad;
          if (iy < 0 || iy >= d.h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = x + kx - pad;
            if (ix < 0 || ix >= d.w) continue;
            const std::size_t in_off = ((b * d.h + iy) * d.w + ix) * d.cin;
            const std::size_t w_off = static_cast<std::size_t>((ky * kernel + kx) * d.cin) * d.cout;
            for (int ci = 0; ci < d.cin; ++ci) {
              const double v = in[in_off + ci];
              double* dw = dweight + w_off + static_cast<std::size_t>(ci) * d.cout;
              const double* wr = weight + w_off + static_cast<std::size_t>(ci) * d.cout;
              double acc = 0.0;
              for (int co = 0; co < d.cout; ++co) {
                dw[co] += v * g[co];
                acc += wr[co] * g[co];
              }
              if (din) din[in_off + ci] += acc;
            }
          }
        }
      }
}

struct PassOptions {
  Mode mode = Mode::kInference;
  bool dropout = false;
  bool keep_cache = false;
};

void run_forward(const Model& model, std::span<const double> inputs, std::size_t batch,
                 const PassOptions& opt, Rng& rng, ForwardCache& cache) {
  const auto& cfg = model.config;
  if (inputs.size() != batch * cfg.input_size())
    throw ConfigError("forward: input holds " + std::to_string(inputs.size()) + " values, expected " +
                      std::to_string(batch * cfg.input_size()));
  const auto dims = stage_dims(cfg);
  std::vector<double> act(inputs.begin(), inputs.end());
  for (int s = 0; s < kStages; ++s) {
    const auto& d = dims[s];
    auto& sc = cache.stages[s];
    const std::size_t n_pix = batch * static_cast<std::size_t>(d.h) * d.w;
    std::vector<double> z(n_pix * d.cout);
    conv_forward(d, batch, act.data(), model.params[conv_w(s)].data.data(),
                 model.params[conv_b(s)].data.data(), cfg.kernel, z.data());

    // batch norm
    std::vector<double> mean(d.cout, 0.0), var(d.cout, 0.0);
    if (opt.mode == Mode::kTraining) {
      for (std::size_t p = 0; p < n_pix; ++p)
        for (int c = 0; c < d.cout; ++c) mean[c] += z[p * d.cout + c];
      for (auto& m : mean) m /= static_cast<double>(n_pix);
      for (std::size_t p = 0; p < n_pix; ++p)
        for (int c = 0; c < d.cout; ++c) {
          const double t = z[p * d.cout + c] - mean[c];
          var[c] += t * t;
        }
      for (auto& v : var) v /= static_cast<double>(n_pix);
    } else {
      mean = model.buffers[run_mean(s)].data;
      var = model.buffers[run_var(s)].data;
    }
    std::vector<double> inv_std(d.cout);
    for (int c = 0; c < d.cout; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + cfg.bn_epsilon);
    const auto& gamma = model.params[bn_gamma(s)].data;
    const auto& beta = model.params[bn_beta(s)].data;
    for (std::size_t p = 0; p < n_pix; ++p)
      for (int c = 0; c < d.cout; ++c) {
        double& v = z[p * d.cout + c];
        v = (v - mean[c]) * inv_std[c];  // z now holds zhat
      }

    // max pool over the affine output, floor division of the grid
    const std::size_t n_out = batch * static_cast<std::size_t>(d.ph) * d.pw * d.cout;
    std::vector<double> pooled(n_out);
    std::vector<std::size_t> arg(n_out);
    for (std::size_t b = 0; b < batch; ++b)
      for (int py = 0; py < d.ph; ++py)
        for (int px = 0; px < d.pw; ++px)
          for (int c = 0; c < d.cout; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            std::size_t best_i = 0;
            for (int ky = 0; ky < d.pool; ++ky)
              for (int kx = 0; kx < d.pool; ++kx) {
                const int y = py * d.pool + ky, x = px * d.pool + kx;
                const std::size_t i = ((b * d.h + y) * d.w + x) * d.cout + c;
                const double v = gamma[c] * z[i] + beta[c];
                if (v > best) {
                  best = v;
                  best_i = i;
                }
              }
            const std::size_t o = ((b * d.ph + py) * d.pw + px) * d.cout + c;
            pooled[o] = best;
            arg[o] = best_i;
          }

    std::vector<double> drop;
    if (opt.dropout && cfg.dropout_rate > 0.0) {
      drop = dropout_mask(n_out, cfg.dropout_rate, rng);
      for (std::size_t i = 0; i < n_out; ++i) pooled[i] *= drop[i];
    }

    std::vector<double> next(n_out);
    for (std::size_t i = 0; i < n_out; ++i) next[i] = leaky(pooled[i], cfg.leaky_slope);

    if (opt.keep_cache) {
      sc.input = std::move(act);
      sc.zhat = std::move(z);
      sc.inv_std = std::move(inv_std);
      sc.argmax = std::move(arg);
      sc.drop = std::move(drop);
      sc.pre_act = std::move(pooled);
    }
    sc.mean = std::move(mean);
    sc.var = std::move(var);
    act = std::move(next);
  }

  const auto widths = dense_widths(cfg);
  for (int layer = 0; layer < kDenseLayers; ++layer) {
    const int nin = widths[layer], nout = widths[layer + 1];
    const auto& w = model.params[fc_w(layer)].data;
    const auto& bias = model.params[fc_b(layer)].data;
    std::vector<double> z(batch * nout);
    for (std::size_t b = 0; b < batch; ++b) {
      double* o = &z[b * nout];
      for (int j = 0; j < nout; ++j) o[j] = bias[j];
      for (int i = 0; i < nin; ++i) {
        const double v = act[b * nin + i];
        const double* wr = &w[static_cast<std::size_t>(i) * nout];
        for (int j = 0; j < nout; ++j) o[j] += v * wr[j];
      }
    }
    const bool last = layer == kDenseLayers - 1;
    std::vector<double> next = z;
    if (!last)
      for (double& v : next) v = leaky(v, cfg.leaky_slope);
    if (opt.keep_cache) {
      cache.dense[layer].input = std::move(act);
      cache.dense[layer].pre_act = std::move(z);
    }
    act = std::move(next);
  }
  cache.logits = std::move(act);
}

void run_backward(const Model& model, std::size_t batch, ForwardCache& cache,
                  std::vector<double> dlogits, Gradients& grads) {
  const auto& cfg = model.config;
  const auto widths = dense_widths(cfg);
  std::vector<double> g = std::move(dlogits);
  for (int layer = kDenseLayers - 1; layer >= 0; --layer) {
    const int nin = widths[layer], nout = widths[layer + 1];
    auto& dc = cache.dense[layer];
    if (layer != kDenseLayers - 1)
      for (std::size_t i = 0; i < g.size(); ++i)
        if (dc.pre_act[i] <= 0.0) g[i] *= cfg.leaky_slope;
    const auto& w = model.params[fc_w(layer)].data;
    auto& dw = grads[fc_w(layer)];
    auto& db = grads[fc_b(layer)];
    std::vector<double> gin(batch * nin, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* gr = &g[b * nout];
      for (int j = 0; j < nout; ++j) db[j] += gr[j];
      for (int i = 0; i < nin; ++i) {
        const double v = dc.input[b * nin + i];
        double* dwr = &dw[static_cast<std::size_t>(i) * nout];
        const double* wr = &w[static_cast<std::size_t>(i) * nout];
        double acc = 0.0;
        for (int j = 0; j < nout; ++j) {
          dwr[j] += v * gr[j];
          acc += wr[j] * gr[j];
        }
        gin[b * nin + i] = acc;
      }
    }
    g = std::move(gin);
  }

  const auto dims = stage_dims(cfg);
  for (int s = kStages - 1; s >= 0; --s) {
    const auto& d = dims[s];
    auto& sc = cache.stages[s];
    // leaky ReLU then dropout
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (sc.pre_act[i] <= 0.0) g[i] *= cfg.leaky_slope;
      if (!sc.drop.empty()) g[i] *= sc.drop[i];
    }
    const std::size_t n_pix = batch * static_cast<std::size_t>(d.h) * d.w;
    std::vector<double> dy(n_pix * d.cout, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) dy[sc.argmax[i]] += g[i];

    const auto& gamma = model.params[bn_gamma(s)].data;
    auto& dgamma = grads[bn_gamma(s)];
    auto& dbeta = grads[bn_beta(s)];
    std::vector<double> sum_dxhat(d.cout, 0.0), sum_dxhat_xhat(d.cout, 0.0);
    for (std::size_t p = 0; p < n_pix; ++p)
      for (int c = 0; c < d.cout; ++c) {
        const std::size_t i = p * d.cout + c;
        dgamma[c] += dy[i] * sc.zhat[i];
        dbeta[c] += dy[i];
        const double dxhat = dy[i] * gamma[c];
        sum_dxhat[c] += dxhat;
        sum_dxhat_xhat[c] += dxhat * sc.zhat[i];
      }
    const double inv_n = 1.0 / static_cast<double>(n_pix);
    std::vector<double> dz(n_pix * d.cout);
    for (std::size_t p = 0; p < n_pix; ++p)
      for (int c = 0; c < d.cout; ++c) {
        const std::size_t i = p * d.cout + c;
        const double dxhat = dy[i] * gamma[c];
        dz[i] = sc.inv_std[c] * (dxhat - inv_n * sum_dxhat[c] - sc.zhat[i] * inv_n * sum_dxhat_xhat[c]);
      }

    std::vector<double> din;
    if (s > 0) din.assign(batch * static_cast<std::size_t>(d.h) * d.w * d.cin, 0.0);
    conv_backward(d, batch, sc.input.data(), model.params[conv_w(s)].data.data(), dz.data(), cfg.kernel,
                  grads[conv_w(s)].data(), grads[conv_b(s)].data(), s > 0 ? din.data() : nullptr);
    // pooled map of stage s-1 equals this stage's input grid
    g = std::move(din);
  }
}

void he_uniform(std::vector<double>& w, std::size_t fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : w) v = dist(rng);
}

}  // namespace

// ---- config ----------------------------------------------------------------

std::array<std::array<int, 2>, 4> ModelConfig::spatial_chain() const {
  std::array<std::array<int, 2>, 4> chain{};
  chain[0] = {height, width};
  for (int s = 0; s < kStages; ++s) {
    if (pools[s] < 1) throw ConfigError("stage " + std::to_string(s + 1) + ": pool size must be >= 1");
    const int h = chain[s][0] / pools[s], w = chain[s][1] / pools[s];
    if (h < 1 || w < 1)
      throw ConfigError("stage " + std::to_string(s + 1) + ": pooling " + std::to_string(pools[s]) + "x" +
                        std::to_string(pools[s]) + " collapses a " + std::to_string(chain[s][0]) + "x" +
                        std::to_string(chain[s][1]) + " map");
    chain[s + 1] = {h, w};
  }
  return chain;
}

void ModelConfig::validate() const {
  if (height < 1 || width < 1 || in_channels < 1) throw ConfigError("input shape must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd and positive");
  for (int s = 0; s < kStages; ++s)
    if (conv_channels[s] < 1) throw ConfigError("stage " + std::to_string(s + 1) + ": channel count must be >= 1");
  if (fc_widths[0] < 1 || fc_widths[1] < 1) throw ConfigError("dense widths must be >= 1");
  if (classes < 2) throw ConfigError("need at least two classes");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  if (bn_momentum < 0.0 || bn_momentum > 1.0) throw ConfigError("batch-norm momentum must lie in [0, 1]");
  spatial_chain();
}

// ---- model -----------------------------------------------------------------

Model model_init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model model;
  model.config = cfg;
  Rng rng = derive_rng(seed, {0x6e6e});
  const auto dims = stage_dims(cfg);
  for (int s = 0; s < kStages; ++s) {
    const auto& d = dims[s];
    const auto k = static_cast<std::size_t>(cfg.kernel);
    const auto cin = static_cast<std::size_t>(d.cin), cout = static_cast<std::size_t>(d.cout);
    const std::string tag = std::to_string(s + 1);
    Tensor w{"conv" + tag + ".weight", {k, k, cin, cout}, std::vector<double>(k * k * cin * cout)};
    he_uniform(w.data, k * k * cin, rng);
    model.params.push_back(std::move(w));
    model.params.push_back({"conv" + tag + ".bias", {cout}, std::vector<double>(cout, 0.0)});
    model.params.push_back({"bn" + tag + ".gamma", {cout}, std::vector<double>(cout, 1.0)});
    model.params.push_back({"bn" + tag + ".beta", {cout}, std::vector<double>(cout, 0.0)});
    model.buffers.push_back({"bn" + tag + ".running_mean", {cout}, std::vector<double>(cout, 0.0)});
    model.buffers.push_back({"bn" + tag + ".running_var", {cout}, std::vector<double>(cout, 1.0)});
  }
  const auto widths = dense_widths(cfg);
  const char* names[kDenseLayers] = {"fc1", "fc2", "out"};
  for (int layer = 0; layer < kDenseLayers; ++layer) {
    const auto nin = static_cast<std::size_t>(widths[layer]), nout = static_cast<std::size_t>(widths[layer + 1]);
    Tensor w{std::string(names[layer]) + ".weight", {nin, nout}, std::vector<double>(nin * nout)};
    he_uniform(w.data, nin, rng);
    model.params.push_back(std::move(w));
    model.params.push_back({std::string(names[layer]) + ".bias", {nout}, std::vector<double>(nout, 0.0)});
  }
  return model;
}

std::size_t param_count(const Model& model) {
  std::size_t n = 0;
  for (const auto& t : model.params) n += t.data.size();
  return n;
}

std::size_t param_count(const ModelConfig& cfg) {
  const auto dims = stage_dims(cfg);
  std::size_t n = 0;
  for (const auto& d : dims)
    n += static_cast<std::size_t>(cfg.kernel * cfg.kernel * d.cin * d.cout) + 3 * static_cast<std::size_t>(d.cout);
  const auto widths = dense_widths(cfg);
  for (int layer = 0; layer < kDenseLayers; ++layer)
    n += static_cast<std::size_t>(widths[layer]) * widths[layer + 1] + widths[layer + 1];
  return n;
}

std::vector<double> forward(const Model& model, std::span<const double> inputs, std::size_t batch, Mode mode,
                            Rng& rng) {
  ForwardCache cache;
  PassOptions opt{mode, mode == Mode::kTraining, false};
  run_forward(model, inputs, batch, opt, rng, cache);
  return std::move(cache.logits);
}

double softmax_cross_entropy(std::span<const double> logits, std::span<const int> labels, int classes) {
  const std::size_t batch = labels.size();
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const double* z = &logits[b * classes];
    const double mx = *std::max_element(z, z + classes);
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += std::exp(z[c] - mx);
    total += std::log(sum) + mx - z[labels[b]];
  }
  return total / static_cast<double>(batch);
}

LossResult loss_and_grads(const Model& model, std::span<const double> inputs, std::span<const int> labels,
                          Rng& rng, const LossOptions& opts) {
  const auto& cfg = model.config;
  const std::size_t batch = labels.size();
  if (batch == 0) throw ConfigError("empty batch");
  for (int y : labels)
    if (y < 0 || y >= cfg.classes) throw ConfigError("label " + std::to_string(y) + " out of range");
  ForwardCache cache;
  PassOptions opt{Mode::kTraining, opts.dropout, true};
  run_forward(model, inputs, batch, opt, rng, cache);

  LossResult res;
  res.loss = softmax_cross_entropy(cache.logits, labels, cfg.classes);
  std::vector<double> dlogits(cache.logits.size());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* z = &cache.logits[b * cfg.classes];
    double* g = &dlogits[b * cfg.classes];
    const double mx = *std::max_element(z, z + cfg.classes);
    double sum = 0.0;
    for (int c = 0; c < cfg.classes; ++c) sum += std::exp(z[c] - mx);
    for (int c = 0; c < cfg.classes; ++c) g[c] = std::exp(z[c] - mx) / sum / static_cast<double>(batch);
    g[labels[b]] -= 1.0 / static_cast<double>(batch);
  }
  res.grads.resize(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i) res.grads[i].assign(model.params[i].data.size(), 0.0);
  for (const auto& sc : cache.stages) {
    res.batch_mean.push_back(sc.mean);
    res.batch_var.push_back(sc.var);
  }
  run_backward(model, batch, cache, std::move(dlogits), res.grads);
  return res;
}

AdamState AdamState::for_model(const Model& model, double lr) {
  AdamState st;
  st.lr = lr;
  for (const auto& t : model.params) {
    st.m.emplace_back(t.data.size(), 0.0);
    st.v.emplace_back(t.data.size(), 0.0);
  }
  return st;
}

double train_step(Model& model, AdamState& adam, std::span<const double> inputs, std::span<const int> labels,
                  Rng& rng) {
  auto res = loss_and_grads(model, inputs, labels, rng);
  ++adam.step;
  const double t = static_cast<double>(adam.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t p = 0; p < model.params.size(); ++p) {
    auto& w = model.params[p].data;
    auto& m = adam.m[p];
    auto& v = adam.v[p];
    const auto& g = res.grads[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
      v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      w[i] -= adam.lr * mhat / (std::sqrt(vhat) + adam.epsilon);
    }
  }
  const double mom = model.config.bn_momentum;
  for (int s = 0; s < kStages; ++s) {
    auto& rm = model.buffers[run_mean(s)].data;
    auto& rv = model.buffers[run_var(s)].data;
    for (std::size_t c = 0; c < rm.size(); ++c) {
      rm[c] = mom * rm[c] + (1.0 - mom) * res.batch_mean[s][c];
      rv[c] = mom * rv[c] + (1.0 - mom) * res.batch_var[s][c];
    }
  }
  return res.loss;
}

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  const double keep = 1.0 - rate;
  std::bernoulli_distribution keep_draw(keep);
  std::vector<double> drop(n);
  for (double& v : drop) v = keep_draw(rng) ? 1.0 / keep : 0.0;
  return drop;
}

int argmax(std::span<const double> logits) {
  int best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

std::vector<int> predict_batch(const Model& model, std::span<const double> inputs, std::size_t batch) {
  Rng unused(0);
  const auto logits = forward(model, inputs, batch, Mode::kInference, unused);
  std::vector<int> out(batch);
  const auto classes = static_cast<std::size_t>(model.config.classes);
  for (std::size_t b = 0; b < batch; ++b)
    out[b] = argmax(std::span<const double>(logits).subspan(b * classes, classes));
  return out;
}

int predict(const Model& model, std::span<const double> input) { return predict_batch(model, input, 1).front(); }

// ---- serialization -------------------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little, "model container assumes a little-endian host");

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  template <typename T>
  void put(T v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_doubles(const std::vector<double>& v) {
    os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}
  template <typename T>
  T get() {
    T v{};
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is_) throw CorruptModelError("corrupt container: unexpected end of " + path_);
    return v;
  }
  void get_doubles(std::vector<double>& v) {
    is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is_) throw CorruptModelError("corrupt container: unexpected end of " + path_);
  }

 private:
  std::istream& is_;
  std::string path_;
};

void write_config(Writer& w, const ModelConfig& c) {
  w.put<std::int32_t>(c.height);
  w.put<std::int32_t>(c.width);
  w.put<std::int32_t>(c.in_channels);
  for (int v : c.conv_channels) w.put<std::int32_t>(v);
  w.put<std::int32_t>(c.kernel);
  for (int v : c.pools) w.put<std::int32_t>(v);
  for (int v : c.fc_widths) w.put<std::int32_t>(v);
  w.put<std::int32_t>(c.classes);
  w.put<double>(c.leaky_slope);
  w.put<double>(c.dropout_rate);
  w.put<double>(c.bn_momentum);
  w.put<double>(c.bn_epsilon);
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.height = r.get<std::int32_t>();
  c.width = r.get<std::int32_t>();
  c.in_channels = r.get<std::int32_t>();
  for (int& v : c.conv_channels) v = r.get<std::int32_t>();
  c.kernel = r.get<std::int32_t>();
  for (int& v : c.pools) v = r.get<std::int32_t>();
  for (int& v : c.fc_widths) v = r.get<std::int32_t>();
  c.classes = r.get<std::int32_t>();
  c.leaky_slope = r.get<double>();
  c.dropout_rate = r.get<double>();
  c.bn_momentum = r.get<double>();
  c.bn_epsilon = r.get<double>();
  return c;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path, const AdamState* adam) {
  // write to a sibling file first so an interrupted save never clobbers a
  // valid container
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write model file: " + path.string());
    Writer w(os);
    os.write(kMagic, sizeof(kMagic));
    w.put<std::uint32_t>(kFormatVersion);
    write_config(w, model.config);
    w.put<std::uint64_t>(param_count(model));
    w.put<std::uint32_t>(adam ? 1u : 0u);
    for (const auto& t : model.params) w.put_doubles(t.data);
    for (const auto& t : model.buffers) w.put_doubles(t.data);
    if (adam) {
      w.put<std::uint64_t>(adam->step);
      w.put<double>(adam->lr);
      w.put<double>(adam->beta1);
      w.put<double>(adam->beta2);
      w.put<double>(adam->epsilon);
      for (const auto& m : adam->m) w.put_doubles(m);
      for (const auto& v : adam->v) w.put_doubles(v);
    }
    if (!os) throw IoError("write failed: " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file: " + path.string());
  char magic[sizeof(kMagic)] = {};
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw NotAModelError("not a model file: " + path.string());
  Reader r(is, path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion)
    throw ModelVersionError("model format version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kFormatVersion) + ")");
  const ModelConfig cfg = read_config(r);
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw CorruptModelError(std::string("corrupt container: invalid config block: ") + e.what());
  }
  const auto stored = r.get<std::uint64_t>();
  const auto flags = r.get<std::uint32_t>();
  Checkpoint ck;
  ck.model = model_init(cfg, 0);
  if (stored != param_count(ck.model))
    throw ParamCountError("parameter count mismatch: file says " + std::to_string(stored) + ", config implies " +
                          std::to_string(param_count(ck.model)));
  for (auto& t : ck.model.params) r.get_doubles(t.data);
  for (auto& t : ck.model.buffers) r.get_doubles(t.data);
  if (flags & 1u) {
    ck.has_optimizer = true;
    ck.adam = AdamState::for_model(ck.model);
    ck.adam.step = r.get<std::uint64_t>();
    ck.adam.lr = r.get<double>();
    ck.adam.beta1 = r.get<double>();
    ck.adam.beta2 = r.get<double>();
    ck.adam.epsilon = r.get<double>();
    for (auto& m : ck.adam.m) r.get_doubles(m);
    for (auto& v : ck.adam.v) r.get_doubles(v);
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw CorruptModelError("corrupt container: trailing bytes in " + path.string());
  return ck;
}

Model load_model(const std::filesystem::path& path) { return load_checkpoint(path).model; }

}  // namespace sidoa::nn
