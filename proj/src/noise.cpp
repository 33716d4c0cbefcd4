// src/noise.cpp

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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sidoa/error.hpp"
#include "sidoa/room.hpp"

namespace sidoa {

namespace {

std::vector<double> white(std::size_t n, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = gauss(rng);
  return x;
}

std::vector<double> babble(std::size_t n, Rng& rng, const SpeechCorpus& corpus) {
  std::vector<double> x(n, 0.0);
  for (int t = 0; t < kBabbleTalkers; ++t) {
    const auto idx = std::uniform_int_distribution<std::size_t>(0, corpus.size() - 1)(rng);
    const auto snippet = corpus.segment(idx, n, rng);
    // random circular offset inside the output as well
    const auto shift = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    for (std::size_t i = 0; i < n; ++i) x[(i + shift) % n] += snippet[i];
  }
  normalize_power(x);
  return x;
}

// Convolves `source` with each RIR; every output is cut to `length`.
std::vector<std::vector<double>> convolve_many(std::span<const double> source,
                                               const std::vector<ImpulseResponse>& rirs,
                                               std::size_t length) {
  std::size_t max_rir = 1;
  for (const auto& r : rirs) max_rir = std::max(max_rir, r.taps.size());
  const std::size_t n = next_pow2(source.size() + max_rir - 1);
  const auto fs = real_fft(source, n);
  std::vector<std::vector<double>> out;
  out.reserve(rirs.size());
  for (const auto& r : rirs) {
    auto fr = real_fft(r.taps, n);
    for (std::size_t k = 0; k < fr.size(); ++k) fr[k] *= fs[k];
    auto y = real_ifft(fr, n);
    y.resize(length);
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace

std::vector<TimeSignal> make_noise(NoiseKind kind, std::size_t samples,
                                   std::span<const Vec3> offsets, Rng& rng,
                                   const SpeechCorpus* corpus) {
  const bool is_babble = kind.spectrum == NoiseSpectrum::kBabble;
  if (is_babble && (corpus == nullptr || corpus->empty()))
    throw ConfigError("babble noise requested but the speech corpus is empty");
  std::vector<TimeSignal> out(offsets.size());
  for (auto& ch : out) ch.samples.assign(samples, 0.0);
  if (samples == 0) return out;

  auto draw = [&](std::size_t n) { return is_babble ? babble(n, rng, *corpus) : white(n, rng); };

  if (kind.field == NoiseField::kUncorrelated) {
    for (auto& ch : out) ch.samples = draw(samples);
    return out;
  }

  // Diffuse-like field: plane waves from evenly spaced azimuths (random ring
  // rotation), applied as fractional circular shifts in the frequency domain.
  double max_reach = 0.0;
  for (const auto& o : offsets) max_reach = std::max(max_reach, std::hypot(o.x, o.y));
  const std::size_t pad = static_cast<std::size_t>(std::ceil(max_reach / kSpeedOfSound * kSampleRate)) + 1;
  const std::size_t n = next_pow2(samples + 2 * pad);
  const std::size_t bins = n / 2 + 1;
  std::vector<std::vector<Complex>> acc(offsets.size(), std::vector<Complex>(bins));
  const double rotation = uniform(rng, 0.0, 2.0 * std::numbers::pi / kDiffusePlaneWaves);
  for (int q = 0; q < kDiffusePlaneWaves; ++q) {
    const double az = rotation + 2.0 * std::numbers::pi * q / kDiffusePlaneWaves;
    const double ux = std::cos(az), uy = std::sin(az);
    const auto spec = real_fft(draw(n), n);
    for (std::size_t c = 0; c < offsets.size(); ++c) {
      // receivers displaced towards the incoming wave hear it earlier
      const double delay = -(offsets[c].x * ux + offsets[c].y * uy) / kSpeedOfSound * kSampleRate;
      const double step_angle = -2.0 * std::numbers::pi * delay / static_cast<double>(n);
      auto& a = acc[c];
      const Complex rot = std::polar(1.0, step_angle);
      Complex phasor{1.0, 0.0};
      for (std::size_t k = 0; k < bins; ++k) {
        if (k % 256 == 0) phasor = std::polar(1.0, step_angle * static_cast<double>(k));
        a[k] += spec[k] * phasor;
        phasor *= rot;
      }
    }
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(kDiffusePlaneWaves));
  for (std::size_t c = 0; c < offsets.size(); ++c) {
    auto x = real_ifft(acc[c], n);
    out[c].samples.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(samples));
    for (double& v : out[c].samples) v *= scale;
  }
  return out;
}

RenderedScene render(const Scenario& scn, const TimeSignal& desired,
                     std::span<const TimeSignal> interferers, Rng& rng,
                     const SpeechCorpus* corpus) {
  if (static_cast<int>(interferers.size()) != scn.num_interferers())
    throw ConfigError("render: scenario has " + std::to_string(scn.num_interferers()) +
                      " interferers but " + std::to_string(interferers.size()) + " signals given");
  if (scn.rirs.size() != interferers.size() + 1) throw ConfigError("render: scenario has no RIRs attached");
  if (desired.sample_rate != kSampleRate) throw ConfigError("render: desired signal is not 8 kHz");
  std::size_t length = desired.samples.size();
  for (const auto& s : interferers) {
    if (s.sample_rate != kSampleRate) throw ConfigError("render: interferer signal is not 8 kHz");
    length = std::min(length, s.samples.size());
  }

  RenderedScene out;
  out.channels.assign(kNumChannels, TimeSignal{std::vector<double>(length, 0.0), kSampleRate});
  const std::span<const double> d(desired.samples.data(), length);
  const double desired_power = mean_power(d);

  auto images = convolve_many(d, scn.rirs[0], length);
  out.desired_image.resize(kNumChannels);
  for (int c = 0; c < kNumChannels; ++c) {
    out.desired_image[c] = TimeSignal{images[c], kSampleRate};
    out.channels[c].samples = std::move(images[c]);
  }

  for (std::size_t j = 0; j < interferers.size(); ++j) {
    std::vector<double> src(interferers[j].samples.begin(),
                            interferers[j].samples.begin() + static_cast<std::ptrdiff_t>(length));
    const double p = mean_power(src);
    if (p > 0) {
      const double g = std::sqrt(desired_power / p);
      for (double& v : src) v *= g;
    }
    const auto imgs = convolve_many(src, scn.rirs[j + 1], length);
    for (int c = 0; c < kNumChannels; ++c)
      for (std::size_t i = 0; i < length; ++i) out.channels[c].samples[i] += imgs[c][i];
  }

  if (std::isfinite(scn.snr_db) && length > 0) {
    std::vector<Vec3> offsets;
    for (const auto& p : scn.channel_positions()) offsets.push_back(p - scn.array.center);
    const auto noise = make_noise(scn.noise_kind, length, offsets, rng, corpus);
    double p_img = 0.0, p_noise = 0.0;
    for (int c = 0; c < kNumArrayMics; ++c) {
      p_img += mean_power(out.desired_image[c].samples);
      p_noise += mean_power(noise[c].samples);
    }
    if (p_noise > 0 && p_img > 0) {
      out.noise_gain = std::sqrt(p_img / (p_noise * std::pow(10.0, scn.snr_db / 10.0)));
      for (int c = 0; c < kNumChannels; ++c)
        for (std::size_t i = 0; i < length; ++i)
          out.channels[c].samples[i] += out.noise_gain * noise[c].samples[i];
    }
  }
  return out;
}

}  // namespace sidoa
