// src/features.cpp

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

#include "sidoa/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "sidoa/error.hpp"

namespace sidoa {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kPhatGuard = 1e-12;
constexpr char kFeatureMagic[4] = {'G', 'C', 'C', 'F'};
constexpr std::uint32_t kFeatureVersion = 1;

void check_bins(const SpectralFrame& f) {
  if (f.bins.size() != kNumBins)
    throw ConfigError("spectral frame has " + std::to_string(f.bins.size()) + " bins, expected " +
                      std::to_string(kNumBins));
}

}  // namespace

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::all_pass(std::size_t frame_index) {
  return BinaryMask{std::vector<std::uint8_t>(kNumBins, 1), frame_index};
}

Alignment align_external(const TimeSignal& ext, const TimeSignal& center_mic, double max_lag_seconds) {
  if (ext.sample_rate != center_mic.sample_rate)
    throw ConfigError("align_external: sample rates differ");
  if (ext.samples.size() < kFrameLength || center_mic.samples.size() < kFrameLength)
    throw ConfigError("align_external: signals shorter than one frame");

  const std::size_t len = ext.samples.size();
  const int max_lag = static_cast<int>(std::lround(max_lag_seconds * ext.sample_rate));
  const std::size_t n = next_pow2(std::max(len, center_mic.samples.size()) + max_lag + 1);
  auto fe = real_fft(ext.samples, n);
  const auto fc = real_fft(center_mic.samples, n);
  for (std::size_t k = 0; k < fe.size(); ++k) fe[k] = std::conj(fe[k]) * fc[k];
  // r[lag] = sum_n ext[n] * center[n + lag]
  const auto r = real_ifft(fe, n);

  Alignment out;
  double best = -std::numeric_limits<double>::infinity();
  double peak_abs = 0.0;
  for (int lag = 0; lag <= max_lag; ++lag) {
    peak_abs = std::max(peak_abs, std::abs(r[static_cast<std::size_t>(lag)]));
    if (r[static_cast<std::size_t>(lag)] > best) {
      best = r[static_cast<std::size_t>(lag)];
      out.lag = lag;
    }
  }
  const double e_ext = mean_power(ext.samples), e_ctr = mean_power(center_mic.samples);
  if (e_ext == 0.0 || e_ctr == 0.0 || peak_abs == 0.0) {
    out.lag = 0;
    out.silent = true;
  }
  out.aligned.sample_rate = ext.sample_rate;
  out.aligned.samples.assign(len, 0.0);
  for (std::size_t i = static_cast<std::size_t>(out.lag); i < len; ++i)
    out.aligned.samples[i] = ext.samples[i - static_cast<std::size_t>(out.lag)];
  return out;
}

PhaseDifference phase_difference(const SpectralFrame& a, const SpectralFrame& b) {
  check_bins(a);
  check_bins(b);
  PhaseDifference out;
  out.phi.resize(kNumBins);
  for (std::size_t k = 0; k < kNumBins; ++k) {
    const Complex cross = a.bins[k] * std::conj(b.bins[k]);
    double phi = std::abs(cross) < kPhatGuard ? 0.0 : std::arg(cross);
    if (phi <= -kPi) phi += 2.0 * kPi;
    out.phi[k] = phi;
  }
  return out;
}

LagVector informed_gcc_phat(const PhaseDifference& phi) {
  if (phi.phi.size() != kNumBins) throw ConfigError("phase vector must have 129 bins");
  std::vector<Complex> spec(kNumBins);
  for (std::size_t k = 0; k < kNumBins; ++k) spec[k] = std::polar(1.0, phi.phi[k]);
  const auto c = inverse_spectrum(spec);
  LagVector out{};
  constexpr long n = static_cast<long>(kFrameLength);
  for (int i = 0; i < kNumLags; ++i) {
    const long lag = index_to_lag(i);
    // value at lag tau is the circular correlation at -tau
    out[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(((-lag) % n + n) % n)];
  }
  return out;
}

LagVector gcc_phat(const SpectralFrame& a, const SpectralFrame& b) {
  return informed_gcc_phat(phase_difference(a, b));
}

BinaryMask compute_mask(const SpectralFrame& ext_frame, double percentile) {
  if (!(percentile >= 0.0 && percentile <= 100.0))
    throw ConfigError("mask percentile must lie in [0, 100]");
  const std::size_t n = ext_frame.bins.size();
  std::vector<double> mag(n);
  for (std::size_t k = 0; k < n; ++k) mag[k] = std::abs(ext_frame.bins[k]);
  BinaryMask mask;
  mask.frame_index = ext_frame.frame_index;
  mask.bits.assign(n, 1);
  // nearest rank: smallest m with at least x% of the values <= m
  const auto rank = static_cast<std::size_t>(std::ceil(percentile * static_cast<double>(n) / 100.0 - 1e-9));
  if (rank == 0 || n == 0) return mask;
  std::vector<double> sorted = mag;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  const double threshold = sorted[rank - 1];
  for (std::size_t k = 0; k < n; ++k) mask.bits[k] = mag[k] >= threshold ? 1 : 0;
  return mask;
}

PhaseDifference masked_phase(const SpectralFrame& a, const SpectralFrame& b,
                             const BinaryMask& mask, Rng& rng) {
  if (mask.bits.size() != kNumBins) throw ConfigError("mask must have 129 bins");
  PhaseDifference out = phase_difference(a, b);
  std::uniform_real_distribution<double> noise(0.0, 2.0 * kPi);
  for (std::size_t k = 0; k < kNumBins; ++k) {
    double u = noise(rng);
    if (mask.bits[k]) continue;
    if (u > kPi) u -= 2.0 * kPi;
    out.phi[k] = u;
  }
  return out;
}

GccFeatureMap feature_map(std::span<const SpectralFrame> frame_specs, const BinaryMask* mask, Rng& rng) {
  if (frame_specs.size() != static_cast<std::size_t>(kNumArrayMics))
    throw ConfigError("feature_map needs 15 spectra, got " + std::to_string(frame_specs.size()));
  GccFeatureMap map;
  map.frame_index = frame_specs.front().frame_index;
  for (int k = 0; k < kNumArrayMics; ++k) {
    for (int l = 0; l < kNumArrayMics; ++l) {
      const auto& a = frame_specs[static_cast<std::size_t>(k)];
      const auto& b = frame_specs[static_cast<std::size_t>(l)];
      const LagVector g = mask ? informed_gcc_phat(masked_phase(a, b, *mask, rng)) : gcc_phat(a, b);
      std::copy(g.begin(), g.end(), map.values.begin() + static_cast<std::ptrdiff_t>(GccFeatureMap::offset(k, l, 0)));
    }
  }
  return map;
}

void write_feature_records(const std::filesystem::path& path, std::span<const GccFeatureMap> maps) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write feature records: " + path.string());
  const std::uint32_t header[3] = {kFeatureVersion, static_cast<std::uint32_t>(kNumArrayMics),
                                   static_cast<std::uint32_t>(kNumLags)};
  const std::uint64_t count = maps.size();
  os.write(kFeatureMagic, 4);
  os.write(reinterpret_cast<const char*>(header), sizeof(header));
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& m : maps) {
    if (m.values.size() != kFeatureSize) throw IoError("feature map has wrong size");
    os.write(reinterpret_cast<const char*>(m.values.data()),
             static_cast<std::streamsize>(m.values.size() * sizeof(double)));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<GccFeatureMap> read_feature_records(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open feature records: " + path.string());
  char magic[4];
  std::uint32_t header[3];
  std::uint64_t count = 0;
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(header), sizeof(header));
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!is || std::memcmp(magic, kFeatureMagic, 4) != 0) throw IoError("not a feature record file: " + path.string());
  if (header[0] != kFeatureVersion) throw IoError("unsupported feature record version");
  if (header[1] != static_cast<std::uint32_t>(kNumArrayMics) || header[2] != static_cast<std::uint32_t>(kNumLags))
    throw IoError("feature record dimensions do not match 15 x 15 x 24");
  std::vector<GccFeatureMap> maps(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    maps[i].frame_index = i;
    is.read(reinterpret_cast<char*>(maps[i].values.data()),
            static_cast<std::streamsize>(kFeatureSize * sizeof(double)));
    if (!is) throw IoError("truncated feature record file: " + path.string());
  }
  return maps;
}

}  // namespace sidoa
