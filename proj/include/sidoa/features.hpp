// include/sidoa/features.hpp

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
#include <vector>

#include "sidoa/random.hpp"
#include "sidoa/room.hpp"
#include "sidoa/signal.hpp"

namespace sidoa {

inline constexpr int kMaxLag = 12;
inline constexpr int kNumLags = 2 * kMaxLag;  // lags -12 .. +11
inline constexpr std::size_t kFeatureSize =
    static_cast<std::size_t>(kNumArrayMics) * kNumArrayMics * kNumLags;

// GCC values for lags -kMaxLag .. kMaxLag-1, in that order. A peak at
// positive lag d means the second channel lags the first by d samples.
using LagVector = std::array<double, kNumLags>;

struct BinaryMask {
  std::vector<std::uint8_t> bits;  // kNumBins entries, 0 or 1
  std::size_t frame_index = 0;

  std::size_t count() const;
  static BinaryMask all_pass(std::size_t frame_index = 0);
};

// Phase differences in (-pi, pi], one per bin.
struct PhaseDifference {
  std::vector<double> phi;
};

struct GccFeatureMap {
  std::vector<double> values = std::vector<double>(kFeatureSize, 0.0);  // [k][l][lag]
  std::size_t frame_index = 0;

  double& at(int k, int l, int lag_index) { return values[offset(k, l, lag_index)]; }
  double at(int k, int l, int lag_index) const { return values[offset(k, l, lag_index)]; }

  static std::size_t offset(int k, int l, int lag_index) {
    return (static_cast<std::size_t>(k) * kNumArrayMics + static_cast<std::size_t>(l)) * kNumLags +
           static_cast<std::size_t>(lag_index);
  }
};

inline constexpr int lag_to_index(int lag) { return lag + kMaxLag; }
inline constexpr int index_to_lag(int index) { return index - kMaxLag; }

struct Alignment {
  TimeSignal aligned;
  int lag = 0;          // samples the external signal was delayed by
  bool silent = false;  // correlation was identically zero; lag forced to 0
};

inline constexpr double kMaxAlignmentSeconds = 0.05;

// Delays the external-mic signal by the lag in [0, 50 ms] maximizing its
// cross-correlation with the center array microphone. Length is preserved;
// the head is zero filled.
Alignment align_external(const TimeSignal& ext, const TimeSignal& center_mic,
                         double max_lag_seconds = kMaxAlignmentSeconds);

// Wrapped phase of a * conj(b) per bin; bins whose cross-spectrum magnitude
// is below 1e-12 get phase 0.
PhaseDifference phase_difference(const SpectralFrame& a, const SpectralFrame& b);

// Inverse transform of exp(i phi) restricted to the lag window.
LagVector informed_gcc_phat(const PhaseDifference& phi);

// Plain GCC-PHAT; identical to informed_gcc_phat(phase_difference(a, b)).
LagVector gcc_phat(const SpectralFrame& a, const SpectralFrame& b);

// Bit set where |E| >= nearest-rank x-th percentile of the frame's |E|.
BinaryMask compute_mask(const SpectralFrame& ext_frame, double percentile);

// Kept bins carry the true phase difference, masked bins a fresh uniform
// draw from [0, 2 pi] (wrapped). All kNumBins draws are consumed regardless
// of the mask.
PhaseDifference masked_phase(const SpectralFrame& a, const SpectralFrame& b,
                             const BinaryMask& mask, Rng& rng);

// All 225 ordered pairs of the 15 array spectra of one frame. With a mask,
// the informed path is used for every pair (same mask, independent noise
// per pair).
GccFeatureMap feature_map(std::span<const SpectralFrame> frame_specs, const BinaryMask* mask,
                          Rng& rng);

// Feature record file, little endian:
//   bytes 0-3   magic "GCCF"
//   bytes 4-7   u32 format version (1)
//   bytes 8-11  u32 M (15)
//   bytes 12-15 u32 lag count (24)
//   bytes 16-23 u64 frame count N
//   then N * M * M * 24 f64 values, each map row-major [k][l][lag].
void write_feature_records(const std::filesystem::path& path, std::span<const GccFeatureMap> maps);
std::vector<GccFeatureMap> read_feature_records(const std::filesystem::path& path);

}  // namespace sidoa
