// include/sidoa/room.hpp

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
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sidoa/corpus.hpp"
#include "sidoa/random.hpp"
#include "sidoa/signal.hpp"

namespace sidoa {

inline constexpr double kSpeedOfSound = 343.0;  // m/s
inline constexpr int kNumArrayMics = 15;
inline constexpr int kNumChannels = kNumArrayMics + 1;  // array + external mic
inline constexpr int kExternalChannel = kNumArrayMics;
inline constexpr int kCenterMic = 7;
inline constexpr int kNumClasses = 72;
inline constexpr double kClassWidthDeg = 5.0;

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3&) const = default;
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

// 15-element planar arc. Offsets are relative to the array center (the
// position of the middle microphone) and already rotated by `orientation_deg`.
struct MicArray {
  std::array<Vec3, kNumArrayMics> offsets{};
  Vec3 center;
  double orientation_deg = 0.0;

  Vec3 position(int mic) const { return center + offsets.at(static_cast<std::size_t>(mic)); }
};

// Unrotated layout constants: half width 0.2 m, depth 0.13 m.
inline constexpr double kArrayHalfWidth = 0.20;
inline constexpr double kArrayDepth = 0.13;

MicArray build_array(const Vec3& center, double orientation_deg);

struct Room {
  Vec3 dims;
  double t60 = 0.5;
  // Uniform energy absorption coefficient of all six walls; 1 is anechoic.
  double absorption = 0.0;
};

// Room whose uniform absorption is calibrated so that the image-source
// response decays with the requested t60 (Schroeder, -5..-25 dB fit).
Room make_room(const Vec3& dims, double t60);
double absorption_for_t60(const Vec3& dims, double t60);

struct ImpulseResponse {
  std::vector<double> taps;  // 8 kHz, index 0 is emission time
  int source_id = 0;
  int mic_id = 0;
};

struct RirOptions {
  int sample_rate = kSampleRate;
  double length_factor = 1.2;    // response length in units of t60
  int sinc_taps = 81;            // fractional-delay interpolator length
  // Images arriving within this many samples after the earliest direct
  // path use the full windowed sinc; later ones use linear interpolation.
  double sinc_window_samples = 512.0;
  // Second-order high-pass applied to the finished response. Removes the
  // DC build-up of the all-positive image sum. Zero disables it.
  double highpass_hz = 50.0;
};

// Image-source RIR between `src` and `mic`. Throws ConfigError when the
// points coincide or lie outside the room.
ImpulseResponse simulate_rir(const Room& room, const Vec3& src, const Vec3& mic,
                             const RirOptions& opts = {});

// Same for several receivers at once (images are enumerated once).
std::vector<ImpulseResponse> simulate_rirs(const Room& room, const Vec3& src,
                                           std::span<const Vec3> mics,
                                           const RirOptions& opts = {});

// Reverberation time from Schroeder backward integration, extrapolated from
// the -5..-25 dB decay range. Returns NaN if the decay never reaches -25 dB.
double schroeder_t60(std::span<const double> taps, int sample_rate = kSampleRate);

enum class NoiseSpectrum { kWhite, kBabble };
enum class NoiseField { kDiffuse, kUncorrelated };

struct NoiseKind {
  NoiseSpectrum spectrum = NoiseSpectrum::kWhite;
  NoiseField field = NoiseField::kUncorrelated;
  bool operator==(const NoiseKind&) const = default;
};

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);

inline constexpr int kDiffusePlaneWaves = 36;
inline constexpr int kBabbleTalkers = 8;

// Background noise for receivers at `offsets` (relative to the array
// center). Uncorrelated: independent per channel. Diffuse: a ring of
// kDiffusePlaneWaves independent plane waves, each delayed per receiver.
// Babble sums kBabbleTalkers randomly offset corpus snippets per signal and
// throws ConfigError when the corpus is empty.
std::vector<TimeSignal> make_noise(NoiseKind kind, std::size_t samples,
                                   std::span<const Vec3> offsets, Rng& rng,
                                   const SpeechCorpus* corpus = nullptr);

struct ScenarioConfig {
  Vec3 room_mean{9.0, 5.0, 3.0};
  Vec3 room_spread{1.0, 1.0, 0.5};
  Vec3 array_mean{4.5, 2.5, 1.5};
  Vec3 array_spread{0.5, 0.5, 0.5};
  double min_distance = 1.0;
  double max_distance = 3.0;
  double t60_min = 0.13;
  double t60_max = 1.0;
  std::optional<double> fixed_t60;
  double snr_min_db = 0.0;
  double snr_max_db = 30.0;
  std::optional<double> fixed_snr_db;
  double min_desired_separation_deg = 25.0;
  double min_interferer_separation_deg = 5.0;
  double wall_margin = 0.2;            // m, for sources and the external mic
  double external_mic_offset_z = 0.2;  // m above the desired source
  int max_attempts = 10000;
  std::optional<NoiseKind> fixed_noise;

  static ScenarioConfig training();
  static ScenarioConfig evaluation();  // t60 0.5 s, SNR 20 dB

  // Throws ConfigError naming the offending field.
  void validate() const;
};

void to_json(nlohmann::json& j, const ScenarioConfig& cfg);
void from_json(const nlohmann::json& j, ScenarioConfig& cfg);

struct Scenario {
  Room room;
  MicArray array;
  Vec3 desired_position;
  int desired_class = 0;
  double desired_azimuth_deg = 0.0;  // relative to array orientation, on the 5 degree grid
  std::vector<Vec3> interferer_positions;
  std::vector<double> interferer_azimuths_deg;
  Vec3 external_mic_position;
  // rirs[source][channel]; source 0 is the desired speaker, channel 15 the
  // external microphone.
  std::vector<std::vector<ImpulseResponse>> rirs;
  // +inf disables noise.
  double snr_db = 20.0;
  NoiseKind noise_kind;

  int num_interferers() const { return static_cast<int>(interferer_positions.size()); }
  // Positions of all 16 channels in room coordinates.
  std::vector<Vec3> channel_positions() const;
};

// Geometry and acoustics, without RIRs.
Scenario sample_scenario_layout(const ScenarioConfig& cfg, int num_interferers, Rng& rng);
// Computes scn.rirs for every source and channel.
void attach_rirs(Scenario& scn, const RirOptions& opts = {});
// sample_scenario_layout + attach_rirs.
Scenario sample_scenario(const ScenarioConfig& cfg, int num_interferers, Rng& rng,
                         const RirOptions& opts = {});

// Azimuth of `p` seen from the array center, relative to the array
// orientation, in [0, 360).
double azimuth_deg(const MicArray& array, const Vec3& p);
int azimuth_to_class(double azimuth_deg);
double class_to_azimuth(int cls);
// Circular distance in degrees, [0, 180].
double circular_distance_deg(double a, double b);

// Scenario as JSON. RIRs are not stored; attach_rirs recreates them.
nlohmann::json scenario_to_json(const Scenario& scn);
Scenario scenario_from_json(const nlohmann::json& j);

struct RenderedScene {
  std::vector<TimeSignal> channels;       // 16 channels, noisy mixture
  std::vector<TimeSignal> desired_image;  // 16 channels, reverberant desired only
  double noise_gain = 0.0;
};

// Mixture of the desired source, the interferers (each scaled to the
// desired source's power) and background noise at scn.snr_db, where SNR is
// desired-image power over noise power, both averaged over the 15 array
// channels. All sources are trimmed to the shortest one; convolution tails
// are discarded.
RenderedScene render(const Scenario& scn, const TimeSignal& desired,
                     std::span<const TimeSignal> interferers, Rng& rng,
                     const SpeechCorpus* corpus = nullptr);

}  // namespace sidoa
