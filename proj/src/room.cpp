// src/room.cpp

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

#include "sidoa/room.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sidoa/error.hpp"

namespace sidoa {

namespace {

constexpr double kPi = std::numbers::pi;
// Growth rate of the logarithmic element spacing along the arc.
constexpr double kLogSpacingRate = 1.5;

double deg2rad(double d) { return d * kPi / 180.0; }

double wrap360(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0) r += 360.0;
  if (r >= 360.0) r -= 360.0;
  return r;
}

bool inside(const Room& room, const Vec3& p, double margin) {
  return p.x > margin && p.y > margin && p.z > margin && p.x < room.dims.x - margin &&
         p.y < room.dims.y - margin && p.z < room.dims.z - margin;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

}  // namespace

MicArray build_array(const Vec3& center, double orientation_deg) {
  MicArray array;
  array.center = center;
  array.orientation_deg = orientation_deg;
  const double c = std::cos(deg2rad(orientation_deg));
  const double s = std::sin(deg2rad(orientation_deg));
  const double norm = std::exp(kLogSpacingRate) - 1.0;
  for (int i = 0; i < kNumArrayMics; ++i) {
    const int k = i - kCenterMic;
    const int mag = std::abs(k);
    // spacing grows geometrically from the center outwards
    const double frac = (std::exp(kLogSpacingRate * mag / kCenterMic) - 1.0) / norm;
    const double x = (k < 0 ? -1.0 : 1.0) * kArrayHalfWidth * frac;
    const double y = kArrayDepth * frac * frac;
    array.offsets[static_cast<std::size_t>(i)] = {c * x - s * y, s * x + c * y, 0.0};
  }
  return array;
}

namespace {

// Energy decay curve of a uniformly absorbing shoebox at unit log-absorption
// (-ln(1 - a) = 1), averaged over image directions: images seen along unit
// vector u hit rate(u) = |ux|/Lx + |uy|/Ly + |uz|/Lz walls per meter.
class ShoeboxDecay {
 public:
  explicit ShoeboxDecay(const Vec3& dims) {
    constexpr int kDirections = 1024;
    rates_.reserve(kDirections);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < kDirections; ++i) {
      const double z = 1.0 - (i + 0.5) / kDirections;  // upper hemisphere suffices
      const double r = std::sqrt(1.0 - z * z);
      const double phi = golden * i;
      const double rate = std::abs(r * std::cos(phi)) / dims.x + std::abs(r * std::sin(phi)) / dims.y +
                          std::abs(z) / dims.z;
      rates_.push_back(rate * kSpeedOfSound);  // reflections per second
    }
  }

  double edc(double t) const {
    double acc = 0.0;
    for (double a : rates_) acc += std::exp(-a * t) / a;
    return acc;
  }

  // T60 a Schroeder fit over -5..-25 dB would report at unit log-absorption.
  double schroeder_t60() const {
    const double e0 = edc(0.0);
    auto level_time = [&](double db) {
      double lo = 0.0, hi = 1.0;
      while (10.0 * std::log10(edc(hi) / e0) > db) hi *= 2.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (10.0 * std::log10(edc(mid) / e0) > db ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    };
    const double t5 = level_time(-5.0), t25 = level_time(-25.0);
    constexpr int kPoints = 64;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < kPoints; ++i) {
      const double t = t5 + (t25 - t5) * i / (kPoints - 1);
      const double db = 10.0 * std::log10(edc(t) / e0);
      sx += t;
      sy += db;
      sxx += t * t;
      sxy += t * db;
    }
    const double slope = (kPoints * sxy - sx * sy) / (kPoints * sxx - sx * sx);
    return -60.0 / slope;
  }

 private:
  std::vector<double> rates_;
};

}  // namespace

double absorption_for_t60(const Vec3& dims, double t60) {
  if (!(t60 > 0)) throw ConfigError("t60 must be positive");
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) throw ConfigError("room dimensions must be positive");
  // The decay shape scales as 1 / log-absorption, so one evaluation at unit
  // log-absorption fixes the coefficient for any target.
  const double log_absorption = ShoeboxDecay(dims).schroeder_t60() / t60;
  return 1.0 - std::exp(-log_absorption);
}

Room make_room(const Vec3& dims, double t60) {
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0) throw ConfigError("room dimensions must be positive");
  return Room{dims, t60, absorption_for_t60(dims, t60)};
}

namespace {

// Butterworth high-pass via the bilinear transform, run forward once.
void highpass_inplace(std::vector<double>& x, double cutoff, double fs) {
  if (cutoff >= fs / 2) throw ConfigError("high-pass cutoff must be below Nyquist");
  const double k = std::tan(kPi * cutoff / fs);
  const double q = 1.0 / std::sqrt(2.0);
  const double norm = 1.0 / (1.0 + k / q + k * k);
  const double b0 = norm, b1 = -2.0 * norm, b2 = norm;
  const double a1 = 2.0 * (k * k - 1.0) * norm;
  const double a2 = (1.0 - k / q + k * k) * norm;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (auto& v : x) {
    const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

std::vector<ImpulseResponse> simulate_rirs(const Room& room, const Vec3& src,
                                           std::span<const Vec3> mics, const RirOptions& opts) {
  if (!inside(room, src, 0.0)) throw ConfigError("source outside the room");
  for (const auto& m : mics) {
    if (!inside(room, m, 0.0)) throw ConfigError("microphone outside the room");
    if ((m - src).norm() < 1e-9) throw ConfigError("source and microphone coincide");
  }
  if (mics.empty()) return {};

  const double fs = opts.sample_rate;
  const int half = opts.sinc_taps / 2;
  double min_direct = std::numeric_limits<double>::infinity();
  double max_direct = 0.0;
  for (const auto& m : mics) {
    const double t = (m - src).norm() / kSpeedOfSound * fs;
    min_direct = std::min(min_direct, t);
    max_direct = std::max(max_direct, t);
  }
  const auto base_len = static_cast<std::size_t>(std::ceil(opts.length_factor * room.t60 * fs));
  const auto len = std::max(base_len, static_cast<std::size_t>(std::ceil(max_direct)) + half + 2);
  const double beta = std::sqrt(std::max(0.0, 1.0 - room.absorption));
  const double sinc_limit = min_direct + opts.sinc_window_samples;

  std::vector<ImpulseResponse> out(mics.size());
  for (std::size_t i = 0; i < mics.size(); ++i) {
    out[i].taps.assign(len, 0.0);
    out[i].mic_id = static_cast<int>(i);
  }

  auto add_image = [&](const Vec3& img, double gain) {
    for (std::size_t i = 0; i < mics.size(); ++i) {
      const double d = (img - mics[i]).norm();
      const double t = d / kSpeedOfSound * fs;
      if (t >= static_cast<double>(len - 1)) continue;
      const double a = gain / (4.0 * kPi * d);
      auto& h = out[i].taps;
      if (t < sinc_limit) {
        const long center = std::lround(t);
        for (long k = center - half; k <= center + half; ++k) {
          if (k < 0 || k >= static_cast<long>(len)) continue;
          const double x = static_cast<double>(k) - t;
          if (std::abs(x) >= half + 1) continue;
          const double w = 0.5 * (1.0 + std::cos(kPi * x / (half + 1)));
          h[static_cast<std::size_t>(k)] += a * w * sinc(x);
        }
      } else {
        const auto k = static_cast<std::size_t>(t);
        const double f = t - static_cast<double>(k);
        h[k] += a * (1.0 - f);
        h[k + 1] += a * f;
      }
    }
  };

  if (beta == 0.0) {
    add_image(src, 1.0);
    if (opts.highpass_hz > 0) {
      for (auto& r : out) highpass_inplace(r.taps, opts.highpass_hz, fs);
    }
    return out;
  }

  // Bounding sphere of the receivers, used to prune images.
  Vec3 centroid;
  for (const auto& m : mics) centroid = centroid + m;
  centroid = centroid * (1.0 / static_cast<double>(mics.size()));
  double spread = 0.0;
  for (const auto& m : mics) spread = std::max(spread, (m - centroid).norm());
  const double reach = static_cast<double>(len) / fs * kSpeedOfSound + spread;
  const double reach2 = reach * reach;

  const Vec3& L = room.dims;
  const int nx = static_cast<int>(std::ceil(reach / (2 * L.x))) + 1;
  const int ny = static_cast<int>(std::ceil(reach / (2 * L.y))) + 1;
  const int max_refl = 2 * (2 * nx + 1) + 2 * (2 * ny + 1) +
                       2 * (2 * (static_cast<int>(std::ceil(reach / (2 * L.z))) + 1) + 1);
  std::vector<double> beta_pow(static_cast<std::size_t>(max_refl) + 1, 1.0);
  for (std::size_t i = 1; i < beta_pow.size(); ++i) beta_pow[i] = beta_pow[i - 1] * beta;

  for (int u = 0; u <= 1; ++u) {
    const double sx = (1 - 2 * u) * src.x;
    for (int n = -nx; n <= nx; ++n) {
      const double X = sx + 2.0 * n * L.x;
      const double dx = X - centroid.x;
      if (dx * dx > reach2) continue;
      const int rx = std::abs(n - u) + std::abs(n);
      for (int v = 0; v <= 1; ++v) {
        const double sy = (1 - 2 * v) * src.y;
        for (int l = -ny; l <= ny; ++l) {
          const double Y = sy + 2.0 * l * L.y;
          const double dy = Y - centroid.y;
          const double rem = reach2 - dx * dx - dy * dy;
          if (rem < 0) continue;
          const int rxy = rx + std::abs(l - v) + std::abs(l);
          const double hz = std::sqrt(rem);
          for (int w = 0; w <= 1; ++w) {
            const double sz = (1 - 2 * w) * src.z;
            const int m_lo = static_cast<int>(std::ceil((centroid.z - hz - sz) / (2.0 * L.z)));
            const int m_hi = static_cast<int>(std::floor((centroid.z + hz - sz) / (2.0 * L.z)));
            for (int m = m_lo; m <= m_hi; ++m) {
              const double Z = sz + 2.0 * m * L.z;
              const int refl = rxy + std::abs(m - w) + std::abs(m);
              add_image({X, Y, Z}, beta_pow[static_cast<std::size_t>(refl)]);
            }
          }
        }
      }
    }
  }
  if (opts.highpass_hz > 0) {
    for (auto& r : out) highpass_inplace(r.taps, opts.highpass_hz, fs);
  }
  return out;
}

ImpulseResponse simulate_rir(const Room& room, const Vec3& src, const Vec3& mic,
                             const RirOptions& opts) {
  const Vec3 mics[] = {mic};
  return std::move(simulate_rirs(room, src, mics, opts).front());
}

double schroeder_t60(std::span<const double> taps, int sample_rate) {
  const std::size_t n = taps.size();
  std::vector<double> edc(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc += taps[i] * taps[i];
    edc[i] = acc;
  }
  if (acc <= 0) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t count = 0;
  bool reached = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double db = 10.0 * std::log10(edc[i] / acc);
    if (db > -5.0) continue;
    if (db < -25.0) {
      reached = true;
      break;
    }
    const double t = static_cast<double>(i) / sample_rate;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++count;
  }
  if (!reached || count < 2) return std::numeric_limits<double>::quiet_NaN();
  const double cnt = static_cast<double>(count);
  const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);  // dB per second
  return -60.0 / slope;
}

// ---- scenarios -----------------------------------------------------------

double azimuth_deg(const MicArray& array, const Vec3& p) {
  const Vec3 d = p - array.center;
  return wrap360(std::atan2(d.y, d.x) * 180.0 / kPi - array.orientation_deg);
}

int azimuth_to_class(double az) {
  const long c = std::lround(wrap360(az) / kClassWidthDeg);
  return static_cast<int>(((c % kNumClasses) + kNumClasses) % kNumClasses);
}

double class_to_azimuth(int cls) { return kClassWidthDeg * cls; }

double circular_distance_deg(double a, double b) {
  double d = std::fmod(a - b, 360.0);
  if (d < 0) d += 360.0;
  return d > 180.0 ? 360.0 - d : d;
}

ScenarioConfig ScenarioConfig::training() { return ScenarioConfig{}; }

ScenarioConfig ScenarioConfig::evaluation() {
  ScenarioConfig cfg;
  cfg.fixed_t60 = 0.5;
  cfg.fixed_snr_db = 20.0;
  return cfg;
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("scenario config: " + what); };
  const Vec3 lo = room_mean - room_spread;
  if (lo.x <= 0 || lo.y <= 0 || lo.z <= 0) fail("room dimensions must stay positive");
  if (room_spread.x < 0 || room_spread.y < 0 || room_spread.z < 0) fail("room spread must be >= 0");
  if (array_spread.x < 0 || array_spread.y < 0 || array_spread.z < 0) fail("array spread must be >= 0");
  if (!(min_distance > 0) || max_distance < min_distance) fail("source distance range invalid");
  if (!(t60_min > 0) || t60_max < t60_min) fail("t60 range invalid (t60 must be > 0)");
  if (fixed_t60 && !(*fixed_t60 > 0)) fail("fixed t60 must be > 0");
  if (snr_max_db < snr_min_db) fail("snr range invalid");
  if (min_desired_separation_deg < 0 || min_desired_separation_deg > 180) fail("desired separation out of [0, 180]");
  if (min_interferer_separation_deg < 0 || min_interferer_separation_deg > 180) fail("interferer separation out of [0, 180]");
  if (wall_margin < 0) fail("wall margin must be >= 0");
  if (max_attempts < 1) fail("max attempts must be >= 1");
}

std::vector<Vec3> Scenario::channel_positions() const {
  std::vector<Vec3> pos;
  pos.reserve(kNumChannels);
  for (int m = 0; m < kNumArrayMics; ++m) pos.push_back(array.position(m));
  pos.push_back(external_mic_position);
  return pos;
}

Scenario sample_scenario_layout(const ScenarioConfig& cfg, int num_interferers, Rng& rng) {
  cfg.validate();
  if (num_interferers < 0) throw ConfigError("interferer count must be >= 0");
  int attempts = 0;
  auto bump = [&] {
    if (++attempts > cfg.max_attempts)
      throw Error("scenario rejection sampling exceeded " + std::to_string(cfg.max_attempts) +
                  " attempts; configuration is infeasible");
  };
  auto jitter = [&](const Vec3& mean, const Vec3& spread) {
    return Vec3{mean.x + uniform(rng, -spread.x, spread.x), mean.y + uniform(rng, -spread.y, spread.y),
                mean.z + uniform(rng, -spread.z, spread.z)};
  };

  Scenario scn;
  scn.desired_class = uniform_int(rng, 0, kNumClasses - 1);
  scn.desired_azimuth_deg = class_to_azimuth(scn.desired_class);
  const double t60 = cfg.fixed_t60 ? *cfg.fixed_t60 : uniform(rng, cfg.t60_min, cfg.t60_max);
  scn.snr_db = cfg.fixed_snr_db ? *cfg.fixed_snr_db : uniform(rng, cfg.snr_min_db, cfg.snr_max_db);
  if (cfg.fixed_noise) {
    scn.noise_kind = *cfg.fixed_noise;
  } else {
    scn.noise_kind.spectrum = coin(rng) ? NoiseSpectrum::kWhite : NoiseSpectrum::kBabble;
    scn.noise_kind.field = coin(rng) ? NoiseField::kDiffuse : NoiseField::kUncorrelated;
  }

  auto place = [&](double az) {
    const double d = uniform(rng, cfg.min_distance, cfg.max_distance);
    const double a = deg2rad(scn.array.orientation_deg + az);
    return scn.array.center + Vec3{d * std::cos(a), d * std::sin(a), 0.0};
  };

  // Room and array first; the desired source is re-drawn in distance only so
  // that its class stays uniformly distributed. A layout that cannot host it
  // after a few tries is discarded as a whole.
  constexpr int kTriesPerLayout = 100;
  for (;;) {
    bump();
    scn.room = make_room(jitter(cfg.room_mean, cfg.room_spread), t60);
    scn.array = build_array(jitter(cfg.array_mean, cfg.array_spread), 0.0);
    bool array_ok = true;
    for (int m = 0; m < kNumArrayMics; ++m)
      if (!inside(scn.room, scn.array.position(m), 0.0)) array_ok = false;
    if (!array_ok) continue;
    bool placed = false;
    for (int k = 0; k < kTriesPerLayout && !placed; ++k) {
      bump();
      const Vec3 p = place(scn.desired_azimuth_deg);
      const Vec3 ext = p + Vec3{0, 0, cfg.external_mic_offset_z};
      if (inside(scn.room, p, cfg.wall_margin) && inside(scn.room, ext, cfg.wall_margin)) {
        scn.desired_position = p;
        scn.external_mic_position = ext;
        placed = true;
      }
    }
    if (placed) break;
  }

  while (scn.num_interferers() < num_interferers) {
    bump();
    const double az = uniform(rng, 0.0, 360.0);
    if (circular_distance_deg(az, scn.desired_azimuth_deg) < cfg.min_desired_separation_deg) continue;
    bool spaced = true;
    for (double other : scn.interferer_azimuths_deg)
      if (circular_distance_deg(az, other) < cfg.min_interferer_separation_deg) spaced = false;
    if (!spaced) continue;
    const Vec3 p = place(az);
    if (!inside(scn.room, p, cfg.wall_margin)) continue;
    scn.interferer_positions.push_back(p);
    scn.interferer_azimuths_deg.push_back(az);
  }
  return scn;
}

void attach_rirs(Scenario& scn, const RirOptions& opts) {
  const auto receivers = scn.channel_positions();
  std::vector<Vec3> sources{scn.desired_position};
  sources.insert(sources.end(), scn.interferer_positions.begin(), scn.interferer_positions.end());
  scn.rirs.clear();
  for (std::size_t s = 0; s < sources.size(); ++s) {
    auto set = simulate_rirs(scn.room, sources[s], receivers, opts);
    for (auto& r : set) r.source_id = static_cast<int>(s);
    scn.rirs.push_back(std::move(set));
  }
}

Scenario sample_scenario(const ScenarioConfig& cfg, int num_interferers, Rng& rng,
                         const RirOptions& opts) {
  Scenario scn = sample_scenario_layout(cfg, num_interferers, rng);
  attach_rirs(scn, opts);
  return scn;
}

// ---- serialization -------------------------------------------------------

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }
Vec3 json_vec(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

}  // namespace

std::string to_string(NoiseKind kind) {
  return std::string(kind.spectrum == NoiseSpectrum::kWhite ? "white" : "babble") + "-" +
         (kind.field == NoiseField::kDiffuse ? "diffuse" : "uncorrelated");
}

NoiseKind noise_kind_from_string(const std::string& s) {
  const auto dash = s.find('-');
  if (dash == std::string::npos) throw ConfigError("noise kind must look like white-diffuse: " + s);
  const auto spec = s.substr(0, dash);
  const auto field = s.substr(dash + 1);
  NoiseKind k;
  if (spec == "white") k.spectrum = NoiseSpectrum::kWhite;
  else if (spec == "babble") k.spectrum = NoiseSpectrum::kBabble;
  else throw ConfigError("unknown noise spectrum: " + spec);
  if (field == "diffuse") k.field = NoiseField::kDiffuse;
  else if (field == "uncorrelated") k.field = NoiseField::kUncorrelated;
  else throw ConfigError("unknown noise field: " + field);
  return k;
}

void to_json(nlohmann::json& j, const ScenarioConfig& c) {
  j = nlohmann::json{{"room_mean", vec_json(c.room_mean)},
                     {"room_spread", vec_json(c.room_spread)},
                     {"array_mean", vec_json(c.array_mean)},
                     {"array_spread", vec_json(c.array_spread)},
                     {"min_distance", c.min_distance},
                     {"max_distance", c.max_distance},
                     {"t60_min", c.t60_min},
                     {"t60_max", c.t60_max},
                     {"snr_min_db", c.snr_min_db},
                     {"snr_max_db", c.snr_max_db},
                     {"min_desired_separation_deg", c.min_desired_separation_deg},
                     {"min_interferer_separation_deg", c.min_interferer_separation_deg},
                     {"wall_margin", c.wall_margin},
                     {"external_mic_offset_z", c.external_mic_offset_z},
                     {"max_attempts", c.max_attempts}};
  j["fixed_t60"] = c.fixed_t60 ? nlohmann::json(*c.fixed_t60) : nlohmann::json(nullptr);
  j["fixed_snr_db"] = c.fixed_snr_db ? nlohmann::json(*c.fixed_snr_db) : nlohmann::json(nullptr);
  j["fixed_noise"] = c.fixed_noise ? nlohmann::json(to_string(*c.fixed_noise)) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, ScenarioConfig& c) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  auto get_vec = [&](const char* key, Vec3& field) {
    if (j.contains(key)) field = json_vec(j.at(key));
  };
  auto get_opt = [&](const char* key, std::optional<double>& field) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) field.reset();
    else field = j.at(key).get<double>();
  };
  get_vec("room_mean", c.room_mean);
  get_vec("room_spread", c.room_spread);
  get_vec("array_mean", c.array_mean);
  get_vec("array_spread", c.array_spread);
  get("min_distance", c.min_distance);
  get("max_distance", c.max_distance);
  get("t60_min", c.t60_min);
  get("t60_max", c.t60_max);
  get("snr_min_db", c.snr_min_db);
  get("snr_max_db", c.snr_max_db);
  get("min_desired_separation_deg", c.min_desired_separation_deg);
  get("min_interferer_separation_deg", c.min_interferer_separation_deg);
  get("wall_margin", c.wall_margin);
  get("external_mic_offset_z", c.external_mic_offset_z);
  get("max_attempts", c.max_attempts);
  get_opt("fixed_t60", c.fixed_t60);
  get_opt("fixed_snr_db", c.fixed_snr_db);
  if (j.contains("fixed_noise")) {
    if (j.at("fixed_noise").is_null()) c.fixed_noise.reset();
    else c.fixed_noise = noise_kind_from_string(j.at("fixed_noise").get<std::string>());
  }
}

nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json interferers = nlohmann::json::array();
  for (std::size_t i = 0; i < s.interferer_positions.size(); ++i)
    interferers.push_back({{"position", vec_json(s.interferer_positions[i])},
                           {"azimuth_deg", s.interferer_azimuths_deg[i]}});
  return {
      {"room", {{"dimensions", vec_json(s.room.dims)}, {"t60", s.room.t60}, {"absorption", s.room.absorption}}},
      {"array", {{"center", vec_json(s.array.center)}, {"orientation", s.array.orientation_deg}}},
      {"desired_position", vec_json(s.desired_position)},
      {"desired_class", s.desired_class},
      {"desired_azimuth_deg", s.desired_azimuth_deg},
      {"interferers", interferers},
      {"external_mic_position", vec_json(s.external_mic_position)},
      {"snr_db", std::isfinite(s.snr_db) ? nlohmann::json(s.snr_db) : nlohmann::json(nullptr)},
      {"noise_kind", to_string(s.noise_kind)},
  };
}

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  const auto& room = j.at("room");
  s.room.dims = json_vec(room.at("dimensions"));
  s.room.t60 = room.at("t60").get<double>();
  s.room.absorption = room.at("absorption").get<double>();
  const auto& arr = j.at("array");
  s.array = build_array(json_vec(arr.at("center")), arr.at("orientation").get<double>());
  s.desired_position = json_vec(j.at("desired_position"));
  s.desired_class = j.at("desired_class").get<int>();
  s.desired_azimuth_deg = j.at("desired_azimuth_deg").get<double>();
  for (const auto& it : j.at("interferers")) {
    s.interferer_positions.push_back(json_vec(it.at("position")));
    s.interferer_azimuths_deg.push_back(it.at("azimuth_deg").get<double>());
  }
  s.external_mic_position = json_vec(j.at("external_mic_position"));
  s.snr_db = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                      : j.at("snr_db").get<double>();
  s.noise_kind = noise_kind_from_string(j.at("noise_kind").get<std::string>());
  return s;
}

}  // namespace sidoa
