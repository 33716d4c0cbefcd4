// src/speech_synth.cpp

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

#include "sidoa/speech_synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <numbers>

#include "sidoa/error.hpp"

namespace sidoa {

namespace {

constexpr double kPi = std::numbers::pi;

// Vowel formant targets (Hz) for an adult male tract; scaled per voice.
constexpr std::array<std::array<double, 3>, 8> kVowels{{
    {730, 1090, 2440},  // a
    {530, 1840, 2480},  // e
    {270, 2290, 3010},  // i
    {570, 840, 2410},   // o
    {300, 870, 2240},   // u
    {660, 1720, 2410},  // ae
    {490, 1350, 1690},  // er
    {640, 1190, 2390},  // uh
}};

// Two-pole resonator with unit gain at DC, coefficients updated per sample.
class Resonator {
 public:
  double step(double x, double freq, double bw, double fs) {
    const double r = std::exp(-kPi * bw / fs);
    const double a1 = 2.0 * r * std::cos(2.0 * kPi * freq / fs);
    const double a2 = -r * r;
    const double g = 1.0 - a1 - a2;
    const double y = g * x + a1 * y1_ + a2 * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double y1_ = 0, y2_ = 0;
};

struct Segment {
  std::size_t length = 0;
  bool voiced = false;
  bool fricative = false;
  std::array<double, 3> f_start{}, f_end{};
  double f0_start = 0, f0_end = 0;
  double level = 1.0;
};

std::string speaker_file_name(std::size_t s) {
  std::string digits = std::to_string(s);
  if (digits.size() < 3) digits.insert(0, 3 - digits.size(), '0');
  return "speaker_" + digits + ".wav";
}

}  // namespace

VoiceParams random_voice(Rng& rng) {
  VoiceParams v;
  const bool low = coin(rng);
  v.f0_hz = low ? uniform(rng, 85.0, 150.0) : uniform(rng, 160.0, 260.0);
  v.formant_scale = low ? uniform(rng, 0.92, 1.05) : uniform(rng, 1.08, 1.22);
  v.f0_range = uniform(rng, 0.1, 0.35);
  v.breathiness = uniform(rng, 0.02, 0.1);
  v.speaking_rate = uniform(rng, 0.8, 1.25);
  return v;
}

TimeSignal synthesize_speech(const VoiceParams& voice, double seconds, int sample_rate, Rng& rng) {
  if (!(seconds > 0) || sample_rate <= 0) throw ConfigError("synthesize_speech: bad duration or rate");
  const double fs = sample_rate;
  const auto total = static_cast<std::size_t>(std::llround(seconds * fs));
  auto samples_of = [&](double s) { return static_cast<std::size_t>(std::max(1.0, s * fs)); };

  // Plan segments: words of 1..4 syllables separated by pauses.
  std::vector<Segment> plan;
  std::size_t planned = 0;
  int vowel = uniform_int(rng, 0, static_cast<int>(kVowels.size()) - 1);
  auto formants = [&](int v) {
    std::array<double, 3> f{};
    for (int i = 0; i < 3; ++i)
      f[i] = kVowels[v][i] * voice.formant_scale * uniform(rng, 0.93, 1.07);
    return f;
  };
  std::array<double, 3> prev = formants(vowel);
  while (planned < total) {
    const int syllables = uniform_int(rng, 1, 4);
    double f0 = voice.f0_hz * (1.0 + voice.f0_range * uniform(rng, -0.5, 0.5));
    for (int s = 0; s < syllables && planned < total; ++s) {
      if (coin(rng, 0.35)) {
        Segment fr;
        fr.fricative = true;
        fr.length = samples_of(uniform(rng, 0.04, 0.11) / voice.speaking_rate);
        fr.level = uniform(rng, 0.15, 0.4);
        fr.f_start = {uniform(rng, 2500, 3600), 0, 0};
        fr.f_end = fr.f_start;
        plan.push_back(fr);
        planned += fr.length;
      }
      Segment vs;
      vs.voiced = true;
      vs.length = samples_of(uniform(rng, 0.09, 0.26) / voice.speaking_rate);
      vowel = uniform_int(rng, 0, static_cast<int>(kVowels.size()) - 1);
      vs.f_start = prev;
      vs.f_end = formants(vowel);
      prev = vs.f_end;
      vs.f0_start = f0;
      f0 *= 1.0 + voice.f0_range * uniform(rng, -0.3, 0.2);  // mild declination
      f0 = std::clamp(f0, 0.6 * voice.f0_hz, 1.6 * voice.f0_hz);
      vs.f0_end = f0;
      vs.level = uniform(rng, 0.6, 1.0);
      plan.push_back(vs);
      planned += vs.length;
    }
    Segment pause;
    pause.length = samples_of(uniform(rng, 0.08, 0.35));
    plan.push_back(pause);
    planned += pause.length;
  }

  TimeSignal out;
  out.sample_rate = sample_rate;
  out.samples.reserve(planned);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::array<Resonator, 3> tract;
  Resonator frication;
  double phase = 0.0;
  double glottal_lp = 0.0;
  double radiation_prev = 0.0;
  const std::array<double, 3> bandwidths{70.0, 100.0, 140.0};
  const double nyquist_guard = 0.45 * fs;

  for (const auto& seg : plan) {
    const double n = static_cast<double>(seg.length);
    for (std::size_t i = 0; i < seg.length; ++i) {
      const double t = static_cast<double>(i) / n;
      // Raised-cosine onset and offset, 20% of the segment each.
      const double edge = std::min({1.0, t / 0.2, (1.0 - t) / 0.2});
      const double env = seg.level * 0.5 * (1.0 - std::cos(kPi * std::max(0.0, edge)));
      double y = 0.0;
      if (seg.voiced) {
        const double f0 = seg.f0_start + (seg.f0_end - seg.f0_start) * t;
        const double jitter = 1.0 + 0.01 * gauss(rng);
        phase += f0 * jitter / fs;
        double pulse = 0.0;
        if (phase >= 1.0) {
          phase -= std::floor(phase);
          pulse = 1.0;
        }
        // Spectral tilt of the glottal source.
        glottal_lp = 0.7 * glottal_lp + pulse;
        double x = glottal_lp + voice.breathiness * gauss(rng);
        for (int k = 0; k < 3; ++k) {
          const double f = std::min(seg.f_start[k] + (seg.f_end[k] - seg.f_start[k]) * t, nyquist_guard);
          x = tract[k].step(x, f, bandwidths[k], fs);
        }
        y = x - radiation_prev;  // lip radiation, a first difference
        radiation_prev = x;
      } else if (seg.fricative) {
        const double f = std::min(seg.f_start[0], nyquist_guard);
        y = 0.3 * frication.step(gauss(rng), f, 1500.0, fs);
      }
      out.samples.push_back(env * y);
    }
  }
  out.samples.resize(total);
  return out;
}

SpeechCorpus synthetic_corpus(std::size_t speakers, double seconds, std::uint64_t seed) {
  std::vector<TimeSignal> recs;
  std::vector<std::string> names;
  for (std::size_t s = 0; s < speakers; ++s) {
    Rng rng = derive_rng(seed, {s});
    const VoiceParams voice = random_voice(rng);
    auto sig = resample(synthesize_speech(voice, seconds, 16000, rng), kSampleRate);
    normalize_power(sig.samples);
    recs.push_back(std::move(sig));
    names.push_back(speaker_file_name(s));
  }
  return SpeechCorpus(std::move(recs), std::move(names));
}

void write_synthetic_corpus(const std::filesystem::path& dir, std::size_t speakers,
                            double seconds, std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create corpus directory " + dir.string() + ": " + ec.message());
  for (std::size_t s = 0; s < speakers; ++s) {
    Rng rng = derive_rng(seed, {s});
    const VoiceParams voice = random_voice(rng);
    auto sig = synthesize_speech(voice, seconds, 16000, rng);
    double peak = 0.0;
    for (double v : sig.samples) peak = std::max(peak, std::abs(v));
    if (peak > 0)
      for (double& v : sig.samples) v *= 0.7 / peak;
    save_wav_pcm16(dir / speaker_file_name(s), sig);
  }
}

}  // namespace sidoa
