// include/sidoa/speech_synth.hpp

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

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sidoa/corpus.hpp"
#include "sidoa/random.hpp"
#include "sidoa/signal.hpp"

namespace sidoa {

// Source-filter babble used when no recorded speech corpus is available.
// A jittered glottal pulse train drives three cascaded formant resonators;
// syllables alternate with noise fricatives and are grouped into words
// separated by pauses. The result is harmonic, sparse in time and frequency,
// and different for every voice.
struct VoiceParams {
  double f0_hz = 120.0;         // mean pitch
  double f0_range = 0.25;       // relative pitch excursion per syllable
  double formant_scale = 1.0;   // vocal-tract length factor
  double breathiness = 0.05;    // aspiration noise relative to voicing
  double speaking_rate = 1.0;   // syllables per second relative to nominal
};

VoiceParams random_voice(Rng& rng);

TimeSignal synthesize_speech(const VoiceParams& voice, double seconds, int sample_rate, Rng& rng);

// `speakers` synthetic recordings of `seconds` each, at 8 kHz and unit power.
SpeechCorpus synthetic_corpus(std::size_t speakers, double seconds, std::uint64_t seed);

// Writes the same recordings as 16 kHz 16-bit WAV files speaker_NNN.wav.
void write_synthetic_corpus(const std::filesystem::path& dir, std::size_t speakers,
                            double seconds, std::uint64_t seed);

}  // namespace sidoa
