// include/sidoa/corpus.hpp

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

#include <filesystem>
#include <string>
#include <vector>

#include "sidoa/random.hpp"
#include "sidoa/signal.hpp"

namespace sidoa {

// A directory of mono WAV recordings, one speaker per file, held in memory
// at 8 kHz. Files are ordered by name so indices are stable.
class SpeechCorpus {
 public:
  SpeechCorpus() = default;
  explicit SpeechCorpus(std::vector<TimeSignal> recordings, std::vector<std::string> names = {});

  // Loads every *.wav below `dir` (non-recursive), resampled to 8 kHz and
  // scaled to unit mean power. Throws IoError if the directory is missing.
  static SpeechCorpus load(const std::filesystem::path& dir);

  bool empty() const { return recordings_.empty(); }
  std::size_t size() const { return recordings_.size(); }
  const TimeSignal& recording(std::size_t i) const { return recordings_.at(i); }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  // `length` samples from recording `index` starting at a random offset.
  // Recordings shorter than `length` are looped.
  std::vector<double> segment(std::size_t index, std::size_t length, Rng& rng) const;

 private:
  std::vector<TimeSignal> recordings_;
  std::vector<std::string> names_;
};

// Scales samples in place to unit mean power (no-op on silence).
void normalize_power(std::vector<double>& samples);

}  // namespace sidoa
