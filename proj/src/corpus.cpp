// src/corpus.cpp

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

#include "sidoa/corpus.hpp"

#include <algorithm>
#include <cmath>

#include "sidoa/error.hpp"

namespace sidoa {

SpeechCorpus::SpeechCorpus(std::vector<TimeSignal> recordings, std::vector<std::string> names)
    : recordings_(std::move(recordings)), names_(std::move(names)) {
  names_.resize(recordings_.size());
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i].empty()) names_[i] = "recording" + std::to_string(i);
}

SpeechCorpus SpeechCorpus::load(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    if (ext == ".wav") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<TimeSignal> recs;
  std::vector<std::string> names;
  for (const auto& f : files) {
    auto sig = resample(load_audio(f), kSampleRate);
    if (sig.samples.size() < kFrameLength) continue;
    normalize_power(sig.samples);
    recs.push_back(std::move(sig));
    names.push_back(f.filename().string());
  }
  return SpeechCorpus(std::move(recs), std::move(names));
}

std::vector<double> SpeechCorpus::segment(std::size_t index, std::size_t length, Rng& rng) const {
  const auto& src = recordings_.at(index).samples;
  std::vector<double> out(length);
  if (src.empty()) return out;
  std::size_t start = 0;
  if (src.size() > length)
    start = std::uniform_int_distribution<std::size_t>(0, src.size() - length)(rng);
  for (std::size_t i = 0; i < length; ++i) out[i] = src[(start + i) % src.size()];
  return out;
}

void normalize_power(std::vector<double>& samples) {
  const double p = mean_power(samples);
  if (p <= 0.0) return;
  const double g = 1.0 / std::sqrt(p);
  for (double& v : samples) v *= g;
}

}  // namespace sidoa
