// include/sidoa/signal.hpp

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

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace sidoa {

using Complex = std::complex<double>;

inline constexpr int kSampleRate = 8000;
inline constexpr std::size_t kFrameLength = 256;  // 32 ms at 8 kHz
inline constexpr std::size_t kNumBins = kFrameLength / 2 + 1;
inline constexpr double kEnergyFloor = 1e-12;

struct TimeSignal {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

struct Frame {
  std::vector<double> samples;  // kFrameLength raw (unwindowed) samples
  std::size_t index = 0;
};

// One-sided spectrum of a Hann-windowed frame, kNumBins bins.
struct SpectralFrame {
  std::vector<Complex> bins;
  std::size_t frame_index = 0;
};

// ---- audio files --------------------------------------------------------

// Reads a mono RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float.
// 16-bit samples are scaled by 1/32768, so 32767 maps to 32767/32768.
// Throws IoError on a missing file, an unsupported encoding or more than
// one channel.
TimeSignal load_audio(const std::filesystem::path& path);

// 16-bit PCM mono writer; samples are clipped to [-1, 32767/32768].
void save_wav_pcm16(const std::filesystem::path& path, const TimeSignal& sig);

// 32-bit float writer, interleaving all channels. Channels must share rate
// and length.
void save_wav_float(const std::filesystem::path& path, std::span<const TimeSignal> channels);

// ---- rate conversion and framing ---------------------------------------

// Windowed-sinc polyphase resampler, 64 taps per output sample.
TimeSignal resample(const TimeSignal& sig, int target_rate);

// Non-overlapping frames of kFrameLength samples; the tail that does not
// fill a frame is dropped. Requires an 8 kHz signal.
std::vector<Frame> frame_signal(const TimeSignal& sig);

// Raw samples of frame `index` without copying the whole framing.
std::span<const double> frame_view(const TimeSignal& sig, std::size_t index);
std::size_t num_frames(const TimeSignal& sig);

// ---- spectra ------------------------------------------------------------

// Periodic Hann window, w[n] = 0.5 - 0.5 cos(2 pi n / N).
std::span<const double> hann_window();

// Hann window followed by an unscaled 256-point forward DFT.
SpectralFrame forward_spectrum(const Frame& frame);
SpectralFrame forward_spectrum(std::span<const double> frame, std::size_t frame_index = 0);

// Inverse of forward_spectrum's transform (scaled by 1/N). Returns the
// windowed frame. Imaginary parts of the DC and Nyquist bins are ignored.
std::vector<double> inverse_spectrum(std::span<const Complex> bins);

// 10 log10(mean square + 1e-12).
double frame_energy_db(std::span<const double> samples);
double frame_energy_db(const Frame& frame);

// Mean square of a signal.
double mean_power(std::span<const double> samples);

// ---- generic transforms (any length) ------------------------------------

// Linear convolution, length a.size() + b.size() - 1. FFT based.
std::vector<double> convolve(std::span<const double> a, std::span<const double> b);

// Real forward transform of length n (input zero padded / truncated to n).
std::vector<Complex> real_fft(std::span<const double> x, std::size_t n);
// Inverse of real_fft, scaled by 1/n.
std::vector<double> real_ifft(std::span<const Complex> spectrum, std::size_t n);

std::size_t next_pow2(std::size_t n);

}  // namespace sidoa
