// src/signal.cpp

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

#include "sidoa/signal.hpp"

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>

#include "sidoa/error.hpp"

namespace sidoa {

namespace {

// FFTW plans are created once per size and shared. Creation is serialized;
// execution through the new-array interface is reentrant. FFTW_UNALIGNED
// keeps the chosen codelets independent of buffer addresses, so results
// are reproducible bit for bit.
struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

const FftPlans& plans_for(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, FftPlans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<double> re(n);
  std::vector<Complex> cx(n / 2 + 1);
  auto* cptr = reinterpret_cast<fftw_complex*>(cx.data());
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  FftPlans p;
  p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), re.data(), cptr, flags);
  p.inverse = fftw_plan_dft_c2r_1d(static_cast<int>(n), cptr, re.data(), flags);
  if (!p.forward || !p.inverse) throw Error("FFTW planning failed for size " + std::to_string(n));
  return cache.emplace(n, p).first->second;
}

std::array<double, kFrameLength> make_hann() {
  std::array<double, kFrameLength> w{};
  for (std::size_t n = 0; n < kFrameLength; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / kFrameLength);
  return w;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

constexpr int kResampleTaps = 64;
constexpr double kKaiserBeta = 7.0;
constexpr double kRolloff = 0.94;

}  // namespace

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<Complex> real_fft(std::span<const double> x, std::size_t n) {
  std::vector<double> in(n, 0.0);
  std::copy_n(x.begin(), std::min(n, x.size()), in.begin());
  std::vector<Complex> out(n / 2 + 1);
  fftw_execute_dft_r2c(plans_for(n).forward, in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

std::vector<double> real_ifft(std::span<const Complex> spectrum, std::size_t n) {
  // c2r overwrites its input
  std::vector<Complex> in(n / 2 + 1, Complex{});
  std::copy_n(spectrum.begin(), std::min(in.size(), spectrum.size()), in.begin());
  std::vector<double> out(n);
  fftw_execute_dft_c2r(plans_for(n).inverse, reinterpret_cast<fftw_complex*>(in.data()),
                       out.data());
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

std::vector<double> convolve(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  const std::size_t out_len = a.size() + b.size() - 1;
  const std::size_t n = next_pow2(out_len);
  auto fa = real_fft(a, n);
  const auto fb = real_fft(b, n);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  auto y = real_ifft(fa, n);
  y.resize(out_len);
  return y;
}

TimeSignal resample(const TimeSignal& sig, int target_rate) {
  if (target_rate <= 0) throw ConfigError("resample: target rate must be positive");
  if (sig.sample_rate <= 0) throw ConfigError("resample: source rate must be positive");
  if (target_rate == sig.sample_rate) return sig;

  const long g = std::gcd(static_cast<long>(sig.sample_rate), static_cast<long>(target_rate));
  const long up = target_rate / g;
  const long down = sig.sample_rate / g;
  const double ratio = static_cast<double>(up) / static_cast<double>(down);
  const double cutoff = 0.5 * std::min(1.0, ratio) * kRolloff;  // cycles per input sample
  const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
  constexpr int half = kResampleTaps / 2;

  auto kernel = [&](double x) {
    const double r = x / half;
    if (std::abs(r) >= 1.0) return 0.0;
    const double w = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
    return 2.0 * cutoff * sinc(2.0 * cutoff * x) * w;
  };

  // one tap row per polyphase branch
  const bool tabulate = up <= 2048;
  std::vector<double> table;
  if (tabulate) {
    table.resize(static_cast<std::size_t>(up) * kResampleTaps);
    for (long p = 0; p < up; ++p)
      for (int j = 0; j < kResampleTaps; ++j) {
        // tap j reads input index base - half + 1 + j
        const double x = static_cast<double>(half - 1 - j) + static_cast<double>(p) / up;
        table[static_cast<std::size_t>(p) * kResampleTaps + j] = kernel(x);
      }
  }

  const long n_in = static_cast<long>(sig.samples.size());
  const long n_out = n_in * up / down;
  TimeSignal out;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<std::size_t>(n_out));
  std::vector<double> row(kResampleTaps);
  for (long n = 0; n < n_out; ++n) {
    const long num = n * down;
    const long base = num / up;
    const long phase = num % up;
    const double* taps;
    if (tabulate) {
      taps = &table[static_cast<std::size_t>(phase) * kResampleTaps];
    } else {
      for (int j = 0; j < kResampleTaps; ++j)
        row[j] = kernel(static_cast<double>(half - 1 - j) + static_cast<double>(phase) / up);
      taps = row.data();
    }
    double acc = 0.0;
    const long first = base - half + 1;
    for (int j = 0; j < kResampleTaps; ++j) {
      const long k = first + j;
      if (k < 0 || k >= n_in) continue;
      acc += taps[j] * sig.samples[static_cast<std::size_t>(k)];
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

std::size_t num_frames(const TimeSignal& sig) { return sig.samples.size() / kFrameLength; }

std::span<const double> frame_view(const TimeSignal& sig, std::size_t index) {
  return std::span<const double>(sig.samples).subspan(index * kFrameLength, kFrameLength);
}

std::vector<Frame> frame_signal(const TimeSignal& sig) {
  if (sig.sample_rate != kSampleRate)
    throw ConfigError("frame_signal: expected " + std::to_string(kSampleRate) + " Hz, got " +
                      std::to_string(sig.sample_rate) + " Hz");
  const std::size_t count = num_frames(sig);
  std::vector<Frame> frames(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto view = frame_view(sig, i);
    frames[i].samples.assign(view.begin(), view.end());
    frames[i].index = i;
  }
  return frames;
}

std::span<const double> hann_window() {
  static const auto window = make_hann();
  return window;
}

SpectralFrame forward_spectrum(std::span<const double> frame, std::size_t frame_index) {
  if (frame.size() != kFrameLength)
    throw ConfigError("forward_spectrum: frame length " + std::to_string(frame.size()) +
                      ", expected " + std::to_string(kFrameLength));
  const auto w = hann_window();
  std::array<double, kFrameLength> windowed;
  for (std::size_t n = 0; n < kFrameLength; ++n) windowed[n] = frame[n] * w[n];
  SpectralFrame out;
  out.frame_index = frame_index;
  out.bins = real_fft(windowed, kFrameLength);
  return out;
}

SpectralFrame forward_spectrum(const Frame& frame) {
  return forward_spectrum(frame.samples, frame.index);
}

std::vector<double> inverse_spectrum(std::span<const Complex> bins) {
  return real_ifft(bins, kFrameLength);
}

double mean_power(std::span<const double> samples) {
  if (samples.empty()) return 0.0;
  double acc = 0.0;
  for (double v : samples) acc += v * v;
  return acc / static_cast<double>(samples.size());
}

double frame_energy_db(std::span<const double> samples) {
  return 10.0 * std::log10(mean_power(samples) + kEnergyFloor);
}

double frame_energy_db(const Frame& frame) { return frame_energy_db(frame.samples); }

}  // namespace sidoa
