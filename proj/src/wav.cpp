// src/wav.cpp

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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sidoa/error.hpp"
#include "sidoa/signal.hpp"

namespace sidoa {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <typename T>
T read_le(const std::vector<char>& buf, std::size_t pos) {
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  return v;
}

template <typename T>
void put_le(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

TimeSignal load_audio(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open audio file: " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::string where = " (" + path.string() + ")";
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw IoError("not a RIFF/WAVE file" + where);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const std::string id(buf.data() + pos, 4);
    const auto size = read_le<std::uint32_t>(buf, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + size > buf.size()) throw IoError("truncated fmt chunk" + where);
      format = read_le<std::uint16_t>(buf, body);
      channels = read_le<std::uint16_t>(buf, body + 2);
      rate = read_le<std::uint32_t>(buf, body + 4);
      bits = read_le<std::uint16_t>(buf, body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) throw IoError("truncated extensible fmt chunk" + where);
        format = read_le<std::uint16_t>(buf, body + 24);  // first word of the subformat GUID
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IoError("data chunk before fmt chunk" + where);
      if (channels != 1)
        throw IoError("expected mono audio, got " + std::to_string(channels) + " channels" + where);
      if (rate == 0) throw IoError("zero sample rate" + where);
      const std::size_t avail = std::min<std::size_t>(size, buf.size() - body);
      TimeSignal sig;
      sig.sample_rate = static_cast<int>(rate);
      if (format == kFormatPcm && bits == 16) {
        sig.samples.resize(avail / 2);
        for (std::size_t i = 0; i < sig.samples.size(); ++i)
          sig.samples[i] = read_le<std::int16_t>(buf, body + 2 * i) / 32768.0;
      } else if (format == kFormatFloat && bits == 32) {
        sig.samples.resize(avail / 4);
        for (std::size_t i = 0; i < sig.samples.size(); ++i) {
          const float v = read_le<float>(buf, body + 4 * i);
          if (!std::isfinite(v)) throw IoError("non-finite sample in float WAV" + where);
          sig.samples[i] = std::clamp(static_cast<double>(v), -1.0, 1.0);
        }
      } else {
        throw IoError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                      std::to_string(bits) + " bits); need 16-bit PCM or 32-bit float" + where);
      }
      return sig;
    }
    pos = body + size + (size & 1u);
  }
  throw IoError("no data chunk" + where);
}

namespace {

void write_header(std::ostream& os, std::uint16_t format, std::uint16_t channels,
                  std::uint32_t rate, std::uint16_t bits, std::uint32_t data_bytes) {
  const std::uint16_t block = static_cast<std::uint16_t>(channels * bits / 8);
  os.write("RIFF", 4);
  put_le<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_le<std::uint32_t>(os, 16);
  put_le<std::uint16_t>(os, format);
  put_le<std::uint16_t>(os, channels);
  put_le<std::uint32_t>(os, rate);
  put_le<std::uint32_t>(os, rate * block);
  put_le<std::uint16_t>(os, block);
  put_le<std::uint16_t>(os, bits);
  os.write("data", 4);
  put_le<std::uint32_t>(os, data_bytes);
}

}  // namespace

void save_wav_pcm16(const std::filesystem::path& path, const TimeSignal& sig) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  write_header(os, kFormatPcm, 1, static_cast<std::uint32_t>(sig.sample_rate), 16,
               static_cast<std::uint32_t>(sig.samples.size() * 2));
  for (double v : sig.samples) {
    const double scaled = std::round(std::clamp(v, -1.0, 32767.0 / 32768.0) * 32768.0);
    put_le<std::int16_t>(os, static_cast<std::int16_t>(scaled));
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void save_wav_float(const std::filesystem::path& path, std::span<const TimeSignal> channels) {
  if (channels.empty()) throw IoError("save_wav_float: no channels");
  const std::size_t len = channels.front().samples.size();
  const int rate = channels.front().sample_rate;
  for (const auto& c : channels)
    if (c.samples.size() != len || c.sample_rate != rate)
      throw IoError("save_wav_float: channels differ in length or rate");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  const auto nch = static_cast<std::uint16_t>(channels.size());
  write_header(os, kFormatFloat, nch, static_cast<std::uint32_t>(rate), 32,
               static_cast<std::uint32_t>(len * nch * 4));
  for (std::size_t i = 0; i < len; ++i)
    for (const auto& c : channels) put_le<float>(os, static_cast<float>(c.samples[i]));
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace sidoa
