#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "uverify/common.hpp"

namespace uverify {

// Raw utterance audio. Samples are amplitudes in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  std::size_t sample_rate = 0;
};

namespace detail {

inline std::uint32_t read_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t read_u16le(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

// Reads a RIFF/WAVE file containing 16-bit PCM mono audio. Sample values are
// normalized by 1/32768. Anything else (other codecs, channel counts or
// sample widths) is rejected with a distinct message.
inline Waveform load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw FormatError("not a RIFF/WAVE file (too short): " + path);
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("not a RIFF/WAVE file: " + path);

  bool have_fmt = false;
  std::uint16_t format_tag = 0, channels = 0, bits = 0;
  std::uint32_t sample_rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    std::uint32_t chunk_size = detail::read_u32le(hdr + 4);
    std::size_t body = pos + 8;
    if (body + chunk_size > bytes.size())
      throw FormatError("truncated chunk in WAV file: " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw FormatError("fmt chunk too short in WAV file: " + path);
      const unsigned char* f = bytes.data() + body;
      format_tag = detail::read_u16le(f);
      channels = detail::read_u16le(f + 2);
      sample_rate = detail::read_u32le(f + 4);
      bits = detail::read_u16le(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      data_size = chunk_size;
      // fmt is required before data can be interpreted
      if (!have_fmt) throw FormatError("data chunk before fmt chunk in WAV file: " + path);
      break;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }

  if (!have_fmt) throw FormatError("missing fmt chunk in WAV file: " + path);
  if (format_tag != 1)
    throw FormatError("unsupported encoding: format tag " + std::to_string(format_tag) +
                      " (expected PCM) in " + path);
  if (channels != 1)
    throw FormatError("unsupported encoding: " + std::to_string(channels) +
                      " channels (expected mono) in " + path);
  if (bits != 16)
    throw FormatError("unsupported encoding: " + std::to_string(bits) +
                      "-bit samples (expected 16-bit) in " + path);
  if (sample_rate == 0) throw FormatError("sample rate is zero in WAV file: " + path);
  if (data_ptr == nullptr) throw FormatError("missing data chunk in WAV file: " + path);

  Waveform w;
  w.sample_rate = sample_rate;
  std::size_t n = data_size / 2;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::int16_t s = static_cast<std::int16_t>(detail::read_u16le(data_ptr + 2 * i));
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

}  // namespace uverify
