#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rcscm/types.hpp"

namespace rcscm {

enum class WavFormat { pcm16, float32 };

namespace detail {

inline void put_u32(std::string& s, uint32_t v) {
  for (int k = 0; k < 4; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}
inline void put_u16(std::string& s, uint16_t v) {
  for (int k = 0; k < 2; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}
inline uint32_t get_u32(const char* p) {
  uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
inline uint16_t get_u16(const char* p) {
  uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}

}  // namespace detail

// Writes a little-endian RIFF/WAVE file (PCM16 or IEEE float32, interleaved).
inline void write_wav(const std::string& path, const Waveform& w,
                      WavFormat fmt = WavFormat::float32) {
  const int channels = static_cast<int>(w.channels());
  const Eigen::Index n = w.num_samples();
  if (channels == 0 || n == 0) throw InvalidInputError("write_wav: empty waveform");
  const int bytes_per_sample = fmt == WavFormat::pcm16 ? 2 : 4;
  const uint32_t data_size = static_cast<uint32_t>(n * channels * bytes_per_sample);

  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  detail::put_u32(out, 36 + data_size);
  out += "WAVEfmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, fmt == WavFormat::pcm16 ? 1 : 3);  // PCM / IEEE float
  detail::put_u16(out, static_cast<uint16_t>(channels));
  detail::put_u32(out, static_cast<uint32_t>(w.sample_rate));
  detail::put_u32(out,
                  static_cast<uint32_t>(w.sample_rate) * channels * bytes_per_sample);
  detail::put_u16(out, static_cast<uint16_t>(channels * bytes_per_sample));
  detail::put_u16(out, static_cast<uint16_t>(8 * bytes_per_sample));
  out += "data";
  detail::put_u32(out, data_size);

  for (Eigen::Index s = 0; s < n; ++s) {
    for (int ch = 0; ch < channels; ++ch) {
      const double x = w.samples(ch, s);
      if (fmt == WavFormat::pcm16) {
        // Symmetric 32768 scaling on write and read keeps the quantization
        // error within half an LSB.
        const long quantized = std::lround(std::max(-1.0, std::min(1.0, x)) * 32768.0);
        const int16_t q = static_cast<int16_t>(
            std::max(-32768L, std::min(32767L, quantized)));
        detail::put_u16(out, static_cast<uint16_t>(q));
      } else {
        const float f = static_cast<float>(x);
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_u32(out, bits);
      }
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw InvalidInputError("write_wav: cannot open " + path);
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// Reads PCM16 or IEEE float32 WAV files.
inline Waveform read_wav(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw InvalidInputError("read_wav: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(file)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 44 || buf.compare(0, 4, "RIFF") != 0 ||
      buf.compare(8, 4, "WAVE") != 0)
    throw InvalidInputError("read_wav: not a RIFF/WAVE file: " + path);

  size_t pos = 12;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  const char* data = nullptr;
  uint32_t data_size = 0;
  while (pos + 8 <= buf.size()) {
    const std::string id = buf.substr(pos, 4);
    const uint32_t size = detail::get_u32(buf.data() + pos + 4);
    if (id == "fmt " && size >= 16) {
      format = detail::get_u16(buf.data() + pos + 8);
      channels = detail::get_u16(buf.data() + pos + 10);
      sample_rate = detail::get_u32(buf.data() + pos + 12);
      bits = detail::get_u16(buf.data() + pos + 22);
    } else if (id == "data") {
      data = buf.data() + pos + 8;
      data_size = static_cast<uint32_t>(std::min<size_t>(size, buf.size() - pos - 8));
    }
    pos += 8 + size + (size & 1);
  }
  if (!data || channels == 0)
    throw InvalidInputError("read_wav: missing fmt/data chunk: " + path);

  const bool pcm16 = (format == 1 && bits == 16);
  const bool f32 = (format == 3 && bits == 32);
  if (!pcm16 && !f32)
    throw InvalidInputError("read_wav: unsupported format (PCM16/float32 only)");

  const int bps = pcm16 ? 2 : 4;
  const Eigen::Index n = data_size / (bps * channels);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples = MatR::Zero(channels, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    for (int ch = 0; ch < channels; ++ch) {
      const char* p = data + (s * channels + ch) * bps;
      if (pcm16) {
        const int16_t q = static_cast<int16_t>(detail::get_u16(p));
        w.samples(ch, s) = q / 32768.0;
      } else {
        float f;
        std::memcpy(&f, p, 4);
        w.samples(ch, s) = f;
      }
    }
  }
  return w;
}

}  // namespace rcscm
