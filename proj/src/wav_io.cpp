// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace tsecl::dsp {

namespace {

void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u16(std::string& s, uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

uint32_t get_u32(const std::string& s, size_t off) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i)
    v = (v << 8) | static_cast<uint8_t>(s[off + static_cast<size_t>(i)]);
  return v;
}

uint16_t get_u16(const std::string& s, size_t off) {
  return static_cast<uint16_t>(static_cast<uint8_t>(s[off]) |
                               (static_cast<uint8_t>(s[off + 1]) << 8));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("short write: " + path);
}

}  // namespace

void write_wav(const std::string& path, const Waveform& w, WavFormat format) {
  const uint16_t channels = 1;
  const uint32_t rate = static_cast<uint32_t>(std::lround(w.sample_rate));
  const uint16_t bits = format == WavFormat::Pcm16 ? 16 : 32;
  const uint16_t block_align = static_cast<uint16_t>(channels * bits / 8);
  const uint32_t data_bytes = static_cast<uint32_t>(w.samples.size()) * block_align;

  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, format == WavFormat::Pcm16 ? 1 : 3);  // PCM / IEEE float
  put_u16(out, channels);
  put_u32(out, rate);
  put_u32(out, rate * block_align);
  put_u16(out, block_align);
  put_u16(out, bits);
  out += "data";
  put_u32(out, data_bytes);

  if (format == WavFormat::Pcm16) {
    for (double v : w.samples) {
      const double c = std::clamp(v, -1.0, 1.0);
      const int16_t q = static_cast<int16_t>(std::lround(c * 32767.0));
      put_u16(out, static_cast<uint16_t>(q));
    }
  } else {
    for (double v : w.samples) {
      const float f = static_cast<float>(v);
      uint32_t bitsrep;
      std::memcpy(&bitsrep, &f, 4);
      put_u32(out, bitsrep);
    }
  }
  write_file(path, out);
}

Waveform read_wav(const std::string& path) {
  const std::string s = read_file(path);
  if (s.size() < 44 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0)
    throw DataError("not a RIFF/WAVE file: " + path);

  uint16_t audio_format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= s.size()) {
    const std::string id = s.substr(pos, 4);
    const uint32_t len = get_u32(s, pos + 4);
    if (id == "fmt ") {
      if (pos + 8 + 16 > s.size()) throw DataError("truncated fmt chunk: " + path);
      audio_format = get_u16(s, pos + 8);
      channels = get_u16(s, pos + 10);
      rate = get_u32(s, pos + 12);
      bits = get_u16(s, pos + 22);
    } else if (id == "data") {
      data_off = pos + 8;
      data_len = len;
    }
    pos += 8 + len + (len & 1);
  }
  if (channels != 1) throw DataError("only mono WAV supported: " + path);
  if (data_off == 0 || data_off + data_len > s.size())
    throw DataError("missing or truncated data chunk: " + path);

  Waveform w;
  w.sample_rate = static_cast<double>(rate);
  if (audio_format == 1 && bits == 16) {
    const size_t n = data_len / 2;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const int16_t q = static_cast<int16_t>(get_u16(s, data_off + 2 * i));
      w.samples[i] = static_cast<double>(q) / 32767.0;
    }
  } else if (audio_format == 3 && bits == 32) {
    const size_t n = data_len / 4;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const uint32_t b = get_u32(s, data_off + 4 * i);
      float f;
      std::memcpy(&f, &b, 4);
      w.samples[i] = static_cast<double>(f);
    }
  } else {
    throw DataError("unsupported WAV encoding (want 16-bit PCM or float32): " + path);
  }
  return w;
}

void write_raw_f32(const std::string& path, const Waveform& w) {
  std::string out;
  out.reserve(w.samples.size() * 4);
  for (double v : w.samples) {
    const float f = static_cast<float>(v);
    uint32_t bitsrep;
    std::memcpy(&bitsrep, &f, 4);
    put_u32(out, bitsrep);
  }
  write_file(path, out);
  nlohmann::json sidecar;
  sidecar["sample_rate"] = w.sample_rate;
  sidecar["length"] = w.samples.size();
  write_file(path + ".json", sidecar.dump());
}

Waveform read_raw_f32(const std::string& path) {
  const std::string raw = read_file(path);
  const nlohmann::json sidecar = nlohmann::json::parse(read_file(path + ".json"));
  Waveform w;
  w.sample_rate = sidecar.at("sample_rate").get<double>();
  const size_t n = raw.size() / 4;
  if (sidecar.at("length").get<size_t>() != n)
    throw DataError("raw f32 length disagrees with sidecar: " + path);
  w.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t b = get_u32(raw, 4 * i);
    float f;
    std::memcpy(&f, &b, 4);
    w.samples[i] = static_cast<double>(f);
  }
  return w;
}

}  // namespace tsecl::dsp
