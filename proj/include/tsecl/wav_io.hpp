// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_WAV_IO_HPP
#define TSECL_WAV_IO_HPP

#include <string>

#include "tsecl/dsp.hpp"

namespace tsecl::dsp {

enum class WavFormat { Pcm16, Float32 };

// Mono WAV only. Pcm16 clamps to [-1, 1] and quantizes; Float32 stores the
// samples as-is in 32-bit floats.
void write_wav(const std::string& path, const Waveform& w,
               WavFormat format = WavFormat::Float32);
Waveform read_wav(const std::string& path);

// Raw little-endian float32 with a JSON sidecar (<path>.json) carrying
// sample_rate and length.
void write_raw_f32(const std::string& path, const Waveform& w);
Waveform read_raw_f32(const std::string& path);

}  // namespace tsecl::dsp

#endif  // TSECL_WAV_IO_HPP
