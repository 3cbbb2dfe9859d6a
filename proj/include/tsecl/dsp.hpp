// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_DSP_HPP
#define TSECL_DSP_HPP

#include <complex>
#include <cstdint>
#include <vector>

#include "tsecl/common.hpp"

namespace tsecl::dsp {

// Mono sample sequence. All DSP runs in double precision.
struct Waveform {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  size_t size() const { return samples.size(); }
};

// Analysis/synthesis parameters. The window is periodic Hann; hop must divide
// window_len and window_len must not exceed fft_len (zero-padded analysis).
struct StftConfig {
  int window_len = 512;
  int hop = 128;
  int fft_len = 512;

  int bins() const { return fft_len / 2 + 1; }
  void validate() const;
};

inline StftConfig make_stft_config(int window_len, int hop, int fft_len) {
  StftConfig cfg;
  cfg.window_len = window_len;
  cfg.hop = hop;
  cfg.fft_len = fft_len;
  cfg.validate();
  return cfg;
}

// One-sided complex frames, row-major [frame][bin]. source_len remembers the
// length of the analyzed waveform so synthesis can trim back to it; 0 means
// unknown (istft then returns the full padded buffer).
struct ComplexSpectrogram {
  size_t num_frames = 0;
  size_t num_bins = 0;
  StftConfig config;
  size_t source_len = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(size_t t, size_t f) { return data[t * num_bins + f]; }
  const std::complex<double>& at(size_t t, size_t f) const {
    return data[t * num_bins + f];
  }
};

ComplexSpectrogram make_spectrogram(size_t num_frames, const StftConfig& cfg,
                                    size_t source_len);

// Periodic Hann coefficients, w[n] = 0.5 - 0.5 cos(2 pi n / len).
std::vector<double> hann_periodic(int len);

// Number of analysis frames for an input of the given length: reflect padding
// of window/2 on both ends plus zero fill so every sample sits inside a whole
// frame.
size_t stft_num_frames(size_t input_len, const StftConfig& cfg);

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg);

// Weighted overlap-add synthesis with per-sample window-power normalization.
// With source_len set the result is trimmed to the original waveform.
Waveform istft(const ComplexSpectrogram& spec, double sample_rate = 16000.0);

// Adjoint of the linear map S -> istft(S) (trimmed form), under the real
// inner product over interleaved real/imag parts. g must have the length the
// trimmed istft would produce. Backbone of the training backward pass.
ComplexSpectrogram istft_adjoint(const Waveform& g, const StftConfig& cfg);

// In-place forward/inverse DFT used by the STFT (radix-2 when the size is a
// power of two, direct evaluation otherwise). Exposed for test oracles.
void fft_inplace(std::vector<std::complex<double>>& x, bool inverse);

}  // namespace tsecl::dsp

#endif  // TSECL_DSP_HPP
