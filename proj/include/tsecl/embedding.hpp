// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_EMBEDDING_HPP
#define TSECL_EMBEDDING_HPP

#include <vector>

#include "tsecl/dsp.hpp"

namespace tsecl::embedding {

// Frozen spectral-statistics speaker encoder. Per-band log energies over a
// triangular mel filterbank, global-mean-removed (exact amplitude
// invariance), then per-band time means and standard deviations, stacked and
// L2-normalized: D = 2 * num_bands.
struct EmbedConfig {
  int num_bands = 16;
  dsp::StftConfig stft;  // 512/128/512 default
  double fmin_hz = 60.0;
  double fmax_hz = 7600.0;

  int dim() const { return 2 * num_bands; }
  void validate(double sample_rate) const;
};

struct EmbeddingVector {
  std::vector<double> values;  // ||values|| = 1
};

EmbeddingVector embed(const dsp::Waveform& w, const EmbedConfig& cfg);

// Triangular filterbank weights, row-major [band][bin]. Exposed for tests.
std::vector<std::vector<double>> mel_filterbank(const EmbedConfig& cfg,
                                                double sample_rate);

}  // namespace tsecl::embedding

#endif  // TSECL_EMBEDDING_HPP
