// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/embedding.hpp"

#include <cmath>

namespace tsecl::embedding {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

constexpr double kLogFloor = 1e-12;

}  // namespace

void EmbedConfig::validate(double sample_rate) const {
  require_config(num_bands >= 2, "embed: num_bands >= 2");
  require_config(fmin_hz >= 0.0 && fmax_hz > fmin_hz, "embed: bad band range");
  require_config(fmax_hz <= sample_rate / 2.0, "embed: fmax above Nyquist");
  stft.validate();
}

std::vector<std::vector<double>> mel_filterbank(const EmbedConfig& cfg,
                                                double sample_rate) {
  const int bins = cfg.stft.bins();
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  // num_bands + 2 edges, equally spaced in mel.
  std::vector<double> edges(static_cast<size_t>(cfg.num_bands) + 2);
  for (size_t k = 0; k < edges.size(); ++k)
    edges[k] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(k) /
                                      static_cast<double>(cfg.num_bands + 1));

  std::vector<std::vector<double>> fb(
      static_cast<size_t>(cfg.num_bands),
      std::vector<double>(static_cast<size_t>(bins), 0.0));
  const double hz_per_bin = sample_rate / static_cast<double>(cfg.stft.fft_len);
  for (int b = 0; b < cfg.num_bands; ++b) {
    const double lo = edges[static_cast<size_t>(b)];
    const double mid = edges[static_cast<size_t>(b) + 1];
    const double hi = edges[static_cast<size_t>(b) + 2];
    for (int f = 0; f < bins; ++f) {
      const double hz = hz_per_bin * f;
      double w = 0.0;
      if (hz > lo && hz < mid)
        w = (hz - lo) / (mid - lo);
      else if (hz >= mid && hz < hi)
        w = (hi - hz) / (hi - mid);
      fb[static_cast<size_t>(b)][static_cast<size_t>(f)] = w;
    }
  }
  return fb;
}

EmbeddingVector embed(const dsp::Waveform& w, const EmbedConfig& cfg) {
  cfg.validate(w.sample_rate);
  require(w.samples.size() >= static_cast<size_t>(cfg.stft.window_len),
          "embed: input shorter than one analysis window");

  const auto spec = dsp::stft(w, cfg.stft);
  const auto fb = mel_filterbank(cfg, w.sample_rate);
  const size_t T = spec.num_frames;
  const size_t B = static_cast<size_t>(cfg.num_bands);

  // Per-frame band log energies; remove the global mean so a gain factor on
  // the input (a uniform additive shift in log domain) cancels exactly.
  std::vector<double> loge(T * B);
  double global_mean = 0.0;
  for (size_t t = 0; t < T; ++t) {
    for (size_t b = 0; b < B; ++b) {
      double e = 0.0;
      for (size_t f = 0; f < spec.num_bins; ++f)
        e += fb[b][f] * std::norm(spec.at(t, f));
      const double v = std::log(e + kLogFloor);
      loge[t * B + b] = v;
      global_mean += v;
    }
  }
  global_mean /= static_cast<double>(T * B);
  for (double& v : loge) v -= global_mean;

  EmbeddingVector out;
  out.values.resize(2 * B);
  for (size_t b = 0; b < B; ++b) {
    double mean = 0.0;
    for (size_t t = 0; t < T; ++t) mean += loge[t * B + b];
    mean /= static_cast<double>(T);
    double var = 0.0;
    for (size_t t = 0; t < T; ++t) {
      const double d = loge[t * B + b] - mean;
      var += d * d;
    }
    out.values[b] = mean;
    out.values[B + b] = std::sqrt(var / static_cast<double>(T));
  }

  double norm = 0.0;
  for (double v : out.values) norm += v * v;
  require(norm > 0.0, "embed: degenerate (constant) band energies");
  norm = std::sqrt(norm);
  for (double& v : out.values) v /= norm;
  return out;
}

}  // namespace tsecl::embedding
