// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace tsecl::metrics {

namespace {

double energy(std::span<const double> x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

double clip_db(double db) { return std::clamp(db, -kDbClip, kDbClip); }

// Ratio of energies in dB with the clipping rules shared by all metrics:
// zero residual -> +100, zero signal -> -100.
double ratio_db(double num_energy, double den_energy) {
  if (den_energy == 0.0) return num_energy == 0.0 ? 0.0 : kDbClip;
  if (num_energy == 0.0) return -kDbClip;
  return clip_db(10.0 * std::log10(num_energy / den_energy));
}

void check_lengths(const dsp::Waveform& a, const dsp::Waveform& b, const char* what) {
  if (a.samples.size() != b.samples.size())
    throw DataError(std::string(what) + ": length mismatch");
}

}  // namespace

Decibels energy_ratio_db(const dsp::Waveform& numerator,
                         const dsp::Waveform& denominator) {
  check_lengths(numerator, denominator, "energy_ratio_db");
  const double num = energy(numerator.samples);
  if (num == 0.0) throw DataError("energy_ratio_db: zero-energy numerator");
  return {ratio_db(num, energy(denominator.samples))};
}

Decibels mixture_sdr(const dsp::Waveform& target, const dsp::Waveform& interferer) {
  return energy_ratio_db(target, interferer);
}

Decibels snr_db(const dsp::Waveform& target, const dsp::Waveform& estimate) {
  check_lengths(target, estimate, "snr_db");
  double residual = 0.0;
  for (size_t i = 0; i < target.samples.size(); ++i) {
    const double r = estimate.samples[i] - target.samples[i];
    residual += r * r;
  }
  return {ratio_db(energy(target.samples), residual)};
}

Decibels si_sdr_db(const dsp::Waveform& estimate, const dsp::Waveform& target) {
  check_lengths(estimate, target, "si_sdr_db");
  const double target_energy = energy(target.samples);
  if (target_energy == 0.0) throw DataError("si_sdr_db: zero-energy target");
  double dot = 0.0;
  for (size_t i = 0; i < target.samples.size(); ++i)
    dot += estimate.samples[i] * target.samples[i];
  const double alpha = dot / target_energy;
  double err = 0.0;
  for (size_t i = 0; i < target.samples.size(); ++i) {
    const double e = estimate.samples[i] - alpha * target.samples[i];
    err += e * e;
  }
  return {ratio_db(alpha * alpha * target_energy, err)};
}

Decibels isdr_db(const dsp::Waveform& mixture, const dsp::Waveform& estimate,
                 const dsp::Waveform& target) {
  return snr_db(target, estimate) - snr_db(target, mixture);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("cosine_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw DataError("cosine_similarity: zero-norm input");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Decibels snr_db_framewise(const dsp::Waveform& target, const dsp::Waveform& estimate,
                          size_t frame_len) {
  check_lengths(target, estimate, "snr_db_framewise");
  if (frame_len == 0) throw ConfigError("snr_db_framewise: frame_len must be > 0");
  const size_t n = target.samples.size();
  double sum = 0.0;
  size_t frames = 0;
  for (size_t start = 0; start < n; start += frame_len) {
    const size_t end = std::min(n, start + frame_len);
    double es = 0.0, er = 0.0;
    for (size_t i = start; i < end; ++i) {
      es += target.samples[i] * target.samples[i];
      const double r = estimate.samples[i] - target.samples[i];
      er += r * r;
    }
    sum += ratio_db(es, er);
    ++frames;
  }
  return {sum / static_cast<double>(frames)};
}

}  // namespace tsecl::metrics
