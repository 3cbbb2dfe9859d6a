// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_METRICS_HPP
#define TSECL_METRICS_HPP

#include <span>

#include "tsecl/dsp.hpp"

namespace tsecl::metrics {

// dB quantity, clipped to [-100, 100] so exact matches and silent residuals
// stay finite.
struct Decibels {
  double value = 0.0;
};

constexpr double kDbClip = 100.0;

inline Decibels operator-(Decibels a, Decibels b) { return {a.value - b.value}; }

// 10 log10(sum num^2 / sum den^2), one global energy ratio per utterance.
// Zero-energy denominator yields +100 dB; zero-energy numerator is an error.
Decibels energy_ratio_db(const dsp::Waveform& numerator,
                         const dsp::Waveform& denominator);

// SDR of a mixture's target against its (scaled) interferer.
Decibels mixture_sdr(const dsp::Waveform& target, const dsp::Waveform& interferer);

// 10 log10(sum s^2 / sum (est - s)^2); estimate == target clips to +100 dB.
Decibels snr_db(const dsp::Waveform& target, const dsp::Waveform& estimate);

// Scale-invariant SDR: the estimate is first projected onto the target
// direction (alpha = <est, s> / ||s||^2).
Decibels si_sdr_db(const dsp::Waveform& estimate, const dsp::Waveform& target);

// Improvement in SDR: snr(target, estimate) - snr(target, mixture).
Decibels isdr_db(const dsp::Waveform& mixture, const dsp::Waveform& estimate,
                 const dsp::Waveform& target);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Frame-wise reading of the SNR formula (mean of per-frame clipped ratios
// over non-overlapping frames). Comparison tool only; the global ratio above
// is the default everywhere.
Decibels snr_db_framewise(const dsp::Waveform& target, const dsp::Waveform& estimate,
                          size_t frame_len);

}  // namespace tsecl::metrics

#endif  // TSECL_METRICS_HPP
