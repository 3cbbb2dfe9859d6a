// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/dsp.hpp"

#include <algorithm>
#include <cmath>

namespace tsecl::dsp {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

bool is_pow2(size_t n) { return n && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey.
void fft_radix2(std::vector<std::complex<double>>& x, bool inverse) {
  const size_t n = x.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = x[i + k];
        const std::complex<double> v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& v : x) v *= inv_n;
  }
}

// O(n^2) fallback for non-power-of-two sizes.
void dft_direct(std::vector<std::complex<double>>& x, bool inverse) {
  const size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  const double sign = inverse ? 1.0 : -1.0;
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t j = 0; j < n; ++j) {
      const double ang =
          sign * 2.0 * kPi * static_cast<double>(k * j % n) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  x = std::move(out);
}

// Map an arbitrary index into [0, n) by bouncing off the boundaries
// (symmetric reflection without repeating the edge sample).
size_t reflect_index(long long j, size_t n) {
  if (n == 1) return 0;
  const long long period = 2 * (static_cast<long long>(n) - 1);
  long long m = j % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<size_t>(m);
}

// Per-sample sum of squared window values under the frame layout; the WOLA
// normalizer.
std::vector<double> window_power_sum(const std::vector<double>& win, size_t num_frames,
                                     int hop, size_t padded_len) {
  std::vector<double> wsum(padded_len, 0.0);
  for (size_t t = 0; t < num_frames; ++t) {
    const size_t off = t * static_cast<size_t>(hop);
    for (size_t j = 0; j < win.size(); ++j) wsum[off + j] += win[j] * win[j];
  }
  return wsum;
}

constexpr double kWsumFloor = 1e-12;

}  // namespace

void StftConfig::validate() const {
  if (window_len < 2 || hop < 1 || fft_len < window_len || window_len < hop)
    throw ConfigError("stft config requires 1 <= hop <= window_len <= fft_len");
  if (window_len % hop != 0)
    throw ConfigError("stft config requires hop to divide window_len");
  if (fft_len % 2 != 0) throw ConfigError("stft config requires even fft_len");
}

ComplexSpectrogram make_spectrogram(size_t num_frames, const StftConfig& cfg,
                                    size_t source_len) {
  cfg.validate();
  ComplexSpectrogram s;
  s.num_frames = num_frames;
  s.num_bins = static_cast<size_t>(cfg.bins());
  s.config = cfg;
  s.source_len = source_len;
  s.data.assign(num_frames * s.num_bins, {0.0, 0.0});
  return s;
}

std::vector<double> hann_periodic(int len) {
  std::vector<double> w(static_cast<size_t>(len));
  for (int n = 0; n < len; ++n)
    w[static_cast<size_t>(n)] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / len);
  return w;
}

size_t stft_num_frames(size_t input_len, const StftConfig& cfg) {
  const size_t hop = static_cast<size_t>(cfg.hop);
  return (input_len + hop - 1) / hop + 1;
}

void fft_inplace(std::vector<std::complex<double>>& x, bool inverse) {
  if (x.empty()) return;
  if (is_pow2(x.size()))
    fft_radix2(x, inverse);
  else
    dft_direct(x, inverse);
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.samples.empty()) throw DataError("stft: empty waveform");
  if (!all_finite(w.samples)) throw DataError("stft: non-finite samples");

  const size_t n = w.samples.size();
  const size_t win_len = static_cast<size_t>(cfg.window_len);
  const size_t half = win_len / 2;
  const size_t num_frames = stft_num_frames(n, cfg);
  const size_t padded_len =
      (num_frames - 1) * static_cast<size_t>(cfg.hop) + win_len;

  // Reflect window/2 on each side; zero-fill the remainder of the last frame.
  std::vector<double> padded(padded_len, 0.0);
  for (size_t i = 0; i < padded_len; ++i) {
    const long long src = static_cast<long long>(i) - static_cast<long long>(half);
    if (src < static_cast<long long>(n) + static_cast<long long>(half))
      padded[i] = w.samples[reflect_index(src, n)];
  }

  ComplexSpectrogram spec = make_spectrogram(num_frames, cfg, n);
  const std::vector<double> win = hann_periodic(cfg.window_len);
  std::vector<std::complex<double>> frame(static_cast<size_t>(cfg.fft_len));
  for (size_t t = 0; t < num_frames; ++t) {
    const size_t off = t * static_cast<size_t>(cfg.hop);
    std::fill(frame.begin(), frame.end(), std::complex<double>(0.0, 0.0));
    for (size_t j = 0; j < win_len; ++j) frame[j] = padded[off + j] * win[j];
    fft_inplace(frame, false);
    for (size_t f = 0; f < spec.num_bins; ++f) spec.at(t, f) = frame[f];
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec, double sample_rate) {
  spec.config.validate();
  if (spec.num_frames == 0) throw DataError("istft: spectrogram has no frames");
  if (spec.num_bins != static_cast<size_t>(spec.config.bins()))
    throw DataError("istft: bin count inconsistent with config");

  const StftConfig& cfg = spec.config;
  const size_t win_len = static_cast<size_t>(cfg.window_len);
  const size_t fft_len = static_cast<size_t>(cfg.fft_len);
  const size_t padded_len = (spec.num_frames - 1) * static_cast<size_t>(cfg.hop) + win_len;
  const std::vector<double> win = hann_periodic(cfg.window_len);

  std::vector<double> acc(padded_len, 0.0);
  std::vector<std::complex<double>> frame(fft_len);
  for (size_t t = 0; t < spec.num_frames; ++t) {
    // Expand the one-sided spectrum by conjugate symmetry; the real part of
    // the inverse transform is the synthesis chunk.
    frame[0] = {spec.at(t, 0).real(), 0.0};
    frame[fft_len / 2] = {spec.at(t, spec.num_bins - 1).real(), 0.0};
    for (size_t f = 1; f < fft_len / 2; ++f) {
      frame[f] = spec.at(t, f);
      frame[fft_len - f] = std::conj(spec.at(t, f));
    }
    fft_inplace(frame, true);
    const size_t off = t * static_cast<size_t>(cfg.hop);
    for (size_t j = 0; j < win_len; ++j) acc[off + j] += frame[j].real() * win[j];
  }

  const std::vector<double> wsum =
      window_power_sum(win, spec.num_frames, cfg.hop, padded_len);
  for (size_t i = 0; i < padded_len; ++i)
    acc[i] = wsum[i] > kWsumFloor ? acc[i] / wsum[i] : 0.0;

  Waveform out;
  out.sample_rate = sample_rate;
  if (spec.source_len == 0) {
    out.samples = std::move(acc);
  } else {
    const size_t half = win_len / 2;
    if (half + spec.source_len > padded_len)
      throw DataError("istft: source_len inconsistent with frame count");
    out.samples.assign(acc.begin() + static_cast<long>(half),
                       acc.begin() + static_cast<long>(half + spec.source_len));
  }
  return out;
}

ComplexSpectrogram istft_adjoint(const Waveform& g, const StftConfig& cfg) {
  cfg.validate();
  if (g.samples.empty()) throw DataError("istft_adjoint: empty gradient signal");

  const size_t n = g.samples.size();
  const size_t win_len = static_cast<size_t>(cfg.window_len);
  const size_t fft_len = static_cast<size_t>(cfg.fft_len);
  const size_t half = win_len / 2;
  const size_t num_frames = stft_num_frames(n, cfg);
  const size_t padded_len = (num_frames - 1) * static_cast<size_t>(cfg.hop) + win_len;
  const std::vector<double> win = hann_periodic(cfg.window_len);

  // Adjoint of trimming: place g in the analysis region, zero elsewhere;
  // then the WOLA normalizer, which is diagonal and therefore self-adjoint.
  std::vector<double> gp(padded_len, 0.0);
  std::copy(g.samples.begin(), g.samples.end(), gp.begin() + static_cast<long>(half));
  const std::vector<double> wsum = window_power_sum(win, num_frames, cfg.hop, padded_len);
  for (size_t i = 0; i < padded_len; ++i)
    gp[i] = wsum[i] > kWsumFloor ? gp[i] / wsum[i] : 0.0;

  ComplexSpectrogram out = make_spectrogram(num_frames, cfg, n);
  std::vector<std::complex<double>> frame(fft_len);
  const double inv_n = 1.0 / static_cast<double>(fft_len);
  for (size_t t = 0; t < num_frames; ++t) {
    const size_t off = t * static_cast<size_t>(cfg.hop);
    std::fill(frame.begin(), frame.end(), std::complex<double>(0.0, 0.0));
    for (size_t j = 0; j < win_len; ++j) frame[j] = gp[off + j] * win[j];
    // Adjoint of "expand one-sided, inverse DFT, take real part" is a forward
    // DFT scaled by 1/N, doubled on the interior bins, with the DC/Nyquist
    // imaginary parts pinned to zero (they have no influence on the output).
    fft_inplace(frame, false);
    out.at(t, 0) = {frame[0].real() * inv_n, 0.0};
    out.at(t, out.num_bins - 1) = {frame[fft_len / 2].real() * inv_n, 0.0};
    for (size_t f = 1; f < fft_len / 2; ++f) out.at(t, f) = frame[f] * (2.0 * inv_n);
  }
  return out;
}

}  // namespace tsecl::dsp
