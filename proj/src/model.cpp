// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "tsecl/metrics.hpp"
#include "tsecl/rng.hpp"

namespace tsecl::model {

namespace {

constexpr double kLn10Over10 = 0.23025850929940456840;  // ln(10)/10
constexpr double kDbGradScale = 1.0 / kLn10Over10;      // 10/ln(10)

using nlohmann::json;

// y += A x  (A: rows x cols, row-major)
void matvec_acc(const Tensor& a, const double* x, double* y) {
  const size_t rows = a.rows(), cols = a.cols();
  for (size_t i = 0; i < rows; ++i) {
    const double* row = a.data.data() + i * cols;
    double acc = 0.0;
    for (size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
    y[i] += acc;
  }
}

// y += A^T x, accumulated row-wise so memory access stays contiguous.
void matvec_t_acc(const Tensor& a, const double* x, double* y) {
  const size_t rows = a.rows(), cols = a.cols();
  for (size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = a.data.data() + i * cols;
    for (size_t j = 0; j < cols; ++j) y[j] += xi * row[j];
  }
}

// G += u v^T
void outer_acc(Tensor& g, const double* u, const double* v) {
  const size_t rows = g.rows(), cols = g.cols();
  for (size_t i = 0; i < rows; ++i) {
    const double ui = u[i];
    if (ui == 0.0) continue;
    double* row = g.data.data() + i * cols;
    for (size_t j = 0; j < cols; ++j) row[j] += ui * v[j];
  }
}

// Spectrum + embedding features of frame t for the first block.
void fill_features(const dsp::ComplexSpectrogram& s, const std::vector<double>& e,
                   size_t t, double* x) {
  const size_t F = s.num_bins;
  for (size_t f = 0; f < F; ++f) {
    x[f] = s.at(t, f).real();
    x[F + f] = s.at(t, f).imag();
  }
  std::copy(e.begin(), e.end(), x + 2 * F);
}

// dL/d(estimate) for the clipped dB losses. Flat regions of the clip (and the
// degenerate zero-residual case) return an all-zero gradient.
std::vector<double> loss_gradient(const dsp::Waveform& estimate,
                                  const dsp::Waveform& target, LossKind kind) {
  const size_t n = estimate.samples.size();
  std::vector<double> g(n, 0.0);

  if (kind == LossKind::NegSnr) {
    double es = 0.0, er = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double r = estimate.samples[i] - target.samples[i];
      es += target.samples[i] * target.samples[i];
      er += r * r;
    }
    if (er == 0.0 || es == 0.0) return g;
    const double db = 10.0 * std::log10(es / er);
    if (db >= metrics::kDbClip || db <= -metrics::kDbClip) return g;
    const double c = kDbGradScale * 2.0 / er;
    for (size_t i = 0; i < n; ++i)
      g[i] = c * (estimate.samples[i] - target.samples[i]);
    return g;
  }

  // NegSiSdr
  double es = 0.0, dot = 0.0;
  for (size_t i = 0; i < n; ++i) {
    es += target.samples[i] * target.samples[i];
    dot += estimate.samples[i] * target.samples[i];
  }
  if (es == 0.0) throw DataError("loss: zero-energy target");
  const double alpha = dot / es;
  double ep = alpha * alpha * es, ee = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double e = estimate.samples[i] - alpha * target.samples[i];
    ee += e * e;
  }
  if (ee == 0.0 || ep == 0.0) return g;
  const double db = 10.0 * std::log10(ep / ee);
  if (db >= metrics::kDbClip || db <= -metrics::kDbClip) return g;
  const double cp = kDbGradScale * 2.0 * alpha / ep;
  const double ce = kDbGradScale * 2.0 / ee;
  for (size_t i = 0; i < n; ++i) {
    const double e = estimate.samples[i] - alpha * target.samples[i];
    g[i] = -(cp * target.samples[i] - ce * e);
  }
  return g;
}

}  // namespace

const char* loss_kind_name(LossKind k) {
  return k == LossKind::NegSnr ? "neg_snr" : "neg_si_sdr";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "neg_snr") return LossKind::NegSnr;
  if (name == "neg_si_sdr") return LossKind::NegSiSdr;
  throw ConfigError("unknown loss kind: " + name);
}

void MaskNetConfig::validate() const {
  require_config(blocks >= 1, "model: blocks >= 1");
  require_config(hidden_dim >= 1, "model: hidden_dim >= 1");
  require_config(embed_dim >= 1, "model: embed_dim >= 1");
  stft.validate();
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
  Tensor t;
  t.shape = std::move(shape);
  size_t n = 1;
  for (size_t d : t.shape) n *= d;
  t.data.assign(n, 0.0);
  return t;
}

size_t Model::num_params() const {
  size_t n = 0;
  for (const auto& t : params) n += t.numel();
  return n;
}

uint64_t Model::fingerprint() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& t : params) {
    for (size_t d : t.shape) mix(&d, sizeof(d));
    mix(t.data.data(), t.data.size() * sizeof(double));
  }
  return h;
}

Gradients zeros_like(const Model& m) {
  Gradients g;
  g.reserve(m.params.size());
  for (const auto& t : m.params) g.push_back(Tensor::zeros(t.shape));
  return g;
}

size_t param_count(const MaskNetConfig& cfg) {
  const size_t h = static_cast<size_t>(cfg.hidden_dim);
  const size_t md = static_cast<size_t>(cfg.mask_dim());
  size_t n = 0;
  for (int b = 0; b < cfg.blocks; ++b) {
    const size_t in = static_cast<size_t>(cfg.input_dim(b));
    n += h * in + h + h * h;
  }
  return n + md * h + md;
}

Model init(const MaskNetConfig& cfg, uint64_t seed) {
  cfg.validate();
  Model m;
  m.config = cfg;
  const size_t h = static_cast<size_t>(cfg.hidden_dim);
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));  // "model" stream

  auto weight = [&rng](size_t rows, size_t cols) {
    Tensor t = Tensor::zeros({rows, cols});
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (auto& v : t.data) v = rng.uniform(-bound, bound);
    return t;
  };

  for (int b = 0; b < cfg.blocks; ++b) {
    const size_t in = static_cast<size_t>(cfg.input_dim(b));
    m.params.push_back(weight(h, in));
    m.params.push_back(Tensor::zeros({h}));
    m.params.push_back(weight(h, h));
  }
  const size_t md = static_cast<size_t>(cfg.mask_dim());
  m.params.push_back(weight(md, h));
  m.params.push_back(Tensor::zeros({md}));
  return m;
}

ForwardResult forward(const Model& m, const dsp::Waveform& mixture,
                      const embedding::EmbeddingVector& e) {
  m.config.validate();
  require(e.values.size() == static_cast<size_t>(m.config.embed_dim),
          "forward: embedding dimension mismatch");

  ForwardResult out;
  auto& cache = out.cache;
  cache.spec = dsp::stft(mixture, m.config.stft);
  cache.embed = e.values;
  cache.model_fingerprint = m.fingerprint();

  const size_t T = cache.spec.num_frames;
  const size_t F = cache.spec.num_bins;
  const size_t H = static_cast<size_t>(m.config.hidden_dim);
  const int B = m.config.blocks;

  cache.hidden.assign(static_cast<size_t>(B), std::vector<double>(T * H, 0.0));
  const size_t x_cap = std::max(static_cast<size_t>(m.config.input_dim(0)),
                                static_cast<size_t>(m.config.input_dim(1)));
  std::vector<double> x(x_cap);
  std::vector<double> h_prev(H), a(H);

  for (int b = 0; b < B; ++b) {
    std::fill(h_prev.begin(), h_prev.end(), 0.0);
    auto& hid = cache.hidden[static_cast<size_t>(b)];
    for (size_t t = 0; t < T; ++t) {
      if (b == 0) {
        fill_features(cache.spec, cache.embed, t, x.data());
      } else {
        const auto& below = cache.hidden[static_cast<size_t>(b) - 1];
        std::copy(below.begin() + static_cast<long>(t * H),
                  below.begin() + static_cast<long>((t + 1) * H), x.begin());
        std::copy(cache.embed.begin(), cache.embed.end(), x.begin() + static_cast<long>(H));
      }
      std::copy(m.bias(b).data.begin(), m.bias(b).data.end(), a.begin());
      matvec_acc(m.w(b), x.data(), a.data());
      matvec_acc(m.r(b), h_prev.data(), a.data());
      for (size_t k = 0; k < H; ++k) {
        const double v = std::tanh(a[k]);
        hid[t * H + k] = v;
        h_prev[k] = v;
        a[k] = 0.0;
      }
    }
  }

  // Output projection -> complex mask.
  cache.mask = dsp::make_spectrogram(T, m.config.stft, cache.spec.source_len);
  const auto& top = cache.hidden[static_cast<size_t>(B) - 1];
  const size_t md = static_cast<size_t>(m.config.mask_dim());
  std::vector<double> y(md);
  for (size_t t = 0; t < T; ++t) {
    std::copy(m.proj_bias().data.begin(), m.proj_bias().data.end(), y.begin());
    matvec_acc(m.proj(), top.data() + t * H, y.data());
    for (size_t f = 0; f < F; ++f) cache.mask.at(t, f) = {y[f], y[F + f]};
  }

  out.estimate = dsp::istft(apply_mask(cache.mask, cache.spec), mixture.sample_rate);
  if (!all_finite(out.estimate.samples))
    throw NumericError("forward: non-finite estimate");
  return out;
}

double loss(const dsp::Waveform& estimate, const dsp::Waveform& target,
            LossKind kind) {
  if (kind == LossKind::NegSnr) return -metrics::snr_db(target, estimate).value;
  return -metrics::si_sdr_db(estimate, target).value;
}

BackwardResult backward(const Model& m, const ActivationCache& cache,
                        const dsp::Waveform& estimate, const dsp::Waveform& target,
                        LossKind kind) {
  require(cache.model_fingerprint == m.fingerprint(),
          "backward: stale activation cache (model changed since forward)");
  require(estimate.samples.size() == cache.spec.source_len,
          "backward: estimate does not match cached forward");
  require(estimate.samples.size() == target.samples.size(),
          "backward: target length mismatch");

  const size_t T = cache.spec.num_frames;
  const size_t F = cache.spec.num_bins;
  const size_t H = static_cast<size_t>(m.config.hidden_dim);
  const int B = m.config.blocks;
  const size_t md = static_cast<size_t>(m.config.mask_dim());

  BackwardResult out;
  out.loss = loss(estimate, target, kind);
  out.grads = zeros_like(m);

  // Time-domain loss gradient, pulled back through the linear istft.
  dsp::Waveform g_wave;
  g_wave.sample_rate = estimate.sample_rate;
  g_wave.samples = loss_gradient(estimate, target, kind);
  const auto g_spec = dsp::istft_adjoint(g_wave, m.config.stft);
  require(g_spec.num_frames == T, "backward: frame count mismatch in adjoint");

  // Mask-multiply backward: dM = conj(S) * G, frame by frame; then the
  // projection layer.
  Gradients& grads = out.grads;
  Tensor& d_proj = grads[grads.size() - 2];
  Tensor& d_proj_bias = grads.back();
  const auto& top = cache.hidden[static_cast<size_t>(B) - 1];

  std::vector<double> dh(T * H, 0.0);  // incoming dL/dh for the current block
  std::vector<double> dy(md);
  for (size_t t = 0; t < T; ++t) {
    for (size_t f = 0; f < F; ++f) {
      const auto s = cache.spec.at(t, f);
      const auto g = g_spec.at(t, f);
      dy[f] = g.real() * s.real() + g.imag() * s.imag();
      dy[F + f] = -g.real() * s.imag() + g.imag() * s.real();
    }
    outer_acc(d_proj, dy.data(), top.data() + t * H);
    for (size_t k = 0; k < md; ++k) d_proj_bias.data[k] += dy[k];
    matvec_t_acc(m.proj(), dy.data(), dh.data() + t * H);
  }

  // Backpropagation through time, top block down.
  const size_t x_cap = std::max(static_cast<size_t>(m.config.input_dim(0)),
                                static_cast<size_t>(m.config.input_dim(1)));
  std::vector<double> da(H), rcarry(H), x(x_cap);
  std::vector<double> dh_below;
  for (int b = B - 1; b >= 0; --b) {
    const size_t in_dim = static_cast<size_t>(m.config.input_dim(b));
    const auto& hid = cache.hidden[static_cast<size_t>(b)];
    Tensor& dw = grads[static_cast<size_t>(3 * b)];
    Tensor& dbias = grads[static_cast<size_t>(3 * b + 1)];
    Tensor& dr = grads[static_cast<size_t>(3 * b + 2)];

    if (b > 0) dh_below.assign(T * H, 0.0);
    std::fill(rcarry.begin(), rcarry.end(), 0.0);

    for (size_t t = T; t-- > 0;) {
      for (size_t k = 0; k < H; ++k) {
        const double hv = hid[t * H + k];
        da[k] = (dh[t * H + k] + rcarry[k]) * (1.0 - hv * hv);
      }
      if (b == 0) {
        fill_features(cache.spec, cache.embed, t, x.data());
      } else {
        const auto& below = cache.hidden[static_cast<size_t>(b) - 1];
        std::copy(below.begin() + static_cast<long>(t * H),
                  below.begin() + static_cast<long>((t + 1) * H), x.begin());
        std::copy(cache.embed.begin(), cache.embed.end(),
                  x.begin() + static_cast<long>(H));
      }
      outer_acc(dw, da.data(), x.data());
      for (size_t k = 0; k < H; ++k) dbias.data[k] += da[k];
      if (t > 0) outer_acc(dr, da.data(), hid.data() + (t - 1) * H);

      std::fill(rcarry.begin(), rcarry.end(), 0.0);
      matvec_t_acc(m.r(b), da.data(), rcarry.data());
      if (b > 0) {
        // dx = W^T da; only the hidden-state slice flows downward (the
        // embedding is an input, not a parameter path).
        std::vector<double> dx(in_dim, 0.0);
        matvec_t_acc(m.w(b), da.data(), dx.data());
        for (size_t k = 0; k < H; ++k) dh_below[t * H + k] += dx[k];
      }
    }
    if (b > 0) dh.swap(dh_below);
  }
  return out;
}

BatchResult batch_gradient(const Model& m, const std::vector<BatchSample>& batch,
                           LossKind kind, const std::vector<bool>* keep_mask,
                           std::optional<double> self_paced_tau) {
  require(!batch.empty(), "batch_gradient: empty batch");
  if (keep_mask)
    require(keep_mask->size() == batch.size(), "batch_gradient: keep_mask size");

  BatchResult out;
  out.grads = zeros_like(m);
  out.losses.reserve(batch.size());
  out.snr_db.reserve(batch.size());
  out.kept.reserve(batch.size());

  for (size_t i = 0; i < batch.size(); ++i) {
    const auto& s = batch[i];
    ForwardResult fwd = forward(m, s.mixture, s.embed);
    const double snr = metrics::snr_db(s.target, fwd.estimate).value;
    out.snr_db.push_back(snr);

    bool keep = true;
    if (self_paced_tau)
      keep = snr >= *self_paced_tau;
    else if (keep_mask)
      keep = (*keep_mask)[i];
    out.kept.push_back(keep);

    if (keep) {
      BackwardResult bwd = backward(m, fwd.cache, fwd.estimate, s.target, kind);
      out.losses.push_back(bwd.loss);
      for (size_t p = 0; p < out.grads.size(); ++p)
        for (size_t k = 0; k < out.grads[p].data.size(); ++k)
          out.grads[p].data[k] += bwd.grads[p].data[k];
      ++out.kept_count;
    } else {
      out.losses.push_back(loss(fwd.estimate, s.target, kind));
    }
  }

  if (out.kept_count == 0) {
    out.skipped = true;
    return out;
  }
  const double inv = 1.0 / static_cast<double>(out.kept_count);
  for (auto& t : out.grads)
    for (auto& v : t.data) v *= inv;
  return out;
}

dsp::ComplexSpectrogram apply_mask(const ComplexMask& mask,
                                   const dsp::ComplexSpectrogram& spec) {
  require(mask.num_frames == spec.num_frames && mask.num_bins == spec.num_bins,
          "apply_mask: shape mismatch");
  dsp::ComplexSpectrogram out = spec;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = mask.data[i] * spec.data[i];
  return out;
}

ComplexMask oracle_mask(const dsp::ComplexSpectrogram& target,
                        const dsp::ComplexSpectrogram& mixture, double mag_clip) {
  require(target.num_frames == mixture.num_frames &&
              target.num_bins == mixture.num_bins,
          "oracle_mask: shape mismatch");
  ComplexMask mask = dsp::make_spectrogram(mixture.num_frames, mixture.config,
                                           mixture.source_len);
  for (size_t i = 0; i < mask.data.size(); ++i) {
    const auto mx = mixture.data[i];
    if (mx == std::complex<double>(0.0, 0.0)) continue;  // leave zero
    std::complex<double> v = target.data[i] / mx;
    const double mag = std::abs(v);
    if (mag > mag_clip) v *= mag_clip / mag;
    mask.data[i] = v;
  }
  return mask;
}

dsp::Waveform estimate_with_mask(const dsp::Waveform& mixture, const ComplexMask& mask,
                                 const dsp::StftConfig& cfg) {
  const auto spec = dsp::stft(mixture, cfg);
  return dsp::istft(apply_mask(mask, spec), mixture.sample_rate);
}

void save_checkpoint(const std::string& path, const Model& m, uint64_t seed,
                     uint64_t step) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_checkpoint: cannot open " + path);

  json shapes = json::array();
  for (const auto& t : m.params) shapes.push_back(t.shape);
  const json header{{"blocks", m.config.blocks},
                    {"embed_dim", m.config.embed_dim},
                    {"hidden_dim", m.config.hidden_dim},
                    {"loss", loss_kind_name(m.config.loss)},
                    {"seed", seed},
                    {"shapes", shapes},
                    {"step", step},
                    {"stft", {{"fft_len", m.config.stft.fft_len},
                              {"hop", m.config.stft.hop},
                              {"window_len", m.config.stft.window_len}}}};
  const std::string hs = header.dump();

  out.write("TSEC", 4);
  const uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));

  std::vector<float> buf;
  for (const auto& t : m.params) {
    buf.assign(t.data.begin(), t.data.end());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!out) throw DataError("save_checkpoint: write failure on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);

  char magic[4];
  uint32_t version = 0;
  uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || std::memcmp(magic, "TSEC", 4) != 0)
    throw DataError("load_checkpoint: not a checkpoint file: " + path);
  if (version != 1) throw DataError("load_checkpoint: unsupported version");
  if (hlen > (1u << 20)) throw DataError("load_checkpoint: oversized header");

  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("load_checkpoint: truncated header in " + path);

  Checkpoint ck;
  try {
    const json h = json::parse(hs);
    ck.model.config.blocks = h.at("blocks").get<int>();
    ck.model.config.hidden_dim = h.at("hidden_dim").get<int>();
    ck.model.config.embed_dim = h.at("embed_dim").get<int>();
    ck.model.config.loss = loss_kind_from_name(h.at("loss").get<std::string>());
    ck.model.config.stft.window_len = h.at("stft").at("window_len").get<int>();
    ck.model.config.stft.hop = h.at("stft").at("hop").get<int>();
    ck.model.config.stft.fft_len = h.at("stft").at("fft_len").get<int>();
    ck.seed = h.at("seed").get<uint64_t>();
    ck.step = h.at("step").get<uint64_t>();
    ck.model.config.validate();

    for (const auto& sj : h.at("shapes")) {
      Tensor t = Tensor::zeros(sj.get<std::vector<size_t>>());
      std::vector<float> buf(t.numel());
      in.read(reinterpret_cast<char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
      if (!in) throw DataError("load_checkpoint: truncated payload in " + path);
      std::copy(buf.begin(), buf.end(), t.data.begin());
      ck.model.params.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw DataError("load_checkpoint: bad header in " + path + ": " + e.what());
  }
  if (ck.model.num_params() != param_count(ck.model.config))
    throw DataError("load_checkpoint: shapes inconsistent with config");
  return ck;
}

}  // namespace tsecl::model
