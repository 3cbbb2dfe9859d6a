// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Compact complex-ratio-mask estimator. Per-frame features are the real and
// imaginary spectrum parts with the speaker embedding appended; each block is
// an affine map plus tanh with a causal recurrent mixing over frames, the
// embedding re-appended at every block input. A final projection emits the
// complex mask, the masked spectrum is synthesized back to time domain, and
// the loss (negative SNR or negative SI-SDR) is taken on the waveform. The
// backward pass is exact reverse-mode differentiation, with the istft step
// handled by its linear adjoint.

#ifndef TSECL_MODEL_HPP
#define TSECL_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsecl/dsp.hpp"
#include "tsecl/embedding.hpp"

namespace tsecl::model {

enum class LossKind { NegSnr, NegSiSdr };

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from_name(const std::string& name);

struct MaskNetConfig {
  int blocks = 2;
  int hidden_dim = 64;
  int embed_dim = 32;
  dsp::StftConfig stft;  // 512/128/512 default
  LossKind loss = LossKind::NegSnr;

  int mask_dim() const { return 2 * stft.bins(); }
  // Input width of block b: spectrum features for the first block, previous
  // hidden state afterwards, embedding always appended.
  int input_dim(int b) const {
    return (b == 0 ? mask_dim() : hidden_dim) + embed_dim;
  }
  void validate() const;
};

// Dense row-major tensor; rank 1 or 2 is all this model needs.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  static Tensor zeros(std::vector<size_t> shape);
  size_t numel() const { return data.size(); }
  size_t rows() const { return shape[0]; }
  size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }
  double& at(size_t i, size_t j) { return data[i * cols() + j]; }
  double at(size_t i, size_t j) const { return data[i * cols() + j]; }
};

// Parameter order: per block W, bias, R; then projection P and its bias.
struct Model {
  MaskNetConfig config;
  std::vector<Tensor> params;

  Tensor& w(int b) { return params[static_cast<size_t>(3 * b)]; }
  Tensor& bias(int b) { return params[static_cast<size_t>(3 * b + 1)]; }
  Tensor& r(int b) { return params[static_cast<size_t>(3 * b + 2)]; }
  Tensor& proj() { return params[params.size() - 2]; }
  Tensor& proj_bias() { return params.back(); }
  const Tensor& w(int b) const { return params[static_cast<size_t>(3 * b)]; }
  const Tensor& bias(int b) const { return params[static_cast<size_t>(3 * b + 1)]; }
  const Tensor& r(int b) const { return params[static_cast<size_t>(3 * b + 2)]; }
  const Tensor& proj() const { return params[params.size() - 2]; }
  const Tensor& proj_bias() const { return params.back(); }

  size_t num_params() const;
  uint64_t fingerprint() const;  // content hash; guards stale caches
};

using Gradients = std::vector<Tensor>;

Gradients zeros_like(const Model& m);

// Closed-form parameter count for a config (used to cross-check init).
size_t param_count(const MaskNetConfig& cfg);

// Uniform +-1/sqrt(fan_in) weights, zero biases, from a deterministic stream.
Model init(const MaskNetConfig& cfg, uint64_t seed);

using ComplexMask = dsp::ComplexSpectrogram;

// Everything backward needs from the matching forward call.
struct ActivationCache {
  dsp::ComplexSpectrogram spec;            // input spectrum S
  std::vector<std::vector<double>> hidden; // per block, T x H row-major
  ComplexMask mask;
  std::vector<double> embed;
  uint64_t model_fingerprint = 0;
};

struct ForwardResult {
  dsp::Waveform estimate;
  ActivationCache cache;
};

ForwardResult forward(const Model& m, const dsp::Waveform& mixture,
                      const embedding::EmbeddingVector& e);

double loss(const dsp::Waveform& estimate, const dsp::Waveform& target, LossKind kind);

struct BackwardResult {
  Gradients grads;
  double loss = 0.0;
};

// Exact gradients of loss(forward(m, mixture, e), target) w.r.t. every
// parameter. cache/estimate must come from a forward call on this model.
BackwardResult backward(const Model& m, const ActivationCache& cache,
                        const dsp::Waveform& estimate, const dsp::Waveform& target,
                        LossKind kind);

struct BatchSample {
  dsp::Waveform mixture;
  embedding::EmbeddingVector embed;
  dsp::Waveform target;
};

struct BatchResult {
  Gradients grads;                 // mean over kept samples (zero if none)
  std::vector<double> losses;      // per sample, kept or not
  std::vector<double> snr_db;      // per sample snr_db(target, estimate)
  std::vector<bool> kept;
  size_t kept_count = 0;
  bool skipped = false;            // no sample kept: do not apply an update
};

// Mean gradient over kept samples, accumulated in batch order. keep_mask
// nullptr keeps everything. self_paced_tau (if set) overrides keep_mask with
// keep[i] = (snr_db[i] >= tau), computed from this batch's own forwards.
BatchResult batch_gradient(const Model& m, const std::vector<BatchSample>& batch,
                           LossKind kind, const std::vector<bool>* keep_mask = nullptr,
                           std::optional<double> self_paced_tau = std::nullopt);

// Mask utilities (shared with evaluation and the oracle-mask ceiling).
dsp::ComplexSpectrogram apply_mask(const ComplexMask& mask,
                                   const dsp::ComplexSpectrogram& spec);
// Per-bin target/mixture ratio with magnitude clipped at 10; exact-zero
// mixture bins map to a zero mask value.
ComplexMask oracle_mask(const dsp::ComplexSpectrogram& target,
                        const dsp::ComplexSpectrogram& mixture, double mag_clip = 10.0);
// stft -> mask multiply -> istft with trimming to the mixture length.
dsp::Waveform estimate_with_mask(const dsp::Waveform& mixture, const ComplexMask& mask,
                                 const dsp::StftConfig& cfg);

// Checkpoints: "TSEC" magic, format version, JSON header (config echo, seed,
// step, shapes), float32 little-endian tensor payloads in parameter order.
void save_checkpoint(const std::string& path, const Model& m, uint64_t seed,
                     uint64_t step);
struct Checkpoint {
  Model model;
  uint64_t seed = 0;
  uint64_t step = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tsecl::model

#endif  // TSECL_MODEL_HPP
