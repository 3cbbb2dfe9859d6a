// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Mask model tests. The backward pass is checked against central finite
// differences parameter by parameter on a small configuration, plus the
// structural zeros the feature layout forces.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tsecl/common.hpp"
#include "tsecl/metrics.hpp"
#include "tsecl/model.hpp"
#include "tsecl/rng.hpp"

using namespace tsecl;
using model::BatchSample;
using model::LossKind;
using model::MaskNetConfig;
using model::Model;

namespace {

MaskNetConfig tiny_config(LossKind kind = LossKind::NegSnr) {
  MaskNetConfig cfg;
  cfg.blocks = 1;
  cfg.hidden_dim = 4;
  cfg.embed_dim = 4;
  cfg.stft = dsp::make_stft_config(8, 4, 8);
  cfg.loss = kind;
  return cfg;
}

dsp::Waveform random_wave(size_t n, uint64_t seed, double scale = 0.1) {
  Rng rng(seed);
  dsp::Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = scale * rng.uniform(-1.0, 1.0);
  return w;
}

embedding::EmbeddingVector random_embed(int dim, uint64_t seed) {
  Rng rng(seed);
  embedding::EmbeddingVector e;
  e.values.resize(static_cast<size_t>(dim));
  for (auto& v : e.values) v = rng.uniform(-1.0, 1.0);
  return e;
}

double loss_of(const Model& m, const dsp::Waveform& mix,
               const embedding::EmbeddingVector& e, const dsp::Waveform& tgt,
               LossKind kind) {
  const auto fwd = model::forward(m, mix, e);
  return model::loss(fwd.estimate, tgt, kind);
}

// Make the net emit a constant mask regardless of input: zero projection,
// bias = the mask.
void force_constant_mask(Model& m, double re, double im) {
  auto& p = m.proj();
  std::fill(p.data.begin(), p.data.end(), 0.0);
  auto& c = m.proj_bias();
  const size_t bins = c.numel() / 2;
  for (size_t f = 0; f < bins; ++f) {
    c.data[f] = re;
    c.data[bins + f] = im;
  }
}

}  // namespace

TEST_SUITE("model parameters") {
  TEST_CASE("closed-form parameter count for the tiny config") {
    const auto cfg = tiny_config();
    // W0: 4 x 14, b0: 4, R0: 4 x 4, P: 10 x 4, c: 10 -> 126.
    CHECK(model::param_count(cfg) == 126);
    const Model m = model::init(cfg, 7);
    CHECK(m.num_params() == 126);
    REQUIRE(m.params.size() == 5);
    CHECK(m.w(0).shape == std::vector<size_t>{4, 14});
    CHECK(m.bias(0).shape == std::vector<size_t>{4});
    CHECK(m.r(0).shape == std::vector<size_t>{4, 4});
    CHECK(m.proj().shape == std::vector<size_t>{10, 4});
    CHECK(m.proj_bias().shape == std::vector<size_t>{10});
  }

  TEST_CASE("init: deterministic, seed-sensitive, bounded, zero biases") {
    const auto cfg = tiny_config();
    const Model a = model::init(cfg, 42);
    const Model b = model::init(cfg, 42);
    const Model c = model::init(cfg, 43);
    REQUIRE(a.params.size() == b.params.size());
    for (size_t t = 0; t < a.params.size(); ++t) {
      CHECK(a.params[t].data == b.params[t].data);
    }
    bool any_diff = false;
    for (size_t t = 0; t < a.params.size(); ++t) {
      if (a.params[t].data != c.params[t].data) any_diff = true;
    }
    CHECK(any_diff);

    for (double v : a.bias(0).data) CHECK(v == 0.0);
    for (double v : a.proj_bias().data) CHECK(v == 0.0);
    const double w_bound = 1.0 / std::sqrt(14.0);
    for (double v : a.w(0).data) CHECK(std::abs(v) <= w_bound);
    const double r_bound = 1.0 / std::sqrt(4.0);
    for (double v : a.r(0).data) CHECK(std::abs(v) <= r_bound);
    for (double v : a.proj().data) CHECK(std::abs(v) <= r_bound);
    CHECK(a.fingerprint() == b.fingerprint());
    CHECK(a.fingerprint() != c.fingerprint());
  }

  TEST_CASE("config validation") {
    auto cfg = tiny_config();
    cfg.blocks = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.hidden_dim = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_config();
    cfg.embed_dim = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_SUITE("model forward") {
  TEST_CASE("deterministic, length-preserving, cache is stamped") {
    const auto cfg = tiny_config();
    const Model m = model::init(cfg, 7);
    const auto mix = random_wave(800, 11);
    const auto e = random_embed(cfg.embed_dim, 12);
    const auto f1 = model::forward(m, mix, e);
    const auto f2 = model::forward(m, mix, e);
    CHECK(f1.estimate.samples.size() == mix.samples.size());
    CHECK(f1.estimate.samples == f2.estimate.samples);
    CHECK(f1.cache.model_fingerprint == m.fingerprint());
    CHECK(f1.cache.mask.num_bins == cfg.stft.bins());
  }

  TEST_CASE("unit mask reduces to the stft round trip") {
    const auto cfg = tiny_config();
    Model m = model::init(cfg, 7);
    force_constant_mask(m, 1.0, 0.0);
    const auto mix = random_wave(800, 21);
    const auto e = random_embed(cfg.embed_dim, 22);
    const auto fwd = model::forward(m, mix, e);
    REQUIRE(fwd.estimate.samples.size() == mix.samples.size());
    double max_diff = 0.0;
    for (size_t i = 0; i < mix.samples.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(fwd.estimate.samples[i] - mix.samples[i]));
    }
    CHECK(max_diff < 1e-8);
    // Perfect extraction of target == mixture pins the loss at the clip.
    CHECK(model::loss(fwd.estimate, mix, LossKind::NegSnr) == -metrics::kDbClip);
  }

  TEST_CASE("zero mask silences the estimate") {
    const auto cfg = tiny_config();
    Model m = model::init(cfg, 7);
    force_constant_mask(m, 0.0, 0.0);
    const auto mix = random_wave(800, 31);
    const auto e = random_embed(cfg.embed_dim, 32);
    const auto fwd = model::forward(m, mix, e);
    for (double s : fwd.estimate.samples) CHECK(s == 0.0);
  }

  TEST_CASE("input validation") {
    const auto cfg = tiny_config();
    const Model m = model::init(cfg, 7);
    const auto mix = random_wave(800, 41);
    auto bad_e = random_embed(cfg.embed_dim + 1, 42);
    CHECK_THROWS_AS(model::forward(m, mix, bad_e), DataError);
    dsp::Waveform empty;
    CHECK_THROWS_AS(model::forward(m, empty, random_embed(cfg.embed_dim, 43)),
                    DataError);
  }

  TEST_CASE("loss delegates to the metric definitions") {
    const auto est = random_wave(300, 51);
    const auto tgt = random_wave(300, 52);
    CHECK(model::loss(est, tgt, LossKind::NegSnr) ==
          -metrics::snr_db(tgt, est).value);
    CHECK(model::loss(est, tgt, LossKind::NegSiSdr) ==
          -metrics::si_sdr_db(est, tgt).value);
  }
}

TEST_SUITE("mask utilities") {
  TEST_CASE("apply_mask is the complex product") {
    dsp::ComplexSpectrogram s =
        dsp::make_spectrogram(1, dsp::make_stft_config(8, 4, 8), 0);
    dsp::ComplexSpectrogram mk = s;
    s.at(0, 0) = {2.0, 1.0};
    s.at(0, 1) = {-1.0, 3.0};
    mk.at(0, 0) = {0.5, -0.5};
    mk.at(0, 1) = {2.0, 1.0};
    const auto out = model::apply_mask(mk, s);
    CHECK(std::abs(out.at(0, 0) - std::complex<double>(1.5, -0.5)) < 1e-15);
    CHECK(std::abs(out.at(0, 1) - std::complex<double>(-5.0, 5.0)) < 1e-15);
  }

  TEST_CASE("oracle mask recovers the target and clips its magnitude") {
    const auto cfg = dsp::make_stft_config(8, 4, 8);
    auto tgt = dsp::make_spectrogram(2, cfg, 0);
    auto mix = dsp::make_spectrogram(2, cfg, 0);
    Rng rng(61);
    for (int t = 0; t < 2; ++t) {
      for (int f = 0; f < cfg.bins(); ++f) {
        tgt.at(t, f) = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        mix.at(t, f) = {rng.uniform(0.5, 1.0), rng.uniform(0.5, 1.0)};
      }
    }
    // A vanishing mixture bin forces the clip; an exactly-zero one maps to 0.
    tgt.at(1, 2) = {5.0, 0.0};
    mix.at(1, 2) = {1e-6, 0.0};
    mix.at(1, 3) = {0.0, 0.0};
    const auto mask = model::oracle_mask(tgt, mix);
    const auto rec = model::apply_mask(mask, mix);
    for (int t = 0; t < 2; ++t) {
      for (int f = 0; f < cfg.bins(); ++f) {
        if (t == 1 && (f == 2 || f == 3)) continue;
        CHECK(std::abs(rec.at(t, f) - tgt.at(t, f)) < 1e-12);
      }
    }
    CHECK(std::abs(mask.at(1, 2)) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(std::abs(mask.at(1, 3)) == 0.0);
  }
}

TEST_SUITE("model backward") {
  TEST_CASE("finite differences confirm every parameter gradient") {
    const double h = 1e-5;
    for (const auto kind : {LossKind::NegSnr, LossKind::NegSiSdr}) {
      for (const uint64_t seed : {101u, 202u, 303u}) {
        const auto cfg = tiny_config(kind);
        Model m = model::init(cfg, seed);
        const auto tgt = random_wave(800, seed + 1);
        auto mix = tgt;
        const auto noise = random_wave(800, seed + 2, 0.05);
        for (size_t i = 0; i < mix.samples.size(); ++i) {
          mix.samples[i] += noise.samples[i];
        }
        const auto e = random_embed(cfg.embed_dim, seed + 3);

        const auto fwd = model::forward(m, mix, e);
        const auto bwd = model::backward(m, fwd.cache, fwd.estimate, tgt, kind);
        CHECK(std::isfinite(bwd.loss));
        CHECK(bwd.loss == model::loss(fwd.estimate, tgt, kind));

        double worst = 0.0;
        for (size_t t = 0; t < m.params.size(); ++t) {
          for (size_t i = 0; i < m.params[t].numel(); ++i) {
            const double saved = m.params[t].data[i];
            m.params[t].data[i] = saved + h;
            const double lp = loss_of(m, mix, e, tgt, kind);
            m.params[t].data[i] = saved - h;
            const double lm = loss_of(m, mix, e, tgt, kind);
            m.params[t].data[i] = saved;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = bwd.grads[t].data[i];
            const double rel =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-4});
            worst = std::max(worst, rel);
          }
        }
        INFO("loss kind " << model::loss_kind_name(kind) << " seed " << seed
                          << " worst rel err " << worst);
        CHECK(worst < 1e-4);
      }
    }
  }

  TEST_CASE("structural zeros from the spectrum layout") {
    const auto cfg = tiny_config();
    Model m = model::init(cfg, 7);
    const auto tgt = random_wave(800, 71);
    const auto mix = random_wave(800, 72);
    const auto e = random_embed(cfg.embed_dim, 73);
    const auto fwd = model::forward(m, mix, e);
    const auto bwd = model::backward(m, fwd.cache, fwd.estimate, tgt, LossKind::NegSnr);

    const size_t bins = static_cast<size_t>(cfg.stft.bins());
    const auto& w_grad = bwd.grads[0];
    // Imaginary DC and Nyquist features are identically zero, so their input
    // columns can never receive gradient.
    for (size_t r = 0; r < w_grad.rows(); ++r) {
      CHECK(w_grad.at(r, bins) == 0.0);
      CHECK(w_grad.at(r, 2 * bins - 1) == 0.0);
    }
    // The synthesis adjoint pins those same mask components to zero, so the
    // matching projection rows and biases are flat too.
    const auto& p_grad = bwd.grads[bwd.grads.size() - 2];
    const auto& c_grad = bwd.grads.back();
    for (size_t j = 0; j < p_grad.cols(); ++j) {
      CHECK(p_grad.at(bins, j) == 0.0);
      CHECK(p_grad.at(2 * bins - 1, j) == 0.0);
    }
    CHECK(c_grad.data[bins] == 0.0);
    CHECK(c_grad.data[2 * bins - 1] == 0.0);
    // And something real flows everywhere else.
    double norm = 0.0;
    for (const auto& g : bwd.grads) {
      for (double v : g.data) norm += v * v;
    }
    CHECK(norm > 0.0);
  }

  TEST_CASE("stale caches are rejected") {
    const auto cfg = tiny_config();
    Model m = model::init(cfg, 7);
    const auto mix = random_wave(800, 81);
    const auto tgt = random_wave(800, 82);
    const auto e = random_embed(cfg.embed_dim, 83);
    const auto fwd = model::forward(m, mix, e);
    m.params[0].data[0] += 1.0;
    CHECK_THROWS_AS(model::backward(m, fwd.cache, fwd.estimate, tgt, LossKind::NegSnr),
                    DataError);
  }
}

TEST_SUITE("model batches") {
  std::vector<BatchSample> make_batch(const MaskNetConfig& cfg, size_t n,
                                      uint64_t seed) {
    std::vector<BatchSample> batch;
    for (size_t i = 0; i < n; ++i) {
      BatchSample s;
      s.target = random_wave(800, seed + 10 * i);
      s.mixture = s.target;
      const auto noise = random_wave(800, seed + 10 * i + 1, 0.05);
      for (size_t k = 0; k < 800; ++k) s.mixture.samples[k] += noise.samples[k];
      s.embed = random_embed(cfg.embed_dim, seed + 10 * i + 2);
      batch.push_back(std::move(s));
    }
    return batch;
  }

  TEST_CASE("single sample equals backward") {
    const auto cfg = tiny_config();
    const Model m = model::init(cfg, 7);
    const auto batch = make_batch(cfg, 1, 900);
    const auto br = model::batch_gradient(m, batch, LossKind::NegSnr);
    const auto fwd = model::forward(m, batch[0].mixture, batch[0].embed);
    const auto bwd =
        model::backward(m, fwd.cache, fwd.estimate, batch[0].target, LossKind::NegSnr);
    REQUIRE(br.grads.size() == bwd.grads.size());
    for (size_t t = 0; t < br.grads.size(); ++t) {
      CHECK(br.grads[t].data == bwd.grads[t].data);
    }
    CHECK(br.losses.size() == 1);
    CHECK(br.losses[0] == bwd.loss);
    CHECK(br.kept_count == 1);
    CHECK_FALSE(br.skipped);
  }

  TEST_CASE("masked mean matches manual averaging") {
    const auto cfg = tiny_config();
    const Model m = model::init(cfg, 7);
    const auto batch = make_batch(cfg, 3, 910);
    const std::vector<bool> keep{true, false, true};
    const auto br = model::batch_gradient(m, batch, LossKind::NegSnr, &keep);
    CHECK(br.kept_count == 2);
    CHECK(br.losses.size() == 3);
    CHECK(br.snr_db.size() == 3);
    CHECK(br.kept == keep);

    auto expected = model::zeros_like(m);
    for (const size_t idx : {size_t{0}, size_t{2}}) {
      const auto fwd = model::forward(m, batch[idx].mixture, batch[idx].embed);
      const auto bwd = model::backward(m, fwd.cache, fwd.estimate, batch[idx].target,
                                       LossKind::NegSnr);
      for (size_t t = 0; t < expected.size(); ++t) {
        for (size_t i = 0; i < expected[t].numel(); ++i) {
          expected[t].data[i] += bwd.grads[t].data[i];
        }
      }
    }
    for (size_t t = 0; t < expected.size(); ++t) {
      for (size_t i = 0; i < expected[t].numel(); ++i) {
        CHECK(br.grads[t].data[i] ==
              doctest::Approx(expected[t].data[i] / 2.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("all-true mask equals no mask") {
    const auto cfg = tiny_config();
    const Model m = model::init(cfg, 7);
    const auto batch = make_batch(cfg, 3, 920);
    const std::vector<bool> keep{true, true, true};
    const auto a = model::batch_gradient(m, batch, LossKind::NegSnr, &keep);
    const auto b = model::batch_gradient(m, batch, LossKind::NegSnr);
    for (size_t t = 0; t < a.grads.size(); ++t) {
      CHECK(a.grads[t].data == b.grads[t].data);
    }
  }

  TEST_CASE("self-paced tau reproduces an explicit mask and can skip") {
    const auto cfg = tiny_config();
    const Model m = model::init(cfg, 7);
    const auto batch = make_batch(cfg, 4, 930);
    const auto probe = model::batch_gradient(m, batch, LossKind::NegSnr);
    // Median-ish threshold: some kept, some dropped.
    std::vector<double> snrs = probe.snr_db;
    std::sort(snrs.begin(), snrs.end());
    const double tau = snrs[2];
    std::vector<bool> keep;
    for (const double s : probe.snr_db) keep.push_back(s >= tau);
    const auto via_tau =
        model::batch_gradient(m, batch, LossKind::NegSnr, nullptr, tau);
    const auto via_mask = model::batch_gradient(m, batch, LossKind::NegSnr, &keep);
    CHECK(via_tau.kept == keep);
    for (size_t t = 0; t < via_tau.grads.size(); ++t) {
      CHECK(via_tau.grads[t].data == via_mask.grads[t].data);
    }

    const auto skipped =
        model::batch_gradient(m, batch, LossKind::NegSnr, nullptr, 1e9);
    CHECK(skipped.skipped);
    CHECK(skipped.kept_count == 0);
    CHECK(skipped.losses.size() == 4);
    for (const auto& g : skipped.grads) {
      for (double v : g.data) CHECK(v == 0.0);
    }
  }
}

TEST_SUITE("model checkpoints") {
  TEST_CASE("round trip preserves config and float32 parameters") {
    const auto cfg = tiny_config(LossKind::NegSiSdr);
    const Model m = model::init(cfg, 99);
    const std::string path = "test_model_ckpt.bin";
    model::save_checkpoint(path, m, 99, 1234);
    const auto ck = model::load_checkpoint(path);
    CHECK(ck.seed == 99);
    CHECK(ck.step == 1234);
    CHECK(ck.model.config.blocks == cfg.blocks);
    CHECK(ck.model.config.hidden_dim == cfg.hidden_dim);
    CHECK(ck.model.config.embed_dim == cfg.embed_dim);
    CHECK(ck.model.config.loss == cfg.loss);
    CHECK(ck.model.config.stft.window_len == cfg.stft.window_len);
    CHECK(ck.model.config.stft.hop == cfg.stft.hop);
    CHECK(ck.model.config.stft.fft_len == cfg.stft.fft_len);
    REQUIRE(ck.model.params.size() == m.params.size());
    for (size_t t = 0; t < m.params.size(); ++t) {
      CHECK(ck.model.params[t].shape == m.params[t].shape);
      for (size_t i = 0; i < m.params[t].numel(); ++i) {
        CHECK(ck.model.params[t].data[i] ==
              static_cast<double>(static_cast<float>(m.params[t].data[i])));
      }
    }
    std::remove(path.c_str());
  }

  TEST_CASE("malformed files are rejected") {
    const std::string path = "test_model_ckpt_bad.bin";
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out << "not a checkpoint";
    }
    CHECK_THROWS_AS(model::load_checkpoint(path), DataError);
    // Valid start, truncated payload.
    const auto cfg = tiny_config();
    const Model m = model::init(cfg, 7);
    model::save_checkpoint(path, m, 7, 0);
    std::string bytes;
    {
      std::ifstream in(path, std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 40));
    }
    CHECK_THROWS_AS(model::load_checkpoint(path), DataError);
    CHECK_THROWS_AS(model::load_checkpoint("nonexistent_dir/nope.bin"), DataError);
    std::remove(path.c_str());
  }
}
