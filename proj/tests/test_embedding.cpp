// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "tsecl/datagen.hpp"
#include "tsecl/embedding.hpp"
#include "tsecl/metrics.hpp"
#include "tsecl/rng.hpp"

using namespace tsecl;
using embedding::EmbedConfig;

namespace {

dsp::Waveform utter(const datagen::SpeakerProfile& p, uint64_t seed,
                    double dur = 1.0) {
  return datagen::synth_utterance(p, dur, seed);
}

}  // namespace

TEST_CASE("embedding dimension, norm, and determinism") {
  const EmbedConfig cfg;
  CHECK(cfg.dim() == 32);
  const auto profiles = datagen::make_profiles(1, 3, "x", 16000.0);
  const auto w = utter(profiles[0], 1);

  const auto a = embedding::embed(w, cfg);
  const auto b = embedding::embed(w, cfg);
  REQUIRE(a.values.size() == 32);
  for (size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);

  double norm = 0.0;
  for (double v : a.values) norm += v * v;
  CHECK(std::abs(std::sqrt(norm) - 1.0) < 1e-9);
}

TEST_CASE("embedding is amplitude-invariant") {
  const EmbedConfig cfg;
  const auto profiles = datagen::make_profiles(1, 5, "x", 16000.0);
  const auto w = utter(profiles[1], 2);
  const auto base = embedding::embed(w, cfg);
  for (double c : {0.1, 2.0, 25.0}) {
    dsp::Waveform scaled = w;
    for (auto& v : scaled.samples) v *= c;
    const auto e = embedding::embed(scaled, cfg);
    for (size_t i = 0; i < e.values.size(); ++i)
      CHECK(std::abs(e.values[i] - base.values[i]) < 1e-6);
  }
}

TEST_CASE("same-profile similarity beats cross-gender over 100 seeded pairs") {
  const EmbedConfig cfg;
  const auto as = datagen::make_profiles(50, 17, "pa", 16000.0);  // 50 A + 50 B
  size_t wins = 0;
  double sum_same = 0.0, sum_cross = 0.0;
  const size_t n_pairs = 100;
  for (size_t k = 0; k < n_pairs; ++k) {
    const auto& pa = as[k % 50];         // gender A
    const auto& pb = as[50 + k % 50];    // gender B
    const auto ea1 = embedding::embed(utter(pa, 1000 + k), cfg);
    const auto ea2 = embedding::embed(utter(pa, 2000 + k), cfg);
    const auto eb = embedding::embed(utter(pb, 3000 + k), cfg);
    const double same = metrics::cosine_similarity(ea1.values, ea2.values);
    const double cross = metrics::cosine_similarity(ea1.values, eb.values);
    sum_same += same;
    sum_cross += cross;
    if (same > cross) ++wins;
  }
  const double mean_same = sum_same / n_pairs;
  const double mean_cross = sum_cross / n_pairs;
  CHECK(wins >= 95);
  CHECK(mean_same > mean_cross + 0.05);
}

TEST_CASE("embedding input and config validation") {
  const EmbedConfig cfg;
  dsp::Waveform tiny;
  tiny.samples.assign(100, 0.5);  // shorter than one window
  tiny.sample_rate = 16000.0;
  CHECK_THROWS_AS(embedding::embed(tiny, cfg), DataError);

  EmbedConfig bad = cfg;
  bad.fmax_hz = 9000.0;  // above Nyquist at 16 kHz
  const auto profiles = datagen::make_profiles(1, 7, "x", 16000.0);
  const auto w = utter(profiles[0], 1, 0.2);
  CHECK_THROWS_AS(embedding::embed(w, bad), ConfigError);

  bad = cfg;
  bad.num_bands = 1;
  CHECK_THROWS_AS(embedding::embed(w, bad), ConfigError);
}

TEST_CASE("mel filterbank covers the analysis band") {
  const EmbedConfig cfg;
  const auto fb = embedding::mel_filterbank(cfg, 16000.0);
  REQUIRE(fb.size() == 16);
  for (const auto& band : fb) {
    double sum = 0.0;
    for (double v : band) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(sum > 0.0);  // no empty bands at this resolution
  }
}
