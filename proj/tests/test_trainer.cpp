// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Trainer tests: the lr schedule against its closed forms, Adam against an
// independent scalar re-implementation, and run_schedule's bookkeeping
// (batch id audits, skipped self-paced phases, determinism) on a toy dataset.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsecl/common.hpp"
#include "tsecl/curriculum.hpp"
#include "tsecl/datagen.hpp"
#include "tsecl/trainer.hpp"

using namespace tsecl;
using curriculum::Measure;
using curriculum::MeasureSpec;

namespace {

datagen::DatasetConfig tiny_dataset() {
  datagen::DatasetConfig cfg;
  cfg.train_profiles_per_gender = 3;
  cfg.test_profiles_per_gender = 2;
  cfg.train_pairs_per_class = 3;
  cfg.dev_pairs_per_class = 2;
  cfg.test_pairs_per_class = 1;
  cfg.utterances_per_pair = 1;
  cfg.mixture_duration_s = 0.2;
  cfg.reference_duration_s = 0.3;
  cfg.seed = 42;
  return cfg;
}

trainer::TrainConfig tiny_train_config() {
  trainer::TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.seed = 7;
  cfg.lr.warmup_batches = 10;
  cfg.embed_cfg.stft = dsp::make_stft_config(256, 64, 256);
  cfg.embed_cfg.num_bands = 8;
  return cfg;
}

model::MaskNetConfig tiny_model_config() {
  model::MaskNetConfig cfg;
  cfg.blocks = 1;
  cfg.hidden_dim = 8;
  cfg.embed_dim = 16;
  cfg.stft = dsp::make_stft_config(256, 64, 256);
  return cfg;
}

bool params_equal(const model::Model& a, const model::Model& b) {
  if (a.params.size() != b.params.size()) return false;
  for (size_t t = 0; t < a.params.size(); ++t) {
    if (a.params[t].data != b.params[t].data) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("learning rate schedule") {
  TEST_CASE("closed forms at the anchor points") {
    trainer::LrSchedule s;  // peak 1e-3, warmup 5000, floor 1e-5
    CHECK(trainer::lr_at(0, s) == 0.0);
    CHECK(trainer::lr_at(2500, s) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(trainer::lr_at(5000, s) == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(trainer::lr_at(1000000000000LL, s) == 1e-5);  // exact floor
  }

  TEST_CASE("continuous at the warmup boundary, then nonincreasing") {
    trainer::LrSchedule s;
    s.warmup_batches = 100;
    const double at_boundary = trainer::lr_at(100, s);
    const double just_after = trainer::lr_at(101, s);
    CHECK(at_boundary == doctest::Approx(s.peak_lr).epsilon(1e-12));
    CHECK(std::abs(at_boundary - just_after) < s.peak_lr * 0.01);
    double prev = at_boundary;
    for (int64_t i = 101; i < 4000; i += 7) {
      const double lr = trainer::lr_at(i, s);
      CHECK(lr <= prev + 1e-18);
      CHECK(lr >= s.floor_lr);
      prev = lr;
    }
  }

  TEST_CASE("validation") {
    trainer::LrSchedule s;
    s.floor_lr = 2e-3;  // above peak
    CHECK_THROWS_AS(trainer::lr_at(1, s), ConfigError);
    s = trainer::LrSchedule{};
    s.warmup_batches = 0;
    CHECK_THROWS_AS(trainer::lr_at(1, s), ConfigError);
    s = trainer::LrSchedule{};
    CHECK_THROWS_AS(trainer::lr_at(-1, s), ConfigError);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("zero gradients leave parameters untouched") {
    const auto mcfg = tiny_model_config();
    model::Model m = model::init(mcfg, 3);
    const model::Model before = m;
    auto opt = trainer::make_optim_state(m);
    const auto zeros = model::zeros_like(m);
    trainer::adam_step(m, zeros, opt, 1e-3);
    CHECK(params_equal(m, before));
    CHECK(opt.step == 1);
  }

  TEST_CASE("first step moves by roughly -lr * sign(g)") {
    const auto mcfg = tiny_model_config();
    model::Model m = model::init(mcfg, 3);
    const model::Model before = m;
    auto opt = trainer::make_optim_state(m);
    auto grads = model::zeros_like(m);
    grads[0].data[0] = 0.5;
    grads[0].data[1] = -2.0;
    grads[2].data[3] = 1e-3;
    const double lr = 1e-3;
    trainer::adam_step(m, grads, opt, lr);
    CHECK(m.params[0].data[0] - before.params[0].data[0] ==
          doctest::Approx(-lr).epsilon(1e-6));
    CHECK(m.params[0].data[1] - before.params[0].data[1] ==
          doctest::Approx(lr).epsilon(1e-6));
    CHECK(m.params[2].data[3] - before.params[2].data[3] ==
          doctest::Approx(-lr).epsilon(1e-4));
    // Untouched coordinates stay put.
    CHECK(m.params[1].data == before.params[1].data);
  }

  TEST_CASE("five steps on a quadratic match a scalar reference") {
    // Objective 0.5 (theta - 3)^2 on the first coordinate only.
    const auto mcfg = tiny_model_config();
    model::Model m = model::init(mcfg, 3);
    m.params[0].data[0] = 0.0;
    auto opt = trainer::make_optim_state(m);
    const double lr = 0.1;

    // Independent scalar Adam, long double throughout.
    long double theta = 0.0L, m1 = 0.0L, m2 = 0.0L;
    const long double b1 = 0.9L, b2 = 0.999L, eps = 1e-8L;
    std::vector<double> reference;
    for (int t = 1; t <= 5; ++t) {
      const long double g = theta - 3.0L;
      m1 = b1 * m1 + (1.0L - b1) * g;
      m2 = b2 * m2 + (1.0L - b2) * g * g;
      const long double mh = m1 / (1.0L - std::pow(b1, static_cast<long double>(t)));
      const long double vh = m2 / (1.0L - std::pow(b2, static_cast<long double>(t)));
      theta -= static_cast<long double>(lr) * mh / (std::sqrt(vh) + eps);
      reference.push_back(static_cast<double>(theta));
    }

    double prev_obj = 0.5 * 9.0;
    for (int t = 0; t < 5; ++t) {
      auto grads = model::zeros_like(m);
      grads[0].data[0] = m.params[0].data[0] - 3.0;
      trainer::adam_step(m, grads, opt, lr);
      const double obj = 0.5 * std::pow(m.params[0].data[0] - 3.0, 2.0);
      CHECK(obj < prev_obj);
      prev_obj = obj;
      CHECK(m.params[0].data[0] == doctest::Approx(reference[t]).epsilon(1e-12));
    }
    CHECK(opt.step == 5);
  }

  TEST_CASE("bad inputs are rejected") {
    const auto mcfg = tiny_model_config();
    model::Model m = model::init(mcfg, 3);
    auto opt = trainer::make_optim_state(m);
    auto grads = model::zeros_like(m);
    grads.pop_back();
    CHECK_THROWS_AS(trainer::adam_step(m, grads, opt, 1e-3), DataError);
    grads = model::zeros_like(m);
    grads[0].data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(trainer::adam_step(m, grads, opt, 1e-3), NumericError);
    grads = model::zeros_like(m);
    CHECK_THROWS_AS(
        trainer::adam_step(m, grads, opt, std::numeric_limits<double>::infinity()),
        NumericError);
  }
}

TEST_SUITE("run_schedule") {
  TEST_CASE("two-phase bookkeeping and the batch id audit") {
    auto bundle = datagen::build_dataset(tiny_dataset());
    const auto tcfg = tiny_train_config();
    curriculum::ScoreContext ctx;
    ctx.embed_cfg = tcfg.embed_cfg;
    ctx.sample_rate = bundle.train.sample_rate;
    curriculum::annotate_manifest(bundle.train, Measure::Gender, ctx);

    const MeasureSpec spec{Measure::Gender, 0.0};
    const auto sched = curriculum::plan_two_phase(spec, 2, 1);
    const auto m0 = model::init(tiny_model_config(), 7);
    const auto res = trainer::run_schedule(sched, bundle.train, bundle.dev, m0, tcfg);

    REQUIRE(res.history.epochs.size() == 3);
    CHECK(res.history.phase_start_epochs == std::vector<int>{0, 2});
    for (const auto& e : res.history.epochs) {
      CHECK(std::isfinite(e.mean_train_loss));
      CHECK(std::isfinite(e.dev_loss));
      CHECK(e.kept_fraction == 1.0);
      CHECK(e.updates > 0);
    }

    // Phase 1 batches may only contain easy (different-gender) ids.
    const auto easy = curriculum::select_easy(bundle.train, spec);
    std::set<std::string> easy_ids;
    for (const auto& r : easy.records) easy_ids.insert(r.sample_id);
    CHECK(easy_ids.size() == bundle.train.records.size() / 2);
    std::set<std::string> phase0_seen;
    for (const auto& b : res.history.batches) {
      if (b.phase_index != 0) continue;
      CHECK(b.epoch < 2);
      for (const auto& id : b.sample_ids) {
        CHECK(easy_ids.count(id) == 1);
        phase0_seen.insert(id);
      }
    }
    CHECK(phase0_seen == easy_ids);  // one pass per epoch covers the subset

    // Phase 2 sees the full manifest each epoch.
    std::set<std::string> phase1_seen;
    for (const auto& b : res.history.batches) {
      if (b.phase_index == 1)
        phase1_seen.insert(b.sample_ids.begin(), b.sample_ids.end());
    }
    CHECK(phase1_seen.size() == bundle.train.records.size());

    CHECK(res.history.phase_mean_kept_fraction(0) == 1.0);
    CHECK(res.history.wall_seconds > 0.0);
  }

  TEST_CASE("unattainable self-paced tau leaves parameters bit-identical") {
    auto bundle = datagen::build_dataset(tiny_dataset());
    auto tcfg = tiny_train_config();
    const std::string ckdir = "test_trainer_ckpt";
    tcfg.checkpoint_dir = ckdir;

    const std::vector<curriculum::SelfPacedTriple> triples{{1, 2, 200.0}};
    const auto sched = curriculum::plan_self_paced(triples, 1, 1);
    const auto m0 = model::init(tiny_model_config(), 7);
    const auto res = trainer::run_schedule(sched, bundle.train, bundle.dev, m0, tcfg);

    const auto after_warmup = model::load_checkpoint(ckdir + "/phase0.ckpt");
    const auto after_sp = model::load_checkpoint(ckdir + "/phase1.ckpt");
    CHECK(params_equal(after_warmup.model, after_sp.model));
    CHECK(after_warmup.step == after_sp.step);  // optimizer untouched

    for (const auto& b : res.history.batches) {
      if (b.phase_index != 1) continue;
      CHECK(b.skipped);
      CHECK(b.kept_fraction == 0.0);
    }
    CHECK(res.history.phase_mean_kept_fraction(1) == 0.0);
    CHECK(res.history.epochs[1].updates == 0);
    // A permissive tau would have kept everything: snr >= -100 always.
    CHECK(res.history.phase_mean_kept_fraction(0) == 1.0);
    std::filesystem::remove_all(ckdir);
  }

  TEST_CASE("self-paced tau actually drops part of a batch") {
    auto bundle = datagen::build_dataset(tiny_dataset());
    const auto tcfg = tiny_train_config();
    const auto m0 = model::init(tiny_model_config(), 7);
    // Probe the snr distribution, then pick a tau between min and max.
    const auto store = trainer::materialize(bundle.train, tcfg.embed_cfg);
    const auto probe =
        model::batch_gradient(m0, store.samples, model::LossKind::NegSnr);
    const double lo = *std::min_element(probe.snr_db.begin(), probe.snr_db.end());
    const double hi = *std::max_element(probe.snr_db.begin(), probe.snr_db.end());
    REQUIRE(lo < hi);
    const double tau = 0.5 * (lo + hi);

    const std::vector<curriculum::SelfPacedTriple> triples{{1, 2, tau}};
    const auto sched = curriculum::plan_self_paced(triples, 1, 1);
    const auto res = trainer::run_schedule(sched, bundle.train, bundle.dev, m0, tcfg);
    const double frac = res.history.phase_mean_kept_fraction(1);
    CHECK(frac > 0.0);
    CHECK(frac < 1.0);
  }

  TEST_CASE("identical inputs give identical runs") {
    auto bundle = datagen::build_dataset(tiny_dataset());
    const auto tcfg = tiny_train_config();
    const auto sched = curriculum::plan_two_phase({Measure::Gender, 0.0}, 1, 1);
    curriculum::ScoreContext ctx;
    ctx.embed_cfg = tcfg.embed_cfg;
    ctx.sample_rate = bundle.train.sample_rate;
    curriculum::annotate_manifest(bundle.train, Measure::Gender, ctx);
    const auto m0 = model::init(tiny_model_config(), 7);

    const auto a = trainer::run_schedule(sched, bundle.train, bundle.dev, m0, tcfg);
    const auto b = trainer::run_schedule(sched, bundle.train, bundle.dev, m0, tcfg);
    CHECK(params_equal(a.model, b.model));
    REQUIRE(a.history.epochs.size() == b.history.epochs.size());
    for (size_t i = 0; i < a.history.epochs.size(); ++i) {
      CHECK(a.history.epochs[i].mean_train_loss == b.history.epochs[i].mean_train_loss);
      CHECK(a.history.epochs[i].dev_loss == b.history.epochs[i].dev_loss);
    }
  }

  TEST_CASE("non-finite losses abort") {
    auto bundle = datagen::build_dataset(tiny_dataset());
    const auto tcfg = tiny_train_config();
    const auto sched = curriculum::plan_two_phase({Measure::Gender, 0.0}, 1, 1);
    curriculum::ScoreContext ctx;
    ctx.embed_cfg = tcfg.embed_cfg;
    ctx.sample_rate = bundle.train.sample_rate;
    curriculum::annotate_manifest(bundle.train, Measure::Gender, ctx);
    auto m0 = model::init(tiny_model_config(), 7);
    m0.params[0].data[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(trainer::run_schedule(sched, bundle.train, bundle.dev, m0, tcfg),
                    NumericError);
  }

  TEST_CASE("history files") {
    auto bundle = datagen::build_dataset(tiny_dataset());
    const auto tcfg = tiny_train_config();
    const auto sched = curriculum::plan_two_phase({Measure::MixSDR, 0.0}, 1, 1);
    curriculum::ScoreContext ctx;
    ctx.embed_cfg = tcfg.embed_cfg;
    ctx.sample_rate = bundle.train.sample_rate;
    curriculum::annotate_manifest(bundle.train, Measure::MixSDR, ctx);
    const auto m0 = model::init(tiny_model_config(), 7);
    const auto res = trainer::run_schedule(sched, bundle.train, bundle.dev, m0, tcfg);

    trainer::save_history(res.history, "test_hist.csv", "test_hist.json");
    std::ifstream csv("test_hist.csv");
    std::string line;
    size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == res.history.epochs.size() + 1);

    std::ifstream js("test_hist.json");
    const auto j = nlohmann::json::parse(js);
    CHECK(j.at("epochs").size() == res.history.epochs.size());
    CHECK(j.at("batches").size() == res.history.batches.size());
    CHECK(j.at("phase_start_epochs").get<std::vector<int>>() ==
          res.history.phase_start_epochs);
    std::remove("test_hist.csv");
    std::remove("test_hist.json");
  }
}

TEST_SUITE("replicates") {
  TEST_CASE("aggregation over seeds") {
    auto bundle = datagen::build_dataset(tiny_dataset());
    const auto tcfg = tiny_train_config();
    curriculum::Schedule sched;
    curriculum::Phase full;
    full.start_epoch = 0;
    full.end_epoch = 1;
    sched.phases = {full};

    const auto one = trainer::run_seeded_replicates({5}, sched, bundle.train,
                                                    bundle.dev, bundle.test,
                                                    tiny_model_config(), tcfg);
    REQUIRE(one.runs.size() == 1);
    CHECK(one.mean_test_isdr_db == one.runs[0].test_isdr_db);
    CHECK(one.min_test_isdr_db == one.max_test_isdr_db);

    const auto two = trainer::run_seeded_replicates({5, 6}, sched, bundle.train,
                                                    bundle.dev, bundle.test,
                                                    tiny_model_config(), tcfg);
    REQUIRE(two.runs.size() == 2);
    CHECK(two.mean_test_isdr_db ==
          doctest::Approx(0.5 * (two.runs[0].test_isdr_db + two.runs[1].test_isdr_db))
              .epsilon(1e-12));
    CHECK(two.runs[0].test_isdr_db == one.runs[0].test_isdr_db);  // same seed

    const auto again = trainer::run_seeded_replicates({5, 6}, sched, bundle.train,
                                                      bundle.dev, bundle.test,
                                                      tiny_model_config(), tcfg);
    CHECK(again.mean_test_isdr_db == two.mean_test_isdr_db);
    CHECK(again.mean_dev_isdr_db == two.mean_dev_isdr_db);
  }
}
