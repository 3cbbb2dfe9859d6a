// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "tsecl/common.hpp"
#include "tsecl/metrics.hpp"
#include "tsecl/rng.hpp"

namespace tsecl::trainer {

using nlohmann::json;

void LrSchedule::validate() const {
  require_config(peak_lr > 0.0 && std::isfinite(peak_lr), "peak_lr must be positive");
  require_config(floor_lr > 0.0 && floor_lr <= peak_lr,
                 "floor_lr must be in (0, peak_lr]");
  require_config(warmup_batches >= 1, "warmup_batches must be >= 1");
}

double lr_at(int64_t batch_index, const LrSchedule& s) {
  s.validate();
  require_config(batch_index >= 0, "batch_index must be >= 0");
  const double warm = static_cast<double>(s.warmup_batches);
  if (batch_index <= s.warmup_batches) {
    return s.peak_lr * static_cast<double>(batch_index) / warm;
  }
  const double lr = s.peak_lr * std::sqrt(warm / static_cast<double>(batch_index));
  return std::max(lr, s.floor_lr);
}

OptimState make_optim_state(const model::Model& m) {
  OptimState opt;
  opt.m1.reserve(m.params.size());
  opt.m2.reserve(m.params.size());
  for (const auto& p : m.params) {
    opt.m1.push_back(model::Tensor::zeros(p.shape));
    opt.m2.push_back(model::Tensor::zeros(p.shape));
  }
  return opt;
}

void adam_step(model::Model& m, const model::Gradients& grads, OptimState& opt,
               double lr) {
  require(grads.size() == m.params.size(), "gradient/parameter tensor count mismatch");
  require(opt.m1.size() == m.params.size(), "optimizer state does not match model");
  if (!(std::isfinite(lr) && lr >= 0.0)) throw NumericError("non-finite learning rate");
  opt.step += 1;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  for (size_t t = 0; t < m.params.size(); ++t) {
    auto& p = m.params[t].data;
    const auto& g = grads[t].data;
    require(g.size() == p.size(), "gradient tensor shape mismatch");
    if (!all_finite(g)) throw NumericError("non-finite gradient in adam_step");
    auto& m1 = opt.m1[t].data;
    auto& m2 = opt.m2[t].data;
    for (size_t i = 0; i < p.size(); ++i) {
      m1[i] = opt.beta1 * m1[i] + (1.0 - opt.beta1) * g[i];
      m2[i] = opt.beta2 * m2[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double mh = m1[i] / bc1;
      const double vh = m2[i] / bc2;
      p[i] -= lr * mh / (std::sqrt(vh) + opt.eps);
    }
  }
}

void TrainConfig::validate() const {
  require_config(batch_size >= 1, "batch_size must be >= 1");
  lr.validate();
  embed_cfg.validate(sample_rate);
}

double TrainHistory::phase_mean_kept_fraction(int phase_index) const {
  double sum = 0.0;
  size_t n = 0;
  for (const auto& b : batches) {
    if (b.phase_index != phase_index) continue;
    sum += b.kept_fraction;
    ++n;
  }
  require(n > 0, "no logged batches for phase " + std::to_string(phase_index));
  return sum / static_cast<double>(n);
}

SampleStore materialize(const datagen::Manifest& m,
                        const embedding::EmbedConfig& embed_cfg) {
  m.validate();
  embed_cfg.validate(m.sample_rate);
  SampleStore store;
  store.samples.reserve(m.records.size());
  store.ids.reserve(m.records.size());
  for (const auto& r : m.records) {
    datagen::RenderedSample stems = datagen::render_sample(r, m.sample_rate);
    model::BatchSample s;
    s.mixture = std::move(stems.mixture);
    s.target = std::move(stems.target);
    s.embed = embedding::embed(stems.reference, embed_cfg);
    store.samples.push_back(std::move(s));
    store.ids.push_back(r.sample_id);
  }
  return store;
}

double mean_loss(const model::Model& m, const SampleStore& store,
                 model::LossKind kind) {
  require(!store.samples.empty(), "mean_loss over an empty store");
  double sum = 0.0;
  for (const auto& s : store.samples) {
    const auto fwd = model::forward(m, s.mixture, s.embed);
    sum += model::loss(fwd.estimate, s.target, kind);
  }
  return sum / static_cast<double>(store.samples.size());
}

namespace {

void checkpoint_if_configured(const TrainConfig& cfg, const model::Model& m,
                              uint64_t step, const std::string& stem) {
  if (cfg.checkpoint_dir.empty()) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  model::save_checkpoint(cfg.checkpoint_dir + "/" + stem + ".ckpt", m, cfg.seed, step);
}

}  // namespace

TrainResult run_schedule(const curriculum::Schedule& schedule,
                         const datagen::Manifest& train_manifest,
                         const datagen::Manifest& dev_manifest,
                         const model::Model& initial, const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  schedule.validate();
  cfg.validate();
  initial.config.validate();

  const SampleStore train_store = materialize(train_manifest, cfg.embed_cfg);
  const SampleStore dev_store = materialize(dev_manifest, cfg.embed_cfg);
  std::unordered_map<std::string, size_t> index_of;
  for (size_t i = 0; i < train_store.ids.size(); ++i) index_of[train_store.ids[i]] = i;

  model::Model m = initial;
  OptimState opt = make_optim_state(m);
  TrainHistory hist;

  for (size_t pi = 0; pi < schedule.phases.size(); ++pi) {
    const curriculum::Phase& ph = schedule.phases[pi];
    hist.phase_start_epochs.push_back(ph.start_epoch);

    std::vector<size_t> pool;
    if (ph.selection.has_value()) {
      const datagen::Manifest sel = curriculum::select_easy(train_manifest, *ph.selection);
      curriculum::require_nonempty_selection(sel, train_manifest, *ph.selection);
      for (const auto& r : sel.records) pool.push_back(index_of.at(r.sample_id));
    } else {
      pool.resize(train_store.samples.size());
      std::iota(pool.begin(), pool.end(), size_t{0});
    }

    Rng phase_rng(mix_seed(cfg.seed, UINT64_C(0x7068617365), pi));
    for (int epoch = ph.start_epoch; epoch < ph.end_epoch; ++epoch) {
      std::vector<size_t> order = pool;
      phase_rng.shuffle(order);
      double loss_sum = 0.0;
      size_t loss_n = 0;
      size_t kept_sum = 0;
      size_t updates = 0;
      double last_lr = 0.0;
      for (size_t off = 0; off < order.size();
           off += static_cast<size_t>(cfg.batch_size)) {
        const size_t hi = std::min(order.size(), off + static_cast<size_t>(cfg.batch_size));
        std::vector<model::BatchSample> batch;
        BatchLog log;
        log.epoch = epoch;
        log.phase_index = static_cast<int>(pi);
        for (size_t k = off; k < hi; ++k) {
          batch.push_back(train_store.samples[order[k]]);
          log.sample_ids.push_back(train_store.ids[order[k]]);
        }
        const model::BatchResult br =
            model::batch_gradient(m, batch, cfg.loss, nullptr, ph.self_paced_tau);
        for (const double l : br.losses) {
          if (!std::isfinite(l)) {
            checkpoint_if_configured(cfg, m, opt.step, "abort");
            throw NumericError("non-finite training loss at epoch " +
                               std::to_string(epoch));
          }
          loss_sum += l;
        }
        loss_n += br.losses.size();
        kept_sum += br.kept_count;
        log.kept_fraction =
            static_cast<double>(br.kept_count) / static_cast<double>(batch.size());
        log.skipped = br.skipped;
        hist.batches.push_back(std::move(log));
        if (br.skipped) continue;  // nothing kept: no step, moments untouched
        const double lr = lr_at(static_cast<int64_t>(opt.step) + 1, cfg.lr);
        adam_step(m, br.grads, opt, lr);
        last_lr = lr;
        ++updates;
        for (const auto& p : m.params) {
          if (!all_finite(p.data)) {
            checkpoint_if_configured(cfg, m, opt.step, "abort");
            throw NumericError("non-finite parameters after update at epoch " +
                               std::to_string(epoch));
          }
        }
      }
      EpochStats es;
      es.epoch = epoch;
      es.phase_index = static_cast<int>(pi);
      es.mean_train_loss = loss_sum / static_cast<double>(loss_n);
      es.dev_loss = mean_loss(m, dev_store, cfg.loss);
      es.kept_fraction = static_cast<double>(kept_sum) / static_cast<double>(loss_n);
      es.last_lr = last_lr;
      es.updates = updates;
      hist.epochs.push_back(es);
    }
    checkpoint_if_configured(cfg, m, opt.step, "phase" + std::to_string(pi));
  }

  hist.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return TrainResult{std::move(m), std::move(hist)};
}

double mean_isdr_db(const model::Model& m, const SampleStore& store) {
  require(!store.samples.empty(), "mean_isdr_db over an empty store");
  double sum = 0.0;
  for (const auto& s : store.samples) {
    const auto fwd = model::forward(m, s.mixture, s.embed);
    sum += metrics::isdr_db(s.mixture, fwd.estimate, s.target).value;
  }
  return sum / static_cast<double>(store.samples.size());
}

ReplicateReport run_seeded_replicates(const std::vector<uint64_t>& seeds,
                                      const curriculum::Schedule& schedule,
                                      const datagen::Manifest& train_manifest,
                                      const datagen::Manifest& dev_manifest,
                                      const datagen::Manifest& test_manifest,
                                      const model::MaskNetConfig& model_cfg,
                                      const TrainConfig& base_cfg) {
  require_config(!seeds.empty(), "run_seeded_replicates needs at least one seed");
  const SampleStore dev_store = materialize(dev_manifest, base_cfg.embed_cfg);
  const SampleStore test_store = materialize(test_manifest, base_cfg.embed_cfg);
  ReplicateReport rep;
  for (const uint64_t seed : seeds) {
    TrainConfig cfg = base_cfg;
    cfg.seed = seed;
    if (!base_cfg.checkpoint_dir.empty()) {
      cfg.checkpoint_dir = base_cfg.checkpoint_dir + "/seed" + std::to_string(seed);
    }
    const model::Model m0 = model::init(model_cfg, seed);
    TrainResult res = run_schedule(schedule, train_manifest, dev_manifest, m0, cfg);
    ReplicateOutcome out;
    out.seed = seed;
    out.dev_isdr_db = mean_isdr_db(res.model, dev_store);
    out.test_isdr_db = mean_isdr_db(res.model, test_store);
    out.final_dev_loss = res.history.epochs.back().dev_loss;
    rep.runs.push_back(out);
  }
  rep.min_test_isdr_db = rep.runs.front().test_isdr_db;
  rep.max_test_isdr_db = rep.min_test_isdr_db;
  for (const auto& r : rep.runs) {
    rep.mean_dev_isdr_db += r.dev_isdr_db;
    rep.mean_test_isdr_db += r.test_isdr_db;
    rep.min_test_isdr_db = std::min(rep.min_test_isdr_db, r.test_isdr_db);
    rep.max_test_isdr_db = std::max(rep.max_test_isdr_db, r.test_isdr_db);
  }
  rep.mean_dev_isdr_db /= static_cast<double>(rep.runs.size());
  rep.mean_test_isdr_db /= static_cast<double>(rep.runs.size());
  return rep;
}

void save_history(const TrainHistory& h, const std::string& csv_path,
                  const std::string& json_path) {
  {
    std::ofstream out(csv_path, std::ios::trunc);
    require(out.good(), "cannot open " + csv_path);
    out << "epoch,phase,mean_train_loss,dev_loss,kept_fraction,last_lr,updates\n";
    out.precision(17);
    for (const auto& e : h.epochs) {
      out << e.epoch << ',' << e.phase_index << ',' << e.mean_train_loss << ','
          << e.dev_loss << ',' << e.kept_fraction << ',' << e.last_lr << ','
          << e.updates << '\n';
    }
    require(out.good(), "failed writing " + csv_path);
  }
  json j;
  j["phase_start_epochs"] = h.phase_start_epochs;
  j["wall_seconds"] = h.wall_seconds;
  j["epochs"] = json::array();
  for (const auto& e : h.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"phase", e.phase_index},
                           {"mean_train_loss", e.mean_train_loss},
                           {"dev_loss", e.dev_loss},
                           {"kept_fraction", e.kept_fraction},
                           {"last_lr", e.last_lr},
                           {"updates", e.updates}});
  }
  j["batches"] = json::array();
  for (const auto& b : h.batches) {
    j["batches"].push_back({{"epoch", b.epoch},
                            {"phase", b.phase_index},
                            {"sample_ids", b.sample_ids},
                            {"kept_fraction", b.kept_fraction},
                            {"skipped", b.skipped}});
  }
  std::ofstream out(json_path, std::ios::trunc);
  require(out.good(), "cannot open " + json_path);
  out << j.dump(2) << '\n';
  require(out.good(), "failed writing " + json_path);
}

}  // namespace tsecl::trainer
