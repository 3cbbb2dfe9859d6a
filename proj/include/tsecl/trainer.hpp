// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_TRAINER_HPP
#define TSECL_TRAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "tsecl/curriculum.hpp"
#include "tsecl/datagen.hpp"
#include "tsecl/embedding.hpp"
#include "tsecl/model.hpp"

namespace tsecl::trainer {

// Linear warmup to peak_lr over warmup_batches updates (1-based), then
// inverse-square-root decay, never below floor_lr.
struct LrSchedule {
  double peak_lr = 1e-3;
  int warmup_batches = 5000;
  double floor_lr = 1e-5;

  void validate() const;
};

double lr_at(int64_t batch_index, const LrSchedule& s);

// Adam with bias correction; beta/epsilon fixed to the usual values.
struct OptimState {
  std::vector<model::Tensor> m1;
  std::vector<model::Tensor> m2;
  uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

OptimState make_optim_state(const model::Model& m);
void adam_step(model::Model& m, const model::Gradients& grads, OptimState& opt,
               double lr);

struct TrainConfig {
  int batch_size = 8;
  uint64_t seed = 7;
  model::LossKind loss = model::LossKind::NegSnr;
  LrSchedule lr;
  embedding::EmbedConfig embed_cfg;
  double sample_rate = 16000.0;
  std::string checkpoint_dir;  // empty: no checkpoints written

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  int phase_index = 0;
  double mean_train_loss = 0.0;  // over every sample seen, kept or not
  double dev_loss = 0.0;
  double kept_fraction = 1.0;    // fraction of samples kept this epoch
  double last_lr = 0.0;
  size_t updates = 0;            // optimizer steps applied this epoch
};

struct BatchLog {
  int epoch = 0;
  int phase_index = 0;
  std::vector<std::string> sample_ids;
  double kept_fraction = 1.0;
  bool skipped = false;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  std::vector<int> phase_start_epochs;
  std::vector<BatchLog> batches;
  double wall_seconds = 0.0;

  // Mean per-batch kept fraction of one phase (criterion: nondecreasing as
  // tau drops across self-paced phases).
  double phase_mean_kept_fraction(int phase_index) const;
};

// A manifest rendered into trainable samples: stems synthesized, reference
// embedded. Index-aligned with the manifest's records.
struct SampleStore {
  std::vector<model::BatchSample> samples;
  std::vector<std::string> ids;
};

SampleStore materialize(const datagen::Manifest& m,
                        const embedding::EmbedConfig& embed_cfg);

// Mean loss of a model over a store, forward only.
double mean_loss(const model::Model& m, const SampleStore& store,
                 model::LossKind kind);

struct TrainResult {
  model::Model model;
  TrainHistory history;
};

// Executes a schedule: per phase, draw seeded mini-batches from the phase's
// selection (or the full set), mask gradients by the phase's tau when
// self-paced, keep one optimizer state across phases, checkpoint at phase
// boundaries, evaluate dev loss per epoch. Empty keep-masks skip the update
// entirely. Non-finite losses abort with a NumericError after writing a
// final checkpoint (when a checkpoint_dir is set).
TrainResult run_schedule(const curriculum::Schedule& schedule,
                         const datagen::Manifest& train_manifest,
                         const datagen::Manifest& dev_manifest,
                         const model::Model& initial, const TrainConfig& cfg);

void save_history(const TrainHistory& h, const std::string& csv_path,
                  const std::string& json_path);

// Mean isdr_db(mixture, estimate, target) of a model over a store.
double mean_isdr_db(const model::Model& m, const SampleStore& store);

struct ReplicateOutcome {
  uint64_t seed = 0;
  double dev_isdr_db = 0.0;
  double test_isdr_db = 0.0;
  double final_dev_loss = 0.0;
};

struct ReplicateReport {
  std::vector<ReplicateOutcome> runs;
  double mean_dev_isdr_db = 0.0;
  double mean_test_isdr_db = 0.0;
  double min_test_isdr_db = 0.0;
  double max_test_isdr_db = 0.0;
};

// Multi-seed protocol: retrain per seed (model init and batching both take
// the seed), aggregate final dev/test iSDR. base_cfg.seed is ignored.
ReplicateReport run_seeded_replicates(const std::vector<uint64_t>& seeds,
                                      const curriculum::Schedule& schedule,
                                      const datagen::Manifest& train_manifest,
                                      const datagen::Manifest& dev_manifest,
                                      const datagen::Manifest& test_manifest,
                                      const model::MaskNetConfig& model_cfg,
                                      const TrainConfig& base_cfg);

}  // namespace tsecl::trainer

#endif  // TSECL_TRAINER_HPP
