// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_REPORT_HPP
#define TSECL_REPORT_HPP

#include <functional>
#include <string>
#include <vector>

#include "tsecl/curriculum.hpp"
#include "tsecl/datagen.hpp"
#include "tsecl/embedding.hpp"
#include "tsecl/model.hpp"
#include "tsecl/trainer.hpp"

namespace tsecl::report {

struct EvalRow {
  std::string sample_id;
  double mix_sdr_db = 0.0;  // the manifest's requested mix SDR
  double isdr_db = 0.0;
  double snr_db = 0.0;
};

struct EvalResult {
  std::vector<EvalRow> rows;
  double mean_isdr_db = 0.0;
  double median_isdr_db = 0.0;
  double mean_snr_db = 0.0;
  size_t count = 0;
};

// Core evaluator: any waveform-in/waveform-out extractor over rendered stems.
using Estimator = std::function<dsp::Waveform(const datagen::RenderedSample&)>;

EvalResult evaluate_with(const datagen::Manifest& m, const Estimator& est);

// The trained model (reference utterance embedded per record).
EvalResult evaluate(const model::Model& m, const datagen::Manifest& test,
                    const embedding::EmbedConfig& embed_cfg);

// Upper bound: oracle complex mask from the clean stems.
EvalResult evaluate_oracle(const datagen::Manifest& test, const dsp::StftConfig& stft,
                           double mag_clip = 10.0);

// Do-nothing baseline: the estimate is the mixture itself (iSDR 0 by
// definition).
EvalResult evaluate_identity(const datagen::Manifest& test);

// Empirical CDF, ties stacked: x = sorted unique values, p[i] = fraction <= x[i].
struct CdfCurve {
  std::vector<double> x;
  std::vector<double> p;
};

CdfCurve ecdf(std::vector<double> values);
double ecdf_at(const CdfCurve& c, double x);

// eval.jsonl: one summary header line, then one row per sample, manifest
// order. Byte-deterministic for identical results.
void save_eval_jsonl(const EvalResult& r, const std::string& path);
EvalResult load_eval_jsonl(const std::string& path);
void save_cdf_csv(const CdfCurve& c, const std::string& path);

// Threshold sweep for a two-phase curriculum: per tau, the used-data fraction
// and dev-set mean iSDR after each phase (an infeasible tau — empty easy
// subset — is reported, not an error). Dev selection of the best tau defaults
// to phase-2 performance.
struct SweepPoint {
  double tau = 0.0;
  bool feasible = false;
  double used_fraction = 0.0;
  double phase1_dev_isdr_db = 0.0;
  double phase2_dev_isdr_db = 0.0;
};

struct SweepReport {
  curriculum::Measure measure = curriculum::Measure::MixSDR;
  std::vector<SweepPoint> points;
  int best_index = -1;         // argmax phase-2 dev iSDR over feasible points
  int best_index_phase1 = -1;  // same under the phase-1 criterion
};

struct SweepConfig {
  model::MaskNetConfig model_cfg;
  uint64_t model_seed = 7;
  trainer::TrainConfig train;
  int phase1_epochs = 1;
  int phase2_epochs = 1;
  std::string work_dir;  // checkpoints land here, one subdir per tau
};

SweepReport sweep(curriculum::Measure measure, const std::vector<double>& taus,
                  const datagen::Manifest& train_annotated,
                  const datagen::Manifest& dev, const SweepConfig& cfg);

void save_sweep(const SweepReport& r, const std::string& csv_path,
                const std::string& json_path);

}  // namespace tsecl::report

#endif  // TSECL_REPORT_HPP
