// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_CURRICULUM_HPP
#define TSECL_CURRICULUM_HPP

#include <optional>
#include <string>
#include <vector>

#include "tsecl/datagen.hpp"
#include "tsecl/embedding.hpp"
#include "tsecl/model.hpp"

namespace tsecl::curriculum {

enum class Measure { Gender, SpeakerSimilarity, MixSDR, SeedModelSNR, SelfPaced };

const char* measure_name(Measure m);
Measure measure_from_name(const std::string& name);

// A static difficulty measure plus its threshold (Gender needs none).
// Easy-keep rules: Gender keeps different-gender (score 0); SpeakerSimilarity
// keeps score < tau; MixSDR and SeedModelSNR keep score >= tau. Ties resolve
// toward inclusion.
struct MeasureSpec {
  Measure measure = Measure::Gender;
  double threshold = 0.0;
};

// External inputs scoring may need: embeddings come from embed_cfg applied to
// the clean in-mixture stems; SeedModelSNR additionally runs a frozen seed
// model.
struct ScoreContext {
  embedding::EmbedConfig embed_cfg;
  const model::Model* seed_model = nullptr;
  double sample_rate = 16000.0;
};

// Gender -> 0 (different) or 1 (same); SpeakerSimilarity -> cosine of the
// clean-stem embeddings; MixSDR -> re-measured mixture SDR; SeedModelSNR ->
// snr_db of the seed model's estimate. SelfPaced has no static score.
double score_sample(const datagen::SampleRecord& r, Measure measure,
                    const ScoreContext& ctx);

// Writes score_sample results into each record's difficulty map under
// measure_name(measure). Returns the scores in manifest order.
std::vector<double> annotate_manifest(datagen::Manifest& m, Measure measure,
                                      const ScoreContext& ctx);

// Filters by the precomputed difficulty scores (annotate first). Preserves
// order. An empty result is legal here; schedulers reject it with a
// diagnostic when they try to train on it.
datagen::Manifest select_easy(const datagen::Manifest& m, const MeasureSpec& spec);

// Throws DataError with a score-distribution diagnostic if sel is empty.
void require_nonempty_selection(const datagen::Manifest& sel,
                                const datagen::Manifest& full,
                                const MeasureSpec& spec);

// One schedule phase over epochs [start_epoch, end_epoch). Exactly one of:
// plain full-data training (neither optional set), threshold selection, or
// self-paced gradient masking at tau (which also runs on the full set).
struct Phase {
  int start_epoch = 0;
  int end_epoch = 0;
  std::optional<MeasureSpec> selection;
  std::optional<double> self_paced_tau;

  int epochs() const { return end_epoch - start_epoch; }
  bool full_data() const { return !selection.has_value(); }
};

struct Schedule {
  std::vector<Phase> phases;

  int total_epochs() const { return phases.empty() ? 0 : phases.back().end_epoch; }
  void validate() const;  // contiguous spans, plain full-data last phase
  const Phase& phase_at(int epoch) const;
};

// Easy subset first, then the full set: the classic predefined-measure
// curriculum.
Schedule plan_two_phase(const MeasureSpec& spec, int phase1_epochs, int phase2_epochs);

// Generalization to k nested subsets (increasingly permissive thresholds),
// each merged in for its epoch count, full set last.
Schedule plan_staged(const std::vector<std::pair<MeasureSpec, int>>& stages,
                     int final_epochs);

// Warmup on everything, then one gradient-masking phase per (start, end, tau)
// triple, then a full-data tail. Triples may index epochs from the warmup
// boundary or one past it (both conventions appear in practice); each phase
// covers [previous end, triple end).
struct SelfPacedTriple {
  int start_epoch = 0;
  int end_epoch = 0;
  double tau_db = 0.0;
};

Schedule plan_self_paced(const std::vector<SelfPacedTriple>& triples,
                         int warmup_epochs, int final_epochs);

// keep[i] = (snr_db[i] >= tau). -infinity keeps everything.
std::vector<bool> self_paced_keep_mask(const std::vector<double>& snr_db, double tau);

// Schedule persistence (JSON).
void save_schedule(const Schedule& s, const std::string& path);
Schedule load_schedule(const std::string& path);

}  // namespace tsecl::curriculum

#endif  // TSECL_CURRICULUM_HPP
