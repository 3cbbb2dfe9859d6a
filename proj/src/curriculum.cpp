// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tsecl/metrics.hpp"

namespace tsecl::curriculum {

namespace {

using nlohmann::json;

bool keeps(const MeasureSpec& spec, double score) {
  switch (spec.measure) {
    case Measure::Gender:
      return score == 0.0;  // different gender is the easy class
    case Measure::SpeakerSimilarity:
      return score <= spec.threshold;  // dissimilar speakers are easy; tie kept
    case Measure::MixSDR:
    case Measure::SeedModelSNR:
      return score >= spec.threshold;  // louder target / better seed SNR is easy
    case Measure::SelfPaced:
      break;
  }
  throw ConfigError("select_easy: self_paced has no static selection rule");
}

json phase_to_json(const Phase& p) {
  json j{{"end_epoch", p.end_epoch}, {"start_epoch", p.start_epoch}};
  if (p.selection) {
    j["measure"] = measure_name(p.selection->measure);
    j["threshold"] = p.selection->threshold;
  }
  if (p.self_paced_tau) j["self_paced_tau"] = *p.self_paced_tau;
  return j;
}

Phase phase_from_json(const json& j) {
  Phase p;
  p.start_epoch = j.at("start_epoch").get<int>();
  p.end_epoch = j.at("end_epoch").get<int>();
  if (j.contains("measure")) {
    MeasureSpec spec;
    spec.measure = measure_from_name(j.at("measure").get<std::string>());
    spec.threshold = j.value("threshold", 0.0);
    p.selection = spec;
  }
  if (j.contains("self_paced_tau")) p.self_paced_tau = j.at("self_paced_tau").get<double>();
  return p;
}

}  // namespace

const char* measure_name(Measure m) {
  switch (m) {
    case Measure::Gender: return "gender";
    case Measure::SpeakerSimilarity: return "speaker_similarity";
    case Measure::MixSDR: return "mix_sdr";
    case Measure::SeedModelSNR: return "seed_model_snr";
    case Measure::SelfPaced: return "self_paced";
  }
  throw ConfigError("unknown measure enum value");
}

Measure measure_from_name(const std::string& name) {
  if (name == "gender") return Measure::Gender;
  if (name == "speaker_similarity") return Measure::SpeakerSimilarity;
  if (name == "mix_sdr") return Measure::MixSDR;
  if (name == "seed_model_snr") return Measure::SeedModelSNR;
  if (name == "self_paced") return Measure::SelfPaced;
  throw ConfigError("unknown measure: " + name);
}

double score_sample(const datagen::SampleRecord& r, Measure measure,
                    const ScoreContext& ctx) {
  switch (measure) {
    case Measure::Gender:
      return r.target.gender == r.interferer.gender ? 1.0 : 0.0;

    case Measure::SpeakerSimilarity: {
      const auto stems = datagen::render_sample(r, ctx.sample_rate);
      const auto et = embedding::embed(stems.target, ctx.embed_cfg);
      const auto ei = embedding::embed(stems.interferer_scaled, ctx.embed_cfg);
      return metrics::cosine_similarity(et.values, ei.values);
    }

    case Measure::MixSDR: {
      const auto stems = datagen::render_sample(r, ctx.sample_rate);
      return metrics::mixture_sdr(stems.target, stems.interferer_scaled).value;
    }

    case Measure::SeedModelSNR: {
      require(ctx.seed_model != nullptr,
              "score_sample: seed_model_snr needs a seed model in the context");
      const auto stems = datagen::render_sample(r, ctx.sample_rate);
      const auto e = embedding::embed(stems.reference, ctx.embed_cfg);
      const auto fwd = model::forward(*ctx.seed_model, stems.mixture, e);
      return metrics::snr_db(stems.target, fwd.estimate).value;
    }

    case Measure::SelfPaced:
      break;
  }
  throw ConfigError("score_sample: self_paced is dynamic, not a static score");
}

std::vector<double> annotate_manifest(datagen::Manifest& m, Measure measure,
                                      const ScoreContext& ctx) {
  std::vector<double> scores;
  scores.reserve(m.records.size());
  const std::string key = measure_name(measure);
  for (auto& r : m.records) {
    const double s = score_sample(r, measure, ctx);
    r.difficulty[key] = s;
    scores.push_back(s);
  }
  return scores;
}

datagen::Manifest select_easy(const datagen::Manifest& m, const MeasureSpec& spec) {
  const std::string key = measure_name(spec.measure);
  datagen::Manifest out;
  out.partition = m.partition;
  out.sample_rate = m.sample_rate;
  for (const auto& r : m.records) {
    const auto it = r.difficulty.find(key);
    require(it != r.difficulty.end(),
            "select_easy: record " + r.sample_id + " has no '" + key +
                "' score; annotate the manifest first");
    if (keeps(spec, it->second)) out.records.push_back(r);
  }
  return out;
}

void require_nonempty_selection(const datagen::Manifest& sel,
                                const datagen::Manifest& full,
                                const MeasureSpec& spec) {
  if (!sel.records.empty()) return;
  const std::string key = measure_name(spec.measure);
  std::vector<double> scores;
  for (const auto& r : full.records) {
    const auto it = r.difficulty.find(key);
    if (it != r.difficulty.end()) scores.push_back(it->second);
  }
  std::sort(scores.begin(), scores.end());
  std::ostringstream os;
  os << "empty easy subset for measure '" << key << "' at threshold "
     << spec.threshold << " over " << full.records.size() << " records";
  if (!scores.empty()) {
    os << " (scores min=" << scores.front()
       << " median=" << scores[scores.size() / 2] << " max=" << scores.back() << ")";
  }
  throw DataError(os.str());
}

void Schedule::validate() const {
  require_config(!phases.empty(), "schedule: no phases");
  require_config(phases.front().start_epoch == 0, "schedule: must start at epoch 0");
  for (size_t k = 0; k < phases.size(); ++k) {
    const Phase& p = phases[k];
    require_config(p.end_epoch > p.start_epoch, "schedule: empty phase span");
    require_config(!(p.selection && p.self_paced_tau),
                   "schedule: a phase cannot both select and self-pace");
    if (k > 0)
      require_config(p.start_epoch == phases[k - 1].end_epoch,
                     "schedule: phases must be contiguous");
  }
  const Phase& last = phases.back();
  require_config(last.full_data() && !last.self_paced_tau,
                 "schedule: final phase must train on the full set");
}

const Phase& Schedule::phase_at(int epoch) const {
  for (const auto& p : phases)
    if (epoch >= p.start_epoch && epoch < p.end_epoch) return p;
  throw ConfigError("schedule: epoch " + std::to_string(epoch) + " out of range");
}

Schedule plan_two_phase(const MeasureSpec& spec, int phase1_epochs, int phase2_epochs) {
  require_config(phase1_epochs >= 1 && phase2_epochs >= 1,
                 "plan_two_phase: epoch counts must be positive");
  Schedule s;
  Phase easy;
  easy.start_epoch = 0;
  easy.end_epoch = phase1_epochs;
  easy.selection = spec;
  Phase full;
  full.start_epoch = phase1_epochs;
  full.end_epoch = phase1_epochs + phase2_epochs;
  s.phases = {easy, full};
  s.validate();
  return s;
}

Schedule plan_staged(const std::vector<std::pair<MeasureSpec, int>>& stages,
                     int final_epochs) {
  require_config(final_epochs >= 1, "plan_staged: final_epochs must be positive");
  Schedule s;
  int epoch = 0;
  for (const auto& [spec, epochs] : stages) {
    require_config(epochs >= 1, "plan_staged: stage epochs must be positive");
    Phase p;
    p.start_epoch = epoch;
    p.end_epoch = epoch + epochs;
    p.selection = spec;
    s.phases.push_back(p);
    epoch += epochs;
  }
  Phase full;
  full.start_epoch = epoch;
  full.end_epoch = epoch + final_epochs;
  s.phases.push_back(full);
  s.validate();
  return s;
}

Schedule plan_self_paced(const std::vector<SelfPacedTriple>& triples,
                         int warmup_epochs, int final_epochs) {
  require_config(warmup_epochs >= 1, "plan_self_paced: warmup must be positive");
  require_config(final_epochs >= 1, "plan_self_paced: final epochs must be positive");
  Schedule s;
  Phase warmup;
  warmup.start_epoch = 0;
  warmup.end_epoch = warmup_epochs;
  s.phases.push_back(warmup);

  int prev_end = warmup_epochs;
  for (const auto& t : triples) {
    // Accept both epoch conventions: the triple may start at the previous
    // phase's end or one past it; either way the phase covers
    // [prev_end, t.end_epoch).
    require_config(t.start_epoch == prev_end || t.start_epoch == prev_end + 1,
                   "plan_self_paced: triples must be contiguous and increasing");
    require_config(t.end_epoch > prev_end, "plan_self_paced: triple span is empty");
    Phase p;
    p.start_epoch = prev_end;
    p.end_epoch = t.end_epoch;
    p.self_paced_tau = t.tau_db;
    s.phases.push_back(p);
    prev_end = t.end_epoch;
  }

  Phase full;
  full.start_epoch = prev_end;
  full.end_epoch = prev_end + final_epochs;
  s.phases.push_back(full);
  s.validate();
  return s;
}

std::vector<bool> self_paced_keep_mask(const std::vector<double>& snr_db, double tau) {
  require(all_finite(snr_db), "self_paced_keep_mask: non-finite snr value");
  std::vector<bool> keep(snr_db.size());
  for (size_t i = 0; i < snr_db.size(); ++i) keep[i] = snr_db[i] >= tau;
  return keep;
}

void save_schedule(const Schedule& s, const std::string& path) {
  s.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_schedule: cannot open " + path);
  json phases = json::array();
  for (const auto& p : s.phases) phases.push_back(phase_to_json(p));
  out << json{{"phases", phases}, {"version", 1}}.dump(2) << "\n";
  if (!out) throw DataError("save_schedule: write failure on " + path);
}

Schedule load_schedule(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_schedule: cannot open " + path);
  Schedule s;
  try {
    const json j = json::parse(in);
    if (j.at("version").get<int>() != 1)
      throw DataError("load_schedule: unsupported version");
    for (const auto& pj : j.at("phases")) s.phases.push_back(phase_from_json(pj));
  } catch (const json::exception& e) {
    throw DataError("load_schedule: bad JSON in " + path + ": " + e.what());
  }
  s.validate();
  return s;
}

}  // namespace tsecl::curriculum
