// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "tsecl/common.hpp"
#include "tsecl/metrics.hpp"

namespace tsecl::report {

using nlohmann::json;

namespace {

void finalize(EvalResult& r) {
  r.count = r.rows.size();
  require(r.count > 0, "evaluation over an empty manifest");
  double isdr_sum = 0.0, snr_sum = 0.0;
  std::vector<double> isdrs;
  isdrs.reserve(r.count);
  for (const auto& row : r.rows) {
    isdr_sum += row.isdr_db;
    snr_sum += row.snr_db;
    isdrs.push_back(row.isdr_db);
  }
  r.mean_isdr_db = isdr_sum / static_cast<double>(r.count);
  r.mean_snr_db = snr_sum / static_cast<double>(r.count);
  std::sort(isdrs.begin(), isdrs.end());
  const size_t mid = r.count / 2;
  r.median_isdr_db = (r.count % 2 == 1)
                         ? isdrs[mid]
                         : 0.5 * (isdrs[mid - 1] + isdrs[mid]);
}

}  // namespace

EvalResult evaluate_with(const datagen::Manifest& m, const Estimator& est) {
  m.validate();
  EvalResult out;
  out.rows.reserve(m.records.size());
  for (const auto& r : m.records) {
    const auto stems = datagen::render_sample(r, m.sample_rate);
    const dsp::Waveform estimate = est(stems);
    EvalRow row;
    row.sample_id = r.sample_id;
    row.mix_sdr_db = r.mix_sdr_db;
    row.isdr_db = metrics::isdr_db(stems.mixture, estimate, stems.target).value;
    row.snr_db = metrics::snr_db(stems.target, estimate).value;
    out.rows.push_back(std::move(row));
  }
  finalize(out);
  return out;
}

EvalResult evaluate(const model::Model& m, const datagen::Manifest& test,
                    const embedding::EmbedConfig& embed_cfg) {
  embed_cfg.validate(test.sample_rate);
  return evaluate_with(test, [&](const datagen::RenderedSample& stems) {
    const auto e = embedding::embed(stems.reference, embed_cfg);
    return model::forward(m, stems.mixture, e).estimate;
  });
}

EvalResult evaluate_oracle(const datagen::Manifest& test, const dsp::StftConfig& stft,
                           double mag_clip) {
  stft.validate();
  return evaluate_with(test, [&](const datagen::RenderedSample& stems) {
    const auto mix_spec = dsp::stft(stems.mixture, stft);
    const auto tgt_spec = dsp::stft(stems.target, stft);
    const auto mask = model::oracle_mask(tgt_spec, mix_spec, mag_clip);
    return model::estimate_with_mask(stems.mixture, mask, stft);
  });
}

EvalResult evaluate_identity(const datagen::Manifest& test) {
  return evaluate_with(test,
                       [](const datagen::RenderedSample& stems) { return stems.mixture; });
}

CdfCurve ecdf(std::vector<double> values) {
  require(!values.empty(), "ecdf of an empty sample");
  require(all_finite(values), "ecdf: non-finite value");
  std::sort(values.begin(), values.end());
  CdfCurve c;
  const double n = static_cast<double>(values.size());
  for (size_t i = 0; i < values.size(); ++i) {
    if (!c.x.empty() && values[i] == c.x.back()) {
      c.p.back() = static_cast<double>(i + 1) / n;  // stack ties
    } else {
      c.x.push_back(values[i]);
      c.p.push_back(static_cast<double>(i + 1) / n);
    }
  }
  return c;
}

double ecdf_at(const CdfCurve& c, double x) {
  require(!c.x.empty(), "ecdf_at on an empty curve");
  const auto it = std::upper_bound(c.x.begin(), c.x.end(), x);
  if (it == c.x.begin()) return 0.0;
  return c.p[static_cast<size_t>(it - c.x.begin()) - 1];
}

void save_eval_jsonl(const EvalResult& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("save_eval_jsonl: cannot open " + path);
  out << json{{"count", r.count},
              {"mean_isdr_db", r.mean_isdr_db},
              {"mean_snr_db", r.mean_snr_db},
              {"median_isdr_db", r.median_isdr_db},
              {"schema", "tsecl-eval"},
              {"version", 1}}
             .dump()
      << "\n";
  for (const auto& row : r.rows) {
    out << json{{"isdr_db", row.isdr_db},
                {"mix_sdr_db", row.mix_sdr_db},
                {"sample_id", row.sample_id},
                {"snr_db", row.snr_db}}
               .dump()
        << "\n";
  }
  if (!out) throw DataError("save_eval_jsonl: write failure on " + path);
}

EvalResult load_eval_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_eval_jsonl: cannot open " + path);
  EvalResult r;
  std::string line;
  try {
    require(static_cast<bool>(std::getline(in, line)), "empty eval file " + path);
    const json header = json::parse(line);
    if (header.at("schema").get<std::string>() != "tsecl-eval")
      throw DataError("load_eval_jsonl: not an eval file: " + path);
    r.count = header.at("count").get<size_t>();
    r.mean_isdr_db = header.at("mean_isdr_db").get<double>();
    r.mean_snr_db = header.at("mean_snr_db").get<double>();
    r.median_isdr_db = header.at("median_isdr_db").get<double>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      EvalRow row;
      row.sample_id = j.at("sample_id").get<std::string>();
      row.mix_sdr_db = j.at("mix_sdr_db").get<double>();
      row.isdr_db = j.at("isdr_db").get<double>();
      row.snr_db = j.at("snr_db").get<double>();
      r.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw DataError("load_eval_jsonl: bad JSON in " + path + ": " + e.what());
  }
  require(r.rows.size() == r.count, "load_eval_jsonl: row count mismatch in " + path);
  return r;
}

void save_cdf_csv(const CdfCurve& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("save_cdf_csv: cannot open " + path);
  out.precision(17);
  out << "isdr_db,cum_prob\n";
  for (size_t i = 0; i < c.x.size(); ++i) out << c.x[i] << ',' << c.p[i] << '\n';
  if (!out) throw DataError("save_cdf_csv: write failure on " + path);
}

SweepReport sweep(curriculum::Measure measure, const std::vector<double>& taus,
                  const datagen::Manifest& train_annotated,
                  const datagen::Manifest& dev, const SweepConfig& cfg) {
  require_config(!taus.empty(), "sweep: empty tau grid");
  const trainer::SampleStore dev_store =
      trainer::materialize(dev, cfg.train.embed_cfg);
  const model::Model m0 = model::init(cfg.model_cfg, cfg.model_seed);

  SweepReport rep;
  rep.measure = measure;
  for (size_t k = 0; k < taus.size(); ++k) {
    SweepPoint pt;
    pt.tau = taus[k];
    const curriculum::MeasureSpec spec{measure, taus[k]};
    const auto sel = curriculum::select_easy(train_annotated, spec);
    pt.used_fraction = static_cast<double>(sel.records.size()) /
                       static_cast<double>(train_annotated.records.size());
    if (sel.records.empty()) {
      pt.feasible = false;
      pt.phase1_dev_isdr_db = std::numeric_limits<double>::quiet_NaN();
      pt.phase2_dev_isdr_db = std::numeric_limits<double>::quiet_NaN();
      rep.points.push_back(pt);
      continue;
    }
    pt.feasible = true;
    trainer::TrainConfig tcfg = cfg.train;
    require_config(!cfg.work_dir.empty(), "sweep: work_dir is required");
    tcfg.checkpoint_dir = cfg.work_dir + "/tau" + std::to_string(k);
    const auto sched =
        curriculum::plan_two_phase(spec, cfg.phase1_epochs, cfg.phase2_epochs);
    const auto res = trainer::run_schedule(sched, train_annotated, dev, m0, tcfg);
    const auto after_phase1 =
        model::load_checkpoint(tcfg.checkpoint_dir + "/phase0.ckpt");
    pt.phase1_dev_isdr_db = trainer::mean_isdr_db(after_phase1.model, dev_store);
    pt.phase2_dev_isdr_db = trainer::mean_isdr_db(res.model, dev_store);
    rep.points.push_back(pt);
  }

  for (size_t k = 0; k < rep.points.size(); ++k) {
    const auto& pt = rep.points[k];
    if (!pt.feasible) continue;
    if (rep.best_index < 0 ||
        pt.phase2_dev_isdr_db >
            rep.points[static_cast<size_t>(rep.best_index)].phase2_dev_isdr_db) {
      rep.best_index = static_cast<int>(k);
    }
    if (rep.best_index_phase1 < 0 ||
        pt.phase1_dev_isdr_db >
            rep.points[static_cast<size_t>(rep.best_index_phase1)].phase1_dev_isdr_db) {
      rep.best_index_phase1 = static_cast<int>(k);
    }
  }
  return rep;
}

void save_sweep(const SweepReport& r, const std::string& csv_path,
                const std::string& json_path) {
  {
    std::ofstream out(csv_path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_sweep: cannot open " + csv_path);
    out.precision(17);
    out << "tau,feasible,used_fraction,phase1_dev_isdr_db,phase2_dev_isdr_db\n";
    for (const auto& p : r.points) {
      out << p.tau << ',' << (p.feasible ? 1 : 0) << ',' << p.used_fraction << ','
          << p.phase1_dev_isdr_db << ',' << p.phase2_dev_isdr_db << '\n';
    }
    if (!out) throw DataError("save_sweep: write failure on " + csv_path);
  }
  json pts = json::array();
  for (const auto& p : r.points) {
    json jp{{"feasible", p.feasible},
            {"tau", p.tau},
            {"used_fraction", p.used_fraction}};
    if (p.feasible) {
      jp["phase1_dev_isdr_db"] = p.phase1_dev_isdr_db;
      jp["phase2_dev_isdr_db"] = p.phase2_dev_isdr_db;
    }
    pts.push_back(jp);
  }
  const json j{{"best_index", r.best_index},
               {"best_index_phase1", r.best_index_phase1},
               {"measure", curriculum::measure_name(r.measure)},
               {"points", pts},
               {"version", 1}};
  std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("save_sweep: cannot open " + json_path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("save_sweep: write failure on " + json_path);
}

}  // namespace tsecl::report
