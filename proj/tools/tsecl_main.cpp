// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// tsecl: curriculum-learning toolkit for target speaker extraction on
// synthetic two-talker mixtures. Subcommands cover the whole pipeline:
// data generation, difficulty scoring, schedule planning, training,
// evaluation, and report assembly. Every run writes its artifacts plus a
// machine-readable run.json into --out.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical abort.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tsecl/common.hpp"
#include "tsecl/config.hpp"
#include "tsecl/curriculum.hpp"
#include "tsecl/datagen.hpp"
#include "tsecl/embedding.hpp"
#include "tsecl/metrics.hpp"
#include "tsecl/model.hpp"
#include "tsecl/report.hpp"
#include "tsecl/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tsecl;

namespace {

void write_run_json(const std::string& out_dir, const std::string& command,
                    const json& details) {
  const json j{{"command", command},
               {"details", details},
               {"schema", "tsecl-run"},
               {"version", 1}};
  std::ofstream out(out_dir + "/run.json", std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + out_dir + "/run.json");
  out << j.dump(2) << "\n";
}

std::string prepare_out_dir(const std::string& out_dir) {
  require_config(!out_dir.empty(), "--out directory is required");
  fs::create_directories(out_dir);
  return out_dir;
}

// Scores any schedule-referenced measure that is not in the manifest yet.
void ensure_scores(datagen::Manifest& m, const curriculum::Schedule& sched,
                   const curriculum::ScoreContext& ctx) {
  std::set<curriculum::Measure> needed;
  for (const auto& ph : sched.phases) {
    if (ph.selection) needed.insert(ph.selection->measure);
  }
  for (const auto measure : needed) {
    const std::string key = curriculum::measure_name(measure);
    const bool have = !m.records.empty() &&
                      std::all_of(m.records.begin(), m.records.end(),
                                  [&](const datagen::SampleRecord& r) {
                                    return r.difficulty.count(key) == 1;
                                  });
    if (!have) curriculum::annotate_manifest(m, measure, ctx);
  }
}

std::vector<double> parse_tau_list(const std::string& csv) {
  std::vector<double> taus;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const double v = std::stod(item, &used);
      require_config(used == item.size(), "bad tau value: " + item);
      taus.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("bad tau value: " + item);
    }
  }
  require_config(!taus.empty(), "--taus produced an empty grid");
  return taus;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
};

int cmd_gen_data(const CommonArgs& common, std::optional<uint64_t> seed,
                 bool write_wavs) {
  auto cfg = cli::load_app_config(common.config_path);
  if (seed) {
    cfg.dataset.seed = *seed;
    cfg.finalize();
  }
  const auto out = prepare_out_dir(common.out_dir);
  const auto bundle = datagen::build_dataset(cfg.dataset);
  datagen::save_manifest(bundle.train, out + "/train.jsonl");
  datagen::save_manifest(bundle.dev, out + "/dev.jsonl");
  datagen::save_manifest(bundle.test, out + "/test.jsonl");
  size_t wavs = 0;
  if (write_wavs) {
    for (const auto* m : {&bundle.train, &bundle.dev, &bundle.test}) {
      const std::string dir = out + "/audio/" + m->partition;
      fs::create_directories(dir);
      wavs += datagen::write_audio(*m, dir);
    }
  }
  write_run_json(out, "gen-data",
                 {{"config", cli::app_config_to_json(cfg)},
                  {"counts",
                   {{"train", bundle.train.records.size()},
                    {"dev", bundle.dev.records.size()},
                    {"test", bundle.test.records.size()}}},
                  {"audio_files", wavs},
                  {"seed", cfg.dataset.seed}});
  std::cout << "wrote " << bundle.train.records.size() << "/"
            << bundle.dev.records.size() << "/" << bundle.test.records.size()
            << " train/dev/test records to " << out << "\n";
  return 0;
}

int cmd_embed(const CommonArgs& common, const std::string& manifest_path) {
  const auto cfg = cli::load_app_config(common.config_path);
  const auto m = datagen::load_manifest(manifest_path);
  cfg.embed.validate(m.sample_rate);
  const auto out = prepare_out_dir(common.out_dir);
  const std::string path = out + "/embeddings.jsonl";
  std::ofstream of(path, std::ios::binary | std::ios::trunc);
  if (!of) throw DataError("cannot write " + path);
  for (const auto& r : m.records) {
    const auto stems = datagen::render_sample(r, m.sample_rate);
    const auto e = embedding::embed(stems.reference, cfg.embed);
    of << json{{"embedding", e.values}, {"sample_id", r.sample_id}}.dump() << "\n";
  }
  if (!of) throw DataError("write failure on " + path);
  write_run_json(out, "embed",
                 {{"manifest", manifest_path},
                  {"records", m.records.size()},
                  {"dim", cfg.embed.dim()}});
  std::cout << "embedded " << m.records.size() << " references to " << path << "\n";
  return 0;
}

int cmd_score(const CommonArgs& common, const std::string& manifest_path,
              const std::string& measure_name, const std::string& seed_model_path) {
  const auto cfg = cli::load_app_config(common.config_path);
  auto m = datagen::load_manifest(manifest_path);
  const auto measure = curriculum::measure_from_name(measure_name);
  curriculum::ScoreContext ctx;
  ctx.embed_cfg = cfg.embed;
  ctx.sample_rate = m.sample_rate;
  std::optional<model::Checkpoint> seed_ckpt;
  if (!seed_model_path.empty()) {
    seed_ckpt = model::load_checkpoint(seed_model_path);
    ctx.seed_model = &seed_ckpt->model;
  }
  require(!m.records.empty(), "score: empty manifest " + manifest_path);
  const auto scores = curriculum::annotate_manifest(m, measure, ctx);
  const auto out = prepare_out_dir(common.out_dir);
  datagen::save_manifest(m, out + "/annotated.jsonl");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  double mean = 0.0;
  for (const double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  write_run_json(out, "score",
                 {{"manifest", manifest_path},
                  {"measure", measure_name},
                  {"records", m.records.size()},
                  {"score_min", *lo},
                  {"score_mean", mean},
                  {"score_max", *hi}});
  std::cout << "scored " << m.records.size() << " records with " << measure_name
            << " (min " << *lo << ", mean " << mean << ", max " << *hi << ")\n";
  return 0;
}

int cmd_plan(const std::string& kind, const std::string& measure_name, double tau,
             int phase1, int phase2, int warmup, int final_epochs, int epochs,
             const std::vector<std::string>& sp_triples, const std::string& out_dir) {
  curriculum::Schedule sched;
  if (kind == "two-phase") {
    require_config(!measure_name.empty(), "plan two-phase needs --measure");
    sched = curriculum::plan_two_phase(
        {curriculum::measure_from_name(measure_name), tau}, phase1, phase2);
  } else if (kind == "self-paced") {
    std::vector<curriculum::SelfPacedTriple> triples;
    for (const auto& s : sp_triples) {
      curriculum::SelfPacedTriple t;
      if (std::sscanf(s.c_str(), "%d:%d:%lf", &t.start_epoch, &t.end_epoch,
                      &t.tau_db) != 3) {
        throw ConfigError("bad --sp triple (want start:end:tau): " + s);
      }
      triples.push_back(t);
    }
    require_config(!triples.empty(), "plan self-paced needs at least one --sp");
    sched = curriculum::plan_self_paced(triples, warmup, final_epochs);
  } else if (kind == "full") {
    curriculum::Phase full;
    full.start_epoch = 0;
    full.end_epoch = epochs;
    sched.phases = {full};
    sched.validate();
  } else {
    throw ConfigError("unknown --kind " + kind +
                      " (expected two-phase, self-paced, or full)");
  }
  const auto out = prepare_out_dir(out_dir);
  curriculum::save_schedule(sched, out + "/schedule.json");
  write_run_json(out, "plan",
                 {{"kind", kind},
                  {"phases", sched.phases.size()},
                  {"total_epochs", sched.total_epochs()}});
  std::cout << "planned " << sched.phases.size() << " phases over "
            << sched.total_epochs() << " epochs -> " << out << "/schedule.json\n";
  return 0;
}

int cmd_train(const CommonArgs& common, const std::string& train_path,
              const std::string& dev_path, const std::string& schedule_path,
              std::optional<uint64_t> seed, const std::string& seed_model_path) {
  auto cfg = cli::load_app_config(common.config_path);
  if (seed) {
    cfg.model_seed = *seed;
    cfg.train.seed = *seed;
  }
  auto train_m = datagen::load_manifest(train_path);
  const auto dev_m = datagen::load_manifest(dev_path);
  const auto sched = curriculum::load_schedule(schedule_path);

  curriculum::ScoreContext ctx;
  ctx.embed_cfg = cfg.embed;
  ctx.sample_rate = train_m.sample_rate;
  std::optional<model::Checkpoint> seed_ckpt;
  if (!seed_model_path.empty()) {
    seed_ckpt = model::load_checkpoint(seed_model_path);
    ctx.seed_model = &seed_ckpt->model;
  }
  ensure_scores(train_m, sched, ctx);

  const auto out = prepare_out_dir(common.out_dir);
  cfg.train.checkpoint_dir = out + "/checkpoints";
  {
    std::ofstream snap(out + "/config.json", std::ios::binary | std::ios::trunc);
    snap << cli::app_config_to_json(cfg).dump(2) << "\n";
  }
  const auto m0 = model::init(cfg.model_cfg, cfg.model_seed);
  const auto res = trainer::run_schedule(sched, train_m, dev_m, m0, cfg.train);
  size_t total_updates = 0;
  for (const auto& e : res.history.epochs) total_updates += e.updates;
  model::save_checkpoint(out + "/final.ckpt", res.model, cfg.model_seed,
                         total_updates);
  trainer::save_history(res.history, out + "/history.csv", out + "/history.json");
  write_run_json(out, "train",
                 {{"train_manifest", train_path},
                  {"dev_manifest", dev_path},
                  {"schedule", schedule_path},
                  {"epochs", res.history.epochs.size()},
                  {"final_dev_loss", res.history.epochs.back().dev_loss},
                  {"wall_seconds", res.history.wall_seconds},
                  {"model_seed", cfg.model_seed}});
  std::cout << "trained " << res.history.epochs.size() << " epochs; final dev loss "
            << res.history.epochs.back().dev_loss << "; artifacts in " << out << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& model_path,
             const std::string& manifest_path, const std::string& mode) {
  const auto cfg = cli::load_app_config(common.config_path);
  const auto test_m = datagen::load_manifest(manifest_path);
  report::EvalResult result;
  if (mode == "model") {
    require_config(!model_path.empty(), "eval --mode model needs --model");
    const auto ck = model::load_checkpoint(model_path);
    require_config(ck.model.config.embed_dim == cfg.embed.dim(),
                   "checkpoint embed_dim does not match the config's embedding");
    result = report::evaluate(ck.model, test_m, cfg.embed);
  } else if (mode == "oracle") {
    result = report::evaluate_oracle(test_m, cfg.model_cfg.stft);
  } else if (mode == "identity") {
    result = report::evaluate_identity(test_m);
  } else {
    throw ConfigError("unknown --mode " + mode +
                      " (expected model, oracle, or identity)");
  }
  const auto out = prepare_out_dir(common.out_dir);
  report::save_eval_jsonl(result, out + "/eval.jsonl");
  std::vector<double> isdrs;
  for (const auto& row : result.rows) isdrs.push_back(row.isdr_db);
  report::save_cdf_csv(report::ecdf(isdrs), out + "/cdf.csv");
  write_run_json(out, "eval",
                 {{"manifest", manifest_path},
                  {"model", model_path},
                  {"mode", mode},
                  {"count", result.count},
                  {"mean_isdr_db", result.mean_isdr_db},
                  {"median_isdr_db", result.median_isdr_db}});
  std::cout << "evaluated " << result.count << " records: mean iSDR "
            << result.mean_isdr_db << " dB, median " << result.median_isdr_db
            << " dB\n";
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_dir) {
  require_config(!inputs.empty(), "report needs at least one eval.jsonl or run dir");
  const auto out = prepare_out_dir(out_dir);
  const std::string cdf_path = out + "/cdf.csv";
  std::ofstream cdf(cdf_path, std::ios::binary | std::ios::trunc);
  if (!cdf) throw DataError("cannot write " + cdf_path);
  cdf.precision(17);
  cdf << "label,isdr_db,cum_prob\n";
  json summary = json::array();
  for (const auto& input : inputs) {
    std::string eval_path = input;
    std::string label = fs::path(input).filename().string();
    if (fs::is_directory(input)) {
      eval_path = input + "/eval.jsonl";
    } else {
      label = fs::path(input).parent_path().filename().string();
      if (label.empty()) label = input;
    }
    const auto r = report::load_eval_jsonl(eval_path);
    std::vector<double> isdrs;
    for (const auto& row : r.rows) isdrs.push_back(row.isdr_db);
    const auto curve = report::ecdf(isdrs);
    for (size_t i = 0; i < curve.x.size(); ++i) {
      cdf << label << ',' << curve.x[i] << ',' << curve.p[i] << '\n';
    }
    summary.push_back({{"count", r.count},
                       {"label", label},
                       {"mean_isdr_db", r.mean_isdr_db},
                       {"median_isdr_db", r.median_isdr_db}});
  }
  if (!cdf) throw DataError("write failure on " + cdf_path);
  {
    std::ofstream sj(out + "/summary.json", std::ios::binary | std::ios::trunc);
    sj << summary.dump(2) << "\n";
  }
  write_run_json(out, "report", {{"inputs", inputs}, {"curves", inputs.size()}});
  std::cout << "report over " << inputs.size() << " runs -> " << cdf_path << "\n";
  return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& train_path,
              const std::string& dev_path, const std::string& measure_name,
              const std::string& taus_csv, int phase1, int phase2,
              const std::string& seed_model_path) {
  const auto cfg = cli::load_app_config(common.config_path);
  auto train_m = datagen::load_manifest(train_path);
  const auto dev_m = datagen::load_manifest(dev_path);
  const auto measure = curriculum::measure_from_name(measure_name);
  const auto taus = parse_tau_list(taus_csv);

  curriculum::ScoreContext ctx;
  ctx.embed_cfg = cfg.embed;
  ctx.sample_rate = train_m.sample_rate;
  std::optional<model::Checkpoint> seed_ckpt;
  if (!seed_model_path.empty()) {
    seed_ckpt = model::load_checkpoint(seed_model_path);
    ctx.seed_model = &seed_ckpt->model;
  }
  const std::string key = curriculum::measure_name(measure);
  const bool have = std::all_of(train_m.records.begin(), train_m.records.end(),
                                [&](const datagen::SampleRecord& r) {
                                  return r.difficulty.count(key) == 1;
                                });
  if (!have) curriculum::annotate_manifest(train_m, measure, ctx);

  const auto out = prepare_out_dir(common.out_dir);
  report::SweepConfig scfg;
  scfg.model_cfg = cfg.model_cfg;
  scfg.model_seed = cfg.model_seed;
  scfg.train = cfg.train;
  scfg.phase1_epochs = phase1;
  scfg.phase2_epochs = phase2;
  scfg.work_dir = out + "/work";
  const auto rep = report::sweep(measure, taus, train_m, dev_m, scfg);
  report::save_sweep(rep, out + "/sweep.csv", out + "/sweep.json");
  json details{{"measure", measure_name},
               {"taus", taus},
               {"phase1_epochs", phase1},
               {"phase2_epochs", phase2}};
  if (rep.best_index >= 0) {
    details["best_tau"] = rep.points[static_cast<size_t>(rep.best_index)].tau;
    details["best_phase2_dev_isdr_db"] =
        rep.points[static_cast<size_t>(rep.best_index)].phase2_dev_isdr_db;
  }
  write_run_json(out, "sweep", details);
  std::cout << "swept " << taus.size() << " thresholds";
  if (rep.best_index >= 0) {
    std::cout << "; best tau "
              << rep.points[static_cast<size_t>(rep.best_index)].tau << " ("
              << rep.points[static_cast<size_t>(rep.best_index)].phase2_dev_isdr_db
              << " dB dev iSDR)";
  }
  std::cout << " -> " << out << "/sweep.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"curriculum learning for target speaker extraction"};
  app.require_subcommand(1);

  CommonArgs common;
  std::optional<uint64_t> seed;
  bool write_wavs = false;
  std::string manifest_path, train_path, dev_path, schedule_path;
  std::string measure_name, seed_model_path, model_path;
  std::string mode = "model", kind = "two-phase", taus_csv;
  double tau = 0.0;
  int phase1 = 3, phase2 = 2, warmup = 1, final_epochs = 2, epochs = 5;
  std::vector<std::string> sp_triples, report_inputs;

  auto add_common = [&](CLI::App* sub, bool needs_config = true) {
    if (needs_config) {
      sub->add_option("--config", common.config_path, "config file (TOML or JSON)")
          ->required();
    }
    sub->add_option("--out", common.out_dir, "output run directory")->required();
  };

  auto* gen = app.add_subcommand("gen-data", "generate train/dev/test manifests");
  add_common(gen);
  gen->add_option("--seed", seed, "override the dataset seed");
  gen->add_flag("--audio", write_wavs, "also write every stem as WAV");

  auto* emb = app.add_subcommand("embed", "embed reference utterances");
  add_common(emb);
  emb->add_option("--manifest", manifest_path, "manifest to embed")->required();

  auto* sc = app.add_subcommand("score", "annotate a manifest with difficulty scores");
  add_common(sc);
  sc->add_option("--manifest", manifest_path, "manifest to score")->required();
  sc->add_option("--measure", measure_name,
                 "gender | speaker_similarity | mix_sdr | seed_model_snr")
      ->required();
  sc->add_option("--seed-model", seed_model_path, "checkpoint for seed_model_snr");

  auto* pl = app.add_subcommand("plan", "emit a schedule file");
  pl->add_option("--out", common.out_dir, "output run directory")->required();
  pl->add_option("--kind", kind, "two-phase | self-paced | full");
  pl->add_option("--measure", measure_name, "measure for two-phase");
  pl->add_option("--tau", tau, "threshold for two-phase");
  pl->add_option("--phase1", phase1, "two-phase: easy epochs");
  pl->add_option("--phase2", phase2, "two-phase: full epochs");
  pl->add_option("--warmup", warmup, "self-paced: warmup epochs");
  pl->add_option("--final", final_epochs, "self-paced: trailing full epochs");
  pl->add_option("--sp", sp_triples, "self-paced start:end:tau (repeatable)");
  pl->add_option("--epochs", epochs, "full: total epochs");

  auto* tr = app.add_subcommand("train", "run a schedule");
  add_common(tr);
  tr->add_option("--train", train_path, "training manifest")->required();
  tr->add_option("--dev", dev_path, "dev manifest")->required();
  tr->add_option("--schedule", schedule_path, "schedule file")->required();
  tr->add_option("--seed", seed, "override model and batching seeds");
  tr->add_option("--seed-model", seed_model_path,
                 "checkpoint for seed_model_snr selections");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  add_common(ev);
  ev->add_option("--model", model_path, "model checkpoint");
  ev->add_option("--manifest", manifest_path, "test manifest")->required();
  ev->add_option("--mode", mode, "model | oracle | identity");

  auto* rp = app.add_subcommand("report", "combine eval results into CDF curves");
  rp->add_option("--out", common.out_dir, "output run directory")->required();
  rp->add_option("runs", report_inputs, "run dirs or eval.jsonl files")->required();

  auto* sw = app.add_subcommand("sweep", "two-phase threshold sweep on the dev set");
  add_common(sw);
  sw->add_option("--train", train_path, "training manifest")->required();
  sw->add_option("--dev", dev_path, "dev manifest")->required();
  sw->add_option("--measure", measure_name, "measure to sweep")->required();
  sw->add_option("--taus", taus_csv, "comma-separated thresholds")->required();
  sw->add_option("--phase1", phase1, "easy epochs per point");
  sw->add_option("--phase2", phase2, "full epochs per point");
  sw->add_option("--seed-model", seed_model_path, "checkpoint for seed_model_snr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common, seed, write_wavs);
    if (emb->parsed()) return cmd_embed(common, manifest_path);
    if (sc->parsed()) return cmd_score(common, manifest_path, measure_name,
                                       seed_model_path);
    if (pl->parsed()) return cmd_plan(kind, measure_name, tau, phase1, phase2,
                                      warmup, final_epochs, epochs, sp_triples,
                                      common.out_dir);
    if (tr->parsed()) return cmd_train(common, train_path, dev_path, schedule_path,
                                       seed, seed_model_path);
    if (ev->parsed()) return cmd_eval(common, model_path, manifest_path, mode);
    if (rp->parsed()) return cmd_report(report_inputs, common.out_dir);
    if (sw->parsed()) return cmd_sweep(common, train_path, dev_path, measure_name,
                                       taus_csv, phase1, phase2, seed_model_path);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
