// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "tsecl/common.hpp"

namespace tsecl::cli {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Cuts a trailing comment, respecting double-quoted strings.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

// A TOML-style scalar: quoted string, boolean, number, or a bare word
// (taken as a string).
json parse_scalar(const std::string& raw, const std::string& where) {
  const std::string v = trim(raw);
  require_config(!v.empty(), "config: empty value at " + where);
  if (v.front() == '"') {
    try {
      return json::parse(v);
    } catch (const json::exception&) {
      throw ConfigError("config: bad string literal at " + where);
    }
  }
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    const json num = json::parse(v);
    if (num.is_number()) return num;
  } catch (const json::exception&) {
    // fall through: bare word
  }
  for (char c : v) {
    require_config(std::isalnum(static_cast<unsigned char>(c)) || c == '_' ||
                       c == '-' || c == '.',
                   "config: unquoted value with odd characters at " + where);
  }
  return v;
}

json parse_toml_lite(std::istream& in, const std::string& path) {
  json root = json::object();
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    if (body.front() == '[') {
      require_config(body.back() == ']', "config: unterminated section at " + where);
      section = trim(body.substr(1, body.size() - 2));
      require_config(!section.empty(), "config: empty section name at " + where);
      if (!root.contains(section)) root[section] = json::object();
      continue;
    }
    const size_t eq = body.find('=');
    require_config(eq != std::string::npos, "config: expected key = value at " + where);
    const std::string key = trim(body.substr(0, eq));
    require_config(!key.empty(), "config: empty key at " + where);
    json& target = section.empty() ? root : root[section];
    target[key] = parse_scalar(body.substr(eq + 1), where);
  }
  return root;
}

// Typed reads with defaulting; every consumed key is crossed off so unknown
// keys can be reported.
struct Section {
  json data;
  std::string name;
  std::set<std::string> seen;

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen.insert(key);
    if (!data.contains(key)) return fallback;
    try {
      return data.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: bad type for " + name + "." + key);
    }
  }

  void done() const {
    for (const auto& [key, _] : data.items()) {
      require_config(seen.count(key) == 1,
                     "config: unknown key " + name + "." + key);
    }
  }
};

Section section_of(const json& root, const std::string& name) {
  Section s;
  s.name = name;
  s.data = root.contains(name) ? root.at(name) : json::object();
  require_config(s.data.is_object(), "config: section " + name + " must be a table");
  return s;
}

}  // namespace

void AppConfig::finalize() {
  embed.stft.validate();
  model_cfg.stft = embed.stft;
  model_cfg.embed_dim = embed.dim();
  train.embed_cfg = embed;
  train.loss = model_cfg.loss;
  train.sample_rate = dataset.sample_rate;
  dataset.validate();
  embed.validate(dataset.sample_rate);
  model_cfg.validate();
  train.validate();
}

AppConfig default_app_config() {
  AppConfig cfg;
  cfg.train.lr.warmup_batches = 100;  // desk default
  cfg.finalize();
  return cfg;
}

nlohmann::json parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + path);
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
    try {
      return json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config: bad JSON in " + path + ": " + e.what());
    }
  }
  return parse_toml_lite(in, path);
}

AppConfig load_app_config(const std::string& path) {
  const json root = parse_config_file(path);
  require_config(root.is_object(), "config: top level must be a table");
  static const std::set<std::string> known{"dataset", "embedding", "stft", "model",
                                           "train"};
  for (const auto& [key, _] : root.items()) {
    require_config(known.count(key) == 1, "config: unknown section " + key);
  }

  AppConfig cfg;

  auto ds = section_of(root, "dataset");
  cfg.dataset.train_profiles_per_gender =
      ds.get("train_profiles_per_gender", cfg.dataset.train_profiles_per_gender);
  cfg.dataset.test_profiles_per_gender =
      ds.get("test_profiles_per_gender", cfg.dataset.test_profiles_per_gender);
  cfg.dataset.train_pairs_per_class =
      ds.get("train_pairs_per_class", cfg.dataset.train_pairs_per_class);
  cfg.dataset.dev_pairs_per_class =
      ds.get("dev_pairs_per_class", cfg.dataset.dev_pairs_per_class);
  cfg.dataset.test_pairs_per_class =
      ds.get("test_pairs_per_class", cfg.dataset.test_pairs_per_class);
  cfg.dataset.utterances_per_pair =
      ds.get("utterances_per_pair", cfg.dataset.utterances_per_pair);
  cfg.dataset.mixture_duration_s =
      ds.get("mixture_duration_s", cfg.dataset.mixture_duration_s);
  cfg.dataset.reference_duration_s =
      ds.get("reference_duration_s", cfg.dataset.reference_duration_s);
  cfg.dataset.sdr_lo_db = ds.get("sdr_lo_db", cfg.dataset.sdr_lo_db);
  cfg.dataset.sdr_hi_db = ds.get("sdr_hi_db", cfg.dataset.sdr_hi_db);
  cfg.dataset.sample_rate = ds.get("sample_rate", cfg.dataset.sample_rate);
  cfg.dataset.seed = ds.get("seed", cfg.dataset.seed);
  ds.done();

  auto st = section_of(root, "stft");
  cfg.embed.stft.window_len = st.get("window_len", cfg.embed.stft.window_len);
  cfg.embed.stft.hop = st.get("hop", cfg.embed.stft.hop);
  cfg.embed.stft.fft_len = st.get("fft_len", cfg.embed.stft.fft_len);
  st.done();

  auto em = section_of(root, "embedding");
  cfg.embed.num_bands = em.get("num_bands", cfg.embed.num_bands);
  cfg.embed.fmin_hz = em.get("fmin_hz", cfg.embed.fmin_hz);
  cfg.embed.fmax_hz = em.get("fmax_hz", cfg.embed.fmax_hz);
  em.done();

  auto md = section_of(root, "model");
  cfg.model_cfg.blocks = md.get("blocks", cfg.model_cfg.blocks);
  cfg.model_cfg.hidden_dim = md.get("hidden_dim", cfg.model_cfg.hidden_dim);
  cfg.model_cfg.loss = model::loss_kind_from_name(
      md.get<std::string>("loss", model::loss_kind_name(cfg.model_cfg.loss)));
  cfg.model_seed = md.get("seed", cfg.model_seed);
  // embed_dim is derived from the embedding section, but run snapshots write
  // it out; accept it as long as it agrees.
  const int claimed_embed_dim = md.get("embed_dim", -1);
  md.done();

  auto tr = section_of(root, "train");
  cfg.train.batch_size = tr.get("batch_size", cfg.train.batch_size);
  cfg.train.seed = tr.get("seed", cfg.train.seed);
  cfg.train.lr.peak_lr = tr.get("peak_lr", cfg.train.lr.peak_lr);
  cfg.train.lr.warmup_batches = tr.get("warmup_batches", 100);
  cfg.train.lr.floor_lr = tr.get("floor_lr", cfg.train.lr.floor_lr);
  tr.done();

  cfg.finalize();
  require_config(claimed_embed_dim < 0 || claimed_embed_dim == cfg.model_cfg.embed_dim,
                 "config: model.embed_dim contradicts the embedding section "
                 "(expected " + std::to_string(cfg.model_cfg.embed_dim) + ")");
  return cfg;
}

nlohmann::json app_config_to_json(const AppConfig& cfg) {
  return json{
      {"dataset",
       {{"train_profiles_per_gender", cfg.dataset.train_profiles_per_gender},
        {"test_profiles_per_gender", cfg.dataset.test_profiles_per_gender},
        {"train_pairs_per_class", cfg.dataset.train_pairs_per_class},
        {"dev_pairs_per_class", cfg.dataset.dev_pairs_per_class},
        {"test_pairs_per_class", cfg.dataset.test_pairs_per_class},
        {"utterances_per_pair", cfg.dataset.utterances_per_pair},
        {"mixture_duration_s", cfg.dataset.mixture_duration_s},
        {"reference_duration_s", cfg.dataset.reference_duration_s},
        {"sdr_lo_db", cfg.dataset.sdr_lo_db},
        {"sdr_hi_db", cfg.dataset.sdr_hi_db},
        {"sample_rate", cfg.dataset.sample_rate},
        {"seed", cfg.dataset.seed}}},
      {"stft",
       {{"window_len", cfg.embed.stft.window_len},
        {"hop", cfg.embed.stft.hop},
        {"fft_len", cfg.embed.stft.fft_len}}},
      {"embedding",
       {{"num_bands", cfg.embed.num_bands},
        {"fmin_hz", cfg.embed.fmin_hz},
        {"fmax_hz", cfg.embed.fmax_hz}}},
      {"model",
       {{"blocks", cfg.model_cfg.blocks},
        {"hidden_dim", cfg.model_cfg.hidden_dim},
        {"embed_dim", cfg.model_cfg.embed_dim},
        {"loss", model::loss_kind_name(cfg.model_cfg.loss)},
        {"seed", cfg.model_seed}}},
      {"train",
       {{"batch_size", cfg.train.batch_size},
        {"seed", cfg.train.seed},
        {"peak_lr", cfg.train.lr.peak_lr},
        {"warmup_batches", cfg.train.lr.warmup_batches},
        {"floor_lr", cfg.train.lr.floor_lr}}}};
}

}  // namespace tsecl::cli
