// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "tsecl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tsecl/rng.hpp"
#include "tsecl/wav_io.hpp"

namespace tsecl::datagen {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

using nlohmann::json;

std::string pad_index(size_t i) {
  std::ostringstream os;
  os << i;
  std::string s = os.str();
  while (s.size() < 5) s.insert(s.begin(), '0');
  return s;
}

json profile_to_json(const SpeakerProfile& p) {
  json f = json::array();
  for (const auto& fm : p.formants)
    f.push_back({{"bandwidth_hz", fm.bandwidth_hz}, {"center_hz", fm.center_hz}});
  return json{{"f0_hz", p.f0_hz},
              {"formants", f},
              {"gender", gender_name(p.gender)},
              {"seed", p.seed},
              {"speaker_id", p.speaker_id}};
}

SpeakerProfile profile_from_json(const json& j) {
  SpeakerProfile p;
  p.speaker_id = j.at("speaker_id").get<std::string>();
  const std::string g = j.at("gender").get<std::string>();
  if (g != "A" && g != "B") throw DataError("manifest: unknown gender " + g);
  p.gender = g == "A" ? Gender::A : Gender::B;
  p.f0_hz = j.at("f0_hz").get<double>();
  p.seed = j.at("seed").get<uint64_t>();
  for (const auto& fj : j.at("formants")) {
    Formant fm;
    fm.center_hz = fj.at("center_hz").get<double>();
    fm.bandwidth_hz = fj.at("bandwidth_hz").get<double>();
    p.formants.push_back(fm);
  }
  return p;
}

json record_to_json(const SampleRecord& r) {
  json d = json::object();
  for (const auto& [k, v] : r.difficulty) d[k] = v;
  return json{{"difficulty", d},
              {"duration_s", r.duration_s},
              {"interferer", profile_to_json(r.interferer)},
              {"mix_sdr_db", r.mix_sdr_db},
              {"reference_duration_s", r.reference_duration_s},
              {"sample_id", r.sample_id},
              {"seed_interferer", r.seed_interferer},
              {"seed_reference", r.seed_reference},
              {"seed_target", r.seed_target},
              {"target", profile_to_json(r.target)}};
}

SampleRecord record_from_json(const json& j) {
  SampleRecord r;
  r.sample_id = j.at("sample_id").get<std::string>();
  r.target = profile_from_json(j.at("target"));
  r.interferer = profile_from_json(j.at("interferer"));
  r.mix_sdr_db = j.at("mix_sdr_db").get<double>();
  r.duration_s = j.at("duration_s").get<double>();
  r.reference_duration_s = j.at("reference_duration_s").get<double>();
  r.seed_target = j.at("seed_target").get<uint64_t>();
  r.seed_interferer = j.at("seed_interferer").get<uint64_t>();
  r.seed_reference = j.at("seed_reference").get<uint64_t>();
  if (j.contains("difficulty"))
    for (const auto& [k, v] : j.at("difficulty").items())
      r.difficulty[k] = v.get<double>();
  return r;
}

// Deterministic formant stacks; ranges keep F1 < F2 < F3 < Nyquist at 16 kHz.
// Deliberately wider than natural vowels so the speaker pool's band-energy
// profiles spread out: cross-speaker embedding similarity then covers the
// whole tau_spk sweep range instead of saturating near 1. Gender B models a
// shorter vocal tract (formants ~20% higher), which keeps same-gender pairs
// more similar under the embedding than different-gender pairs.
std::vector<Formant> draw_formants(Rng& rng, Gender g) {
  const double k = g == Gender::A ? 1.0 : 1.2;
  std::vector<Formant> f(3);
  f[0] = {rng.uniform(250.0 * k, 1000.0 * k), rng.uniform(60.0, 100.0)};
  f[1] = {rng.uniform(1050.0 * k, 2700.0 * k), rng.uniform(80.0, 140.0)};
  f[2] = {rng.uniform(2800.0 * k, std::min(6800.0 * k, 7400.0)),
          rng.uniform(100.0, 180.0)};
  return f;
}

using Pair = std::pair<size_t, size_t>;  // indices into a profile vector

// All unordered same-gender pairs, alternating between the two genders so a
// truncated prefix stays gender-balanced.
std::vector<std::pair<Pair, bool>> same_gender_pairs(size_t na, size_t nb) {
  std::vector<Pair> a, b;
  for (size_t i = 0; i < na; ++i)
    for (size_t j = i + 1; j < na; ++j) a.push_back({i, j});
  for (size_t i = 0; i < nb; ++i)
    for (size_t j = i + 1; j < nb; ++j) b.push_back({i, j});
  std::vector<std::pair<Pair, bool>> out;  // bool: second vector (gender B)
  for (size_t k = 0; k < std::max(a.size(), b.size()); ++k) {
    if (k < a.size()) out.push_back({a[k], false});
    if (k < b.size()) out.push_back({b[k], true});
  }
  return out;
}

Manifest build_partition(const std::string& partition,
                         const std::vector<SpeakerProfile>& pool_a,
                         const std::vector<SpeakerProfile>& pool_b,
                         int pairs_per_class, int utterances_per_pair,
                         const DatasetConfig& cfg, uint64_t stream_seed) {
  auto same = same_gender_pairs(pool_a.size(), pool_b.size());
  std::vector<Pair> diff;
  for (size_t i = 0; i < pool_a.size(); ++i)
    for (size_t j = 0; j < pool_b.size(); ++j) diff.push_back({i, j});

  const size_t want = static_cast<size_t>(pairs_per_class);
  if (same.size() < want || diff.size() < want)
    throw ConfigError("build_dataset: not enough speaker pairs for partition '" +
                      partition + "' (same=" + std::to_string(same.size()) +
                      ", diff=" + std::to_string(diff.size()) +
                      ", requested=" + std::to_string(want) + " per class)");

  Rng rng(mix_seed(stream_seed, 0x70617274));
  rng.shuffle(same);
  rng.shuffle(diff);
  same.resize(want);
  diff.resize(want);

  // (target, interferer) profile pairs, alternating classes so the record
  // stream interleaves same- and different-gender mixtures.
  std::vector<std::pair<const SpeakerProfile*, const SpeakerProfile*>> pairs;
  for (size_t k = 0; k < want; ++k) {
    const auto& [sp, is_b] = same[k];
    const auto& pool = is_b ? pool_b : pool_a;
    pairs.push_back({&pool[sp.first], &pool[sp.second]});
    pairs.push_back({&pool_a[diff[k].first], &pool_b[diff[k].second]});
  }

  Manifest m;
  m.partition = partition;
  m.sample_rate = cfg.sample_rate;
  size_t index = 0;
  for (const auto& [t, i] : pairs) {
    for (int u = 0; u < utterances_per_pair; ++u) {
      const double sdr = rng.uniform(cfg.sdr_lo_db, cfg.sdr_hi_db);
      const uint64_t st = rng.next_u64();
      const uint64_t si = rng.next_u64();
      const uint64_t sr1 = rng.next_u64();
      const uint64_t sr2 = rng.next_u64();

      SampleRecord r;
      r.target = *t;
      r.interferer = *i;
      r.mix_sdr_db = sdr;
      r.duration_s = cfg.mixture_duration_s;
      r.reference_duration_s = cfg.reference_duration_s;
      r.seed_target = st;
      r.seed_interferer = si;
      r.seed_reference = sr1;
      r.sample_id = partition + "-" + pad_index(index++) + "-" + t->speaker_id +
                    "-" + i->speaker_id;
      m.records.push_back(r);

      // Role swap: same stems, negated SDR -> the same mixture up to scale,
      // now targeting the other speaker.
      SampleRecord w;
      w.target = *i;
      w.interferer = *t;
      w.mix_sdr_db = -sdr;
      w.duration_s = cfg.mixture_duration_s;
      w.reference_duration_s = cfg.reference_duration_s;
      w.seed_target = si;
      w.seed_interferer = st;
      w.seed_reference = sr2;
      w.sample_id = partition + "-" + pad_index(index++) + "-" + i->speaker_id +
                    "-" + t->speaker_id;
      m.records.push_back(w);
    }
  }
  m.validate();
  return m;
}

}  // namespace

double f0_band_lo(Gender g) { return g == Gender::A ? 100.0 : 190.0; }
double f0_band_hi(Gender g) { return g == Gender::A ? 140.0 : 240.0; }

void SpeakerProfile::validate(double sample_rate) const {
  require(!speaker_id.empty(), "profile: empty speaker_id");
  require(f0_hz >= f0_band_lo(gender) && f0_hz <= f0_band_hi(gender),
          "profile " + speaker_id + ": f0 outside its gender band");
  require(formants.size() >= 2 && formants.size() <= 3,
          "profile " + speaker_id + ": need 2-3 formants");
  for (const auto& f : formants) {
    require(f.center_hz > 0.0 && f.center_hz < sample_rate / 2.0,
            "profile " + speaker_id + ": formant at or above Nyquist");
    require(f.bandwidth_hz > 0.0, "profile " + speaker_id + ": nonpositive bandwidth");
  }
}

void Manifest::validate() const {
  require(sample_rate > 0.0, "manifest: nonpositive sample_rate");
  std::set<std::string> ids;
  for (const auto& r : records) {
    require(ids.insert(r.sample_id).second,
            "manifest: duplicate sample_id " + r.sample_id);
    require(r.target.speaker_id != r.interferer.speaker_id,
            "manifest: self-pairing in " + r.sample_id);
    require(r.duration_s > 0.0 && r.reference_duration_s > 0.0,
            "manifest: nonpositive duration in " + r.sample_id);
    r.target.validate(sample_rate);
    r.interferer.validate(sample_rate);
  }
}

void DatasetConfig::validate() const {
  require_config(train_profiles_per_gender >= 2 && test_profiles_per_gender >= 2,
                 "dataset: need at least 2 profiles per gender per pool");
  require_config(train_pairs_per_class >= 1 && dev_pairs_per_class >= 1 &&
                     test_pairs_per_class >= 1,
                 "dataset: pair counts must be positive");
  require_config(utterances_per_pair >= 1, "dataset: utterances_per_pair >= 1");
  require_config(sdr_lo_db <= sdr_hi_db, "dataset: invalid SDR range");
  require_config(mixture_duration_s > 0.0 && reference_duration_s > 0.0,
                 "dataset: durations must be positive");
  require_config(sample_rate > 0.0, "dataset: sample_rate must be positive");
}

std::vector<SpeakerProfile> make_profiles(int per_gender, uint64_t seed,
                                          const std::string& id_prefix,
                                          double sample_rate) {
  require_config(per_gender >= 1, "make_profiles: per_gender >= 1");
  std::vector<SpeakerProfile> out;
  for (Gender g : {Gender::A, Gender::B}) {
    const uint64_t gender_tag = g == Gender::A ? 0xA : 0xB;
    for (int i = 0; i < per_gender; ++i) {
      Rng rng(mix_seed(seed, gender_tag, static_cast<uint64_t>(i)));
      SpeakerProfile p;
      std::ostringstream id;
      id << id_prefix << gender_name(g);
      if (i < 10) id << '0';
      id << i;
      p.speaker_id = id.str();
      p.gender = g;
      p.f0_hz = rng.uniform(f0_band_lo(g), f0_band_hi(g));
      p.formants = draw_formants(rng, g);
      p.seed = rng.next_u64();
      p.validate(sample_rate);
      out.push_back(std::move(p));
    }
  }
  return out;
}

dsp::Waveform synth_utterance(const SpeakerProfile& p, double duration_s,
                              uint64_t utterance_seed, double sample_rate) {
  require(duration_s > 0.0, "synth_utterance: duration must be positive");
  p.validate(sample_rate);
  const size_t n = static_cast<size_t>(std::llround(duration_s * sample_rate));
  require(n > 0, "synth_utterance: zero-length request");

  Rng rng(mix_seed(p.seed, utterance_seed));
  std::vector<double> x(n, 0.0);
  // Glottal impulse train with +-1% period jitter. Each impulse is split
  // across the two neighboring samples (fractional delay): truncating to one
  // sample makes the gap sequence alternate, e.g. 77,78,77,78 for a 77.5-
  // sample period, which period-doubles the waveform and breaks pitch tests.
  const double period = sample_rate / p.f0_hz;
  double pos = 0.0;
  while (pos < static_cast<double>(n)) {
    const size_t idx = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(idx);
    x[idx] += 1.0 - frac;
    if (idx + 1 < n) x[idx + 1] += frac;
    pos += period * (1.0 + 0.01 * rng.uniform(-1.0, 1.0));
  }

  // Cascade of two-pole resonators, one per formant.
  for (const auto& f : p.formants) {
    const double r = std::exp(-kPi * f.bandwidth_hz / sample_rate);
    const double a1 = 2.0 * r * std::cos(2.0 * kPi * f.center_hz / sample_rate);
    const double a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double y = x[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      x[i] = y;
    }
  }

  double energy = 0.0;
  for (double v : x) energy += v * v;
  require(energy > 0.0, "synth_utterance: silent output");
  const double gain = 0.1 / std::sqrt(energy / static_cast<double>(n));
  for (double& v : x) v *= gain;

  dsp::Waveform w;
  w.sample_rate = sample_rate;
  w.samples = std::move(x);
  return w;
}

MixResult mix_at_sdr(const dsp::Waveform& target, const dsp::Waveform& interferer,
                     metrics::Decibels sdr_db) {
  require(target.samples.size() == interferer.samples.size(),
          "mix_at_sdr: length mismatch");
  double et = 0.0, ei = 0.0;
  for (double v : target.samples) et += v * v;
  for (double v : interferer.samples) ei += v * v;
  require(et > 0.0 && ei > 0.0, "mix_at_sdr: zero-energy input");

  const double gain = std::sqrt(et / (ei * std::pow(10.0, sdr_db.value / 10.0)));
  MixResult out;
  out.scaled_interferer.sample_rate = target.sample_rate;
  out.mixture.sample_rate = target.sample_rate;
  out.scaled_interferer.samples.resize(target.samples.size());
  out.mixture.samples.resize(target.samples.size());
  for (size_t i = 0; i < target.samples.size(); ++i) {
    out.scaled_interferer.samples[i] = gain * interferer.samples[i];
    out.mixture.samples[i] = target.samples[i] + out.scaled_interferer.samples[i];
  }
  return out;
}

RenderedSample render_sample(const SampleRecord& r, double sample_rate) {
  RenderedSample out;
  out.target = synth_utterance(r.target, r.duration_s, r.seed_target, sample_rate);
  const dsp::Waveform interferer =
      synth_utterance(r.interferer, r.duration_s, r.seed_interferer, sample_rate);
  MixResult mixed = mix_at_sdr(out.target, interferer, {r.mix_sdr_db});
  out.mixture = std::move(mixed.mixture);
  out.interferer_scaled = std::move(mixed.scaled_interferer);
  out.reference = synth_utterance(r.target, r.reference_duration_s, r.seed_reference,
                                  sample_rate);
  return out;
}

DatasetBundle build_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const auto train_pool = make_profiles(cfg.train_profiles_per_gender,
                                        mix_seed(cfg.seed, 1), "tr", cfg.sample_rate);
  const auto test_pool = make_profiles(cfg.test_profiles_per_gender,
                                       mix_seed(cfg.seed, 2), "te", cfg.sample_rate);

  auto split = [](const std::vector<SpeakerProfile>& pool) {
    std::pair<std::vector<SpeakerProfile>, std::vector<SpeakerProfile>> ab;
    for (const auto& p : pool)
      (p.gender == Gender::A ? ab.first : ab.second).push_back(p);
    return ab;
  };
  const auto [tra, trb] = split(train_pool);
  const auto [tea, teb] = split(test_pool);

  DatasetBundle b;
  b.train = build_partition("train", tra, trb, cfg.train_pairs_per_class,
                            cfg.utterances_per_pair, cfg, mix_seed(cfg.seed, 11));
  b.dev = build_partition("dev", tra, trb, cfg.dev_pairs_per_class, 1, cfg,
                          mix_seed(cfg.seed, 12));
  b.test = build_partition("test", tea, teb, cfg.test_pairs_per_class, 1, cfg,
                           mix_seed(cfg.seed, 13));
  return b;
}

void save_manifest(const Manifest& m, const std::string& path) {
  m.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("save_manifest: cannot open " + path);
  const json header{{"count", m.records.size()},
                    {"partition", m.partition},
                    {"sample_rate", m.sample_rate},
                    {"schema", "tsecl-manifest"},
                    {"version", 1}};
  out << header.dump() << "\n";
  for (const auto& r : m.records) out << record_to_json(r).dump() << "\n";
  if (!out) throw DataError("save_manifest: write failure on " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_manifest: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("load_manifest: empty file " + path);

  Manifest m;
  try {
    const json header = json::parse(line);
    if (header.at("schema").get<std::string>() != "tsecl-manifest")
      throw DataError("load_manifest: not a manifest file: " + path);
    if (header.at("version").get<int>() != 1)
      throw DataError("load_manifest: unsupported manifest version");
    m.partition = header.at("partition").get<std::string>();
    m.sample_rate = header.at("sample_rate").get<double>();
    const size_t count = header.at("count").get<size_t>();
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      m.records.push_back(record_from_json(json::parse(line)));
    }
    if (m.records.size() != count)
      throw DataError("load_manifest: record count mismatch in " + path);
  } catch (const json::exception& e) {
    throw DataError("load_manifest: bad JSON in " + path + ": " + e.what());
  }
  m.validate();
  return m;
}

size_t write_audio(const Manifest& m, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  size_t written = 0;
  for (const auto& r : m.records) {
    const RenderedSample s = render_sample(r, m.sample_rate);
    const fs::path base = fs::path(dir) / r.sample_id;
    dsp::write_wav(base.string() + ".mix.wav", s.mixture);
    dsp::write_wav(base.string() + ".target.wav", s.target);
    dsp::write_wav(base.string() + ".interferer.wav", s.interferer_scaled);
    dsp::write_wav(base.string() + ".ref.wav", s.reference);
    written += 4;
  }
  return written;
}

}  // namespace tsecl::datagen
