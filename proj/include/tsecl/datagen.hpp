// Copyright 2026 tsecl authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef TSECL_DATAGEN_HPP
#define TSECL_DATAGEN_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tsecl/dsp.hpp"
#include "tsecl/metrics.hpp"

namespace tsecl::datagen {

enum class Gender { A, B };

inline const char* gender_name(Gender g) { return g == Gender::A ? "A" : "B"; }

struct Formant {
  double center_hz = 0.0;
  double bandwidth_hz = 0.0;
};

// Synthetic "speaker": a fundamental in the gender's f0 band plus a fixed
// formant stack. Everything an utterance needs is derived from these fields
// and an utterance seed, so profiles are cheap to ship around in manifests.
struct SpeakerProfile {
  std::string speaker_id;
  Gender gender = Gender::A;
  double f0_hz = 0.0;
  std::vector<Formant> formants;
  uint64_t seed = 0;

  void validate(double sample_rate) const;
};

// Gender f0 bands: A 100-140 Hz, B 190-240 Hz.
double f0_band_lo(Gender g);
double f0_band_hi(Gender g);

// One 2-talker mixture: target + interferer profiles, the requested mix SDR,
// and the seeds that make every stem reproducible without audio on disk.
// difficulty is filled in later by the curriculum module.
struct SampleRecord {
  std::string sample_id;
  SpeakerProfile target;
  SpeakerProfile interferer;
  double mix_sdr_db = 0.0;
  double duration_s = 1.0;
  double reference_duration_s = 2.0;
  uint64_t seed_target = 0;
  uint64_t seed_interferer = 0;
  uint64_t seed_reference = 0;
  std::map<std::string, double> difficulty;
};

struct Manifest {
  std::string partition;  // train | dev | test
  double sample_rate = 16000.0;
  std::vector<SampleRecord> records;

  void validate() const;  // unique ids, valid profiles
};

struct DatasetConfig {
  int train_profiles_per_gender = 12;
  int test_profiles_per_gender = 4;
  // Pair counts are per class (same-gender vs different-gender), kept equal so
  // exactly half of all records are different-gender pairs.
  int train_pairs_per_class = 48;
  int dev_pairs_per_class = 8;
  int test_pairs_per_class = 12;
  int utterances_per_pair = 2;  // train only; dev/test always use 1
  double mixture_duration_s = 1.0;
  double reference_duration_s = 2.0;
  double sdr_lo_db = -5.0;
  double sdr_hi_db = 5.0;
  double sample_rate = 16000.0;
  uint64_t seed = 1234;

  void validate() const;
};

struct DatasetBundle {
  Manifest train;
  Manifest dev;
  Manifest test;
};

// Deterministic profile bank for one partition's speaker pool.
std::vector<SpeakerProfile> make_profiles(int per_gender, uint64_t seed,
                                          const std::string& id_prefix,
                                          double sample_rate);

// Impulse-train glottal source at p.f0 with +-1% seeded period jitter, run
// through the profile's two-pole formant resonators, RMS-normalized to 0.1.
dsp::Waveform synth_utterance(const SpeakerProfile& p, double duration_s,
                              uint64_t utterance_seed, double sample_rate = 16000.0);

struct MixResult {
  dsp::Waveform mixture;
  dsp::Waveform scaled_interferer;
};

// Rescales the interferer so mixture_sdr(target, scaled) equals sdr_db
// exactly, then sums. Both inputs must carry energy.
MixResult mix_at_sdr(const dsp::Waveform& target, const dsp::Waveform& interferer,
                     metrics::Decibels sdr_db);

// All four stems of a record, regenerated on demand from the synthesis
// parameters (the manifest's inline mode).
struct RenderedSample {
  dsp::Waveform mixture;
  dsp::Waveform target;
  dsp::Waveform interferer_scaled;
  dsp::Waveform reference;
};

RenderedSample render_sample(const SampleRecord& r, double sample_rate = 16000.0);

// Train/dev/test manifests from one config. Train and dev share a speaker
// pool; test draws from a disjoint pool. Every selected pair is emitted twice
// with target/interferer roles swapped (and the mix SDR negated, which keeps
// the swapped mixture the same signal up to scale).
DatasetBundle build_dataset(const DatasetConfig& cfg);

// JSON-lines persistence: one header line (schema, version, partition,
// sample_rate, count) followed by one record per line. Byte-deterministic.
void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

// Optional materialization of all stems as WAV files under dir, named
// <sample_id>.<role>.wav. Returns the number of files written.
size_t write_audio(const Manifest& m, const std::string& dir);

}  // namespace tsecl::datagen

#endif  // TSECL_DATAGEN_HPP
