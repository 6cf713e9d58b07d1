#ifndef EEGTEXT_INGEST_HPP_
#define EEGTEXT_INGEST_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <regex>
#include <string>
#include <vector>

namespace eegtext {

// Canonical electrode order; trial files may list them in any order but the
// parsed trial always stores them in this order.
inline constexpr std::array<const char*, 5> kChannelNames = {"AF3", "AF4",
                                                             "T7", "T8", "Pz"};
inline constexpr size_t kNumChannels = 5;

struct TrialMeta {
  std::string headset;
  std::string synset;
  int image = 0;
  int session = 0;
  int global_session = 0;
};

struct RawTrial {
  std::array<std::vector<double>, kNumChannels> channels;
  TrialMeta meta;
  int label = -1;
};

// ---- Trial CSV ------------------------------------------------------------
// One channel per line: `NAME,v1,v2,...`; LF or CRLF.

RawTrial parse_trial_csv(const std::string& text);
std::string serialize_trial_csv(const RawTrial& trial);

// ---- Filename metadata ----------------------------------------------------
// Pattern is a template whose placeholders {headset} {synset} {image}
// {session} {global} each match a run of [A-Za-z0-9]; everything else is
// literal. Integer fields are parsed base-10 (leading zeros fine).

inline constexpr const char* kDefaultFilenamePattern =
    "{headset}_{synset}_{image}_s{session}_g{global}.csv";

struct FilenamePattern {
  std::string source;
  std::regex re;
  // capture-group index (1-based) per field, order: headset, synset, image,
  // session, global
  std::array<int, 5> group = {0, 0, 0, 0, 0};
};

FilenamePattern compile_filename_pattern(const std::string& pattern);
TrialMeta parse_filename(const std::string& name, const FilenamePattern& pat);
// Writes metadata in the default pattern's layout (round-trips with it).
std::string default_filename(const TrialMeta& meta);

// ---- Labels ---------------------------------------------------------------

struct LabelMap {
  std::vector<std::string> class_names;        // index == label
  std::map<std::string, int> synset_to_label;  // ordered, deterministic

  size_t n_classes() const { return class_names.size(); }
  // -1 when the synset is not mapped.
  int label_of(const std::string& synset) const {
    auto it = synset_to_label.find(synset);
    return it == synset_to_label.end() ? -1 : it->second;
  }
};

// Class-name presets for the common task sizes; generic names otherwise.
std::vector<std::string> builtin_class_names(size_t n);
// Builtin names plus synthetic synset ids (n9xxxxxxx) for generated data.
LabelMap synth_label_map(size_t n);

// TSV with header: synset, label, class_name.
std::string serialize_label_map(const LabelMap& map);
LabelMap parse_label_map(const std::string& text);

// ---- Synthetic data -------------------------------------------------------

struct SynthSpec {
  size_t n_classes = 2;
  size_t trials_per_class = 50;
  uint64_t seed = 0;
  size_t n_samples = 384;
  double sample_rate_hz = 128.0;
  double freq_base_hz = 4.0;   // class k's tone is base + step * k
  double freq_step_hz = 3.0;
  double amplitude = 10.0;
  double noise_sigma = 1.0;
  double dc_min = -5.0;
  double dc_max = 5.0;
};

// Class-keyed sinusoids with per-channel phases, Gaussian noise, and a random
// per-channel DC offset. Pure function of the spec.
std::vector<RawTrial> synth_generate(const SynthSpec& spec);

// ---- Manifest -------------------------------------------------------------

enum class Split { Train, Val };

struct ManifestEntry {
  std::string path;
  std::string synset;
  int label = -1;
  Split split = Split::Train;
  int session = 0;
  int global_session = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  uint64_t seed = 0;
};

// Stratified split: per class, round(fraction * n) validation trials
// (at least 1 of each side), deterministic in seed.
DatasetManifest split_train_val(const DatasetManifest& manifest,
                                double fraction, uint64_t seed);

// Keeps exactly k training trials per class (validation untouched). Seeded
// prefix-take: for a fixed base manifest and seed, the kept set at k1 < k2
// is a subset of the kept set at k2.
DatasetManifest subsample_per_class(const DatasetManifest& manifest, size_t k,
                                    uint64_t seed);

// TSV with header: path, synset, label, split, session, global_session.
std::string serialize_manifest(const DatasetManifest& manifest);
DatasetManifest parse_manifest(const std::string& text);

}  // namespace eegtext

#endif  // EEGTEXT_INGEST_HPP_
