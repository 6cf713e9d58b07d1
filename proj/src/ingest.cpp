#include "eegtext/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>

#include "eegtext/errors.hpp"
#include "eegtext/io.hpp"
#include "eegtext/rng.hpp"

namespace eegtext {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  size_t start = 0;
  for (;;) {
    size_t end = line.find(sep, start);
    if (end == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

int channel_index(const std::string& name) {
  for (size_t i = 0; i < kNumChannels; ++i) {
    if (name == kChannelNames[i]) return static_cast<int>(i);
  }
  return -1;
}

double parse_strict_double(const std::string& s, size_t line, size_t col) {
  if (s.empty()) {
    throw ParseError("empty value at line " + std::to_string(line) +
                     ", column " + std::to_string(col));
  }
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + s.size() || !std::isfinite(v)) {
    throw ParseError("non-numeric value '" + s + "' at line " +
                     std::to_string(line) + ", column " + std::to_string(col));
  }
  return v;
}

int parse_strict_int(const std::string& s, const std::string& what) {
  if (s.empty()) throw ParseError(what + " is empty");
  const char* begin = s.c_str();
  char* end = nullptr;
  long v = std::strtol(begin, &end, 10);
  if (end != begin + s.size()) {
    throw ParseError(what + " '" + s + "' is not an integer");
  }
  return static_cast<int>(v);
}

}  // namespace

RawTrial parse_trial_csv(const std::string& text) {
  if (text.empty()) throw ParseError("empty trial file");
  RawTrial trial;
  std::array<bool, kNumChannels> seen = {};
  auto lines = split_lines(text);
  for (size_t li = 0; li < lines.size(); ++li) {
    const std::string& line = lines[li];
    if (line.empty()) continue;
    auto fields = split_fields(line, ',');
    int ch = channel_index(fields[0]);
    if (ch < 0) {
      throw ParseError("unknown channel '" + fields[0] + "' at line " +
                       std::to_string(li + 1));
    }
    if (seen[static_cast<size_t>(ch)]) {
      throw ParseError("duplicate channel '" + fields[0] + "' at line " +
                       std::to_string(li + 1));
    }
    seen[static_cast<size_t>(ch)] = true;
    if (fields.size() < 2) {
      throw ParseError("channel '" + fields[0] + "' has no samples at line " +
                       std::to_string(li + 1));
    }
    auto& wave = trial.channels[static_cast<size_t>(ch)];
    wave.reserve(fields.size() - 1);
    for (size_t fi = 1; fi < fields.size(); ++fi) {
      wave.push_back(parse_strict_double(fields[fi], li + 1, fi + 1));
    }
  }
  for (size_t i = 0; i < kNumChannels; ++i) {
    if (!seen[i]) {
      throw ParseError(std::string("missing channel '") + kChannelNames[i] +
                       "' (need all 5)");
    }
  }
  return trial;
}

std::string serialize_trial_csv(const RawTrial& trial) {
  std::string out;
  for (size_t c = 0; c < kNumChannels; ++c) {
    out += kChannelNames[c];
    for (double v : trial.channels[c]) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

FilenamePattern compile_filename_pattern(const std::string& pattern) {
  static const std::array<const char*, 5> kFields = {"headset", "synset",
                                                     "image", "session",
                                                     "global"};
  FilenamePattern pat;
  pat.source = pattern;
  std::string re = "^";
  int next_group = 1;
  size_t i = 0;
  while (i < pattern.size()) {
    char c = pattern[i];
    if (c == '{') {
      size_t close = pattern.find('}', i);
      if (close == std::string::npos) {
        throw ConfigError("unterminated '{' in filename pattern: " + pattern);
      }
      std::string field = pattern.substr(i + 1, close - i - 1);
      bool known = false;
      for (size_t f = 0; f < kFields.size(); ++f) {
        if (field == kFields[f]) {
          if (pat.group[f] != 0) {
            throw ConfigError("duplicate placeholder {" + field +
                              "} in filename pattern");
          }
          pat.group[f] = next_group++;
          known = true;
          break;
        }
      }
      if (!known) {
        throw ConfigError("unknown placeholder {" + field +
                          "} in filename pattern");
      }
      re += "([A-Za-z0-9]+)";
      i = close + 1;
    } else {
      if (std::string("\\^$.|?*+()[]{}").find(c) != std::string::npos) {
        re += '\\';
      }
      re += c;
      ++i;
    }
  }
  re += "$";
  for (size_t f = 0; f < kFields.size(); ++f) {
    if (pat.group[f] == 0) {
      throw ConfigError(std::string("filename pattern is missing {") +
                        kFields[f] + "}: " + pattern);
    }
  }
  pat.re = std::regex(re);
  return pat;
}

TrialMeta parse_filename(const std::string& name, const FilenamePattern& pat) {
  // Match against the basename so full paths work too.
  size_t slash = name.find_last_of('/');
  std::string base = slash == std::string::npos ? name : name.substr(slash + 1);
  std::smatch m;
  if (!std::regex_match(base, m, pat.re)) {
    throw ParseError("filename '" + base + "' does not match pattern '" +
                     pat.source + "'");
  }
  TrialMeta meta;
  meta.headset = m[static_cast<size_t>(pat.group[0])].str();
  meta.synset = m[static_cast<size_t>(pat.group[1])].str();
  meta.image = parse_strict_int(m[static_cast<size_t>(pat.group[2])].str(),
                                "image index");
  meta.session = parse_strict_int(m[static_cast<size_t>(pat.group[3])].str(),
                                  "session");
  meta.global_session = parse_strict_int(
      m[static_cast<size_t>(pat.group[4])].str(), "global session");
  return meta;
}

std::string default_filename(const TrialMeta& meta) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "_%d_s%02d_g%04d.csv", meta.image,
                meta.session, meta.global_session);
  return meta.headset + "_" + meta.synset + buf;
}

std::vector<std::string> builtin_class_names(size_t n) {
  static const std::vector<std::string> k2 = {"Animals", "Vehicles"};
  static const std::vector<std::string> k5 = {"Dog", "Cat", "Bird", "Car",
                                              "Aircraft"};
  static const std::vector<std::string> k10 = {"Dog", "Cat", "Bird", "Fish",
                                               "Goose", "Car", "Truck",
                                               "Airplane", "Ship", "Bicycle"};
  if (n == 2) return k2;
  if (n == 5) return k5;
  if (n <= 10) return {k10.begin(), k10.begin() + static_cast<long>(n)};
  std::vector<std::string> names;
  for (size_t i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "Class%02zu", i);
    names.push_back(buf);
  }
  return names;
}

LabelMap synth_label_map(size_t n) {
  LabelMap map;
  map.class_names = builtin_class_names(n);
  for (size_t k = 0; k < n; ++k) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "n9%07zu", k);
    map.synset_to_label[buf] = static_cast<int>(k);
  }
  return map;
}

std::string serialize_label_map(const LabelMap& map) {
  std::string out = "synset\tlabel\tclass_name\n";
  // Rows ordered by label so the file is stable and human-scannable.
  std::vector<std::pair<std::string, int>> rows(map.synset_to_label.begin(),
                                                map.synset_to_label.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  for (const auto& [synset, label] : rows) {
    out += synset + "\t" + std::to_string(label) + "\t" +
           map.class_names[static_cast<size_t>(label)] + "\n";
  }
  return out;
}

LabelMap parse_label_map(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty() || split_fields(lines[0], '\t') !=
                           std::vector<std::string>{"synset", "label",
                                                    "class_name"}) {
    throw ParseError("label map must start with header synset/label/class_name");
  }
  LabelMap map;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    auto f = split_fields(lines[li], '\t');
    if (f.size() != 3) {
      throw ParseError("label map line " + std::to_string(li + 1) +
                       " has " + std::to_string(f.size()) + " fields, want 3");
    }
    int label = parse_strict_int(f[1], "label");
    if (label < 0) throw ParseError("negative label at line " + std::to_string(li + 1));
    auto [it, inserted] = map.synset_to_label.emplace(f[0], label);
    (void)it;
    if (!inserted) {
      throw ParseError("synset '" + f[0] + "' mapped twice");
    }
    if (map.class_names.size() <= static_cast<size_t>(label)) {
      map.class_names.resize(static_cast<size_t>(label) + 1);
    }
    if (!map.class_names[static_cast<size_t>(label)].empty() &&
        map.class_names[static_cast<size_t>(label)] != f[2]) {
      throw ParseError("label " + f[1] + " has two names: '" +
                       map.class_names[static_cast<size_t>(label)] + "' and '" +
                       f[2] + "'");
    }
    map.class_names[static_cast<size_t>(label)] = f[2];
  }
  for (size_t i = 0; i < map.class_names.size(); ++i) {
    if (map.class_names[i].empty()) {
      throw ParseError("label indices not dense: " + std::to_string(i) +
                       " unused");
    }
  }
  return map;
}

std::vector<RawTrial> synth_generate(const SynthSpec& spec) {
  if (spec.n_classes < 2) throw ConfigError("synth needs at least 2 classes");
  if (spec.trials_per_class < 1) throw ConfigError("synth needs at least 1 trial per class");
  if (spec.n_samples == 0) throw ConfigError("synth needs n_samples > 0");
  const double top_freq =
      spec.freq_base_hz + spec.freq_step_hz * double(spec.n_classes - 1);
  if (top_freq > 50.0) {
    throw ConfigError("class tone " + format_double(top_freq) +
                      " Hz exceeds the 50 Hz passband; lower freq_step_hz or "
                      "n_classes");
  }
  LabelMap labels = synth_label_map(spec.n_classes);
  std::vector<std::string> synsets(spec.n_classes);
  for (const auto& [synset, label] : labels.synset_to_label) {
    synsets[static_cast<size_t>(label)] = synset;
  }
  Rng rng(spec.seed);
  std::vector<RawTrial> trials;
  trials.reserve(spec.n_classes * spec.trials_per_class);
  const double two_pi = 2.0 * std::numbers::pi;
  for (size_t k = 0; k < spec.n_classes; ++k) {
    const double freq = spec.freq_base_hz + spec.freq_step_hz * double(k);
    for (size_t i = 0; i < spec.trials_per_class; ++i) {
      RawTrial t;
      t.label = static_cast<int>(k);
      t.meta.headset = "Insight";
      t.meta.synset = synsets[k];
      t.meta.image = 1000 + static_cast<int>(i);
      t.meta.session = static_cast<int>(i) + 1;
      t.meta.global_session =
          static_cast<int>(k * spec.trials_per_class + i) + 1;
      for (size_t c = 0; c < kNumChannels; ++c) {
        const double phase = rng.uniform(0.0, two_pi);
        const double dc = rng.uniform(spec.dc_min, spec.dc_max);
        auto& wave = t.channels[c];
        wave.resize(spec.n_samples);
        for (size_t s = 0; s < spec.n_samples; ++s) {
          double v = spec.amplitude *
                     std::sin(two_pi * freq * double(s) / spec.sample_rate_hz +
                              phase) +
                     dc;
          if (spec.noise_sigma > 0.0) v += rng.normal(0.0, spec.noise_sigma);
          wave[s] = v;
        }
      }
      trials.push_back(std::move(t));
    }
  }
  return trials;
}

DatasetManifest split_train_val(const DatasetManifest& manifest,
                                double fraction, uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw ConfigError("validation fraction must be in (0, 1), got " +
                      format_double(fraction));
  }
  DatasetManifest out = manifest;
  out.seed = seed;
  // Group entry indices per label.
  std::map<int, std::vector<size_t>> per_class;
  for (size_t i = 0; i < out.entries.size(); ++i) {
    if (out.entries[i].label < 0) {
      throw ConfigError("unlabeled trial " + out.entries[i].path);
    }
    per_class[out.entries[i].label].push_back(i);
  }
  for (auto& [label, idx] : per_class) {
    if (idx.size() < 2) {
      throw ConfigError("class " + std::to_string(label) + " has only " +
                        std::to_string(idx.size()) + " trial(s); need 2+");
    }
    Rng rng(mix_seed(seed, static_cast<uint64_t>(label)));
    rng.shuffle(idx);
    size_t n_val = static_cast<size_t>(
        std::llround(fraction * static_cast<double>(idx.size())));
    n_val = std::max<size_t>(1, std::min(n_val, idx.size() - 1));
    for (size_t j = 0; j < idx.size(); ++j) {
      out.entries[idx[j]].split = j < n_val ? Split::Val : Split::Train;
    }
  }
  return out;
}

DatasetManifest subsample_per_class(const DatasetManifest& manifest, size_t k,
                                    uint64_t seed) {
  std::map<int, std::vector<size_t>> train_per_class;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.split == Split::Train) train_per_class[e.label].push_back(i);
  }
  std::vector<bool> keep(manifest.entries.size(), true);
  for (auto& [label, idx] : train_per_class) {
    if (idx.size() < k) {
      throw ConfigError("class " + std::to_string(label) + " has " +
                        std::to_string(idx.size()) +
                        " training trials, fewer than requested " +
                        std::to_string(k));
    }
    Rng rng(mix_seed(seed, static_cast<uint64_t>(label)));
    rng.shuffle(idx);
    for (size_t j = k; j < idx.size(); ++j) keep[idx[j]] = false;
  }
  DatasetManifest out;
  out.seed = manifest.seed;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    if (keep[i]) out.entries.push_back(manifest.entries[i]);
  }
  return out;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out = "path\tsynset\tlabel\tsplit\tsession\tglobal_session\n";
  for (const auto& e : manifest.entries) {
    out += e.path + "\t" + e.synset + "\t" + std::to_string(e.label) + "\t" +
           (e.split == Split::Train ? "train" : "val") + "\t" +
           std::to_string(e.session) + "\t" +
           std::to_string(e.global_session) + "\n";
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text) {
  auto lines = split_lines(text);
  if (lines.empty() ||
      split_fields(lines[0], '\t') !=
          std::vector<std::string>{"path", "synset", "label", "split",
                                   "session", "global_session"}) {
    throw ParseError("manifest must start with the standard header line");
  }
  DatasetManifest manifest;
  for (size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    auto f = split_fields(lines[li], '\t');
    if (f.size() != 6) {
      throw ParseError("manifest line " + std::to_string(li + 1) + " has " +
                       std::to_string(f.size()) + " fields, want 6");
    }
    ManifestEntry e;
    e.path = f[0];
    e.synset = f[1];
    e.label = parse_strict_int(f[2], "label");
    if (f[3] == "train") {
      e.split = Split::Train;
    } else if (f[3] == "val") {
      e.split = Split::Val;
    } else {
      throw ParseError("manifest line " + std::to_string(li + 1) +
                       ": split must be train or val, got '" + f[3] + "'");
    }
    e.session = parse_strict_int(f[4], "session");
    e.global_session = parse_strict_int(f[5], "global_session");
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

}  // namespace eegtext
