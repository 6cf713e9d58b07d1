#ifndef EEGTEXT_CONFIG_HPP_
#define EEGTEXT_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "eegtext/classifier.hpp"
#include "eegtext/dsp.hpp"
#include "eegtext/textgen.hpp"
#include "eegtext/trainer.hpp"

namespace eegtext {

struct TextgenConfig {
  BackendSpec backend;
  std::string prompt_template = kDefaultPromptTemplate;
  std::string corpus_path;  // builtin backend's training corpus
  size_t ngram_order = 3;
  double smoothing = 1.0;
};

struct PathsConfig {
  std::string dataset_dir = "data";
  std::string output_dir = "out";
  std::string checkpoint = "out/model.ckpt";
};

// Flat `section.key = value` configuration; # starts a comment, values may
// be double-quoted to keep significant whitespace. Unknown keys are errors.
// Defaults mirror the published hyperparameter tables.
struct AppConfig {
  uint64_t seed = 0;  // master seed; stages derive from it (see below)
  EpochOptions dsp;
  ModelConfig model;
  TrainConfig train;
  TextgenConfig textgen;
  PathsConfig paths;

  bool train_seed_set = false;    // explicit train.seed wins over fanout
  bool textgen_seed_set = false;  // explicit textgen.seed wins over fanout
};

// Applies one `section.key = value` assignment. Unknown key or a value that
// does not parse -> ConfigError naming the key.
void apply_setting(AppConfig& cfg, const std::string& key,
                   const std::string& value);

// Defaults overlaid with the file's assignments (later lines win).
AppConfig parse_config_text(const std::string& text);

// Stage seeds fan out from the master seed with fixed offsets so a single
// value reproduces the whole pipeline:
//   synth = seed+1, split = seed+2, subsample = seed+3,
//   train = seed+4 (unless train.seed was set),
//   textgen = seed+5 (unless textgen.seed was set).
void finalize_seeds(AppConfig& cfg);

uint64_t synth_seed(const AppConfig& cfg);
uint64_t split_seed(const AppConfig& cfg);
uint64_t subsample_seed(const AppConfig& cfg);

// defaults -> optional file -> --set overrides -> seed fanout -> template
// validation. `path` may be empty (no file).
AppConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides);

}  // namespace eegtext

#endif  // EEGTEXT_CONFIG_HPP_
