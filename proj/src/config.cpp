#include "eegtext/config.hpp"

#include <cstdlib>
#include <string>

#include "eegtext/errors.hpp"
#include "eegtext/io.hpp"

namespace eegtext {

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw ConfigError("config key " + key + ": " + what);
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    bad(key, "expected a non-negative integer, got \"" + v + "\"");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    bad(key, "integer out of range: \"" + v + "\"");
  }
}

size_t parse_size(const std::string& key, const std::string& v) {
  return static_cast<size_t>(parse_u64(key, v));
}

double parse_f64(const std::string& key, const std::string& v) {
  if (v.empty()) bad(key, "expected a number");
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size())
    bad(key, "expected a number, got \"" + v + "\"");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  bad(key, "expected true or false, got \"" + v + "\"");
}

BackendKind parse_kind(const std::string& key, const std::string& v) {
  if (v == "builtin-ngram") return BackendKind::BuiltinNgram;
  if (v == "remote") return BackendKind::Remote;
  bad(key, "expected builtin-ngram or remote, got \"" + v + "\"");
}

}  // namespace

void apply_setting(AppConfig& c, const std::string& key,
                   const std::string& v) {
  // clang-format off
  if      (key == "seed")                      c.seed = parse_u64(key, v);

  else if (key == "dsp.sample_rate_hz")        c.dsp.filter.sample_rate_hz = parse_f64(key, v);
  else if (key == "dsp.passband_low_hz")       c.dsp.filter.passband_low_hz = parse_f64(key, v);
  else if (key == "dsp.passband_high_hz")      c.dsp.filter.passband_high_hz = parse_f64(key, v);
  else if (key == "dsp.tap_count")             c.dsp.filter.tap_count = parse_size(key, v);
  else if (key == "dsp.stft_window")           c.dsp.stft.window = parse_size(key, v);
  else if (key == "dsp.stft_hop")              c.dsp.stft.hop = parse_size(key, v);
  else if (key == "dsp.target_length")         c.dsp.target_length = parse_size(key, v);
  else if (key == "dsp.zscore")                c.dsp.zscore = parse_bool(key, v);

  else if (key == "encoder.block1_filters")    c.model.encoder.block_filters[0] = parse_size(key, v);
  else if (key == "encoder.block2_filters")    c.model.encoder.block_filters[1] = parse_size(key, v);
  else if (key == "encoder.block3_filters")    c.model.encoder.block_filters[2] = parse_size(key, v);
  else if (key == "encoder.kernel_time")       c.model.encoder.kernel_time = parse_size(key, v);
  else if (key == "encoder.depth_multiplier")  c.model.encoder.depth_multiplier = parse_size(key, v);
  else if (key == "encoder.lstm_units")        c.model.encoder.lstm_units = parse_size(key, v);
  else if (key == "encoder.lstm_layers")       c.model.encoder.lstm_layers = parse_size(key, v);
  else if (key == "encoder.pool_stride")       c.model.encoder.pool_stride = parse_size(key, v);
  else if (key == "encoder.sep_kernel_time")   c.model.encoder.sep_kernel_time = parse_size(key, v);
  else if (key == "encoder.sep_filters")       c.model.encoder.sep_filters = parse_size(key, v);
  else if (key == "encoder.dropout")           c.model.encoder.dropout_p = parse_f64(key, v);
  else if (key == "encoder.bn_epsilon")        c.model.encoder.bn_epsilon = parse_f64(key, v);
  else if (key == "encoder.bn_momentum")       c.model.encoder.bn_momentum = parse_f64(key, v);
  else if (key == "encoder.lstm_only")         c.model.encoder.lstm_only = parse_bool(key, v);

  else if (key == "classifier.dense1_units")   c.model.classifier.hidden[0] = parse_size(key, v);
  else if (key == "classifier.dense2_units")   c.model.classifier.hidden[1] = parse_size(key, v);
  else if (key == "classifier.n_classes")      c.model.classifier.n_classes = parse_size(key, v);
  else if (key == "classifier.dropout")        c.model.classifier.dropout_p = parse_f64(key, v);
  else if (key == "classifier.l2_lambda")      c.model.classifier.l2_lambda = parse_f64(key, v);
  else if (key == "classifier.maxnorm_c")      c.model.classifier.maxnorm_c = parse_f64(key, v);

  else if (key == "train.lr")                  c.train.lr = parse_f64(key, v);
  else if (key == "train.beta1")               c.train.beta1 = parse_f64(key, v);
  else if (key == "train.beta2")               c.train.beta2 = parse_f64(key, v);
  else if (key == "train.adam_eps")            c.train.adam_eps = parse_f64(key, v);
  else if (key == "train.batch_size")          c.train.batch_size = parse_size(key, v);
  else if (key == "train.epochs")              c.train.epochs = parse_size(key, v);
  else if (key == "train.decay_rate")          c.train.decay_rate = parse_f64(key, v);
  else if (key == "train.patience")            c.train.patience = parse_size(key, v);
  else if (key == "train.val_fraction")        c.train.val_fraction = parse_f64(key, v);
  else if (key == "train.seed")              { c.train.seed = parse_u64(key, v); c.train_seed_set = true; }

  else if (key == "textgen.backend")           c.textgen.backend.kind = parse_kind(key, v);
  else if (key == "textgen.url")               c.textgen.backend.url = v;
  else if (key == "textgen.auth_token")        c.textgen.backend.auth_token = v;
  else if (key == "textgen.model_id")          c.textgen.backend.model_id = v;
  else if (key == "textgen.timeout_s")         c.textgen.backend.timeout_s = parse_f64(key, v);
  else if (key == "textgen.max_tokens")        c.textgen.backend.max_tokens = parse_size(key, v);
  else if (key == "textgen.temperature")       c.textgen.backend.temperature = parse_f64(key, v);
  else if (key == "textgen.seed")            { c.textgen.backend.seed = parse_u64(key, v); c.textgen_seed_set = true; }
  else if (key == "textgen.template")          c.textgen.prompt_template = v;
  else if (key == "textgen.corpus")            c.textgen.corpus_path = v;
  else if (key == "textgen.order")             c.textgen.ngram_order = parse_size(key, v);
  else if (key == "textgen.smoothing")         c.textgen.smoothing = parse_f64(key, v);

  else if (key == "paths.dataset_dir")         c.paths.dataset_dir = v;
  else if (key == "paths.output_dir")          c.paths.output_dir = v;
  else if (key == "paths.checkpoint")          c.paths.checkpoint = v;

  else throw ConfigError("unknown config key \"" + key + "\"");
  // clang-format on
}

namespace {

// One `key = value` line. Values may be double-quoted to preserve leading/
// trailing whitespace or literal '#'; otherwise '#' starts a comment.
void apply_line(AppConfig& cfg, const std::string& raw, size_t line_no) {
  std::string line = raw;
  const size_t quote = line.find('"');
  const size_t hash = line.find('#');
  if (hash != std::string::npos && (quote == std::string::npos || hash < quote))
    line = line.substr(0, hash);
  if (trim(line).empty()) return;

  const size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config line " + std::to_string(line_no) +
                      ": expected key = value, got \"" + trim(raw) + "\"");
  const std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));
  if (key.empty())
    throw ConfigError("config line " + std::to_string(line_no) +
                      ": empty key");

  if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
    value = value.substr(1, value.size() - 2);
  apply_setting(cfg, key, value);
}

}  // namespace

AppConfig parse_config_text(const std::string& text) {
  AppConfig cfg;
  size_t start = 0, line_no = 1;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    apply_line(cfg, text.substr(start, end - start), line_no);
    start = end + 1;
    ++line_no;
  }
  return cfg;
}

void finalize_seeds(AppConfig& cfg) {
  if (!cfg.train_seed_set) cfg.train.seed = cfg.seed + 4;
  if (!cfg.textgen_seed_set) cfg.textgen.backend.seed = cfg.seed + 5;
}

uint64_t synth_seed(const AppConfig& cfg) { return cfg.seed + 1; }
uint64_t split_seed(const AppConfig& cfg) { return cfg.seed + 2; }
uint64_t subsample_seed(const AppConfig& cfg) { return cfg.seed + 3; }

AppConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides) {
  AppConfig cfg;
  if (!path.empty()) cfg = parse_config_text(read_file(path));
  for (const std::string& s : overrides) {
    const size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got \"" + s + "\"");
    std::string value = trim(s.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    apply_setting(cfg, trim(s.substr(0, eq)), value);
  }
  finalize_seeds(cfg);
  parse_prompt_template(cfg.textgen.prompt_template);  // fail fast
  return cfg;
}

}  // namespace eegtext
