#include "eegtext/config.hpp"

#include <cstdio>
#include <string>

#include "doctest.h"
#include "eegtext/errors.hpp"
#include "eegtext/io.hpp"

using namespace eegtext;

TEST_CASE("defaults mirror the published hyperparameter tables") {
  AppConfig c;
  CHECK(c.model.encoder.block_filters == std::array<size_t, 3>{8, 16, 32});
  CHECK(c.model.encoder.kernel_time == 64);
  CHECK(c.model.encoder.depth_multiplier == 2);
  CHECK(c.model.encoder.depthwise_filters() == 112);
  CHECK(c.model.encoder.lstm_units == 64);
  CHECK(c.model.encoder.lstm_layers == 2);
  CHECK(c.model.encoder.dropout_p == 0.5);
  CHECK(c.model.encoder.bn_momentum == 0.99);
  CHECK(c.model.classifier.hidden == std::vector<size_t>{128, 64});
  CHECK(c.model.classifier.dropout_p == 0.3);
  CHECK(c.model.classifier.l2_lambda == 0.001);
  CHECK(c.model.classifier.maxnorm_c == 3.0);
  CHECK(c.model.classifier.n_classes == 2);
  CHECK(c.train.lr == 0.001);
  CHECK(c.train.beta1 == 0.9);
  CHECK(c.train.beta2 == 0.999);
  CHECK(c.train.adam_eps == 1e-7);
  CHECK(c.train.batch_size == 32);
  CHECK(c.train.epochs == 100);
  CHECK(c.train.decay_rate == 0.95);
  CHECK(c.train.patience == 15);
  CHECK(c.train.val_fraction == 0.2);
  CHECK(c.dsp.filter.sample_rate_hz == 128.0);
  CHECK(c.dsp.filter.passband_low_hz == 0.5);
  CHECK(c.dsp.filter.passband_high_hz == 50.0);
  CHECK(c.dsp.target_length == 384);
  CHECK(c.textgen.backend.timeout_s == 30.0);
  CHECK(c.textgen.prompt_template == kDefaultPromptTemplate);
}

TEST_CASE("config text: assignments, comments, quoting, precedence") {
  AppConfig c = parse_config_text(
      "# a comment line\n"
      "train.lr = 0.01   # trailing comment\n"
      "\n"
      "encoder.lstm_units = 16\n"
      "classifier.n_classes=5\n"
      "train.lr = 0.02\n"  // later line wins
      "textgen.template = \"hi [CLASS] \"\n"
      "paths.output_dir = \"dir#with#hash\"\n"
      "dsp.zscore = true\n");
  CHECK(c.train.lr == 0.02);
  CHECK(c.model.encoder.lstm_units == 16);
  CHECK(c.model.classifier.n_classes == 5);
  CHECK(c.textgen.prompt_template == "hi [CLASS] ");  // kept trailing space
  CHECK(c.paths.output_dir == "dir#with#hash");
  CHECK(c.dsp.zscore == true);
}

TEST_CASE("config text: malformed input is rejected with context") {
  CHECK_THROWS_AS(parse_config_text("nonsense line\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("no.such.key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("train.lr = abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("train.epochs = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("dsp.zscore = yes\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("= 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("textgen.backend = llama\n"), ConfigError);

  try {
    parse_config_text("train.lr = 0.1\nsurprise.key = 2\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("surprise.key") != std::string::npos);
  }
}

TEST_CASE("seed fanout derives stage seeds unless overridden") {
  AppConfig c = parse_config_text("seed = 100\n");
  finalize_seeds(c);
  CHECK(synth_seed(c) == 101);
  CHECK(split_seed(c) == 102);
  CHECK(subsample_seed(c) == 103);
  CHECK(c.train.seed == 104);
  CHECK(c.textgen.backend.seed == 105);

  AppConfig d = parse_config_text("seed = 100\ntrain.seed = 7\n");
  finalize_seeds(d);
  CHECK(d.train.seed == 7);
  CHECK(d.textgen.backend.seed == 105);
}

TEST_CASE("load_config layers file, overrides, and validation") {
  const std::string path = "tmp_config_test.cfg";
  write_file(path, "seed = 9\ntrain.batch_size = 8\n");

  AppConfig c = load_config(path, {"train.batch_size=4", "seed=1"});
  CHECK(c.seed == 1);                 // --set wins over the file
  CHECK(c.train.batch_size == 4);
  CHECK(c.train.seed == 5);           // fanout after overrides
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_config("does_not_exist.cfg", {}), IoError);
  CHECK_THROWS_AS(load_config("", {"train.lr"}), ConfigError);
  CHECK_THROWS_AS(load_config("", {"textgen.template=no placeholder"}),
                  ConfigError);
}
