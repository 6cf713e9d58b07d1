#include "eegtext/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "eegtext/errors.hpp"
#include "eegtext/io.hpp"
#include "eegtext/rng.hpp"
#include "json.hpp"

using namespace eegtext;

namespace {

// Strongly separable two-class toy set: class-specific tone plus a class-
// specific DC shift, light noise. No DSP involved; epochs built directly.
EpochTensor toy_epochs(size_t per_class, size_t t_len, uint64_t seed,
                       size_t n_classes = 2) {
  Rng rng(seed);
  std::vector<double> data;
  std::vector<int> labels;
  const size_t n = per_class * n_classes;
  data.reserve(n * 5 * t_len);
  for (size_t c = 0; c < n_classes; ++c) {
    for (size_t i = 0; i < per_class; ++i) {
      const double freq = 6.0 + 10.0 * static_cast<double>(c);
      const double dc = 2.0 * static_cast<double>(c) - 1.0;
      for (size_t ch = 0; ch < 5; ++ch) {
        const double phase = rng.uniform(0.0, 6.283185307179586);
        for (size_t t = 0; t < t_len; ++t) {
          const double x =
              std::sin(phase + freq * 6.283185307179586 *
                                   static_cast<double>(t) / 128.0);
          data.push_back(2.0 * x + dc + 0.1 * rng.normal());
        }
      }
      labels.push_back(static_cast<int>(c));
    }
  }
  EpochTensor e;
  e.data = Tensor({n, 5, t_len, 1}, std::move(data));
  e.labels = std::move(labels);
  return e;
}

ModelConfig toy_model(size_t n_classes = 2) {
  ModelConfig cfg;
  cfg.encoder.block_filters = {2, 2, 3};
  cfg.encoder.kernel_time = 7;
  cfg.encoder.lstm_units = 6;
  cfg.encoder.lstm_layers = 2;
  cfg.encoder.pool_stride = 4;
  cfg.encoder.sep_kernel_time = 4;
  cfg.encoder.sep_filters = 8;
  cfg.encoder.dropout_p = 0.25;
  cfg.classifier.hidden = {8};
  cfg.classifier.n_classes = n_classes;
  return cfg;
}

std::string temp_path(const std::string& name) {
  return "tmp_trainer_" + name;
}

}  // namespace

TEST_CASE("learning rate decays exponentially per epoch") {
  TrainConfig cfg;
  CHECK(lr_at(0, cfg) == 0.001);
  CHECK(lr_at(1, cfg) == doctest::Approx(0.00095).epsilon(1e-12));
  CHECK(lr_at(10, cfg) ==
        doctest::Approx(0.001 * std::pow(0.95, 10)).epsilon(1e-12));
}

TEST_CASE("adam: zero gradients leave parameters untouched") {
  ParamStore p;
  p.add("cls.out.w", Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}, DType::F64, true));
  AdamState st = init_adam_state(p);
  TrainConfig cfg;

  // Build up nonzero moments first, then feed zeros.
  adam_step(p, {{1.0, 1.0, 1.0, 1.0}}, st, 0.0, cfg);  // lr 0: moments only
  const double m_before = st.m[0][0];
  std::vector<double> before = p.at("cls.out.w").values();
  adam_step(p, {{0.0, 0.0, 0.0, 0.0}}, st, 0.0, cfg);
  CHECK(p.at("cls.out.w").values() == before);
  CHECK(std::fabs(st.m[0][0]) < std::fabs(m_before));
}

TEST_CASE("adam: first step with unit gradient moves by lr over one plus eps") {
  ParamStore p;
  p.add("cls.out.w", Tensor({1, 1}, {0.5}, DType::F64, true));
  AdamState st = init_adam_state(p);
  TrainConfig cfg;
  adam_step(p, {{1.0}}, st, 0.001, cfg);
  // Bias corrections cancel at t=1: m_hat = v_hat = 1.
  const double want = 0.5 - 0.001 / (1.0 + cfg.adam_eps);
  CHECK(p.at("cls.out.w").values()[0] == doctest::Approx(want).epsilon(1e-15));
  CHECK(st.step == 2 - 1);
}

TEST_CASE("adam drives a quadratic to zero") {
  ParamStore p;
  p.add("cls.out.w", Tensor({1, 1}, {1.0}, DType::F64, true));
  AdamState st = init_adam_state(p);
  TrainConfig cfg;
  for (int t = 0; t < 500; ++t) {
    const double theta = p.at("cls.out.w").values()[0];
    adam_step(p, {{2.0 * theta}}, st, 0.05, cfg);
  }
  CHECK(std::fabs(p.at("cls.out.w").values()[0]) < 1e-3);
}

TEST_CASE("fit rejects bad inputs") {
  EpochTensor train = toy_epochs(4, 32, 1);
  EpochTensor val = toy_epochs(2, 32, 2);
  ModelConfig model = toy_model();
  TrainConfig cfg;
  cfg.epochs = 1;

  SUBCASE("oversized batch") {
    cfg.batch_size = 64;
    CHECK_THROWS_AS(fit(train, val, model, cfg), ConfigError);
  }
  SUBCASE("empty validation split") {
    EpochTensor empty;
    CHECK_THROWS_AS(fit(train, empty, model, cfg), ConfigError);
  }
  SUBCASE("label count mismatch") {
    train.labels.pop_back();
    cfg.batch_size = 4;
    CHECK_THROWS_AS(fit(train, val, model, cfg), ConfigError);
  }
  SUBCASE("diverging run reports epoch and batch") {
    cfg.batch_size = 4;
    cfg.epochs = 30;
    cfg.lr = 1e308;  // first step flings weights to ~1e308; next forward overflows
    try {
      fit(train, val, model, cfg);
      FAIL("expected a NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
  }
}

TEST_CASE("fit learns the separable toy problem") {
  EpochTensor train = toy_epochs(10, 64, 10);
  EpochTensor val = toy_epochs(4, 64, 11);
  ModelConfig model = toy_model();
  TrainConfig cfg;
  cfg.batch_size = 10;
  cfg.epochs = 40;
  cfg.seed = 3;

  FitResult r = fit(train, val, model, cfg);
  REQUIRE(!r.log.rows.empty());
  const MetricsRow& last = r.log.rows.back();
  CHECK(last.train_acc >= 0.9);
  CHECK(last.val_acc >= 0.9);

  // Retained checkpoint is the best validation loss seen.
  for (const MetricsRow& row : r.log.rows)
    CHECK(r.best.best_val_loss <= row.val_loss + 1e-15);

  // Dense kernels obey the max-norm constraint after training.
  for (const ParamStore::Item& it : r.best.params.items) {
    if (it.name.rfind("cls.", 0) != 0 || !it.name.ends_with(".w")) continue;
    const Shape& s = it.value.shape();
    for (size_t j = 0; j < s[1]; ++j) {
      double ss = 0.0;
      for (size_t i = 0; i < s[0]; ++i) {
        double v = it.value.values()[i * s[1] + j];
        ss += v * v;
      }
      CHECK(std::sqrt(ss) <= model.classifier.maxnorm_c + 1e-9);
    }
  }

  // Evaluation bookkeeping is consistent with itself.
  EvalResult ev = evaluate(r.best.params, model, val, cfg.batch_size);
  size_t total = 0, diag = 0;
  for (size_t c = 0; c < ev.n_classes; ++c)
    for (size_t j = 0; j < ev.n_classes; ++j) {
      total += ev.confusion[c * ev.n_classes + j];
      if (c == j) diag += ev.confusion[c * ev.n_classes + j];
    }
  CHECK(total == val.labels.size());
  CHECK(ev.accuracy ==
        doctest::Approx(static_cast<double>(diag) /
                        static_cast<double>(total)).epsilon(1e-12));
  CHECK(ev.accuracy >= 0.9);
}

TEST_CASE("fit is bitwise deterministic in its seed") {
  EpochTensor train = toy_epochs(6, 48, 20);
  EpochTensor val = toy_epochs(3, 48, 21);
  ModelConfig model = toy_model();
  TrainConfig cfg;
  cfg.batch_size = 5;
  cfg.epochs = 4;
  cfg.seed = 7;

  FitResult a = fit(train, val, model, cfg);
  FitResult b = fit(train, val, model, cfg);
  CHECK(a.log.to_csv() == b.log.to_csv());

  const std::string pa = temp_path("det_a.ckpt");
  const std::string pb = temp_path("det_b.ckpt");
  save_checkpoint(a.best, pa);
  save_checkpoint(b.best, pb);
  CHECK(read_file(pa) == read_file(pb));
  std::remove(pa.c_str());
  std::remove(pb.c_str());

  // A different seed changes the trajectory.
  cfg.seed = 8;
  FitResult c = fit(train, val, model, cfg);
  CHECK(a.log.to_csv() != c.log.to_csv());
}

TEST_CASE("metrics log is a csv with a fixed header") {
  MetricsLog log;
  log.rows.push_back({1, 0.5, 0.25, 0.75, 0.5, 0.001});
  std::string csv = log.to_csv();
  CHECK(csv.rfind("epoch,train_loss,train_acc,val_loss,val_acc,lr\n", 0) == 0);
  CHECK(csv.find("\n1,0.5,0.25,0.75,0.5,0.001") != std::string::npos);
}

TEST_CASE("early stopping fires patience epochs after the best epoch") {
  EpochTensor train = toy_epochs(4, 32, 30);
  EpochTensor val = toy_epochs(2, 32, 31);
  ModelConfig model = toy_model();
  // lstm_only avoids batch norm, whose running statistics would keep
  // drifting (and moving the validation loss) even with frozen weights.
  model.encoder.lstm_only = true;
  model.encoder.dropout_p = 0.0;
  model.classifier.dropout_p = 0.0;
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 100;
  cfg.patience = 15;
  // Updates of ~1e-300 are absorbed by the parameters bitwise: the model
  // never moves, so validation loss plateaus from the very first epoch.
  cfg.lr = 1e-300;

  FitResult r = fit(train, val, model, cfg);
  CHECK(r.best.epoch == 1);
  CHECK(r.stopped_epoch == 16);  // 1 + patience
  CHECK(r.log.rows.size() == 16);

  // The epoch cap also ends the loop.
  cfg.epochs = 5;
  FitResult capped = fit(train, val, model, cfg);
  CHECK(capped.stopped_epoch == 5);
}

TEST_CASE("single-batch training loss equals the objective recomputed") {
  EpochTensor train = toy_epochs(4, 32, 40);
  EpochTensor val = toy_epochs(2, 32, 41);
  ModelConfig model = toy_model();
  model.encoder.dropout_p = 0.0;
  model.classifier.dropout_p = 0.0;
  TrainConfig cfg;
  cfg.batch_size = 8;  // the whole training set in one batch
  cfg.epochs = 1;
  cfg.seed = 9;

  FitResult r = fit(train, val, model, cfg);

  // Replay: same init stream, same whole-set batch (order only permutes
  // rows, which changes neither batch moments nor the mean loss).
  ParamStore params;
  Rng init_rng(mix_seed(cfg.seed, 0x1A17));
  init_model_params(params, model, init_rng);
  Rng fwd(0);
  Tensor probs = model_forward(train.data, params, model, Mode::Train, fwd);
  double want = cross_entropy(probs, train.labels).item() +
                l2_penalty(params, model.classifier.l2_lambda).item();
  CHECK(r.log.rows[0].train_loss == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("a trailing single-sample batch is merged, not dropped") {
  EpochTensor train = toy_epochs(5, 32, 50);  // 10 trials
  EpochTensor val = toy_epochs(2, 32, 51);
  ModelConfig model = toy_model();
  TrainConfig cfg;
  cfg.batch_size = 9;  // would leave a 1-sample remainder
  cfg.epochs = 2;
  FitResult r = fit(train, val, model, cfg);  // batch norm would reject size 1
  CHECK(r.log.rows.size() == 2);
}

TEST_CASE("random labels score near chance on a balanced set") {
  const size_t per_class = 50, n_c = 4;
  EpochTensor data = toy_epochs(per_class, 32, 60, n_c);
  Rng label_rng(61);
  for (int& y : data.labels)
    y = static_cast<int>(label_rng.below(n_c));  // detach labels from signal

  ModelConfig model = toy_model(n_c);
  ParamStore params;
  Rng init_rng(62);
  init_model_params(params, model, init_rng);
  EvalResult ev = evaluate(params, model, data, 32);

  // Labels are independent of the predictions, so hits ~ Binomial(n, 1/4).
  const double n = static_cast<double>(per_class * n_c);
  const double mean = n / static_cast<double>(n_c);
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  CHECK(ev.accuracy * n >= mean - 3.0 * sigma);
  CHECK(ev.accuracy * n <= mean + 3.0 * sigma);
}

TEST_CASE("checkpoint round-trip is bitwise faithful") {
  EpochTensor train = toy_epochs(4, 32, 70);
  EpochTensor val = toy_epochs(2, 32, 71);
  ModelConfig model = toy_model();
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.seed = 13;
  FitResult r = fit(train, val, model, cfg);

  const std::string path = temp_path("roundtrip.ckpt");
  save_checkpoint(r.best, path);
  Checkpoint back = load_checkpoint(path);
  std::remove(path.c_str());

  CHECK(back.epoch == r.best.epoch);
  CHECK(back.best_val_loss == r.best.best_val_loss);
  CHECK(back.seed == r.best.seed);
  CHECK(back.train.lr == cfg.lr);
  CHECK(back.model.classifier.n_classes == 2);

  REQUIRE(back.params.items.size() == r.best.params.items.size());
  for (size_t i = 0; i < back.params.items.size(); ++i) {
    CHECK(back.params.items[i].name == r.best.params.items[i].name);
    CHECK(back.params.items[i].trainable == r.best.params.items[i].trainable);
    CHECK(back.params.items[i].value.values() ==
          r.best.params.items[i].value.values());
  }
  CHECK(back.opt.step == r.best.opt.step);
  REQUIRE(back.opt.names == r.best.opt.names);
  CHECK(back.opt.m == r.best.opt.m);
  CHECK(back.opt.v == r.best.opt.v);

  // Same parameters, same inference, bit for bit.
  Rng unused(0);
  Tensor before =
      model_forward(val.data, r.best.params, model, Mode::Infer, unused);
  Tensor after = model_forward(val.data, back.params, model, Mode::Infer,
                               unused);
  CHECK(before.values() == after.values());
}

TEST_CASE("checkpoint corruption and version mismatches are detected") {
  EpochTensor train = toy_epochs(3, 32, 80);
  EpochTensor val = toy_epochs(2, 32, 81);
  TrainConfig cfg;
  cfg.batch_size = 3;
  cfg.epochs = 1;
  FitResult r = fit(train, val, toy_model(), cfg);

  const std::string path = temp_path("corrupt.ckpt");
  save_checkpoint(r.best, path);
  std::string bytes = read_file(path);

  SUBCASE("payload byte flip") {
    std::string bad = bytes;
    bad[bad.size() - 100] = static_cast<char>(bad[bad.size() - 100] ^ 0x40);
    write_file(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("manifest byte flip") {
    std::string bad = bytes;
    bad[24] = static_cast<char>(bad[24] ^ 0x01);
    write_file(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("truncation") {
    write_file(path, bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("wrong magic") {
    std::string bad = bytes;
    bad[0] = 'X';
    write_file(path, bad);
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  SUBCASE("unsupported version") {
    nlohmann::json manifest = {{"version", 99}};
    write_container(path, "EEGCKPT1", manifest.dump(), "");
    CHECK_THROWS_AS(load_checkpoint(path), IoError);
  }
  std::remove(path.c_str());
}

TEST_CASE("container primitives round-trip and verify") {
  const std::string path = temp_path("container.bin");
  write_container(path, "EEGEPOC1", "{\"a\":1}", std::string("\x01\x02", 2));
  Container c = read_container(path, "EEGEPOC1");
  CHECK(c.manifest == "{\"a\":1}");
  CHECK(c.payload == std::string("\x01\x02", 2));
  CHECK_THROWS_AS(read_container(path, "EEGCKPT1"), IoError);
  std::remove(path.c_str());

  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);

  std::vector<double> vals = {0.0, -1.5, 3.141592653589793, 1e300};
  std::string packed = pack_doubles_le(vals);
  CHECK(packed.size() == 32);
  CHECK(unpack_doubles_le(packed, 0, 4) == vals);
  CHECK_THROWS_AS(unpack_doubles_le(packed, 8, 4), IoError);
}

TEST_CASE("data-efficiency sweep: structure and full-data identity") {
  SynthSpec spec;
  spec.n_classes = 2;
  spec.trials_per_class = 12;
  spec.seed = 90;
  spec.n_samples = 96;
  std::vector<RawTrial> trials = synth_generate(spec);

  DatasetManifest manifest;
  manifest.seed = 91;
  for (const RawTrial& t : trials) {
    ManifestEntry e;
    e.path = default_filename(t.meta);
    e.synset = t.meta.synset;
    e.label = t.label;
    e.session = t.meta.session;
    e.global_session = t.meta.global_session;
    manifest.entries.push_back(e);
  }
  manifest = split_train_val(manifest, 0.25, 92);  // 9 train + 3 val per class

  EpochOptions opts;
  opts.target_length = 96;
  ModelConfig model = toy_model();
  TrainConfig cfg;
  cfg.batch_size = 6;
  cfg.epochs = 3;
  cfg.seed = 93;

  auto rows = sweep_data_efficiency(trials, manifest, 94, opts, model, cfg,
                                    {3, 6, 9});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].k == 3);
  CHECK(rows[1].k == 6);
  CHECK(rows[2].k == 9);
  for (const SweepRow& row : rows) {
    CHECK(row.accuracy >= 0.0);
    CHECK(row.accuracy <= 1.0);
    CHECK(std::isfinite(row.val_loss));
  }

  // Keeping every training trial reproduces a plain fit on the same split.
  std::vector<RawTrial> train_trials, val_trials;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    RawTrial t = trials[i];
    t.label = manifest.entries[i].label;
    if (manifest.entries[i].split == Split::Train)
      train_trials.push_back(t);
    else
      val_trials.push_back(t);
  }
  FitResult direct = fit(assemble_epochs(train_trials, opts),
                         assemble_epochs(val_trials, opts), model, cfg);
  EvalResult direct_ev =
      evaluate(direct.best.params, model, assemble_epochs(val_trials, opts),
               cfg.batch_size);
  CHECK(rows[2].accuracy == direct_ev.accuracy);
  CHECK(rows[2].val_loss == direct.best.best_val_loss);

  // Larger k than available training trials per class must fail.
  CHECK_THROWS_AS(sweep_data_efficiency(trials, manifest, 94, opts, model,
                                        cfg, {10}),
                  ConfigError);
}
