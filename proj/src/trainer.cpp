#include "eegtext/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "json.hpp"

#include "eegtext/errors.hpp"
#include "eegtext/io.hpp"
#include "eegtext/rng.hpp"

namespace eegtext {
namespace {

using nlohmann::json;

void validate(const TrainConfig& cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0))
    throw ConfigError("beta1 must lie in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
    throw ConfigError("beta2 must lie in [0, 1)");
  if (!(cfg.adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(cfg.decay_rate > 0.0 && cfg.decay_rate <= 1.0))
    throw ConfigError("decay_rate must lie in (0, 1]");
  if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
    throw ConfigError("val_fraction must lie in (0, 1)");
}

void check_split(const EpochTensor& set, const char* which) {
  if (!set.data.defined() || set.data.ndim() != 4 || set.data.shape()[0] == 0)
    throw ConfigError(std::string(which) + " split is empty");
  if (set.labels.size() != set.data.shape()[0])
    throw ConfigError(std::string(which) + " split has " +
                      std::to_string(set.labels.size()) + " labels for " +
                      std::to_string(set.data.shape()[0]) + " trials");
}

Tensor gather_rows(const Tensor& data, const std::vector<size_t>& idx,
                   size_t lo, size_t hi) {
  const Shape& s = data.shape();
  const size_t row = s[1] * s[2] * s[3];
  std::vector<double> out;
  out.reserve((hi - lo) * row);
  const auto& v = data.values();
  for (size_t i = lo; i < hi; ++i) {
    const double* src = v.data() + idx[i] * row;
    out.insert(out.end(), src, src + row);
  }
  return Tensor({hi - lo, s[1], s[2], s[3]}, std::move(out), data.dtype());
}

size_t count_correct(const Tensor& probs, const std::vector<int>& labels) {
  size_t correct = 0;
  auto preds = predictions(probs.detach());
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i].label == labels[i]) ++correct;
  return correct;
}

// Batch boundaries over n samples: full batches of `bs`, remainder kept.
// A trailing single sample is merged into the previous batch because batch
// norm needs at least two rows in train mode.
std::vector<size_t> batch_bounds(size_t n, size_t bs, bool merge_singleton) {
  std::vector<size_t> bounds{0};
  while (bounds.back() + bs < n) bounds.push_back(bounds.back() + bs);
  bounds.push_back(n);
  if (merge_singleton && bounds.size() > 2 &&
      bounds[bounds.size() - 1] - bounds[bounds.size() - 2] == 1)
    bounds.erase(bounds.end() - 2);
  return bounds;
}

// ---- Config (de)serialization for checkpoint manifests -------------------

json to_json(const EncoderConfig& c) {
  return json{{"block_filters", c.block_filters},
              {"kernel_time", c.kernel_time},
              {"depth_multiplier", c.depth_multiplier},
              {"lstm_units", c.lstm_units},
              {"lstm_layers", c.lstm_layers},
              {"pool_stride", c.pool_stride},
              {"sep_kernel_time", c.sep_kernel_time},
              {"sep_filters", c.sep_filters},
              {"dropout_p", c.dropout_p},
              {"bn_epsilon", c.bn_epsilon},
              {"bn_momentum", c.bn_momentum},
              {"lstm_only", c.lstm_only}};
}

EncoderConfig encoder_from_json(const json& j) {
  EncoderConfig c;
  j.at("block_filters").get_to(c.block_filters);
  j.at("kernel_time").get_to(c.kernel_time);
  j.at("depth_multiplier").get_to(c.depth_multiplier);
  j.at("lstm_units").get_to(c.lstm_units);
  j.at("lstm_layers").get_to(c.lstm_layers);
  j.at("pool_stride").get_to(c.pool_stride);
  j.at("sep_kernel_time").get_to(c.sep_kernel_time);
  j.at("sep_filters").get_to(c.sep_filters);
  j.at("dropout_p").get_to(c.dropout_p);
  j.at("bn_epsilon").get_to(c.bn_epsilon);
  j.at("bn_momentum").get_to(c.bn_momentum);
  j.at("lstm_only").get_to(c.lstm_only);
  return c;
}

json to_json(const ClassifierConfig& c) {
  return json{{"hidden", c.hidden},
              {"n_classes", c.n_classes},
              {"dropout_p", c.dropout_p},
              {"l2_lambda", c.l2_lambda},
              {"maxnorm_c", c.maxnorm_c}};
}

ClassifierConfig classifier_from_json(const json& j) {
  ClassifierConfig c;
  j.at("hidden").get_to(c.hidden);
  j.at("n_classes").get_to(c.n_classes);
  j.at("dropout_p").get_to(c.dropout_p);
  j.at("l2_lambda").get_to(c.l2_lambda);
  j.at("maxnorm_c").get_to(c.maxnorm_c);
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"decay_rate", c.decay_rate},
              {"patience", c.patience},
              {"val_fraction", c.val_fraction},
              {"seed", c.seed}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  j.at("lr").get_to(c.lr);
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("adam_eps").get_to(c.adam_eps);
  j.at("batch_size").get_to(c.batch_size);
  j.at("epochs").get_to(c.epochs);
  j.at("decay_rate").get_to(c.decay_rate);
  j.at("patience").get_to(c.patience);
  j.at("val_fraction").get_to(c.val_fraction);
  j.at("seed").get_to(c.seed);
  return c;
}

const char* dtype_name(DType d) { return d == DType::F32 ? "f32" : "f64"; }

DType dtype_of(const std::string& s) {
  if (s == "f32") return DType::F32;
  if (s == "f64") return DType::F64;
  throw IoError("unknown dtype \"" + s + "\" in checkpoint");
}

constexpr char kCheckpointMagic[] = "EEGCKPT1";
constexpr int kCheckpointVersion = 1;

}  // namespace

double lr_at(size_t epoch, const TrainConfig& cfg) {
  return cfg.lr * std::pow(cfg.decay_rate, static_cast<double>(epoch));
}

AdamState init_adam_state(const ParamStore& params) {
  AdamState s;
  for (const ParamStore::Item& it : params.items) {
    if (!it.trainable) continue;
    s.names.push_back(it.name);
    s.m.emplace_back(it.value.size(), 0.0);
    s.v.emplace_back(it.value.size(), 0.0);
  }
  return s;
}

void adam_step(ParamStore& params,
               const std::vector<std::vector<double>>& grads, AdamState& state,
               double lr_t, const TrainConfig& cfg) {
  if (grads.size() != state.names.size())
    throw ConfigError("adam_step: " + std::to_string(grads.size()) +
                      " gradients for " + std::to_string(state.names.size()) +
                      " parameters");
  state.step += 1;
  const double bc1 =
      1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < state.names.size(); ++i) {
    const Tensor& w = params.at(state.names[i]);
    const std::vector<double>& g = grads[i];
    if (g.size() != w.size())
      throw ConfigError("adam_step: gradient size mismatch for " +
                        state.names[i]);
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    std::vector<double> x(w.values());
    for (size_t j = 0; j < x.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      x[j] -= lr_t * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
    params.set(state.names[i],
               Tensor(w.shape(), std::move(x), w.dtype(), true));
  }
}

std::string MetricsLog::to_csv() const {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.epoch);
    out += ',';
    out += format_double(r.train_loss);
    out += ',';
    out += format_double(r.train_acc);
    out += ',';
    out += format_double(r.val_loss);
    out += ',';
    out += format_double(r.val_acc);
    out += ',';
    out += format_double(r.lr);
    out += '\n';
  }
  return out;
}

FitResult fit(const EpochTensor& train_set, const EpochTensor& val_set,
              const ModelConfig& model_cfg, const TrainConfig& train_cfg) {
  validate(train_cfg);
  check_split(train_set, "train");
  check_split(val_set, "validation");
  const size_t n_train = train_set.data.shape()[0];
  const size_t n_val = val_set.data.shape()[0];
  if (n_train < 2)
    throw ConfigError("training requires at least 2 trials (batch norm)");
  if (train_cfg.batch_size > n_train)
    throw ConfigError("batch_size " + std::to_string(train_cfg.batch_size) +
                      " exceeds training set size " + std::to_string(n_train));

  ParamStore params;
  Rng init_rng(mix_seed(train_cfg.seed, 0x1A17));
  init_model_params(params, model_cfg, init_rng);
  AdamState opt = init_adam_state(params);
  const double lambda = model_cfg.classifier.l2_lambda;

  FitResult result;
  result.best.model = model_cfg;
  result.best.train = train_cfg;
  result.best.seed = train_cfg.seed;
  double best_val = 0.0;
  size_t best_epoch = 0;
  bool have_best = false;

  std::vector<size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  std::vector<size_t> val_order(n_val);
  std::iota(val_order.begin(), val_order.end(), 0);
  const std::vector<size_t> val_bounds =
      batch_bounds(n_val, train_cfg.batch_size, false);

  for (size_t epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    const double lr_t = lr_at(epoch - 1, train_cfg);
    Rng epoch_rng(mix_seed(train_cfg.seed, 0xEE0C0000ULL + epoch));
    epoch_rng.shuffle(order);
    const std::vector<size_t> bounds =
        batch_bounds(n_train, train_cfg.batch_size, true);

    double train_loss_sum = 0.0;
    size_t train_correct = 0;
    for (size_t b = 0; b + 1 < bounds.size(); ++b) {
      Tensor xb = gather_rows(train_set.data, order, bounds[b], bounds[b + 1]);
      std::vector<int> yb;
      for (size_t i = bounds[b]; i < bounds[b + 1]; ++i)
        yb.push_back(train_set.labels[order[i]]);

      std::vector<std::vector<double>> grads;
      double batch_loss = 0.0;
      try {
        {
          Tape tape;
          Tensor probs =
              model_forward(xb, params, model_cfg, Mode::Train, epoch_rng);
          Tensor obj =
              add(cross_entropy(probs, yb), l2_penalty(params, lambda));
          batch_loss = obj.item();
          if (!std::isfinite(batch_loss))
            throw NumericError("non-finite training loss");
          backward(obj);
          grads.reserve(opt.names.size());
          for (const std::string& name : opt.names)
            grads.push_back(tape.grad(params.at(name)).values());
          train_correct += count_correct(probs, yb);
        }
        adam_step(params, grads, opt, lr_t, train_cfg);
        apply_maxnorm(params, model_cfg.classifier.maxnorm_c);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1) + ": " + e.what());
      }
      train_loss_sum +=
          batch_loss * static_cast<double>(bounds[b + 1] - bounds[b]);
    }

    double val_ce_sum = 0.0;
    size_t val_correct = 0;
    double val_loss = 0.0;
    try {
      Rng unused_rng(0);
      for (size_t b = 0; b + 1 < val_bounds.size(); ++b) {
        Tensor xb = gather_rows(val_set.data, val_order, val_bounds[b],
                                val_bounds[b + 1]);
        std::vector<int> yb(val_set.labels.begin() + val_bounds[b],
                            val_set.labels.begin() + val_bounds[b + 1]);
        Tensor probs =
            model_forward(xb, params, model_cfg, Mode::Infer, unused_rng);
        val_ce_sum += cross_entropy(probs, yb).item() *
                      static_cast<double>(val_bounds[b + 1] - val_bounds[b]);
        val_correct += count_correct(probs, yb);
      }
      val_loss = val_ce_sum / static_cast<double>(n_val) +
                 l2_penalty(params, lambda).item();
      if (!std::isfinite(val_loss))
        throw NumericError("non-finite validation loss");
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) +
                         ", validation: " + e.what());
    }

    MetricsRow row;
    row.epoch = epoch;
    row.train_loss = train_loss_sum / static_cast<double>(n_train);
    row.train_acc =
        static_cast<double>(train_correct) / static_cast<double>(n_train);
    row.val_loss = val_loss;
    row.val_acc =
        static_cast<double>(val_correct) / static_cast<double>(n_val);
    row.lr = lr_t;
    result.log.rows.push_back(row);
    result.stopped_epoch = epoch;

    if (!have_best || val_loss < best_val) {
      have_best = true;
      best_val = val_loss;
      best_epoch = epoch;
      result.best.params = params;  // tensors are immutable; copy is a snapshot
      result.best.opt = opt;
      result.best.epoch = epoch;
      result.best.best_val_loss = val_loss;
    }
    if (epoch - best_epoch >= train_cfg.patience) break;
  }
  return result;
}

EvalResult evaluate(ParamStore& params, const ModelConfig& cfg,
                    const EpochTensor& data, size_t batch_size) {
  check_split(data, "evaluation");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  const size_t n = data.data.shape()[0];
  const size_t n_c = cfg.classifier.n_classes;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::vector<size_t> bounds = batch_bounds(n, batch_size, false);

  EvalResult r;
  r.n_classes = n_c;
  r.confusion.assign(n_c * n_c, 0);
  double ce_sum = 0.0;
  Rng unused_rng(0);
  for (size_t b = 0; b + 1 < bounds.size(); ++b) {
    Tensor xb = gather_rows(data.data, order, bounds[b], bounds[b + 1]);
    std::vector<int> yb(data.labels.begin() + bounds[b],
                        data.labels.begin() + bounds[b + 1]);
    Tensor probs = model_forward(xb, params, cfg, Mode::Infer, unused_rng);
    ce_sum += cross_entropy(probs, yb).item() *
              static_cast<double>(bounds[b + 1] - bounds[b]);
    auto preds = predictions(probs);
    for (size_t i = 0; i < preds.size(); ++i)
      r.confusion[static_cast<size_t>(yb[i]) * n_c +
                  static_cast<size_t>(preds[i].label)] += 1;
  }
  size_t correct = 0;
  r.per_class_accuracy.assign(n_c, 0.0);
  for (size_t c = 0; c < n_c; ++c) {
    size_t row_total = 0;
    for (size_t j = 0; j < n_c; ++j) row_total += r.confusion[c * n_c + j];
    correct += r.confusion[c * n_c + c];
    if (row_total > 0)
      r.per_class_accuracy[c] =
          static_cast<double>(r.confusion[c * n_c + c]) /
          static_cast<double>(row_total);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  r.mean_loss = ce_sum / static_cast<double>(n);
  return r;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  json manifest;
  manifest["version"] = kCheckpointVersion;
  manifest["seed"] = ck.seed;
  manifest["epoch"] = ck.epoch;
  manifest["best_val_loss"] = ck.best_val_loss;
  manifest["config"] = {{"encoder", to_json(ck.model.encoder)},
                        {"classifier", to_json(ck.model.classifier)},
                        {"train", to_json(ck.train)}};

  std::string payload;
  json arrays = json::array();
  for (const ParamStore::Item& it : ck.params.items) {
    json entry;
    entry["name"] = it.name;
    entry["shape"] = it.value.shape();
    entry["dtype"] = dtype_name(it.value.dtype());
    entry["trainable"] = it.trainable;
    entry["offset"] = payload.size();
    entry["length"] = it.value.size() * 8;
    payload += pack_doubles_le(it.value.values());
    arrays.push_back(std::move(entry));
  }
  manifest["params"] = std::move(arrays);

  if (ck.opt.names.size() != ck.opt.m.size() ||
      ck.opt.names.size() != ck.opt.v.size())
    throw ConfigError("optimizer state arrays out of sync");
  json moments = json::array();
  for (size_t i = 0; i < ck.opt.names.size(); ++i) {
    json entry;
    entry["name"] = ck.opt.names[i];
    entry["length"] = ck.opt.m[i].size() * 8;
    entry["m_offset"] = payload.size();
    payload += pack_doubles_le(ck.opt.m[i]);
    entry["v_offset"] = payload.size();
    payload += pack_doubles_le(ck.opt.v[i]);
    moments.push_back(std::move(entry));
  }
  manifest["opt"] = {{"step", ck.opt.step}, {"moments", std::move(moments)}};

  write_container(path, kCheckpointMagic, manifest.dump(), payload);
}

Checkpoint load_checkpoint(const std::string& path) {
  Container c = read_container(path, kCheckpointMagic);
  Checkpoint ck;
  try {
    json manifest = json::parse(c.manifest);
    if (manifest.at("version").get<int>() != kCheckpointVersion)
      throw IoError(path + ": unsupported checkpoint version " +
                    manifest.at("version").dump());
    manifest.at("seed").get_to(ck.seed);
    manifest.at("epoch").get_to(ck.epoch);
    manifest.at("best_val_loss").get_to(ck.best_val_loss);
    ck.model.encoder = encoder_from_json(manifest.at("config").at("encoder"));
    ck.model.classifier =
        classifier_from_json(manifest.at("config").at("classifier"));
    ck.train = train_from_json(manifest.at("config").at("train"));

    // The parameter set must match what the stored config produces.
    ParamStore expected;
    Rng dummy(0);
    init_model_params(expected, ck.model, dummy);
    const json& arrays = manifest.at("params");
    if (arrays.size() != expected.items.size())
      throw IoError(path + ": checkpoint has " +
                    std::to_string(arrays.size()) + " arrays, config needs " +
                    std::to_string(expected.items.size()));
    for (size_t i = 0; i < expected.items.size(); ++i) {
      const json& entry = arrays.at(i);
      const ParamStore::Item& want = expected.items[i];
      if (entry.at("name").get<std::string>() != want.name)
        throw IoError(path + ": array " + std::to_string(i) + " is \"" +
                      entry.at("name").get<std::string>() + "\", expected \"" +
                      want.name + "\"");
      Shape shape = entry.at("shape").get<Shape>();
      if (shape != want.value.shape())
        throw IoError(path + ": shape mismatch for " + want.name + ": stored " +
                      shape_str(shape) + ", config requires " +
                      shape_str(want.value.shape()));
      const size_t length = entry.at("length").get<size_t>();
      if (length != shape_size(shape) * 8)
        throw IoError(path + ": length/shape disagreement for " + want.name);
      std::vector<double> values = unpack_doubles_le(
          c.payload, entry.at("offset").get<size_t>(), length / 8);
      DType dtype = dtype_of(entry.at("dtype").get<std::string>());
      const bool trainable = entry.at("trainable").get<bool>();
      ck.params.add(want.name, Tensor(shape, std::move(values), dtype, trainable),
                    trainable);
    }

    const json& opt = manifest.at("opt");
    opt.at("step").get_to(ck.opt.step);
    AdamState expected_opt = init_adam_state(ck.params);
    const json& moments = opt.at("moments");
    if (moments.size() != expected_opt.names.size())
      throw IoError(path + ": optimizer state covers " +
                    std::to_string(moments.size()) + " arrays, expected " +
                    std::to_string(expected_opt.names.size()));
    for (size_t i = 0; i < expected_opt.names.size(); ++i) {
      const json& entry = moments.at(i);
      if (entry.at("name").get<std::string>() != expected_opt.names[i])
        throw IoError(path + ": optimizer moments misaligned at index " +
                      std::to_string(i));
      const size_t length = entry.at("length").get<size_t>();
      const size_t count = length / 8;
      if (count != ck.params.at(expected_opt.names[i]).size())
        throw IoError(path + ": moment size mismatch for " +
                      expected_opt.names[i]);
      ck.opt.names.push_back(expected_opt.names[i]);
      ck.opt.m.push_back(unpack_doubles_le(
          c.payload, entry.at("m_offset").get<size_t>(), count));
      ck.opt.v.push_back(unpack_doubles_le(
          c.payload, entry.at("v_offset").get<size_t>(), count));
    }
  } catch (const json::exception& e) {
    throw IoError(path + ": malformed checkpoint manifest: " + e.what());
  }
  return ck;
}

std::vector<SweepRow> sweep_data_efficiency(
    const std::vector<RawTrial>& trials, const DatasetManifest& manifest,
    uint64_t subsample_seed, const EpochOptions& epoch_opts,
    const ModelConfig& model_cfg, const TrainConfig& train_cfg,
    const std::vector<size_t>& ks) {
  if (trials.size() != manifest.entries.size())
    throw ConfigError("sweep: " + std::to_string(trials.size()) +
                      " trials for a manifest of " +
                      std::to_string(manifest.entries.size()) + " entries");
  std::unordered_map<std::string, size_t> by_path;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!by_path.emplace(manifest.entries[i].path, i).second)
      throw ConfigError("sweep: duplicate manifest path " +
                        manifest.entries[i].path);
  }

  auto collect = [&](const DatasetManifest& m, Split split) {
    std::vector<RawTrial> out;
    for (const ManifestEntry& e : m.entries) {
      if (e.split != split) continue;
      RawTrial t = trials[by_path.at(e.path)];
      t.label = e.label;
      out.push_back(std::move(t));
    }
    return out;
  };

  EpochTensor val_epochs =
      assemble_epochs(collect(manifest, Split::Val), epoch_opts);

  std::vector<SweepRow> rows;
  for (size_t k : ks) {
    DatasetManifest sub = subsample_per_class(manifest, k, subsample_seed);
    EpochTensor train_epochs =
        assemble_epochs(collect(sub, Split::Train), epoch_opts);
    FitResult fr = fit(train_epochs, val_epochs, model_cfg, train_cfg);
    EvalResult ev = evaluate(fr.best.params, model_cfg, val_epochs,
                             train_cfg.batch_size);
    SweepRow row;
    row.k = k;
    row.accuracy = ev.accuracy;
    row.val_loss = fr.best.best_val_loss;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace eegtext
