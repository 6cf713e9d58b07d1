#include "eegtext/encoder.hpp"

#include <cmath>
#include <string>

#include "eegtext/errors.hpp"
#include "eegtext/layers.hpp"

namespace eegtext {

size_t EncoderConfig::concat_filters() const {
  return block_filters[0] + block_filters[1] + block_filters[2];
}

size_t EncoderConfig::depthwise_filters() const {
  return concat_filters() * depth_multiplier;
}

size_t EncoderConfig::embedding_dim() const {
  return lstm_only ? lstm_units : sep_filters;
}

namespace {

void validate(const EncoderConfig& cfg) {
  for (size_t f : cfg.block_filters)
    if (f == 0) throw ConfigError("block_filters entries must be >= 1");
  if (cfg.kernel_time < 1) throw ConfigError("kernel_time must be >= 1");
  if (cfg.depth_multiplier < 1)
    throw ConfigError("depth_multiplier must be >= 1");
  if (cfg.lstm_units < 1) throw ConfigError("lstm_units must be >= 1");
  if (cfg.lstm_layers < 1) throw ConfigError("lstm_layers must be >= 1");
  if (cfg.pool_stride < 1) throw ConfigError("pool_stride must be >= 1");
  if (cfg.sep_kernel_time < 1)
    throw ConfigError("sep_kernel_time must be >= 1");
  if (cfg.sep_filters < 1) throw ConfigError("sep_filters must be >= 1");
  if (!(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0))
    throw ConfigError("dropout_p must lie in [0, 1)");
  if (!(cfg.bn_epsilon > 0.0)) throw ConfigError("bn_epsilon must be > 0");
  if (!(cfg.bn_momentum >= 0.0 && cfg.bn_momentum < 1.0))
    throw ConfigError("bn_momentum must lie in [0, 1)");
}

Tensor uniform_init(Shape shape, double limit, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-limit, limit);
  return Tensor(std::move(shape), std::move(v), DType::F64, true);
}

// Glorot-style fan scaling; for convs the fans include the kernel extent.
Tensor glorot_init(Shape shape, size_t fan_in, size_t fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return uniform_init(std::move(shape), limit, rng);
}

Tensor trainable_zeros(Shape shape) {
  return Tensor::zeros(std::move(shape), DType::F64, true);
}

Tensor trainable_full(Shape shape, double v) {
  return Tensor::full(std::move(shape), v, DType::F64, true);
}

std::string lstm_prefix(size_t layer) {
  return "enc.lstm" + std::to_string(layer + 1);
}

size_t lstm_input_dim(const EncoderConfig& cfg, size_t layer) {
  if (layer > 0) return cfg.lstm_units;
  return cfg.lstm_only ? 1 : cfg.depthwise_filters();
}

void init_lstm_layer(ParamStore& p, const std::string& prefix, size_t d_in,
                     size_t h, Rng& rng) {
  double limit = std::sqrt(1.0 / static_cast<double>(d_in + h));
  const char* gates[] = {"f", "i", "c", "o"};
  for (const char* g : gates)
    p.add(prefix + ".w" + g, uniform_init({d_in + h, h}, limit, rng));
  for (const char* g : gates)
    p.add(prefix + ".b" + g, trainable_zeros({h}));
}

LstmGates gates_of(const ParamStore& p, const std::string& prefix) {
  return {p.at(prefix + ".wf"), p.at(prefix + ".wi"), p.at(prefix + ".wc"),
          p.at(prefix + ".wo"), p.at(prefix + ".bf"), p.at(prefix + ".bi"),
          p.at(prefix + ".bc"), p.at(prefix + ".bo")};
}

void require_shape(const Tensor& t, const Shape& want, const char* what) {
  if (t.shape() != want)
    throw NumericError(std::string(what) + ": expected shape " +
                       shape_str(want) + ", got " + shape_str(t.shape()));
}

// Momentum blend of running BN statistics, outside any tape.
void update_running(ParamStore& params, const std::string& name,
                    const Tensor& batch_stat, double momentum) {
  const Tensor& run = params.at(name);
  std::vector<double> v(run.values());
  const std::vector<double>& b = batch_stat.values();
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = momentum * v[i] + (1.0 - momentum) * b[i];
  params.set(name, Tensor(run.shape(), std::move(v)));
}

}  // namespace

Tensor conv_block(const Tensor& x, ParamStore& params, const std::string& name,
                  const EncoderConfig& cfg, Mode mode) {
  Tensor z = conv1d_time(x, params.at(name + ".w"), params.at(name + ".b"));
  Tensor mean, var;
  if (mode == Mode::Train) {
    auto moments = batch_norm_moments(z);
    mean = moments.first;
    var = moments.second;
    update_running(params, name + ".running_mean", mean, cfg.bn_momentum);
    update_running(params, name + ".running_var", var, cfg.bn_momentum);
  } else {
    mean = params.at(name + ".running_mean");
    var = params.at(name + ".running_var");
  }
  Tensor norm = batch_norm(z, mean, var, params.at(name + ".gamma"),
                           params.at(name + ".beta"), cfg.bn_epsilon);
  return elu(norm);
}

void init_encoder_params(ParamStore& p, const EncoderConfig& cfg, Rng& rng) {
  validate(cfg);
  size_t k = cfg.kernel_time;
  if (!cfg.lstm_only) {
    for (size_t i = 0; i < 3; ++i) {
      std::string name = "enc.block" + std::to_string(i + 1);
      size_t f = cfg.block_filters[i];
      p.add(name + ".w", glorot_init({k, 1, f}, k, k * f, rng));
      p.add(name + ".b", trainable_zeros({f}));
      p.add(name + ".gamma", trainable_full({f}, 1.0));
      p.add(name + ".beta", trainable_zeros({f}));
      p.add(name + ".running_mean", Tensor::zeros({f}), false);
      p.add(name + ".running_var", Tensor::full({f}, 1.0), false);
    }
    size_t m = cfg.concat_filters();
    p.add("enc.depth.w",
          glorot_init({k, m, cfg.depth_multiplier}, k,
                      k * cfg.depth_multiplier, rng));
  }
  for (size_t l = 0; l < cfg.lstm_layers; ++l)
    init_lstm_layer(p, lstm_prefix(l), lstm_input_dim(cfg, l), cfg.lstm_units,
                    rng);
  if (!cfg.lstm_only) {
    size_t sk = cfg.sep_kernel_time;
    p.add("enc.sep.depth.w",
          glorot_init({sk, cfg.lstm_units, 1}, sk, sk, rng));
    p.add("enc.sep.point.w",
          glorot_init({1, cfg.lstm_units, cfg.sep_filters}, cfg.lstm_units,
                      cfg.sep_filters, rng));
  }
}

LstmState lstm_step(const Tensor& xt, const LstmState& prev,
                    const LstmGates& g) {
  Tensor z = concat_last({prev.h, xt});
  Tensor f = sigmoid(add(matmul(z, g.wf), g.bf));
  Tensor i = sigmoid(add(matmul(z, g.wi), g.bi));
  Tensor c_hat = tanh(add(matmul(z, g.wc), g.bc));
  Tensor o = sigmoid(add(matmul(z, g.wo), g.bo));
  Tensor c = add(mul(f, prev.c), mul(i, c_hat));
  Tensor h = mul(o, tanh(c));
  return {h, c};
}

Tensor lstm_sequence(const Tensor& xs, const std::vector<LstmGates>& layers) {
  if (xs.ndim() != 3)
    throw NumericError("lstm_sequence: expected (N, T, D), got " +
                       shape_str(xs.shape()));
  if (layers.empty()) throw ConfigError("lstm_sequence: no layers");
  size_t n = xs.shape()[0], t_len = xs.shape()[1];
  if (t_len == 0) throw NumericError("lstm_sequence: empty sequence");
  Tensor seq = xs;
  for (const LstmGates& g : layers) {
    size_t h_dim = g.wf.shape()[1];
    LstmState st{Tensor::zeros({n, h_dim}), Tensor::zeros({n, h_dim})};
    std::vector<Tensor> hs;
    hs.reserve(t_len);
    for (size_t t = 0; t < t_len; ++t) {
      st = lstm_step(slice_time(seq, t), st, g);
      hs.push_back(st.h);
    }
    seq = stack_time(hs);
  }
  return seq;
}

Tensor encoder_forward(const Tensor& x, ParamStore& params,
                       const EncoderConfig& cfg, Mode mode, Rng& rng) {
  validate(cfg);
  if (x.ndim() != 4 || x.shape()[2] < 1 || x.shape()[3] != 1)
    throw NumericError("encoder_forward: expected (N, C, T, 1), got " +
                       shape_str(x.shape()));
  size_t n = x.shape()[0], t_len = x.shape()[2];
  if (mode == Mode::Train && n < 2)
    throw NumericError(
        "encoder_forward: train mode needs batch size >= 2 for batch norm");
  if (t_len / cfg.pool_stride == 0)
    throw NumericError("encoder_forward: time extent " +
                       std::to_string(t_len) + " shorter than pool stride");

  Tensor seq;  // (N, T, D_in) feeding the LSTM stack
  if (cfg.lstm_only) {
    seq = mean_axis(x.reshaped({n, x.shape()[1], t_len}), 1)
              .reshaped({n, t_len, 1});
  } else {
    std::vector<Tensor> blocks;
    for (size_t i = 0; i < 3; ++i)
      blocks.push_back(
          conv_block(x, params, "enc.block" + std::to_string(i + 1), cfg,
                     mode));
    Tensor cat = concat_last(blocks);
    require_shape(cat, {n, x.shape()[1], t_len, cfg.concat_filters()},
                  "concat_blocks");
    Tensor deep = depthwise_conv1d_time(cat, params.at("enc.depth.w"));
    // Spatial electrodes carry no ordering the LSTM could exploit; average
    // them out so each timestep feeds one feature vector.
    seq = mean_axis(deep, 1);
  }

  std::vector<LstmGates> layers;
  for (size_t l = 0; l < cfg.lstm_layers; ++l)
    layers.push_back(gates_of(params, lstm_prefix(l)));
  Tensor h_seq = lstm_sequence(seq, layers);

  Tensor pooled = avg_pool_time(h_seq, cfg.pool_stride);
  Tensor dropped = dropout(pooled, cfg.dropout_p, rng, mode == Mode::Train);

  Tensor feats = dropped;
  if (!cfg.lstm_only) {
    Tensor sep = depthwise_conv1d_time(dropped, params.at("enc.sep.depth.w"));
    feats = conv1d_time(sep, params.at("enc.sep.point.w"));
  }
  // Global average over the pooled time axis yields the compact embedding.
  Tensor emb = mean_axis(feats, 1);
  require_shape(emb, {n, cfg.embedding_dim()}, "encoder embedding");
  return emb;
}

}  // namespace eegtext
