#include "eegtext/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eegtext/errors.hpp"
#include "eegtext/layers.hpp"

namespace eegtext {
namespace {

constexpr double kProbFloor = 1e-12;

bool grad_wanted(const Tensor& t) {
  return Tape::current() != nullptr && t.requires_grad();
}

void validate(const ClassifierConfig& cfg) {
  if (cfg.n_classes < 2) throw ConfigError("n_classes must be >= 2");
  for (size_t h : cfg.hidden)
    if (h == 0) throw ConfigError("hidden layer widths must be >= 1");
  if (!(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0))
    throw ConfigError("dropout_p must lie in [0, 1)");
  if (!(cfg.l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be >= 0");
  if (!(cfg.maxnorm_c > 0.0)) throw ConfigError("maxnorm_c must be > 0");
}

std::string dense_name(size_t i) {
  return "cls.dense" + std::to_string(i + 1);
}

}  // namespace

void init_classifier_params(ParamStore& p, const ClassifierConfig& cfg,
                            size_t embedding_dim, Rng& rng) {
  validate(cfg);
  if (embedding_dim == 0) throw ConfigError("embedding_dim must be >= 1");
  size_t d_in = embedding_dim;
  auto glorot = [&rng](size_t rows, size_t cols) {
    double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::vector<double> v(rows * cols);
    for (double& x : v) x = rng.uniform(-limit, limit);
    return Tensor({rows, cols}, std::move(v), DType::F64, true);
  };
  for (size_t i = 0; i < cfg.hidden.size(); ++i) {
    p.add(dense_name(i) + ".w", glorot(d_in, cfg.hidden[i]));
    p.add(dense_name(i) + ".b",
          Tensor::zeros({cfg.hidden[i]}, DType::F64, true));
    d_in = cfg.hidden[i];
  }
  p.add("cls.out.w", glorot(d_in, cfg.n_classes));
  p.add("cls.out.b", Tensor::zeros({cfg.n_classes}, DType::F64, true));
}

Tensor softmax(const Tensor& logits) {
  if (logits.ndim() < 1) throw NumericError("softmax on a scalar");
  const size_t k = logits.shape().back();
  const size_t rows = logits.size() / k;
  const auto& z = logits.values();
  std::vector<double> out(logits.size());
  for (size_t r = 0; r < rows; ++r) {
    const double* zr = z.data() + r * k;
    double* pr = out.data() + r * k;
    double m = zr[0];
    for (size_t j = 1; j < k; ++j) m = std::max(m, zr[j]);
    double den = 0.0;
    for (size_t j = 0; j < k; ++j) {
      pr[j] = std::exp(zr[j] - m);
      den += pr[j];
    }
    for (size_t j = 0; j < k; ++j) pr[j] /= den;
  }
  Tensor result(logits.shape(), std::move(out), logits.dtype());
  if (!grad_wanted(logits)) return result;
  Tape& tape = *Tape::current();
  int na = tape.ensure_node(logits);
  auto ir = result.impl();
  tape.record(result, {na}, [=](Tape& t, int self) {
    // dz_j = p_j * (g_j - sum_k g_k p_k), row-wise.
    const auto& g = t.grad_of(self);
    auto& acc = t.grad_buffer(na);
    const double* p = ir->values.data();
    for (size_t r = 0; r < rows; ++r) {
      const double* pr = p + r * k;
      const double* gr = g.data() + r * k;
      double dot = 0.0;
      for (size_t j = 0; j < k; ++j) dot += gr[j] * pr[j];
      double* ar = acc.data() + r * k;
      for (size_t j = 0; j < k; ++j) ar[j] += pr[j] * (gr[j] - dot);
    }
  });
  return result;
}

Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
  if (probs.ndim() != 2)
    throw NumericError("cross_entropy: expected (N, n_classes), got " +
                       shape_str(probs.shape()));
  const size_t n = probs.shape()[0], k = probs.shape()[1];
  if (labels.size() != n)
    throw ConfigError("cross_entropy: " + std::to_string(labels.size()) +
                      " labels for batch of " + std::to_string(n));
  const auto& p = probs.values();
  double loss = 0.0;
  for (size_t r = 0; r < n; ++r) {
    int y = labels[r];
    if (y < 0 || static_cast<size_t>(y) >= k)
      throw ConfigError("cross_entropy: label " + std::to_string(y) +
                        " outside [0, " + std::to_string(k) + ")");
    loss -= std::log(std::max(p[r * k + y], kProbFloor));
  }
  loss /= static_cast<double>(n);
  Tensor result = Tensor::scalar(loss, probs.dtype());
  if (!grad_wanted(probs)) return result;
  Tape& tape = *Tape::current();
  int na = tape.ensure_node(probs);
  auto ip = probs.impl();
  std::vector<int> ys(labels);
  tape.record(result, {na}, [=](Tape& t, int self) {
    const double g = t.grad_of(self)[0];
    auto& acc = t.grad_buffer(na);
    const double* pv = ip->values.data();
    for (size_t r = 0; r < n; ++r) {
      const size_t idx = r * k + ys[r];
      if (pv[idx] >= kProbFloor)
        acc[idx] -= g / (static_cast<double>(n) * pv[idx]);
    }
  });
  return result;
}

Tensor l2_penalty(const ParamStore& params, double lambda) {
  if (!(lambda >= 0.0)) throw ConfigError("l2_lambda must be >= 0");
  Tensor acc = Tensor::scalar(0.0);
  for (const ParamStore::Item& it : params.items) {
    if (!it.name.ends_with(".w")) continue;
    acc = add(acc, sum(mul(it.value, it.value)));
  }
  return scale(acc, lambda);
}

Tensor maxnorm_project(const Tensor& w, double c) {
  if (!(c > 0.0)) throw ConfigError("maxnorm_c must be > 0");
  if (w.ndim() != 2)
    throw NumericError("maxnorm_project: expected 2-D kernel, got " +
                       shape_str(w.shape()));
  const size_t rows = w.shape()[0], cols = w.shape()[1];
  std::vector<double> v(w.values());
  for (size_t j = 0; j < cols; ++j) {
    double ss = 0.0;
    for (size_t i = 0; i < rows; ++i) ss += v[i * cols + j] * v[i * cols + j];
    double norm = std::sqrt(ss);
    // Tolerant compare keeps the projection exactly idempotent: a column
    // already scaled to norm c is left untouched bit-for-bit.
    if (norm > c * (1.0 + 1e-12)) {
      double f = c / norm;
      for (size_t i = 0; i < rows; ++i) v[i * cols + j] *= f;
    }
  }
  return Tensor(w.shape(), std::move(v), w.dtype(), w.requires_grad());
}

void apply_maxnorm(ParamStore& params, double c) {
  for (ParamStore::Item& it : params.items) {
    if (it.name.rfind("cls.", 0) != 0 || !it.name.ends_with(".w")) continue;
    it.value = maxnorm_project(it.value, c);
  }
}

Tensor classify(const Tensor& embedding, const ParamStore& params,
                const ClassifierConfig& cfg, Mode mode, Rng& rng) {
  validate(cfg);
  if (embedding.ndim() != 2)
    throw NumericError("classify: expected (N, D) embedding, got " +
                       shape_str(embedding.shape()));
  Tensor x = embedding;
  for (size_t i = 0; i < cfg.hidden.size(); ++i) {
    x = elu(dense(x, params.at(dense_name(i) + ".w"),
                  params.at(dense_name(i) + ".b")));
    if (i + 1 < cfg.hidden.size())
      x = dropout(x, cfg.dropout_p, rng, mode == Mode::Train);
  }
  Tensor logits = dense(x, params.at("cls.out.w"), params.at("cls.out.b"));
  return softmax(logits);
}

void init_model_params(ParamStore& params, const ModelConfig& cfg, Rng& rng) {
  init_encoder_params(params, cfg.encoder, rng);
  init_classifier_params(params, cfg.classifier, cfg.encoder.embedding_dim(),
                         rng);
}

Tensor model_forward(const Tensor& x, ParamStore& params,
                     const ModelConfig& cfg, Mode mode, Rng& rng) {
  Tensor emb = encoder_forward(x, params, cfg.encoder, mode, rng);
  return classify(emb, params, cfg.classifier, mode, rng);
}

std::vector<ClassPrediction> predictions(const Tensor& probs) {
  if (probs.ndim() != 2)
    throw NumericError("predictions: expected (N, n_classes), got " +
                       shape_str(probs.shape()));
  const size_t n = probs.shape()[0], k = probs.shape()[1];
  const auto& p = probs.values();
  std::vector<ClassPrediction> out(n);
  for (size_t r = 0; r < n; ++r) {
    const double* pr = p.data() + r * k;
    size_t best = 0;
    for (size_t j = 1; j < k; ++j)
      if (pr[j] > pr[best]) best = j;
    out[r].label = static_cast<int>(best);
    out[r].prob = pr[best];
    out[r].probs.assign(pr, pr + k);
  }
  return out;
}

}  // namespace eegtext
