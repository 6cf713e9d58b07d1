#ifndef EEGTEXT_CLASSIFIER_HPP_
#define EEGTEXT_CLASSIFIER_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "eegtext/encoder.hpp"
#include "eegtext/params.hpp"
#include "eegtext/rng.hpp"
#include "eegtext/tensor.hpp"

namespace eegtext {

struct ClassifierConfig {
  std::vector<size_t> hidden = {128, 64};
  size_t n_classes = 2;
  double dropout_p = 0.3;
  double l2_lambda = 0.001;
  double maxnorm_c = 3.0;
};

// Appends "cls.*" tensors (Glorot-uniform kernels, zero biases).
void init_classifier_params(ParamStore& params, const ClassifierConfig& cfg,
                            size_t embedding_dim, Rng& rng);

// Row-wise stable softmax over the last axis. Rows sum to 1 exactly up to
// rounding; shifting all logits in a row by a constant leaves it unchanged.
Tensor softmax(const Tensor& logits);

// Mean of -log(p[label]) over the batch, probabilities clamped at 1e-12.
// Labels outside [0, n_classes) raise ConfigError.
Tensor cross_entropy(const Tensor& probs, const std::vector<int>& labels);

// lambda * sum of squared entries of every conv/dense kernel in the store
// (names ending in ".w"; biases, BN and LSTM parameters excluded).
Tensor l2_penalty(const ParamStore& params, double lambda);

// Rescales any column of w (2-D) whose Euclidean norm exceeds c down to
// exactly c. Pure value-level op (applied after optimizer steps), idempotent.
Tensor maxnorm_project(const Tensor& w, double c);

// Applies maxnorm to every dense kernel ("cls.*.w") in place.
void apply_maxnorm(ParamStore& params, double c);

// Head forward: embedding (N, D) -> class probabilities (N, n_classes).
// Dropout runs after each hidden layer except the last one (train mode).
Tensor classify(const Tensor& embedding, const ParamStore& params,
                const ClassifierConfig& cfg, Mode mode, Rng& rng);

// Full model: epochs (N, C, T, 1) -> probabilities (N, n_classes).
struct ModelConfig {
  EncoderConfig encoder;
  ClassifierConfig classifier;
};
void init_model_params(ParamStore& params, const ModelConfig& cfg, Rng& rng);
Tensor model_forward(const Tensor& x, ParamStore& params,
                     const ModelConfig& cfg, Mode mode, Rng& rng);

struct ClassPrediction {
  int label = 0;
  double prob = 0.0;
  std::vector<double> probs;
  std::string class_name;  // filled from a LabelMap where one is available
};

// Argmax per row; ties resolve to the lowest index.
std::vector<ClassPrediction> predictions(const Tensor& probs);

}  // namespace eegtext

#endif  // EEGTEXT_CLASSIFIER_HPP_
