#ifndef EEGTEXT_TRAINER_HPP_
#define EEGTEXT_TRAINER_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "eegtext/classifier.hpp"
#include "eegtext/dsp.hpp"
#include "eegtext/ingest.hpp"
#include "eegtext/params.hpp"

namespace eegtext {

struct TrainConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-7;
  size_t batch_size = 32;
  size_t epochs = 100;
  double decay_rate = 0.95;  // applied once per epoch
  size_t patience = 15;
  double val_fraction = 0.2;
  uint64_t seed = 0;
};

// lr * decay_rate^epoch; epoch 0 is the undecayed base rate.
double lr_at(size_t epoch, const TrainConfig& cfg);

// First and second Adam moments, aligned index-for-index with the trainable
// items of the ParamStore they were initialized from.
struct AdamState {
  size_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState init_adam_state(const ParamStore& params);

// One update over every trainable parameter; `grads` aligns with
// `state.names`. Increments the shared step count (bias correction).
void adam_step(ParamStore& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr_t, const TrainConfig& cfg);

struct MetricsRow {
  size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
  std::string to_csv() const;  // header + %.17g fields, reproducible bitwise
};

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  ParamStore params;
  AdamState opt;
  size_t epoch = 0;  // epoch whose validation loss is best_val_loss
  double best_val_loss = 0.0;
  uint64_t seed = 0;
};

struct FitResult {
  Checkpoint best;
  MetricsLog log;
  size_t stopped_epoch = 0;  // last epoch that ran
};

// Full training loop: seeded shuffling, minibatch Adam with per-epoch LR
// decay, max-norm projection after every step, best-validation-loss
// checkpointing, early stop after `patience` epochs without improvement.
// Logged losses are the optimized objective (cross entropy + L2 penalty).
FitResult fit(const EpochTensor& train_set, const EpochTensor& val_set,
              const ModelConfig& model_cfg, const TrainConfig& train_cfg);

struct EvalResult {
  size_t n_classes = 0;
  double accuracy = 0.0;
  double mean_loss = 0.0;                  // cross entropy only
  std::vector<double> per_class_accuracy;  // diagonal / true-class count
  std::vector<size_t> confusion;           // n_c x n_c, rows = true class
};

EvalResult evaluate(ParamStore& params, const ModelConfig& cfg,
                    const EpochTensor& data, size_t batch_size);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct SweepRow {
  size_t k = 0;
  double accuracy = 0.0;
  double val_loss = 0.0;
};

// For each k: keep k training trials per class (seeded, nested subsets),
// retrain from scratch, evaluate on the fixed validation split.
// `trials[i]` must correspond to `manifest.entries[i]`.
std::vector<SweepRow> sweep_data_efficiency(
    const std::vector<RawTrial>& trials, const DatasetManifest& manifest,
    uint64_t subsample_seed, const EpochOptions& epoch_opts,
    const ModelConfig& model_cfg, const TrainConfig& train_cfg,
    const std::vector<size_t>& ks);

}  // namespace eegtext

#endif  // EEGTEXT_TRAINER_HPP_
