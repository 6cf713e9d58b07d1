#ifndef EEGTEXT_ENCODER_HPP_
#define EEGTEXT_ENCODER_HPP_

#include <array>
#include <cstddef>
#include <vector>

#include "eegtext/params.hpp"
#include "eegtext/rng.hpp"
#include "eegtext/tensor.hpp"

namespace eegtext {

enum class Mode { Train, Infer };

struct EncoderConfig {
  std::array<size_t, 3> block_filters = {8, 16, 32};
  size_t kernel_time = 64;
  size_t depth_multiplier = 2;
  size_t lstm_units = 64;
  size_t lstm_layers = 2;
  size_t pool_stride = 4;
  size_t sep_kernel_time = 16;
  size_t sep_filters = 112;
  double dropout_p = 0.5;
  double bn_epsilon = 1e-3;
  double bn_momentum = 0.99;
  bool lstm_only = false;  // ablation: skip conv/depthwise/separable stages

  size_t concat_filters() const;    // sum of block_filters
  size_t depthwise_filters() const; // concat_filters * depth_multiplier
  size_t embedding_dim() const;     // sep_filters, or lstm_units when lstm_only
};

// Appends "enc.*" tensors to the store. Conv and dense kernels use
// Glorot-uniform init, LSTM gate weights scaled uniform, biases zero,
// BN gamma=1 / beta=0 with frozen running stats mean=0 / var=1.
void init_encoder_params(ParamStore& params, const EncoderConfig& cfg, Rng& rng);

// conv -> batch norm -> ELU for one parallel block ("enc.block1" ...).
// Train mode normalizes by batch moments and updates the block's running
// stats in `params`; infer mode reads the stored running stats.
Tensor conv_block(const Tensor& x, ParamStore& params, const std::string& name,
                  const EncoderConfig& cfg, Mode mode);

// One LSTM cell update. xt: (N, Din), h/c: (N, H).
// Gate weights are (Din + H, H) over the concatenated [h_prev, x_t];
// with all-zero parameters the gates sit at 0.5 and h stays 0.
struct LstmGates {
  Tensor wf, wi, wc, wo;  // (Din + H, H)
  Tensor bf, bi, bc, bo;  // (H)
};
struct LstmState {
  Tensor h, c;
};
LstmState lstm_step(const Tensor& xt, const LstmState& prev, const LstmGates& g);

// Runs stacked LSTM layers over xs: (N, T, Din) -> (N, T, H) of the top
// layer. States start at zero.
Tensor lstm_sequence(const Tensor& xs, const std::vector<LstmGates>& layers);

// Full forward pass: x (N, C, T, 1) -> embedding (N, embedding_dim()).
// Train mode updates BN running stats in `params` and applies dropout;
// it requires N >= 2 so batch moments are defined.
Tensor encoder_forward(const Tensor& x, ParamStore& params,
                       const EncoderConfig& cfg, Mode mode, Rng& rng);

}  // namespace eegtext

#endif  // EEGTEXT_ENCODER_HPP_
