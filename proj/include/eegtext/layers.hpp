#ifndef EEGTEXT_LAYERS_HPP_
#define EEGTEXT_LAYERS_HPP_

#include <utility>
#include <vector>

#include "eegtext/rng.hpp"
#include "eegtext/tensor.hpp"

namespace eegtext {

// All time-axis ops below take inputs shaped (..., T, F): any number of
// leading axes, time second-to-last, features last. Convolutions are
// stride-1 with zero "same" padding; for kernel size K the input is padded
// (K-1)/2 on the left and the remainder on the right, so output length == T.

// w: (K, F_in, F_out), b: (F_out) or an undefined tensor for no bias.
Tensor conv1d_time(const Tensor& x, const Tensor& w,
                   const Tensor& b = Tensor());

// Depthwise: every input feature convolves with its own `mult` kernels.
// w: (K, F_in, mult), b: (F_in * mult) or undefined. Output feature
// f_in * mult + j comes from input feature f_in and kernel column j.
Tensor depthwise_conv1d_time(const Tensor& x, const Tensor& w,
                             const Tensor& b = Tensor());

// Non-overlapping average pooling along time; a trailing remainder of fewer
// than `pool` steps is dropped. (..., T, F) -> (..., T/pool, F).
Tensor avg_pool_time(const Tensor& x, size_t pool);

// Mean over one axis: (d0, ..., d_axis, ..., dn) -> same shape minus d_axis.
Tensor mean_axis(const Tensor& x, size_t axis);

// One time step: (..., T, F) -> (..., F).
Tensor slice_time(const Tensor& x, size_t t);
// Inverse of a full slice_time sweep: T tensors of (..., F) -> (..., T, F).
Tensor stack_time(const std::vector<Tensor>& steps);

// Exponential linear unit: x > 0 ? x : alpha * (exp(x) - 1).
Tensor elu(const Tensor& x, double alpha = 1.0);

// x: (N, D_in), w: (D_in, D_out), b: (D_out).
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

// Inverted dropout: zeroes each element with probability `rate` and scales
// survivors by 1/(1-rate); identity when !training or rate == 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

// Per-feature batch moments over all leading axes: (..., F) -> mean (F),
// biased variance (F). Differentiable.
std::pair<Tensor, Tensor> batch_norm_moments(const Tensor& x);

// gamma * (x - mean) / sqrt(var + eps) + beta, trailing-broadcast per
// feature. Pass batch moments when training, running stats when not.
Tensor batch_norm(const Tensor& x, const Tensor& mean, const Tensor& var,
                  const Tensor& gamma, const Tensor& beta, double eps);

}  // namespace eegtext

#endif  // EEGTEXT_LAYERS_HPP_
