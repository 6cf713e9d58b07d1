#include "eegtext/layers.hpp"

#include <algorithm>
#include <cmath>

#include "eegtext/errors.hpp"

namespace eegtext {

namespace {

bool grad_wanted(const Tensor& t) {
  return Tape::current() != nullptr && t.requires_grad();
}

struct TimeDims {
  size_t rows;  // product of leading axes
  size_t T;
  size_t F;
};

TimeDims time_dims(const Tensor& x, const char* op) {
  if (x.ndim() < 2) {
    throw NumericError(std::string(op) + " needs (..., T, F), got " +
                       shape_str(x.shape()));
  }
  TimeDims d;
  d.F = x.shape().back();
  d.T = x.shape()[x.ndim() - 2];
  d.rows = x.size() / (d.T * d.F);
  return d;
}

}  // namespace

Tensor conv1d_time(const Tensor& x, const Tensor& w, const Tensor& b) {
  TimeDims d = time_dims(x, "conv1d_time");
  if (w.ndim() != 3 || w.shape()[1] != d.F) {
    throw NumericError("conv1d_time kernel " + shape_str(w.shape()) +
                       " does not fit input " + shape_str(x.shape()));
  }
  const size_t K = w.shape()[0];
  const size_t Fin = d.F;
  const size_t Fout = w.shape()[2];
  const bool has_bias = b.defined();
  if (has_bias && (b.ndim() != 1 || b.shape()[0] != Fout)) {
    throw NumericError("conv1d_time bias " + shape_str(b.shape()) +
                       " must be (" + std::to_string(Fout) + ")");
  }
  const size_t PL = (K - 1) / 2;
  const size_t T = d.T, R = d.rows;
  const auto& xv = x.values();
  const auto& wv = w.values();

  std::vector<double> out(R * T * Fout, 0.0);
  if (has_bias) {
    const auto& bv = b.values();
    for (size_t rt = 0; rt < R * T; ++rt) {
      std::copy(bv.begin(), bv.end(), out.begin() + static_cast<long>(rt * Fout));
    }
  }
  for (size_t r = 0; r < R; ++r) {
    const double* xr = xv.data() + r * T * Fin;
    double* or_ = out.data() + r * T * Fout;
    for (size_t k = 0; k < K; ++k) {
      // out[t] uses x[t + k - PL]; valid t range keeps the index in [0, T).
      const size_t t_lo = (k >= PL) ? 0 : PL - k;
      const size_t t_hi = (T + PL > k) ? std::min(T, T + PL - k) : 0;
      const double* wk = wv.data() + k * Fin * Fout;
      for (size_t t = t_lo; t < t_hi; ++t) {
        const double* xs = xr + (t + k - PL) * Fin;
        double* ot = or_ + t * Fout;
        for (size_t fi = 0; fi < Fin; ++fi) {
          const double xval = xs[fi];
          if (xval == 0.0) continue;
          const double* wf = wk + fi * Fout;
          for (size_t fo = 0; fo < Fout; ++fo) ot[fo] += xval * wf[fo];
        }
      }
    }
  }
  Shape out_shape = x.shape();
  out_shape.back() = Fout;
  Tensor result(std::move(out_shape), std::move(out), x.dtype());
  if (!grad_wanted(x) && !grad_wanted(w) && !(has_bias && grad_wanted(b))) {
    return result;
  }
  Tape& tape = *Tape::current();
  int nx = tape.ensure_node(x);
  int nw = tape.ensure_node(w);
  int nb = has_bias ? tape.ensure_node(b) : -1;
  bool need_x = x.requires_grad();
  bool need_w = w.requires_grad();
  bool need_b = has_bias && b.requires_grad();
  auto ix = x.impl();
  auto iw = w.impl();
  std::vector<int> parents{nx, nw};
  if (has_bias) parents.push_back(nb);
  tape.record(result, std::move(parents), [=](Tape& t_, int self) {
    const auto& g = t_.grad_of(self);
    if (need_b) {
      auto& acc = t_.grad_buffer(nb);
      for (size_t rt = 0; rt < R * T; ++rt) {
        const double* gt = g.data() + rt * Fout;
        for (size_t fo = 0; fo < Fout; ++fo) acc[fo] += gt[fo];
      }
    }
    if (need_x) {
      auto& acc = t_.grad_buffer(nx);
      const auto& wv2 = iw->values;
      for (size_t r = 0; r < R; ++r) {
        double* xr = acc.data() + r * T * Fin;
        const double* gr = g.data() + r * T * Fout;
        for (size_t k = 0; k < K; ++k) {
          const size_t t_lo = (k >= PL) ? 0 : PL - k;
          const size_t t_hi = (T + PL > k) ? std::min(T, T + PL - k) : 0;
          const double* wk = wv2.data() + k * Fin * Fout;
          for (size_t t = t_lo; t < t_hi; ++t) {
            double* xs = xr + (t + k - PL) * Fin;
            const double* gt = gr + t * Fout;
            for (size_t fi = 0; fi < Fin; ++fi) {
              const double* wf = wk + fi * Fout;
              double s = 0.0;
              for (size_t fo = 0; fo < Fout; ++fo) s += gt[fo] * wf[fo];
              xs[fi] += s;
            }
          }
        }
      }
    }
    if (need_w) {
      auto& acc = t_.grad_buffer(nw);
      const auto& xv2 = ix->values;
      for (size_t r = 0; r < R; ++r) {
        const double* xr = xv2.data() + r * T * Fin;
        const double* gr = g.data() + r * T * Fout;
        for (size_t k = 0; k < K; ++k) {
          const size_t t_lo = (k >= PL) ? 0 : PL - k;
          const size_t t_hi = (T + PL > k) ? std::min(T, T + PL - k) : 0;
          double* wk = acc.data() + k * Fin * Fout;
          for (size_t t = t_lo; t < t_hi; ++t) {
            const double* xs = xr + (t + k - PL) * Fin;
            const double* gt = gr + t * Fout;
            for (size_t fi = 0; fi < Fin; ++fi) {
              const double xval = xs[fi];
              if (xval == 0.0) continue;
              double* wf = wk + fi * Fout;
              for (size_t fo = 0; fo < Fout; ++fo) wf[fo] += xval * gt[fo];
            }
          }
        }
      }
    }
  });
  return result;
}

Tensor depthwise_conv1d_time(const Tensor& x, const Tensor& w,
                             const Tensor& b) {
  TimeDims d = time_dims(x, "depthwise_conv1d_time");
  if (w.ndim() != 3 || w.shape()[1] != d.F) {
    throw NumericError("depthwise kernel " + shape_str(w.shape()) +
                       " does not fit input " + shape_str(x.shape()));
  }
  const size_t K = w.shape()[0];
  const size_t Fin = d.F;
  const size_t M = w.shape()[2];
  const size_t Fout = Fin * M;
  const bool has_bias = b.defined();
  if (has_bias && (b.ndim() != 1 || b.shape()[0] != Fout)) {
    throw NumericError("depthwise bias " + shape_str(b.shape()) + " must be (" +
                       std::to_string(Fout) + ")");
  }
  const size_t PL = (K - 1) / 2;
  const size_t T = d.T, R = d.rows;
  const auto& xv = x.values();
  const auto& wv = w.values();

  std::vector<double> out(R * T * Fout, 0.0);
  if (has_bias) {
    const auto& bv = b.values();
    for (size_t rt = 0; rt < R * T; ++rt) {
      std::copy(bv.begin(), bv.end(), out.begin() + static_cast<long>(rt * Fout));
    }
  }
  for (size_t r = 0; r < R; ++r) {
    const double* xr = xv.data() + r * T * Fin;
    double* or_ = out.data() + r * T * Fout;
    for (size_t k = 0; k < K; ++k) {
      const size_t t_lo = (k >= PL) ? 0 : PL - k;
      const size_t t_hi = (T + PL > k) ? std::min(T, T + PL - k) : 0;
      const double* wk = wv.data() + k * Fin * M;
      for (size_t t = t_lo; t < t_hi; ++t) {
        const double* xs = xr + (t + k - PL) * Fin;
        double* ot = or_ + t * Fout;
        for (size_t fi = 0; fi < Fin; ++fi) {
          const double xval = xs[fi];
          if (xval == 0.0) continue;
          const double* wf = wk + fi * M;
          double* of = ot + fi * M;
          for (size_t j = 0; j < M; ++j) of[j] += xval * wf[j];
        }
      }
    }
  }
  Shape out_shape = x.shape();
  out_shape.back() = Fout;
  Tensor result(std::move(out_shape), std::move(out), x.dtype());
  if (!grad_wanted(x) && !grad_wanted(w) && !(has_bias && grad_wanted(b))) {
    return result;
  }
  Tape& tape = *Tape::current();
  int nx = tape.ensure_node(x);
  int nw = tape.ensure_node(w);
  int nb = has_bias ? tape.ensure_node(b) : -1;
  bool need_x = x.requires_grad();
  bool need_w = w.requires_grad();
  bool need_b = has_bias && b.requires_grad();
  auto ix = x.impl();
  auto iw = w.impl();
  std::vector<int> parents{nx, nw};
  if (has_bias) parents.push_back(nb);
  tape.record(result, std::move(parents), [=](Tape& t_, int self) {
    const auto& g = t_.grad_of(self);
    if (need_b) {
      auto& acc = t_.grad_buffer(nb);
      for (size_t rt = 0; rt < R * T; ++rt) {
        const double* gt = g.data() + rt * Fout;
        for (size_t fo = 0; fo < Fout; ++fo) acc[fo] += gt[fo];
      }
    }
    if (need_x || need_w) {
      const auto& wv2 = iw->values;
      const auto& xv2 = ix->values;
      double* xacc = need_x ? t_.grad_buffer(nx).data() : nullptr;
      double* wacc = need_w ? t_.grad_buffer(nw).data() : nullptr;
      for (size_t r = 0; r < R; ++r) {
        const double* xr = xv2.data() + r * T * Fin;
        const double* gr = g.data() + r * T * Fout;
        for (size_t k = 0; k < K; ++k) {
          const size_t t_lo = (k >= PL) ? 0 : PL - k;
          const size_t t_hi = (T + PL > k) ? std::min(T, T + PL - k) : 0;
          for (size_t t = t_lo; t < t_hi; ++t) {
            const size_t ts = t + k - PL;
            const double* gt = gr + t * Fout;
            for (size_t fi = 0; fi < Fin; ++fi) {
              const double* wf = wv2.data() + (k * Fin + fi) * M;
              const double xval = xr[ts * Fin + fi];
              if (need_x) {
                double s = 0.0;
                for (size_t j = 0; j < M; ++j) s += gt[fi * M + j] * wf[j];
                xacc[r * T * Fin + ts * Fin + fi] += s;
              }
              if (need_w && xval != 0.0) {
                double* wk = wacc + (k * Fin + fi) * M;
                for (size_t j = 0; j < M; ++j) wk[j] += xval * gt[fi * M + j];
              }
            }
          }
        }
      }
    }
  });
  return result;
}

Tensor avg_pool_time(const Tensor& x, size_t pool) {
  TimeDims d = time_dims(x, "avg_pool_time");
  if (pool == 0 || d.T < pool) {
    throw NumericError("avg_pool_time pool " + std::to_string(pool) +
                       " too large for " + shape_str(x.shape()));
  }
  const size_t T = d.T, F = d.F, R = d.rows;
  const size_t P = T / pool;
  const double inv = 1.0 / static_cast<double>(pool);
  const auto& xv = x.values();
  std::vector<double> out(R * P * F, 0.0);
  for (size_t r = 0; r < R; ++r) {
    for (size_t p = 0; p < P; ++p) {
      double* op = out.data() + (r * P + p) * F;
      for (size_t s = 0; s < pool; ++s) {
        const double* xs = xv.data() + (r * T + p * pool + s) * F;
        for (size_t f = 0; f < F; ++f) op[f] += xs[f];
      }
      for (size_t f = 0; f < F; ++f) op[f] *= inv;
    }
  }
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = P;
  Tensor result(std::move(out_shape), std::move(out), x.dtype());
  if (!grad_wanted(x)) return result;
  Tape& tape = *Tape::current();
  int nx = tape.ensure_node(x);
  tape.record(result, {nx}, [=](Tape& t_, int self) {
    const auto& g = t_.grad_of(self);
    auto& acc = t_.grad_buffer(nx);
    for (size_t r = 0; r < R; ++r) {
      for (size_t p = 0; p < P; ++p) {
        const double* gp = g.data() + (r * P + p) * F;
        for (size_t s = 0; s < pool; ++s) {
          double* xs = acc.data() + (r * T + p * pool + s) * F;
          for (size_t f = 0; f < F; ++f) xs[f] += gp[f] * inv;
        }
      }
    }
  });
  return result;
}

Tensor mean_axis(const Tensor& x, size_t axis) {
  if (axis >= x.ndim()) {
    throw NumericError("mean_axis axis " + std::to_string(axis) +
                       " out of range for " + shape_str(x.shape()));
  }
  const size_t D = x.shape()[axis];
  size_t outer = 1, inner = 1;
  for (size_t i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.shape()[i];
  const double inv = 1.0 / static_cast<double>(D);
  const auto& xv = x.values();
  std::vector<double> out(outer * inner, 0.0);
  for (size_t o = 0; o < outer; ++o) {
    for (size_t dd = 0; dd < D; ++dd) {
      const double* xs = xv.data() + (o * D + dd) * inner;
      double* os = out.data() + o * inner;
      for (size_t i = 0; i < inner; ++i) os[i] += xs[i];
    }
  }
  for (double& v : out) v *= inv;
  Shape out_shape;
  for (size_t i = 0; i < x.ndim(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor result(std::move(out_shape), std::move(out), x.dtype());
  if (!grad_wanted(x)) return result;
  Tape& tape = *Tape::current();
  int nx = tape.ensure_node(x);
  tape.record(result, {nx}, [=](Tape& t_, int self) {
    const auto& g = t_.grad_of(self);
    auto& acc = t_.grad_buffer(nx);
    for (size_t o = 0; o < outer; ++o) {
      const double* gs = g.data() + o * inner;
      for (size_t dd = 0; dd < D; ++dd) {
        double* xs = acc.data() + (o * D + dd) * inner;
        for (size_t i = 0; i < inner; ++i) xs[i] += gs[i] * inv;
      }
    }
  });
  return result;
}

Tensor slice_time(const Tensor& x, size_t t) {
  TimeDims d = time_dims(x, "slice_time");
  if (t >= d.T) {
    throw NumericError("slice_time index " + std::to_string(t) +
                       " out of range for " + shape_str(x.shape()));
  }
  const size_t T = d.T, F = d.F, R = d.rows;
  const auto& xv = x.values();
  std::vector<double> out(R * F);
  for (size_t r = 0; r < R; ++r) {
    std::copy(xv.begin() + static_cast<long>((r * T + t) * F),
              xv.begin() + static_cast<long>((r * T + t + 1) * F),
              out.begin() + static_cast<long>(r * F));
  }
  Shape out_shape(x.shape().begin(), x.shape().end() - 2);
  out_shape.push_back(F);
  Tensor result(std::move(out_shape), std::move(out), x.dtype());
  if (!grad_wanted(x)) return result;
  Tape& tape = *Tape::current();
  int nx = tape.ensure_node(x);
  tape.record(result, {nx}, [=](Tape& t_, int self) {
    const auto& g = t_.grad_of(self);
    auto& acc = t_.grad_buffer(nx);
    for (size_t r = 0; r < R; ++r) {
      double* dst = acc.data() + (r * T + t) * F;
      const double* src = g.data() + r * F;
      for (size_t f = 0; f < F; ++f) dst[f] += src[f];
    }
  });
  return result;
}

Tensor stack_time(const std::vector<Tensor>& steps) {
  if (steps.empty()) throw NumericError("stack_time of nothing");
  const Shape& s0 = steps[0].shape();
  for (const Tensor& s : steps) {
    if (s.shape() != s0) {
      throw NumericError("stack_time pieces disagree: " + shape_str(s0) +
                         " vs " + shape_str(s.shape()));
    }
  }
  const size_t T = steps.size();
  const size_t F = s0.back();
  const size_t R = shape_size(s0) / F;
  std::vector<double> out(R * T * F);
  for (size_t t = 0; t < T; ++t) {
    const auto& v = steps[t].values();
    for (size_t r = 0; r < R; ++r) {
      std::copy(v.begin() + static_cast<long>(r * F),
                v.begin() + static_cast<long>((r + 1) * F),
                out.begin() + static_cast<long>((r * T + t) * F));
    }
  }
  Shape out_shape(s0.begin(), s0.end() - 1);
  out_shape.push_back(T);
  out_shape.push_back(F);
  DType dt = DType::F32;
  for (const Tensor& s : steps) {
    if (s.dtype() == DType::F64) dt = DType::F64;
  }
  Tensor result(std::move(out_shape), std::move(out), dt);
  bool any = false;
  for (const Tensor& s : steps) any = any || grad_wanted(s);
  if (!any) return result;
  Tape& tape = *Tape::current();
  std::vector<int> nodes;
  std::vector<bool> needs;
  for (const Tensor& s : steps) {
    nodes.push_back(tape.ensure_node(s));
    needs.push_back(s.requires_grad());
  }
  tape.record(result, nodes, [=](Tape& t_, int self) {
    const auto& g = t_.grad_of(self);
    for (size_t t = 0; t < T; ++t) {
      if (!needs[t]) continue;
      auto& acc = t_.grad_buffer(nodes[t]);
      for (size_t r = 0; r < R; ++r) {
        const double* src = g.data() + (r * T + t) * F;
        double* dst = acc.data() + r * F;
        for (size_t f = 0; f < F; ++f) dst[f] += src[f];
      }
    }
  });
  return result;
}

Tensor elu(const Tensor& x, double alpha) {
  return apply_unary(
      x,
      [alpha](double v) { return v > 0.0 ? v : alpha * (std::exp(v) - 1.0); },
      [alpha](double v, double y) { return v > 0.0 ? 1.0 : y + alpha; });
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add(matmul(x, w), b);
}

Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw NumericError("dropout rate must be in [0, 1), got " +
                       std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const double scale_up = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (double& m : mask) m = (rng.uniform() < rate) ? 0.0 : scale_up;
  return mul(x, Tensor(x.shape(), std::move(mask), x.dtype()));
}

std::pair<Tensor, Tensor> batch_norm_moments(const Tensor& x) {
  Tensor mean = mean_keep_last(x);
  Tensor centered = sub(x, mean);
  Tensor var = mean_keep_last(mul(centered, centered));
  return {mean, var};
}

Tensor batch_norm(const Tensor& x, const Tensor& mean, const Tensor& var,
                  const Tensor& gamma, const Tensor& beta, double eps) {
  Tensor denom = sqrt(add_scalar(var, eps));
  Tensor norm = div(sub(x, mean), denom);
  return add(mul(norm, gamma), beta);
}

}  // namespace eegtext
