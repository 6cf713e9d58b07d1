#include "eegtext/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eegtext/errors.hpp"

namespace eegtext {

size_t shape_size(const Shape& s) {
  size_t n = 1;
  for (size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

namespace {

thread_local Tape* g_current_tape = nullptr;

void quantize_f32(std::vector<double>& v) {
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

void check_finite(const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw NumericError("tensor holds a non-finite value");
    }
  }
}

DType result_dtype(const Tensor& a, const Tensor& b) {
  return (a.dtype() == DType::F64 || b.dtype() == DType::F64) ? DType::F64
                                                              : DType::F32;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values, DType dtype,
               bool requires_grad) {
  for (size_t d : shape) {
    if (d == 0) throw NumericError("zero extent in shape " + shape_str(shape));
  }
  if (shape_size(shape) != values.size()) {
    throw NumericError("shape " + shape_str(shape) + " does not match " +
                       std::to_string(values.size()) + " values");
  }
  check_finite(values);
  if (dtype == DType::F32) quantize_f32(values);
  impl_ = std::make_shared<Impl>();
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
  impl_->dtype = dtype;
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, DType dtype, bool requires_grad) {
  std::vector<double> v(shape_size(shape), 0.0);
  return Tensor(std::move(shape), std::move(v), dtype, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, DType dtype,
                    bool requires_grad) {
  std::vector<double> v(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(v), dtype, requires_grad);
}

Tensor Tensor::scalar(double value, DType dtype, bool requires_grad) {
  return Tensor({1}, {value}, dtype, requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw NumericError("use of an undefined tensor");
  return impl_->shape;
}

size_t Tensor::size() const { return impl_ ? impl_->values.size() : 0; }

DType Tensor::dtype() const {
  if (!impl_) throw NumericError("use of an undefined tensor");
  return impl_->dtype;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

const std::vector<double>& Tensor::values() const {
  if (!impl_) throw NumericError("use of an undefined tensor");
  return impl_->values;
}

double Tensor::item() const {
  if (size() != 1) {
    throw NumericError("item() on non-scalar tensor " + shape_str(shape()));
  }
  return impl_->values[0];
}

Tensor Tensor::detach() const {
  if (!impl_) return Tensor();
  auto copy = std::make_shared<Impl>();
  copy->shape = impl_->shape;
  copy->values = impl_->values;
  copy->dtype = impl_->dtype;
  copy->requires_grad = false;
  return Tensor(std::move(copy));
}

Tensor Tensor::astype(DType dtype) const {
  return Tensor(shape(), values(), dtype, requires_grad());
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw NumericError("reshape " + shape_str(this->shape()) + " -> " +
                       shape_str(shape) + " changes element count");
  }
  Tensor result(std::move(shape), impl_->values, impl_->dtype);
  Tape* tape = Tape::current();
  if (tape != nullptr && requires_grad()) {
    int na = tape->ensure_node(*this);
    const size_t n = impl_->values.size();
    tape->record(result, {na}, [na, n](Tape& t, int self) {
      const auto& g = t.grad_of(self);
      auto& acc = t.grad_buffer(na);
      for (size_t i = 0; i < n; ++i) acc[i] += g[i];
    });
  }
  return result;
}

// ---- Tape ---------------------------------------------------------------

Tape::Tape() {
  if (g_current_tape != nullptr) {
    throw NumericError("a tape is already active on this thread");
  }
  g_current_tape = this;
}

Tape::~Tape() {
  // Leave every participating tensor a clean leaf so it can join a later
  // tape (parameters are reused across training steps).
  for (auto& impl : registered_) {
    if (impl->tape == this) {
      impl->tape = nullptr;
      impl->node = -1;
    }
  }
  if (g_current_tape == this) g_current_tape = nullptr;
}

Tape* Tape::current() { return g_current_tape; }

int Tape::ensure_node(const Tensor& t) {
  auto& impl = *t.impl();
  if (impl.tape == this && impl.node >= 0) return impl.node;
  if (impl.tape != nullptr && impl.tape != this) {
    throw NumericError("tensor already belongs to a different tape");
  }
  impl.tape = this;
  impl.node = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{{}, nullptr, impl.values.size()});
  grads_.emplace_back();
  registered_.push_back(t.impl());
  return impl.node;
}

int Tape::record(const Tensor& out, std::vector<int> parents, BackwardFn back) {
  auto& impl = *out.impl();
  impl.tape = this;
  impl.node = static_cast<int>(nodes_.size());
  impl.requires_grad = true;
  nodes_.push_back(Node{std::move(parents), std::move(back), impl.values.size()});
  grads_.emplace_back();
  registered_.push_back(out.impl());
  return impl.node;
}

const std::vector<double>& Tape::grad_of(int node) const {
  if (grads_[static_cast<size_t>(node)].empty()) {
    grads_[static_cast<size_t>(node)].assign(nodes_[static_cast<size_t>(node)].out_size, 0.0);
  }
  return grads_[static_cast<size_t>(node)];
}

std::vector<double>& Tape::grad_buffer(int node) {
  auto& g = grads_[static_cast<size_t>(node)];
  if (g.empty()) g.assign(nodes_[static_cast<size_t>(node)].out_size, 0.0);
  return g;
}

void Tape::backward(const Tensor& root) {
  if (root.size() != 1) {
    throw NumericError("backward() needs a scalar root, got " +
                       shape_str(root.shape()));
  }
  if (root.impl()->tape != this || root.impl()->node < 0) {
    throw NumericError("backward() root is not on this tape");
  }
  if (ran_backward_) {
    throw NumericError("backward() already ran on this tape");
  }
  ran_backward_ = true;
  grad_buffer(root.impl()->node)[0] = 1.0;
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.back) continue;
    if (grads_[static_cast<size_t>(i)].empty()) continue;  // no flow reached this node
    n.back(*this, i);
  }
}

Tensor Tape::grad(const Tensor& t) const {
  if (t.impl()->tape != this || t.impl()->node < 0) {
    throw NumericError("grad() of a tensor not registered on this tape");
  }
  const auto& g = grads_[static_cast<size_t>(t.impl()->node)];
  if (g.empty()) return Tensor::zeros(t.shape(), t.dtype());
  return Tensor(t.shape(), g, t.dtype());
}

void backward(const Tensor& root) {
  if (root.impl()->tape == nullptr) {
    throw NumericError("backward() on a tensor produced without a tape");
  }
  root.impl()->tape->backward(root);
}

// ---- Op helpers ----------------------------------------------------------

namespace {

bool grad_wanted(const Tensor& t) {
  return Tape::current() != nullptr && t.requires_grad();
}

// Resolves the trailing-dimension broadcast between two shapes.
// Returns the output shape; small_size is set to the element count of the
// broadcast operand (== output size when shapes match).
Shape broadcast_shape(const Tensor& a, const Tensor& b, bool& a_is_small,
                      bool& any_broadcast) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) {
    a_is_small = false;
    any_broadcast = false;
    return sa;
  }
  any_broadcast = true;
  const Shape* big = &sa;
  const Shape* small = &sb;
  a_is_small = false;
  if (a.size() < b.size()) {
    big = &sb;
    small = &sa;
    a_is_small = true;
  } else if (a.size() == b.size()) {
    // Equal element counts can still broadcast, e.g. (1,6) against (6):
    // treat the operand with fewer axes as the suffix.
    if (sb.size() >= sa.size()) {
      big = &sb;
      small = &sa;
      a_is_small = true;
    }
  }
  if (shape_size(*small) == 1) return *big;
  if (small->size() >= big->size()) {
    throw NumericError("shape mismatch " + shape_str(sa) + " vs " +
                       shape_str(sb));
  }
  for (size_t i = 0; i < small->size(); ++i) {
    if ((*small)[i] != (*big)[big->size() - small->size() + i]) {
      throw NumericError("trailing-dimension broadcast failed: " +
                         shape_str(sa) + " vs " + shape_str(sb));
    }
  }
  return *big;
}

// out[i] = op(a[i], b[i % bsize]) with a the large operand.
template <typename Op>
std::vector<double> map_binary(const std::vector<double>& big,
                               const std::vector<double>& small, Op op) {
  std::vector<double> out(big.size());
  const size_t m = small.size();
  if (m == big.size()) {
    for (size_t i = 0; i < big.size(); ++i) out[i] = op(big[i], small[i]);
  } else {
    for (size_t i = 0; i < big.size(); ++i) out[i] = op(big[i], small[i % m]);
  }
  return out;
}

// Accumulates a full-size gradient into a broadcast operand's buffer.
void reduce_into(std::vector<double>& acc, const std::vector<double>& g) {
  const size_t m = acc.size();
  if (m == g.size()) {
    for (size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
  } else {
    for (size_t i = 0; i < g.size(); ++i) acc[i % m] += g[i];
  }
}

enum class BinKind { Add, Sub, Mul, Div };

Tensor binary_op(BinKind kind, const Tensor& a, const Tensor& b) {
  bool a_small = false, bcast = false;
  Shape out_shape = broadcast_shape(a, b, a_small, bcast);
  const Tensor& big = a_small ? b : a;
  const Tensor& small = a_small ? a : b;
  const auto& vb = big.values();
  const auto& vs = small.values();

  // With Sub/Div the roles of the operands are not symmetric; op() below is
  // always called as op(big, small), so flip where needed.
  const bool flipped = a_small;
  std::vector<double> out;
  switch (kind) {
    case BinKind::Add:
      out = map_binary(vb, vs, [](double x, double y) { return x + y; });
      break;
    case BinKind::Sub:
      out = flipped
                ? map_binary(vb, vs, [](double x, double y) { return y - x; })
                : map_binary(vb, vs, [](double x, double y) { return x - y; });
      break;
    case BinKind::Mul:
      out = map_binary(vb, vs, [](double x, double y) { return x * y; });
      break;
    case BinKind::Div: {
      const auto& denom = flipped ? vb : vs;
      const size_t m = denom.size();
      for (size_t i = 0; i < m; ++i) {
        if (denom[i] == 0.0) throw NumericError("division by zero");
      }
      out = flipped
                ? map_binary(vb, vs, [](double x, double y) { return y / x; })
                : map_binary(vb, vs, [](double x, double y) { return x / y; });
      break;
    }
  }
  Tensor result(std::move(out_shape), std::move(out), result_dtype(a, b));
  if (!grad_wanted(a) && !grad_wanted(b)) return result;

  Tape& tape = *Tape::current();
  int na = tape.ensure_node(a);
  int nb = tape.ensure_node(b);
  bool need_a = a.requires_grad();
  bool need_b = b.requires_grad();
  auto ia = a.impl();
  auto ib = b.impl();
  tape.record(result, {na, nb}, [=](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    switch (kind) {
      case BinKind::Add: {
        if (need_a) reduce_into(t.grad_buffer(na), g);
        if (need_b) reduce_into(t.grad_buffer(nb), g);
        break;
      }
      case BinKind::Sub: {
        if (need_a) reduce_into(t.grad_buffer(na), g);
        if (need_b) {
          std::vector<double> gn(g.size());
          for (size_t i = 0; i < g.size(); ++i) gn[i] = -g[i];
          reduce_into(t.grad_buffer(nb), gn);
        }
        break;
      }
      case BinKind::Mul: {
        if (need_a) {
          std::vector<double> ga(g.size());
          const auto& vb2 = ib->values;
          const size_t m = vb2.size();
          for (size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * vb2[i % m];
          reduce_into(t.grad_buffer(na), ga);
        }
        if (need_b) {
          std::vector<double> gb(g.size());
          const auto& va2 = ia->values;
          const size_t m = va2.size();
          for (size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * va2[i % m];
          reduce_into(t.grad_buffer(nb), gb);
        }
        break;
      }
      case BinKind::Div: {
        const auto& va2 = ia->values;
        const auto& vb2 = ib->values;
        const size_t ma = va2.size();
        const size_t mb = vb2.size();
        if (need_a) {
          std::vector<double> ga(g.size());
          for (size_t i = 0; i < g.size(); ++i) ga[i] = g[i] / vb2[i % mb];
          reduce_into(t.grad_buffer(na), ga);
        }
        if (need_b) {
          std::vector<double> gb(g.size());
          for (size_t i = 0; i < g.size(); ++i) {
            double bv = vb2[i % mb];
            gb[i] = -g[i] * va2[i % ma] / (bv * bv);
          }
          reduce_into(t.grad_buffer(nb), gb);
        }
        break;
      }
    }
  });
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(BinKind::Div, a, b); }

Tensor apply_unary(const Tensor& a, const std::function<double(double)>& f,
                   const std::function<double(double, double)>& df) {
  const auto& va = a.values();
  std::vector<double> out(va.size());
  for (size_t i = 0; i < va.size(); ++i) out[i] = f(va[i]);
  Tensor result(a.shape(), std::move(out), a.dtype());
  if (!grad_wanted(a)) return result;
  Tape& tape = *Tape::current();
  int na = tape.ensure_node(a);
  auto ia = a.impl();
  auto iy = result.impl();
  tape.record(result, {na}, [=](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    auto& acc = t.grad_buffer(na);
    for (size_t i = 0; i < g.size(); ++i) {
      acc[i] += g[i] * df(ia->values[i], iy->values[i]);
    }
  });
  return result;
}

Tensor neg(const Tensor& a) {
  return apply_unary(a, [](double x) { return -x; },
                     [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double c) {
  return apply_unary(a, [c](double x) { return c * x; },
                     [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return apply_unary(a, [c](double x) { return x + c; },
                     [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return apply_unary(a,
                     [](double x) {
                       if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                       double e = std::exp(x);
                       return e / (1.0 + e);
                     },
                     [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return apply_unary(a, [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return apply_unary(a, [](double x) { return std::exp(x); },
                     [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (double x : a.values()) {
    if (x <= 0.0) throw NumericError("log of a non-positive value");
  }
  return apply_unary(a, [](double x) { return std::log(x); },
                     [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.values()) {
    if (x < 0.0) throw NumericError("sqrt of a negative value");
  }
  return apply_unary(a, [](double x) { return std::sqrt(x); },
                     [](double, double y) { return 0.5 / y; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw NumericError("matmul needs 2-D operands, got " +
                       shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const size_t m = a.shape()[0], k = a.shape()[1];
  const size_t k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2) {
    throw NumericError("matmul inner dimensions disagree: " +
                       shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const double* pa = a.values().data();
  const double* pb = b.values().data();
  std::vector<double> out(m * n, 0.0);
  for (size_t i = 0; i < m; ++i) {
    double* po = out.data() + i * n;
    const double* pai = pa + i * k;
    for (size_t kk = 0; kk < k; ++kk) {
      const double aik = pai[kk];
      const double* pbk = pb + kk * n;
      for (size_t j = 0; j < n; ++j) po[j] += aik * pbk[j];
    }
  }
  Tensor result({m, n}, std::move(out), result_dtype(a, b));
  if (!grad_wanted(a) && !grad_wanted(b)) return result;
  Tape& tape = *Tape::current();
  int na = tape.ensure_node(a);
  int nb = tape.ensure_node(b);
  bool need_a = a.requires_grad();
  bool need_b = b.requires_grad();
  auto ia = a.impl();
  auto ib = b.impl();
  tape.record(result, {na, nb}, [=](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    if (need_a) {
      // dA = G . B^T
      auto& acc = t.grad_buffer(na);
      const double* pg = g.data();
      const double* pbv = ib->values.data();
      for (size_t i = 0; i < m; ++i) {
        for (size_t kk = 0; kk < k; ++kk) {
          double s = 0.0;
          const double* pgi = pg + i * n;
          const double* pbk = pbv + kk * n;
          for (size_t j = 0; j < n; ++j) s += pgi[j] * pbk[j];
          acc[i * k + kk] += s;
        }
      }
    }
    if (need_b) {
      // dB = A^T . G
      auto& acc = t.grad_buffer(nb);
      const double* pg = g.data();
      const double* pav = ia->values.data();
      for (size_t kk = 0; kk < k; ++kk) {
        double* pacc = acc.data() + kk * n;
        for (size_t i = 0; i < m; ++i) {
          const double aik = pav[i * k + kk];
          const double* pgi = pg + i * n;
          for (size_t j = 0; j < n; ++j) pacc[j] += aik * pgi[j];
        }
      }
    }
  });
  return result;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  Tensor result = Tensor::scalar(s, a.dtype());
  if (!grad_wanted(a)) return result;
  Tape& tape = *Tape::current();
  int na = tape.ensure_node(a);
  size_t n = a.size();
  tape.record(result, {na}, [=](Tape& t, int self) {
    const double g = t.grad_of(self)[0];
    auto& acc = t.grad_buffer(na);
    for (size_t i = 0; i < n; ++i) acc[i] += g;
  });
  return result;
}

Tensor mean_keep_last(const Tensor& a) {
  if (a.ndim() < 1) throw NumericError("mean_keep_last on a scalar");
  const size_t f = a.shape().back();
  const size_t rows = a.size() / f;
  const auto& v = a.values();
  std::vector<double> out(f, 0.0);
  for (size_t r = 0; r < rows; ++r) {
    const double* p = v.data() + r * f;
    for (size_t j = 0; j < f; ++j) out[j] += p[j];
  }
  const double inv = 1.0 / static_cast<double>(rows);
  for (double& x : out) x *= inv;
  Tensor result({f}, std::move(out), a.dtype());
  if (!grad_wanted(a)) return result;
  Tape& tape = *Tape::current();
  int na = tape.ensure_node(a);
  tape.record(result, {na}, [=](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    auto& acc = t.grad_buffer(na);
    for (size_t r = 0; r < rows; ++r) {
      double* p = acc.data() + r * f;
      for (size_t j = 0; j < f; ++j) p[j] += g[j] * inv;
    }
  });
  return result;
}

Tensor concat_last(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw NumericError("concat_last of nothing");
  Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  size_t total_f = 0;
  DType dt = DType::F32;
  for (const Tensor& p : parts) {
    Shape pl(p.shape().begin(), p.shape().end() - 1);
    if (pl != lead) {
      throw NumericError("concat_last leading dims disagree: " +
                         shape_str(parts[0].shape()) + " vs " +
                         shape_str(p.shape()));
    }
    total_f += p.shape().back();
    if (p.dtype() == DType::F64) dt = DType::F64;
  }
  const size_t rows = shape_size(lead);
  std::vector<double> out(rows * total_f);
  size_t offset = 0;
  for (const Tensor& p : parts) {
    const size_t f = p.shape().back();
    const auto& v = p.values();
    for (size_t r = 0; r < rows; ++r) {
      std::copy(v.begin() + static_cast<long>(r * f),
                v.begin() + static_cast<long>((r + 1) * f),
                out.begin() + static_cast<long>(r * total_f + offset));
    }
    offset += f;
  }
  Shape out_shape = lead;
  out_shape.push_back(total_f);
  Tensor result(std::move(out_shape), std::move(out), dt);
  bool any = false;
  for (const Tensor& p : parts) any = any || grad_wanted(p);
  if (!any) return result;
  Tape& tape = *Tape::current();
  std::vector<int> nodes;
  std::vector<size_t> widths, offsets;
  std::vector<bool> needs;
  size_t off = 0;
  for (const Tensor& p : parts) {
    nodes.push_back(tape.ensure_node(p));
    widths.push_back(p.shape().back());
    offsets.push_back(off);
    needs.push_back(p.requires_grad());
    off += p.shape().back();
  }
  tape.record(result, nodes, [=](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    for (size_t pi = 0; pi < nodes.size(); ++pi) {
      if (!needs[pi]) continue;
      auto& acc = t.grad_buffer(nodes[pi]);
      const size_t f = widths[pi];
      for (size_t r = 0; r < rows; ++r) {
        const double* src = g.data() + r * total_f + offsets[pi];
        double* dst = acc.data() + r * f;
        for (size_t j = 0; j < f; ++j) dst[j] += src[j];
      }
    }
  });
  return result;
}

Tensor slice_last(const Tensor& a, size_t lo, size_t hi) {
  const size_t f = a.shape().back();
  if (lo >= hi || hi > f) {
    throw NumericError("slice_last [" + std::to_string(lo) + "," +
                       std::to_string(hi) + ") out of range for " +
                       shape_str(a.shape()));
  }
  const size_t w = hi - lo;
  const size_t rows = a.size() / f;
  const auto& v = a.values();
  std::vector<double> out(rows * w);
  for (size_t r = 0; r < rows; ++r) {
    std::copy(v.begin() + static_cast<long>(r * f + lo),
              v.begin() + static_cast<long>(r * f + hi),
              out.begin() + static_cast<long>(r * w));
  }
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(w);
  Tensor result(std::move(out_shape), std::move(out), a.dtype());
  if (!grad_wanted(a)) return result;
  Tape& tape = *Tape::current();
  int na = tape.ensure_node(a);
  tape.record(result, {na}, [=](Tape& t, int self) {
    const auto& g = t.grad_of(self);
    auto& acc = t.grad_buffer(na);
    for (size_t r = 0; r < rows; ++r) {
      const double* src = g.data() + r * w;
      double* dst = acc.data() + r * f + lo;
      for (size_t j = 0; j < w; ++j) dst[j] += src[j];
    }
  });
  return result;
}

Tensor finite_diff(const std::function<double(const Tensor&)>& f,
                   const Tensor& x, double step) {
  std::vector<double> grad(x.size());
  const auto& base = x.values();
  for (size_t i = 0; i < x.size(); ++i) {
    std::vector<double> vp = base;
    std::vector<double> vm = base;
    vp[i] += step;
    vm[i] -= step;
    double fp = f(Tensor(x.shape(), std::move(vp), x.dtype()));
    double fm = f(Tensor(x.shape(), std::move(vm), x.dtype()));
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return Tensor(x.shape(), std::move(grad), x.dtype());
}

}  // namespace eegtext
