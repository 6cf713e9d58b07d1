#ifndef EEGTEXT_TENSOR_HPP_
#define EEGTEXT_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace eegtext {

// Storage precision. Values are held as doubles either way; F32 tensors
// quantize every stored value through IEEE-754 single precision, so training
// runs in 32-bit arithmetic-equivalent precision while the gradient-check
// suite can demand full 64-bit.
enum class DType { F32, F64 };

using Shape = std::vector<size_t>;

size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// Immutable dense row-major array. Copies are shallow (shared storage);
// no operation mutates an existing tensor's data.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, DType dtype = DType::F64,
         bool requires_grad = false);

  static Tensor zeros(Shape shape, DType dtype = DType::F64,
                      bool requires_grad = false);
  static Tensor full(Shape shape, double value, DType dtype = DType::F64,
                     bool requires_grad = false);
  static Tensor scalar(double value, DType dtype = DType::F64,
                       bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  size_t ndim() const { return shape().size(); }
  size_t size() const;
  DType dtype() const;
  bool requires_grad() const;
  const std::vector<double>& values() const;
  double item() const;  // scalar tensors only

  // Same values, detached from any tape and never differentiated.
  Tensor detach() const;
  // Fresh storage re-quantized to the requested precision.
  Tensor astype(DType dtype) const;
  // Same flat values under a different shape (sizes must agree).
  // Differentiable: gradients map back element-for-element.
  Tensor reshaped(Shape shape) const;

  struct Impl {
    Shape shape;
    std::vector<double> values;
    DType dtype = DType::F64;
    bool requires_grad = false;
    Tape* tape = nullptr;  // set once the tensor participates in a taped op
    int node = -1;
  };
  const std::shared_ptr<Impl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<Impl> impl_;
};

// Per-forward-pass op record. Construction makes the tape current for the
// thread; destruction (after backward) releases it. Nodes are appended in
// execution order, which is a topological order by construction.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  // Called by op implementations: registers `t` as a leaf if it has no node
  // yet, returns its node id.
  int ensure_node(const Tensor& t);

  // Backward fn receives the tape and its own node id; it reads grad_of(id)
  // and accumulates into grad_buffer(parent).
  using BackwardFn = std::function<void(Tape&, int)>;
  int record(const Tensor& out, std::vector<int> parents, BackwardFn back);

  // Reverse-topological accumulation from a scalar root.
  void backward(const Tensor& root);

  // Gradient of a tensor registered on this tape; zeros if no flow reached
  // it. Same shape and dtype as the value.
  Tensor grad(const Tensor& t) const;

  const std::vector<double>& grad_of(int node) const;
  std::vector<double>& grad_buffer(int node);
  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn back;
    size_t out_size = 0;
  };
  std::vector<Node> nodes_;
  mutable std::vector<std::vector<double>> grads_;
  std::vector<std::shared_ptr<Tensor::Impl>> registered_;
  bool ran_backward_ = false;
};

// ---- Elementwise and linear-algebra primitives -------------------------
// Binary ops broadcast by the trailing-dimension rule: shapes are equal, or
// the smaller operand's shape equals a suffix of the larger's (a single-
// element tensor broadcasts against anything).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);

// Generic differentiable unary op: df receives (x, f(x)).
Tensor apply_unary(const Tensor& a, const std::function<double(double)>& f,
                   const std::function<double(double, double)>& df);

// Standard matrix product, 2-D only. Gradients dA = G.B^T, dB = A^T.G.
Tensor matmul(const Tensor& a, const Tensor& b);

// Sum of all elements -> scalar (shape {1}).
Tensor sum(const Tensor& a);

// Mean over all leading axes, keeping the last: (..., F) -> (F).
Tensor mean_keep_last(const Tensor& a);

// Concatenate along the last axis; leading dims must agree.
Tensor concat_last(const std::vector<Tensor>& parts);
// Slice [lo, hi) of the last axis.
Tensor slice_last(const Tensor& a, size_t lo, size_t hi);

// Convenience: backward from a scalar root on the tensor's own tape.
void backward(const Tensor& root);

// Central-difference gradient oracle: perturbs each element of x by ±step.
// f must be a pure scalar function; it is evaluated without any tape.
Tensor finite_diff(const std::function<double(const Tensor&)>& f,
                   const Tensor& x, double step = 1e-5);

}  // namespace eegtext

#endif  // EEGTEXT_TENSOR_HPP_
