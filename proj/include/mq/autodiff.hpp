#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "mq/tensor.hpp"

namespace mq {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the computation graph: a value, its accumulated gradient,
// and enough provenance (inputs + backward closure) to run reverse mode.
// Values are immutable after construction except for parameter updates by
// the optimizer and gradient accumulation during backward.
struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily; shape mirrors value once touched
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<NodePtr> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (grad.numel() == 0) grad = Tensor::zeros_like(value);
    return grad;
  }
  bool wants_grad() const { return requires_grad; }
};

// Cheap handle to a graph node. Copying shares the node.
class Value {
 public:
  Value() = default;

  // Leaf holding plain data; no gradient is accumulated into it.
  static Value constant(Tensor t);
  // Leaf that accumulates gradient (parameters, probed inputs).
  static Value param(Tensor t);
  static Value leaf(Tensor t, bool requires_grad);

  bool defined() const { return node_ != nullptr; }
  const Tensor& val() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }

  // Gradient accumulated so far (zeros if never touched).
  const Tensor& grad() const { return node_->ensure_grad(); }
  void zero_grad() { node_->ensure_grad().fill(0.0); }

  // In-place update of a leaf's value (optimizer step). The new tensor
  // must keep the shape; values are checked finite.
  void assign(Tensor t);

  bool requires_grad() const { return node_->requires_grad; }
  NodePtr node() const { return node_; }
  static Value wrap(NodePtr n) { return Value(std::move(n)); }

 private:
  explicit Value(NodePtr n) : node_(std::move(n)) {}
  NodePtr node_;
};

// While alive on a thread, newly created ops do not record provenance:
// outputs are constants. Forward-only passes use this to skip tape costs.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

// Extension point for modules that define their own differentiable ops.
// `bw` receives the output node after its grad is seeded; it accumulates
// into input grads. Provenance is dropped under NoGradGuard.
Value make_op(const char* name, Tensor value, std::vector<Value> inputs,
              std::function<void(Node&)> bw);

// dst.grad += g; no-op when dst does not track gradient. For use inside
// backward closures.
void accum_grad(Node& dst, const Tensor& g);

// ---- differentiable operations ----

Value matmul(const Value& a, const Value& b);       // [m x k] * [k x n]
Value add(const Value& a, const Value& b);          // same shape
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);          // elementwise
Value scale(const Value& a, double c);
Value relu(const Value& a);                         // relu'(0) = 0
Value gelu(const Value& a);                         // exact erf form
Value softmax_lastdim(const Value& x);              // max-subtracted, rows sum to 1
Value layer_norm(const Value& x, const Value& gain, const Value& bias, double eps = 1e-5);
Value concat(const std::vector<Value>& parts, std::size_t axis);
Value slice(const Value& x, std::size_t axis, std::size_t start, std::size_t len);
Value reshape(const Value& x, Shape shape);
Value flatten(const Value& x);
Value transpose(const Value& x);                    // rank 2
Value sum(const Value& x);                          // scalar

// Reverse pass from a scalar loss. Interior gradients are transient per
// call; leaf gradients accumulate additively across calls until zeroed,
// which is what lets fan-out (and repeated backward) sum contributions.
void backward(const Value& loss);

// Max over coordinates of |analytic - central difference| / max(1, |cd|)
// for a scalar-valued function of one tensor.
double grad_check(const std::function<Value(const Value&)>& f, const Tensor& x, double h = 1e-5);

}  // namespace mq
