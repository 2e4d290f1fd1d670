#include "mq/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include "mq/kernels.hpp"

namespace mq {
namespace {

thread_local bool t_grad_enabled = true;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shapes disagree: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Row count of a tensor treated as [rows x lastdim].
std::size_t rows_of(const Tensor& t) {
  if (t.rank() == 0) throw ShapeError("operation needs at least rank 1");
  return t.numel() / t.shape().back();
}

}  // namespace

void accum_grad(Node& dst, const Tensor& g) {
  if (!dst.wants_grad()) return;
  Tensor& t = dst.ensure_grad();
  kernels::active().axpy(1.0, g.data(), t.data(), t.numel());
}

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

bool grad_enabled() { return t_grad_enabled; }

Value Value::constant(Tensor t) { return leaf(std::move(t), false); }
Value Value::param(Tensor t) { return leaf(std::move(t), true); }

Value Value::leaf(Tensor t, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = requires_grad;
  n->leaf = true;
  return Value(std::move(n));
}

void Value::assign(Tensor t) {
  if (!node_->leaf) throw Error("assign: only leaf values can be reassigned");
  require_same_shape("assign", node_->value, t);
  t.check_finite("assign");
  node_->value = std::move(t);
}

Value make_op(const char* name, Tensor value, std::vector<Value> inputs,
              std::function<void(Node&)> bw) {
  value.check_finite(name);
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->leaf = false;
  n->op = name;
  bool needs = false;
  if (t_grad_enabled) {
    for (const Value& v : inputs) needs = needs || v.requires_grad();
  }
  n->requires_grad = needs;
  if (needs) {
    n->inputs.reserve(inputs.size());
    for (Value& v : inputs) n->inputs.push_back(v.node());
    n->backward_fn = std::move(bw);
  }
  return Value::wrap(std::move(n));
}

// ---- ops ----

Value matmul(const Value& a, const Value& b) {
  const Tensor& ta = a.val();
  const Tensor& tb = b.val();
  if (ta.rank() != 2 || tb.rank() != 2 || ta.dim(1) != tb.dim(0)) {
    throw ShapeError("matmul: incompatible shapes: " + shape_str(ta.shape()) + " vs " +
                     shape_str(tb.shape()));
  }
  const std::size_t m = ta.dim(0), k = ta.dim(1), n = tb.dim(1);
  Tensor out({m, n});
  kernels::active().matmul_nn(ta.data(), tb.data(), out.data(), m, k, n, false);
  return make_op("matmul", std::move(out), {a, b}, [m, k, n](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.wants_grad()) {
      // dA += dC * B^T
      Tensor bt = transpose2d(nb.value);
      kernels::active().matmul_nn(self.grad.data(), bt.data(), na.ensure_grad().data(), m, n, k,
                                  true);
    }
    if (nb.wants_grad()) {
      // dB += A^T * dC
      Tensor at = transpose2d(na.value);
      kernels::active().matmul_nn(at.data(), self.grad.data(), nb.ensure_grad().data(), k, m, n,
                                  true);
    }
  });
}

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a.val(), b.val());
  Tensor out(a.val().shape());
  kernels::active().add(a.val().data(), b.val().data(), out.data(), out.numel());
  return make_op("add", std::move(out), {a, b}, [](Node& self) {
    accum_grad(*self.inputs[0], self.grad);
    accum_grad(*self.inputs[1], self.grad);
  });
}

Value sub(const Value& a, const Value& b) {
  require_same_shape("sub", a.val(), b.val());
  Tensor out(a.val().shape());
  kernels::active().sub(a.val().data(), b.val().data(), out.data(), out.numel());
  return make_op("sub", std::move(out), {a, b}, [](Node& self) {
    accum_grad(*self.inputs[0], self.grad);
    Node& nb = *self.inputs[1];
    if (nb.wants_grad()) {
      Tensor& t = nb.ensure_grad();
      kernels::active().axpy(-1.0, self.grad.data(), t.data(), t.numel());
    }
  });
}

Value mul(const Value& a, const Value& b) {
  require_same_shape("mul", a.val(), b.val());
  Tensor out(a.val().shape());
  kernels::active().mul(a.val().data(), b.val().data(), out.data(), out.numel());
  return make_op("mul", std::move(out), {a, b}, [](Node& self) {
    Node& na = *self.inputs[0];
    Node& nb = *self.inputs[1];
    if (na.wants_grad()) {
      Tensor t(self.grad.shape());
      kernels::active().mul(self.grad.data(), nb.value.data(), t.data(), t.numel());
      accum_grad(na, t);
    }
    if (nb.wants_grad()) {
      Tensor t(self.grad.shape());
      kernels::active().mul(self.grad.data(), na.value.data(), t.data(), t.numel());
      accum_grad(nb, t);
    }
  });
}

Value scale(const Value& a, double c) {
  Tensor out(a.val().shape());
  kernels::active().scale(a.val().data(), c, out.data(), out.numel());
  return make_op("scale", std::move(out), {a}, [c](Node& self) {
    Node& na = *self.inputs[0];
    if (na.wants_grad()) {
      Tensor& t = na.ensure_grad();
      kernels::active().axpy(c, self.grad.data(), t.data(), t.numel());
    }
  });
}

Value relu(const Value& a) {
  Tensor out(a.val().shape());
  kernels::active().relu(a.val().data(), out.data(), out.numel());
  return make_op("relu", std::move(out), {a}, [](Node& self) {
    Node& na = *self.inputs[0];
    if (!na.wants_grad()) return;
    Tensor& t = na.ensure_grad();
    const double* x = na.value.data();
    const double* g = self.grad.data();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      if (x[i] > 0.0) t.at(i) += g[i];
    }
  });
}

Value gelu(const Value& a) {
  const Tensor& x = a.val();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    out.at(i) = 0.5 * x.at(i) * (1.0 + std::erf(x.at(i) * kInvSqrt2));
  }
  return make_op("gelu", std::move(out), {a}, [](Node& self) {
    Node& na = *self.inputs[0];
    if (!na.wants_grad()) return;
    Tensor& t = na.ensure_grad();
    const double* x = na.value.data();
    const double* g = self.grad.data();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
      t.at(i) += g[i] * (cdf + x[i] * pdf);
    }
  });
}

Value softmax_lastdim(const Value& xv) {
  const Tensor& x = xv.val();
  const std::size_t d = x.shape().back();
  const std::size_t rows = rows_of(x);
  Tensor out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * d;
    double* y = out.data() + r * d;
    double m = in[0];
    for (std::size_t i = 1; i < d; ++i) m = std::max(m, in[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      y[i] = std::exp(in[i] - m);
      s += y[i];
    }
    const double inv = 1.0 / s;
    for (std::size_t i = 0; i < d; ++i) y[i] *= inv;
  }
  return make_op("softmax_lastdim", std::move(out), {xv}, [d, rows](Node& self) {
    Node& na = *self.inputs[0];
    if (!na.wants_grad()) return;
    Tensor& t = na.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * d;
      const double* g = self.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += g[i] * y[i];
      double* dst = t.data() + r * d;
      for (std::size_t i = 0; i < d; ++i) dst[i] += y[i] * (g[i] - dot);
    }
  });
}

Value layer_norm(const Value& xv, const Value& gain, const Value& bias, double eps) {
  const Tensor& x = xv.val();
  const std::size_t d = x.shape().back();
  const std::size_t rows = rows_of(x);
  if (gain.val().numel() != d || bias.val().numel() != d) {
    throw ShapeError("layer_norm: gain/bias length must equal last dim " + std::to_string(d));
  }
  if (eps <= 0.0) throw Error("layer_norm: eps must be positive");
  Tensor out(x.shape());
  Tensor xhat(x.shape());    // cached for backward
  std::vector<double> inv_std(rows);
  const double* gd = gain.val().data();
  const double* bd = bias.val().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += in[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double c = in[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    double* xh = xhat.data() + r * d;
    double* y = out.data() + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      xh[i] = (in[i] - mean) * is;
      y[i] = xh[i] * gd[i] + bd[i];
    }
  }
  return make_op(
      "layer_norm", std::move(out), {xv, gain, bias},
      [d, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
        Node& nx = *self.inputs[0];
        Node& ngain = *self.inputs[1];
        Node& nbias = *self.inputs[2];
        const double* gd = ngain.value.data();
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = self.grad.data() + r * d;
          const double* xh = xhat.data() + r * d;
          if (ngain.wants_grad()) {
            Tensor& tg = ngain.ensure_grad();
            for (std::size_t i = 0; i < d; ++i) tg.at(i) += g[i] * xh[i];
          }
          if (nbias.wants_grad()) {
            Tensor& tb = nbias.ensure_grad();
            for (std::size_t i = 0; i < d; ++i) tb.at(i) += g[i];
          }
          if (nx.wants_grad()) {
            double sum_gh = 0.0, sum_ghx = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
              const double gh = g[i] * gd[i];
              sum_gh += gh;
              sum_ghx += gh * xh[i];
            }
            const double inv_d = 1.0 / static_cast<double>(d);
            Tensor& tx = nx.ensure_grad();
            double* dst = tx.data() + r * d;
            for (std::size_t i = 0; i < d; ++i) {
              const double gh = g[i] * gd[i];
              dst[i] += inv_std[r] * (gh - sum_gh * inv_d - xh[i] * sum_ghx * inv_d);
            }
          }
        }
      });
}

namespace {

struct ConcatLayout {
  std::size_t outer = 1;          // product of dims before axis
  std::size_t inner = 1;          // product of dims after axis
  std::vector<std::size_t> part_block;  // dim(axis) * inner, per part
  std::size_t total_block = 0;
};

ConcatLayout concat_layout(const std::vector<const Tensor*>& parts, std::size_t axis) {
  const Tensor& first = *parts.front();
  if (axis >= first.rank()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(first.shape()));
  }
  ConcatLayout lay;
  for (std::size_t a = 0; a < axis; ++a) lay.outer *= first.dim(a);
  for (std::size_t a = axis + 1; a < first.rank(); ++a) lay.inner *= first.dim(a);
  for (const Tensor* p : parts) {
    if (p->rank() != first.rank()) {
      throw ShapeError("concat: rank mismatch: " + shape_str(first.shape()) + " vs " +
                       shape_str(p->shape()));
    }
    for (std::size_t a = 0; a < first.rank(); ++a) {
      if (a != axis && p->dim(a) != first.dim(a)) {
        throw ShapeError("concat: non-concat dims differ: " + shape_str(first.shape()) + " vs " +
                         shape_str(p->shape()));
      }
    }
    lay.part_block.push_back(p->dim(axis) * lay.inner);
    lay.total_block += p->dim(axis) * lay.inner;
  }
  return lay;
}

}  // namespace

Value concat(const std::vector<Value>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  std::vector<const Tensor*> tensors;
  tensors.reserve(parts.size());
  for (const Value& v : parts) tensors.push_back(&v.val());
  ConcatLayout lay = concat_layout(tensors, axis);

  Shape out_shape = tensors.front()->shape();
  std::size_t axis_total = 0;
  for (const Tensor* p : tensors) axis_total += p->dim(axis);
  out_shape[axis] = axis_total;

  Tensor out(out_shape);
  for (std::size_t o = 0; o < lay.outer; ++o) {
    double* dst = out.data() + o * lay.total_block;
    for (std::size_t pi = 0; pi < tensors.size(); ++pi) {
      const std::size_t blk = lay.part_block[pi];
      const double* src = tensors[pi]->data() + o * blk;
      std::copy(src, src + blk, dst);
      dst += blk;
    }
  }
  return make_op("concat", std::move(out), parts, [lay](Node& self) {
    for (std::size_t o = 0; o < lay.outer; ++o) {
      const double* src = self.grad.data() + o * lay.total_block;
      for (std::size_t pi = 0; pi < self.inputs.size(); ++pi) {
        const std::size_t blk = lay.part_block[pi];
        Node& np = *self.inputs[pi];
        if (np.wants_grad()) {
          double* dst = np.ensure_grad().data() + o * blk;
          kernels::active().axpy(1.0, src, dst, blk);
        }
        src += blk;
      }
    }
  });
}

Value slice(const Value& xv, std::size_t axis, std::size_t start, std::size_t len) {
  const Tensor& x = xv.val();
  if (axis >= x.rank() || start + len > x.dim(axis) || len == 0) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") on axis " + std::to_string(axis) + " invalid for shape " +
                     shape_str(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= x.dim(a);
  for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
  const std::size_t src_block = x.dim(axis) * inner;
  const std::size_t dst_block = len * inner;

  Shape out_shape = x.shape();
  out_shape[axis] = len;
  Tensor out(out_shape);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* src = x.data() + o * src_block + start * inner;
    std::copy(src, src + dst_block, out.data() + o * dst_block);
  }
  return make_op("slice", std::move(out), {xv},
                 [outer, inner, src_block, dst_block, start](Node& self) {
                   Node& nx = *self.inputs[0];
                   if (!nx.wants_grad()) return;
                   Tensor& t = nx.ensure_grad();
                   for (std::size_t o = 0; o < outer; ++o) {
                     const double* src = self.grad.data() + o * dst_block;
                     double* dst = t.data() + o * src_block + start * inner;
                     kernels::active().axpy(1.0, src, dst, dst_block);
                   }
                 });
}

Value reshape(const Value& xv, Shape shape) {
  const Tensor& x = xv.val();
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor out(std::move(shape), x.vec());
  return make_op("reshape", std::move(out), {xv}, [](Node& self) {
    Node& nx = *self.inputs[0];
    if (!nx.wants_grad()) return;
    Tensor& t = nx.ensure_grad();
    kernels::active().axpy(1.0, self.grad.data(), t.data(), t.numel());
  });
}

Value flatten(const Value& x) { return reshape(x, {x.val().numel()}); }

Value transpose(const Value& xv) {
  Tensor out = transpose2d(xv.val());
  return make_op("transpose", std::move(out), {xv}, [](Node& self) {
    Node& nx = *self.inputs[0];
    if (!nx.wants_grad()) return;
    Tensor gt = transpose2d(self.grad);
    accum_grad(nx, gt);
  });
}

Value sum(const Value& xv) {
  const Tensor& x = xv.val();
  double s = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) s += x.at(i);
  return make_op("sum", Tensor::scalar(s), {xv}, [](Node& self) {
    Node& nx = *self.inputs[0];
    if (!nx.wants_grad()) return;
    Tensor& t = nx.ensure_grad();
    const double g = self.grad.at(0);
    for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) += g;
  });
}

// ---- reverse pass ----

void backward(const Value& loss) {
  if (!loss.defined()) throw Error("backward: undefined value");
  if (loss.val().numel() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  Node* root = loss.node().get();
  if (!root->requires_grad) return;  // nothing reachable tracks gradient
  if (root->leaf) {
    root->ensure_grad().at(0) += 1.0;
    return;
  }

  // Post-order DFS over grad-tracking interior edges. The order depends
  // only on graph structure, so concurrent graph construction upstream
  // cannot change the accumulation order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->inputs.size()) {
      Node* in = node->inputs[idx].get();
      ++idx;
      if (in->requires_grad && !in->leaf && visited.insert(in).second) {
        stack.emplace_back(in, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are transient: reset them for this pass so leaf
  // accumulation stays exactly additive across repeated backward calls.
  for (Node* n : order) n->ensure_grad().fill(0.0);
  root->grad.at(0) = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

double grad_check(const std::function<Value(const Value&)>& f, const Tensor& x, double h) {
  if (h <= 0.0) throw Error("grad_check: h must be positive");
  Value xv = Value::param(x);
  Value y = f(xv);
  if (y.val().numel() != 1) throw ShapeError("grad_check: f must return a scalar");
  backward(y);
  Tensor analytic = xv.grad();

  auto eval = [&](const Tensor& at) {
    NoGradGuard ng;
    return f(Value::constant(at)).val().item();
  };

  double max_rel = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double orig = probe.at(i);
    probe.at(i) = orig + h;
    const double fp = eval(probe);
    probe.at(i) = orig - h;
    const double fm = eval(probe);
    probe.at(i) = orig;
    const double cd = (fp - fm) / (2.0 * h);
    const double rel = std::abs(analytic.at(i) - cd) / std::max(1.0, std::abs(cd));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace mq
