#include "mq/blocks.hpp"

#include <cmath>
#include <string>

#include "mq/errors.hpp"

namespace mq {
namespace {

Tensor normal_tensor(Shape shape, double std, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t.at(i) = std * rng.next_normal();
  return t;
}

}  // namespace

LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng) {
  LinearParams p;
  p.weight = Value::param(normal_tensor({in, out}, kInitStd, rng));
  p.bias = Value::param(Tensor({out}));
  return p;
}

MhaParams init_mha(std::size_t model_dim, std::size_t heads, bool tie_kv, Rng& rng) {
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError("attention heads (" + std::to_string(heads) +
                      ") must divide model dim (" + std::to_string(model_dim) + ")");
  }
  MhaParams p;
  p.q_proj = init_linear(model_dim, model_dim, rng);
  p.k_proj = init_linear(model_dim, model_dim, rng);
  p.v_proj = init_linear(model_dim, model_dim, rng);
  p.out_proj = init_linear(model_dim, model_dim, rng);
  p.heads = heads;
  p.tie_kv = tie_kv;
  return p;
}

FfnParams init_ffn(std::size_t model_dim, Rng& rng) {
  FfnParams p;
  p.lin1 = init_linear(model_dim, 4 * model_dim, rng);
  p.lin2 = init_linear(4 * model_dim, model_dim, rng);
  return p;
}

MlpHeadParams init_mlp_head(std::size_t flat_in, Rng& rng) {
  MlpHeadParams p;
  p.lin1 = init_linear(flat_in, kHeadHidden, rng);
  p.lin2 = init_linear(kHeadHidden, kNumClasses, rng);
  return p;
}

Value linear(const Value& x, const LinearParams& p) {
  const Tensor& xt = x.val();
  if (xt.rank() != 2 || xt.dim(1) != p.in_dim()) {
    throw ShapeError("linear: input " + shape_str(xt.shape()) + " incompatible with weight " +
                     shape_str(p.weight.val().shape()));
  }
  Value y = matmul(x, p.weight);
  // Broadcast bias over rows via a custom op; cheaper than materializing
  // a bias matrix node per call.
  const std::size_t rows = y.val().dim(0), out = p.out_dim();
  Tensor v = y.val();
  const double* b = p.bias.val().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = v.data() + r * out;
    for (std::size_t j = 0; j < out; ++j) row[j] += b[j];
  }
  return make_op("linear_bias", std::move(v), {y, p.bias}, [rows, out](Node& self) {
    accum_grad(*self.inputs[0], self.grad);
    Node& nb = *self.inputs[1];
    if (!nb.wants_grad()) return;
    Tensor& tb = nb.ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = self.grad.data() + r * out;
      for (std::size_t j = 0; j < out; ++j) tb.at(j) += g[j];
    }
  });
}

Value mha(const Value& q_in, const Value& kv_in, const MhaParams& p, MhaProbe* probe) {
  const std::size_t d = p.model_dim();
  if (q_in.val().rank() != 2 || q_in.val().dim(1) != d) {
    throw ShapeError("mha: query input " + shape_str(q_in.shape()) + " last dim must be " +
                     std::to_string(d));
  }
  if (kv_in.val().rank() != 2 || kv_in.val().dim(1) != d) {
    throw ShapeError("mha: key/value input " + shape_str(kv_in.shape()) + " last dim must be " +
                     std::to_string(d));
  }
  const std::size_t dk = p.head_dim();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Value q = linear(q_in, p.q_proj);
  Value k = linear(kv_in, p.k_proj);
  Value v = linear(kv_in, p.tie_kv ? p.k_proj : p.v_proj);

  std::vector<Value> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    Value qh = slice(q, 1, h * dk, dk);
    Value kh = slice(k, 1, h * dk, dk);
    Value vh = slice(v, 1, h * dk, dk);
    Value scores = scale(matmul(qh, transpose(kh)), inv_scale);
    Value weights = softmax_lastdim(scores);
    if (probe) probe->head_weights.push_back(weights.val());
    heads.push_back(matmul(weights, vh));
  }
  Value cat = heads.size() == 1 ? heads.front() : concat(heads, 1);
  return linear(cat, p.out_proj);
}

namespace {

// y = x * W + b with plain loops (oracle path).
Tensor oracle_linear(const Tensor& x, const LinearParams& p) {
  const std::size_t n = x.dim(0), in = x.dim(1), out = p.out_dim();
  Tensor y({n, out});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out; ++j) {
      double s = p.bias.val().at(j);
      for (std::size_t q = 0; q < in; ++q) s += x.at2(i, q) * p.weight.val().at2(q, j);
      y.at2(i, j) = s;
    }
  }
  return y;
}

}  // namespace

Tensor mha_oracle(const Tensor& q_in, const Tensor& kv_in, const MhaParams& p) {
  const std::size_t d = p.model_dim();
  const std::size_t dk = p.head_dim();
  const std::size_t n_q = q_in.dim(0), n_kv = kv_in.dim(0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor q = oracle_linear(q_in, p.q_proj);
  Tensor k = oracle_linear(kv_in, p.k_proj);
  Tensor v = oracle_linear(kv_in, p.tie_kv ? p.k_proj : p.v_proj);

  Tensor cat({n_q, d});
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t off = h * dk;
    for (std::size_t i = 0; i < n_q; ++i) {
      // scores for query row i against every key row
      std::vector<double> s(n_kv);
      for (std::size_t j = 0; j < n_kv; ++j) {
        double dot = 0.0;
        for (std::size_t c = 0; c < dk; ++c) dot += q.at2(i, off + c) * k.at2(j, off + c);
        s[j] = dot * scale;
      }
      double m = s[0];
      for (std::size_t j = 1; j < n_kv; ++j) m = std::max(m, s[j]);
      double z = 0.0;
      for (std::size_t j = 0; j < n_kv; ++j) {
        s[j] = std::exp(s[j] - m);
        z += s[j];
      }
      for (std::size_t j = 0; j < n_kv; ++j) s[j] /= z;
      for (std::size_t c = 0; c < dk; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n_kv; ++j) acc += s[j] * v.at2(j, off + c);
        cat.at2(i, off + c) = acc;
      }
    }
  }
  return oracle_linear(cat, p.out_proj);
}

Value ffn(const Value& x, const FfnParams& p) {
  return linear(gelu(linear(x, p.lin1)), p.lin2);
}

Value mlp_head(const Value& x_flat, const MlpHeadParams& p) {
  const Tensor& x = x_flat.val();
  if (x.rank() != 1 || x.numel() != p.flat_in()) {
    throw ConfigError("mlp_head: flattened input length " + std::to_string(x.numel()) +
                      " does not match head flat_in " + std::to_string(p.flat_in()) +
                      " (V2X config / checkpoint mismatch)");
  }
  Value row = reshape(x_flat, {1, p.flat_in()});
  Value hidden = relu(linear(row, p.lin1));
  Value logits = linear(hidden, p.lin2);
  return reshape(logits, {kNumClasses});
}

void collect_params(const LinearParams& p, std::vector<Value>& out) {
  out.push_back(p.weight);
  out.push_back(p.bias);
}

void collect_params(const MhaParams& p, std::vector<Value>& out) {
  collect_params(p.q_proj, out);
  collect_params(p.k_proj, out);
  collect_params(p.v_proj, out);
  collect_params(p.out_proj, out);
}

void collect_params(const FfnParams& p, std::vector<Value>& out) {
  collect_params(p.lin1, out);
  collect_params(p.lin2, out);
}

void collect_params(const MlpHeadParams& p, std::vector<Value>& out) {
  collect_params(p.lin1, out);
  collect_params(p.lin2, out);
}

}  // namespace mq
