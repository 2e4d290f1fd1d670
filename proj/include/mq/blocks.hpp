#pragma once

#include <cstddef>
#include <vector>

#include "mq/autodiff.hpp"
#include "mq/rng.hpp"

namespace mq {

// Weight + bias of an affine map, held as graph leaves so the optimizer
// and backward pass see them directly.
struct LinearParams {
  Value weight;  // [in x out]
  Value bias;    // [out]

  std::size_t in_dim() const { return weight.val().dim(0); }
  std::size_t out_dim() const { return weight.val().dim(1); }
};

struct MhaParams {
  LinearParams q_proj, k_proj, v_proj, out_proj;  // all D -> D
  std::size_t heads = 1;
  // Eq-literal shared K/V projection: V uses k_proj and v_proj is unused.
  bool tie_kv = true;

  std::size_t model_dim() const { return q_proj.in_dim(); }
  std::size_t head_dim() const { return model_dim() / heads; }
};

struct FfnParams {
  LinearParams lin1;  // D -> 4D, gelu
  LinearParams lin2;  // 4D -> D
};

// Two-logit classifier head over the flattened gathered queries.
// Class 0 = no accident, class 1 = accident.
struct MlpHeadParams {
  LinearParams lin1;  // flat_in -> hidden, relu
  LinearParams lin2;  // hidden -> 2

  std::size_t flat_in() const { return lin1.in_dim(); }
};

inline constexpr std::size_t kHeadHidden = 256;
inline constexpr std::size_t kNumClasses = 2;
inline constexpr double kInitStd = 0.02;

// Weights ~ Normal(0, 0.02^2), biases zero; deterministic given the rng
// state. Draws happen in row-major order, one tensor at a time.
LinearParams init_linear(std::size_t in, std::size_t out, Rng& rng);
MhaParams init_mha(std::size_t model_dim, std::size_t heads, bool tie_kv, Rng& rng);
FfnParams init_ffn(std::size_t model_dim, Rng& rng);
MlpHeadParams init_mlp_head(std::size_t flat_in, Rng& rng);

// x[n x in] * W + b (bias broadcast over rows).
Value linear(const Value& x, const LinearParams& p);

// Per-head attention weights captured during forward, for tests that need
// to look at the raw softmax rows.
struct MhaProbe {
  std::vector<Tensor> head_weights;  // heads x [n_q x n_kv]
};

// Scaled dot-product attention, H heads, scale 1/sqrt(D/H), heads
// concatenated then out-projected. kv_in supplies both keys and values.
Value mha(const Value& q_in, const Value& kv_in, const MhaParams& p, MhaProbe* probe = nullptr);

// Same math as mha, scalar loops only, no shared code with the kernel
// path. Reference oracle for equivalence tests.
Tensor mha_oracle(const Tensor& q_in, const Tensor& kv_in, const MhaParams& p);

Value ffn(const Value& x, const FfnParams& p);

// Accepts the flattened gather output (1-D) and emits 2 class logits.
// A length mismatch signals a V2X-config/head disagreement.
Value mlp_head(const Value& x_flat, const MlpHeadParams& p);

// All trainable leaves of a params struct, in declaration order.
void collect_params(const LinearParams& p, std::vector<Value>& out);
void collect_params(const MhaParams& p, std::vector<Value>& out);
void collect_params(const FfnParams& p, std::vector<Value>& out);
void collect_params(const MlpHeadParams& p, std::vector<Value>& out);

}  // namespace mq
