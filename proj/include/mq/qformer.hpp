#pragma once

#include <cstddef>
#include <vector>

#include "mq/blocks.hpp"

namespace mq {

// Where the temporal attention takes its keys/values from.
//   kPrevOnly:          the previous frame's output query alone.
//   kConcatCurrentPrev: current hidden state stacked on top of the
//                       previous query, so each token sees both contexts.
enum class TemporalKvMode { kPrevOnly, kConcatCurrentPrev };

struct MotionQformerConfig {
  std::size_t model_dim = 32;   // D
  std::size_t num_queries = 8;  // N_Q
  std::size_t blocks = 2;       // L
  std::size_t heads = 4;        // H
  TemporalKvMode temporal_kv_mode = TemporalKvMode::kConcatCurrentPrev;
  bool tie_kv = true;

  void validate() const;
};

// One block: temporal attention over the previous query, cross attention
// over the stitched view features, feed forward; post-norm residuals.
struct QformerBlockParams {
  MhaParams temporal;
  MhaParams cross;
  FfnParams ffn;
  Value ln1_gain, ln1_bias;
  Value ln2_gain, ln2_bias;
  Value ln3_gain, ln3_bias;
};

struct MotionQformerParams {
  Value base_query;  // learned Q_0, [N_Q x D]
  std::vector<QformerBlockParams> blocks;
};

// Recurrent query tokens carried between frames. tokens stays [N_Q x D]
// for the life of a rollout.
struct QueryState {
  Value tokens;
  std::size_t frame_index = 0;
};

MotionQformerParams init_motion_qformer(const MotionQformerConfig& cfg, Rng& rng);

void collect_params(const MotionQformerParams& p, std::vector<Value>& out);

// Q_0. The tokens alias the learned base query parameter, so gradients
// reach it and optimizer updates show up in later calls.
QueryState init_query(const MotionQformerParams& params);

// Attention of the running hidden state against the previous frame's
// query (plus the hidden state itself in concat mode). The caller block
// owns the residual and norm.
Value temporal_attention(const Value& h, const QueryState& prev, const MhaParams& p,
                         TemporalKvMode mode, MhaProbe* probe = nullptr);

// h1 = LN(h + temporal(h, prev)); h2 = LN(h1 + cross(h1, f_t));
// out = LN(h2 + ffn(h2)).
Value qformer_block(const Value& h, const QueryState& prev, const Value& frame_features,
                    const QformerBlockParams& bp, const MotionQformerConfig& cfg);

// One frame: run all L blocks from the base query; every block reads the
// same previous-frame query as temporal context.
QueryState step(const QueryState& prev, const Value& frame_features,
                const MotionQformerParams& params, const MotionQformerConfig& cfg);

// Frame-by-frame recurrence producing Q_T. Gradients flow through the
// whole chain (backpropagation through time).
QueryState rollout(const std::vector<Value>& frames, const MotionQformerParams& params,
                   const MotionQformerConfig& cfg);

}  // namespace mq
