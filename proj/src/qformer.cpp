#include "mq/qformer.hpp"

#include <string>

#include "mq/errors.hpp"

namespace mq {

void MotionQformerConfig::validate() const {
  if (blocks < 1) throw ConfigError("qformer: block count must be >= 1");
  if (num_queries < 1) throw ConfigError("qformer: query count must be >= 1");
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError("qformer: heads (" + std::to_string(heads) + ") must divide model dim (" +
                      std::to_string(model_dim) + ")");
  }
}

namespace {

Value init_ln_gain(std::size_t d) {
  Tensor t({d});
  t.fill(1.0);
  return Value::param(std::move(t));
}

}  // namespace

MotionQformerParams init_motion_qformer(const MotionQformerConfig& cfg, Rng& rng) {
  cfg.validate();
  MotionQformerParams p;
  {
    Tensor bq({cfg.num_queries, cfg.model_dim});
    for (std::size_t i = 0; i < bq.numel(); ++i) bq.at(i) = kInitStd * rng.next_normal();
    p.base_query = Value::param(std::move(bq));
  }
  p.blocks.reserve(cfg.blocks);
  for (std::size_t b = 0; b < cfg.blocks; ++b) {
    QformerBlockParams bp;
    bp.temporal = init_mha(cfg.model_dim, cfg.heads, cfg.tie_kv, rng);
    bp.cross = init_mha(cfg.model_dim, cfg.heads, cfg.tie_kv, rng);
    bp.ffn = init_ffn(cfg.model_dim, rng);
    bp.ln1_gain = init_ln_gain(cfg.model_dim);
    bp.ln1_bias = Value::param(Tensor({cfg.model_dim}));
    bp.ln2_gain = init_ln_gain(cfg.model_dim);
    bp.ln2_bias = Value::param(Tensor({cfg.model_dim}));
    bp.ln3_gain = init_ln_gain(cfg.model_dim);
    bp.ln3_bias = Value::param(Tensor({cfg.model_dim}));
    p.blocks.push_back(std::move(bp));
  }
  return p;
}

void collect_params(const MotionQformerParams& p, std::vector<Value>& out) {
  out.push_back(p.base_query);
  for (const QformerBlockParams& bp : p.blocks) {
    collect_params(bp.temporal, out);
    collect_params(bp.cross, out);
    collect_params(bp.ffn, out);
    out.push_back(bp.ln1_gain);
    out.push_back(bp.ln1_bias);
    out.push_back(bp.ln2_gain);
    out.push_back(bp.ln2_bias);
    out.push_back(bp.ln3_gain);
    out.push_back(bp.ln3_bias);
  }
}

QueryState init_query(const MotionQformerParams& params) {
  return QueryState{params.base_query, 0};
}

Value temporal_attention(const Value& h, const QueryState& prev, const MhaParams& p,
                         TemporalKvMode mode, MhaProbe* probe) {
  if (!h.val().same_shape(prev.tokens.val())) {
    throw ShapeError("temporal_attention: hidden " + shape_str(h.shape()) +
                     " vs previous query " + shape_str(prev.tokens.shape()));
  }
  switch (mode) {
    case TemporalKvMode::kPrevOnly:
      return mha(h, prev.tokens, p, probe);
    case TemporalKvMode::kConcatCurrentPrev:
      return mha(h, concat({h, prev.tokens}, 0), p, probe);
  }
  throw ConfigError("temporal_attention: unknown kv mode");
}

Value qformer_block(const Value& h, const QueryState& prev, const Value& frame_features,
                    const QformerBlockParams& bp, const MotionQformerConfig& cfg) {
  Value h1 = layer_norm(add(h, temporal_attention(h, prev, bp.temporal, cfg.temporal_kv_mode)),
                        bp.ln1_gain, bp.ln1_bias);
  Value h2 = layer_norm(add(h1, mha(h1, frame_features, bp.cross)), bp.ln2_gain, bp.ln2_bias);
  return layer_norm(add(h2, ffn(h2, bp.ffn)), bp.ln3_gain, bp.ln3_bias);
}

QueryState step(const QueryState& prev, const Value& frame_features,
                const MotionQformerParams& params, const MotionQformerConfig& cfg) {
  Value h = params.base_query;
  for (const QformerBlockParams& bp : params.blocks) {
    h = qformer_block(h, prev, frame_features, bp, cfg);
  }
  return QueryState{h, prev.frame_index + 1};
}

QueryState rollout(const std::vector<Value>& frames, const MotionQformerParams& params,
                   const MotionQformerConfig& cfg) {
  if (frames.empty()) throw Error("rollout: empty frame list");
  QueryState q = init_query(params);
  for (const Value& f : frames) q = step(q, f, params, cfg);
  return q;
}

}  // namespace mq
