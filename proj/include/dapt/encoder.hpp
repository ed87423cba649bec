#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dapt/tokenizer.hpp"

namespace dapt::nn {

// Transformer encoder scale. Paper-scale values are configuration, not code:
// the same model runs at desk scale (the default) and full scale.
struct EncoderConfig {
  size_t layers = 2;
  size_t hidden = 64;
  size_t heads = 2;
  size_t ff = 256;  // feed-forward width, conventionally 4*hidden
  size_t vocab = 0;
  size_t max_positions = 512;
  double ln_eps = 1e-12;

  size_t head_dim() const { return hidden / heads; }
  void validate() const;
  std::string to_json() const;
  static EncoderConfig from_json(const std::string& text);
  bool operator==(const EncoderConfig&) const = default;
};

// Padded token batch. `valid` marks real tokens (1) vs padding (0).
struct Batch {
  size_t batch_size = 0;
  size_t seq_len = 0;
  std::vector<int32_t> ids;    // [batch_size * seq_len]
  std::vector<uint8_t> valid;  // [batch_size * seq_len]
  size_t positions() const { return batch_size * seq_len; }
};

Batch make_batch(const std::vector<TokenSequence>& seqs);

// Offsets of every parameter tensor inside one flat buffer. The flat layout
// is the checkpoint wire format (version 1), so order here is frozen.
struct LayerOffsets {
  size_t wq, bq, wk, bk, wv, bv, wo, bo;
  size_t ln1_g, ln1_b;
  size_t w1, b1, w2, b2;
  size_t ln2_g, ln2_b;
};
struct ParamLayout {
  size_t tok_emb, pos_emb, ln_e_g, ln_e_b;
  std::vector<LayerOffsets> layers;
  size_t mlm_w, mlm_b;
  size_t total;
  static ParamLayout build(const EncoderConfig& cfg);
};

// Per-forward activation cache consumed by backward.
struct LayerCache {
  std::vector<double> x_in;                  // [BT,H] layer input
  std::vector<double> q, k, v;               // [BT,H]
  std::vector<double> probs;                 // [B,A,T,T] attention weights
  std::vector<double> ctx;                   // [BT,H] heads concatenated
  std::vector<double> res1;                  // x_in + attention projection
  std::vector<double> ln1_mean, ln1_rstd;    // [BT]
  std::vector<double> x_mid;                 // [BT,H] post-LN1
  std::vector<double> ffn_pre;               // [BT,F] pre-activation
  std::vector<double> ffn_act;               // [BT,F]
  std::vector<double> res2;                  // x_mid + ffn output
  std::vector<double> ln2_mean, ln2_rstd;    // [BT]
};
struct Cache {
  std::vector<double> emb;                 // [BT,H] token+position sum
  std::vector<double> emb_mean, emb_rstd;  // [BT]
  std::vector<double> x0;                  // [BT,H] post embedding LN
  std::vector<LayerCache> layers;
  std::vector<double> hidden;  // [BT,H] final states
};

class EncoderModel {
 public:
  explicit EncoderModel(EncoderConfig cfg);

  const EncoderConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  size_t param_count() const { return layout_.total; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }

  // N(0, 0.02^2) weights, zero biases, unit layer-norm gains.
  void init_params(uint64_t seed);
  void zero_grads();

  // Deterministic forward pass; fills `cache` and returns cache.hidden.
  const std::vector<double>& forward(const Batch& batch, Cache& cache) const;

  // Accumulates parameter gradients for d_hidden = dLoss/d(final states).
  // Call exactly once per zero_grads(): weight-matrix grads are written,
  // layer-norm and embedding grads are added.
  void backward(const Batch& batch, const Cache& cache, const std::vector<double>& d_hidden);

  // MLM head over selected positions: logits[r,:] for row r = positions[r].
  void head_logits(const Cache& cache, const std::vector<size_t>& rows, std::vector<double>& logits) const;
  // Backward of the head; writes d_hidden (zero outside selected rows) and
  // accumulates head parameter grads.
  void head_backward(const Cache& cache, const std::vector<size_t>& rows, const std::vector<double>& d_logits,
                     std::vector<double>& d_hidden);

  double* param(size_t offset) { return params_.data() + offset; }
  const double* param(size_t offset) const { return params_.data() + offset; }
  double* grad(size_t offset) { return grads_.data() + offset; }

 private:
  EncoderConfig cfg_;
  ParamLayout layout_;
  std::vector<double> params_;
  std::vector<double> grads_;
};

}  // namespace dapt::nn
