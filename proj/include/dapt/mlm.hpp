#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dapt/corpus.hpp"
#include "dapt/encoder.hpp"
#include "dapt/tokenizer.hpp"
#include "dapt/util.hpp"

namespace dapt::nn {

// Masked-token corruption recipe: select mask_prob of the non-special
// positions, then replace with [MASK] / a random token / the original at the
// stated proportions.
struct MaskingConfig {
  double mask_prob = 0.15;
  double mask_token_frac = 0.8;
  double random_frac = 0.1;
  double keep_frac = 0.1;
  void validate() const;
};

// Corrupted batch plus recovery labels. label_ids is kIgnore everywhere
// except the selected positions, which carry the original token id.
struct MaskedBatch {
  static constexpr int32_t kIgnore = -1;
  Batch batch;                    // input_ids after corruption
  std::vector<int32_t> label_ids;  // [B*T]
  std::vector<size_t> mask_positions;
  size_t labeled_count() const { return mask_positions.size(); }
};

// vocab_size bounds the random-replacement draw (uniform over non-special
// ids). Special-token positions are never selected.
MaskedBatch mask_batch(const std::vector<TokenSequence>& seqs, const MaskingConfig& cfg, Rng& rng,
                       size_t vocab_size);

struct MlmLoss {
  double value = 0.0;
  size_t labeled = 0;
  bool warned_no_labels = false;  // zero labeled positions define loss 0
};

// Mean cross-entropy over labeled positions. logits rows follow
// mb.mask_positions order ([M, vocab]).
MlmLoss mlm_loss(const std::vector<double>& logits, size_t vocab, const MaskedBatch& mb);

// dLoss/dlogits for the mean cross-entropy above (softmax minus one-hot,
// scaled by 1/M).
void mlm_loss_backward(const std::vector<double>& logits, size_t vocab, const MaskedBatch& mb,
                       std::vector<double>& d_logits);

struct RetrainConfig {
  size_t epochs = 100;       // paper scale
  size_t batch_size = 64;    // paper scale
  size_t max_len = 512;      // paper scale
  double learning_rate = 5e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
  void validate() const;
};

struct TrainingDiverged : std::runtime_error {
  TrainingDiverged(size_t epoch, size_t batch_index, double lr)
      : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index) + ", learning rate " + std::to_string(lr)),
        epoch(epoch),
        batch_index(batch_index) {}
  size_t epoch;
  size_t batch_index;
};

// Trained encoder state, reloadable bit-for-bit.
struct Checkpoint {
  EncoderConfig encoder;
  std::vector<double> params;
  Vocab vocab;
  std::vector<double> epoch_loss;  // per-epoch mean masked cross-entropy
  uint64_t seed = 0;
  std::string trainer_config_json;  // hyperparameters, recorded verbatim

  void save(const std::string& dir) const;
  static Checkpoint load(const std::string& dir);
};

// Splits each document into consecutive max_len-bounded sequences instead of
// discarding the tail.
std::vector<TokenSequence> encode_corpus_chunked(const Corpus& corpus, const Vocab& vocab, size_t max_len);

// Adam over seeded-shuffled batches for cfg.epochs. Mutates `model` and
// returns the finished checkpoint.
Checkpoint retrain(EncoderModel& model, const Vocab& vocab, const Corpus& corpus, const RetrainConfig& cfg,
                   const MaskingConfig& mcfg);

// exp(mean masked cross-entropy) on `corpus` with seeded masking.
double perplexity(const EncoderModel& model, const Vocab& vocab, const Corpus& corpus, const MaskingConfig& mcfg,
                  size_t max_len, size_t batch_size, uint64_t seed);

}  // namespace dapt::nn
