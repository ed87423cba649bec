#include <cmath>

#include "dapt/fixtures.hpp"
#include "dapt/mlm.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace dapt;
using namespace dapt::nn;

namespace {

std::vector<TokenSequence> random_sequences(size_t count, size_t len, size_t vocab, Rng& rng) {
  std::vector<TokenSequence> seqs;
  for (size_t i = 0; i < count; ++i) {
    TokenSequence s = {Vocab::kCls};
    for (size_t t = 0; t < len; ++t)
      s.push_back(static_cast<int32_t>(Vocab::kNumSpecials + rng.next_below(vocab - Vocab::kNumSpecials)));
    s.push_back(Vocab::kSep);
    seqs.push_back(std::move(s));
  }
  return seqs;
}

Vocab fixture_vocab(size_t target) {
  Corpus c = fixtures::corpus(fixtures::Domain::a, 200, 31);
  return train_vocab(c, target);
}

}  // namespace

TEST_SUITE_BEGIN("mlm");

TEST_CASE("retraining defaults echo the published recipe") {
  RetrainConfig cfg;
  CHECK(cfg.epochs == 100);
  CHECK(cfg.batch_size == 64);
  CHECK(cfg.max_len == 512);
  CHECK(cfg.learning_rate == 5e-5);
}

TEST_CASE("mask_prob 0 leaves the batch untouched") {
  Rng rng(1);
  MaskingConfig cfg;
  cfg.mask_prob = 0.0;
  std::vector<TokenSequence> seqs = random_sequences(4, 6, 30, rng);
  MaskedBatch mb = mask_batch(seqs, cfg, rng, 30);
  CHECK(mb.labeled_count() == 0);
  for (size_t i = 0; i < seqs.size(); ++i)
    for (size_t t = 0; t < seqs[i].size(); ++t) CHECK(mb.batch.ids[i * mb.batch.seq_len + t] == seqs[i][t]);
}

TEST_CASE("mask_prob 1 with pure MASK corruption hits every content position") {
  Rng rng(2);
  MaskingConfig cfg;
  cfg.mask_prob = 1.0;
  cfg.mask_token_frac = 1.0;
  cfg.random_frac = 0.0;
  cfg.keep_frac = 0.0;
  std::vector<TokenSequence> seqs = random_sequences(3, 5, 30, rng);
  MaskedBatch mb = mask_batch(seqs, cfg, rng, 30);
  CHECK(mb.labeled_count() == 3 * 5);
  for (size_t p = 0; p < mb.batch.positions(); ++p) {
    if (!mb.batch.valid[p]) continue;
    const int32_t id = mb.batch.ids[p];
    if (id == Vocab::kCls || id == Vocab::kSep) {
      CHECK(mb.label_ids[p] == MaskedBatch::kIgnore);
    } else {
      CHECK(id == Vocab::kMask);
      CHECK(mb.label_ids[p] >= Vocab::kNumSpecials);
    }
  }
}

TEST_CASE("masked fraction and corruption proportions at scale") {
  Rng rng(3);
  MaskingConfig cfg;  // 0.15, 80/10/10
  std::vector<TokenSequence> seqs = random_sequences(500, 40, 200, rng);  // 20k content positions
  MaskedBatch mb = mask_batch(seqs, cfg, rng, 200);

  const size_t content_positions = 500 * 40;
  const double masked_fraction = static_cast<double>(mb.labeled_count()) / content_positions;
  CHECK(masked_fraction > 0.13);
  CHECK(masked_fraction < 0.17);

  size_t as_mask = 0, as_keep = 0, as_random = 0;
  for (size_t p : mb.mask_positions) {
    if (mb.batch.ids[p] == Vocab::kMask)
      ++as_mask;
    else if (mb.batch.ids[p] == mb.label_ids[p])
      ++as_keep;
    else
      ++as_random;
  }
  const double n = static_cast<double>(mb.labeled_count());
  CHECK(std::abs(as_mask / n - 0.8) < 0.03);
  CHECK(std::abs(as_random / n - 0.1) < 0.03);
  CHECK(std::abs(as_keep / n - 0.1) < 0.03);

  // specials never masked; labels exactly at mask positions
  for (size_t p = 0; p < mb.batch.positions(); ++p) {
    const bool labeled = mb.label_ids[p] != MaskedBatch::kIgnore;
    const bool in_list = std::find(mb.mask_positions.begin(), mb.mask_positions.end(), p) != mb.mask_positions.end();
    CHECK(labeled == in_list);
    if (mb.batch.ids[p] == Vocab::kCls || mb.batch.ids[p] == Vocab::kSep || !mb.batch.valid[p])
      CHECK_FALSE(labeled);
  }
}

TEST_CASE("masking config validation") {
  MaskingConfig bad;
  bad.mask_token_frac = 0.9;  // sums to 1.1
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  MaskingConfig bad2;
  bad2.mask_prob = 1.5;
  CHECK_THROWS_AS(bad2.validate(), InvalidArgument);
}

TEST_CASE("uniform logits lose ln(V)") {
  const size_t V = 37;
  Rng rng(4);
  MaskingConfig cfg;
  cfg.mask_prob = 1.0;
  std::vector<TokenSequence> seqs = random_sequences(2, 4, V, rng);
  MaskedBatch mb = mask_batch(seqs, cfg, rng, V);
  std::vector<double> logits(mb.labeled_count() * V, 0.25);  // any constant row is uniform
  MlmLoss loss = mlm_loss(logits, V, mb);
  CHECK(std::abs(loss.value - std::log(static_cast<double>(V))) < 1e-9);
  CHECK(loss.labeled == mb.labeled_count());
  CHECK_FALSE(loss.warned_no_labels);
}

TEST_CASE("concentrated logits drive the loss to zero") {
  const size_t V = 20;
  Rng rng(5);
  MaskingConfig cfg;
  cfg.mask_prob = 1.0;
  std::vector<TokenSequence> seqs = random_sequences(2, 3, V, rng);
  MaskedBatch mb = mask_batch(seqs, cfg, rng, V);
  std::vector<double> logits(mb.labeled_count() * V, 0.0);
  for (size_t r = 0; r < mb.labeled_count(); ++r)
    logits[r * V + static_cast<size_t>(mb.label_ids[mb.mask_positions[r]])] = 60.0;
  CHECK(mlm_loss(logits, V, mb).value < 1e-9);
}

TEST_CASE("two labeled positions, hand-computed") {
  // layout: one sequence [CLS x y SEP], both content positions masked
  MaskedBatch mb;
  mb.batch = make_batch({{Vocab::kCls, 7, 8, Vocab::kSep}});
  mb.label_ids.assign(4, MaskedBatch::kIgnore);
  mb.label_ids[1] = 0;
  mb.label_ids[2] = 2;
  mb.mask_positions = {1, 2};
  const size_t V = 3;
  // rows: [1,2,3] with label 0 -> ce = log(e^1+e^2+e^3) - 1
  //       [0.5,0,-0.5] with label 2 -> ce = log(e^0.5+1+e^-0.5) + 0.5
  std::vector<double> logits = {1.0, 2.0, 3.0, 0.5, 0.0, -0.5};
  const double ce1 = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 1.0;
  const double ce2 = std::log(std::exp(0.5) + 1.0 + std::exp(-0.5)) + 0.5;
  CHECK(mlm_loss(logits, V, mb).value == doctest::Approx(0.5 * (ce1 + ce2)).epsilon(1e-12));
}

TEST_CASE("zero labeled positions define loss 0 with a warning") {
  MaskedBatch mb;
  mb.batch = make_batch({{Vocab::kCls, Vocab::kSep}});
  mb.label_ids.assign(2, MaskedBatch::kIgnore);
  MlmLoss loss = mlm_loss({}, 11, mb);
  CHECK(loss.value == 0.0);
  CHECK(loss.warned_no_labels);
}

TEST_CASE("shape mismatches are rejected") {
  MaskedBatch mb;
  mb.batch = make_batch({{Vocab::kCls, 7, Vocab::kSep}});
  mb.label_ids.assign(3, MaskedBatch::kIgnore);
  mb.label_ids[1] = 1;
  mb.mask_positions = {1};
  std::vector<double> logits(5, 0.0);  // not 1 x V
  CHECK_THROWS_AS(mlm_loss(logits, 11, mb), InvalidArgument);
}

TEST_CASE("mlm_loss agrees with the brute-force oracle to 1e-10") {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const size_t V = 2 + rng.next_below(40);
    MaskingConfig cfg;
    cfg.mask_prob = 0.5;
    std::vector<TokenSequence> seqs = random_sequences(1 + rng.next_below(4), 1 + rng.next_below(8),
                                                       std::max<size_t>(V, 6), rng);
    MaskedBatch mb = mask_batch(seqs, cfg, rng, std::max<size_t>(V, 6));
    if (mb.labeled_count() == 0) continue;
    const size_t vocab = std::max<size_t>(V, 6);
    std::vector<double> logits(mb.labeled_count() * vocab);
    for (double& x : logits) x = rng.next_normal() * 3.0;
    std::vector<int32_t> labels;
    for (size_t p : mb.mask_positions) labels.push_back(mb.label_ids[p]);
    CHECK(std::abs(mlm_loss(logits, vocab, mb).value - oracle::mlm_cross_entropy(logits, vocab, labels)) < 1e-10);
  }
}

TEST_CASE("mlm_loss_backward matches finite differences of the loss") {
  Rng rng(7);
  const size_t V = 9;
  MaskingConfig cfg;
  cfg.mask_prob = 1.0;
  std::vector<TokenSequence> seqs = random_sequences(1, 4, V, rng);
  MaskedBatch mb = mask_batch(seqs, cfg, rng, V);
  std::vector<double> logits(mb.labeled_count() * V);
  for (double& x : logits) x = rng.next_normal();
  std::vector<double> grad;
  mlm_loss_backward(logits, V, mb, grad);
  const double h = 1e-6;
  for (size_t i = 0; i < logits.size(); ++i) {
    std::vector<double> up = logits, down = logits;
    up[i] += h;
    down[i] -= h;
    const double fd = (mlm_loss(up, V, mb).value - mlm_loss(down, V, mb).value) / (2 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("encode_corpus_chunked splits long documents instead of dropping them") {
  Vocab vocab = fixture_vocab(120);
  Corpus corpus;
  std::string long_text;
  for (int i = 0; i < 50; ++i) long_text += "zorp flim ";
  corpus.documents.push_back(CleanDocument{long_text, "c", 1});
  corpus.stats["c"] = 1;
  std::vector<TokenSequence> chunks = encode_corpus_chunked(corpus, vocab, 16);
  CHECK(chunks.size() > 1);
  size_t content = 0;
  for (const TokenSequence& s : chunks) {
    CHECK(s.size() <= 16);
    CHECK(s.front() == Vocab::kCls);
    CHECK(s.back() == Vocab::kSep);
    content += s.size() - 2;
  }
  CHECK(content == vocab.segment(long_text).size());
}

TEST_CASE("retrain for zero epochs returns the parameters unchanged") {
  Vocab vocab = fixture_vocab(120);
  Corpus corpus = fixtures::corpus(fixtures::Domain::a, 20, 32);
  EncoderConfig ecfg;
  ecfg.layers = 1;
  ecfg.hidden = 8;
  ecfg.heads = 2;
  ecfg.ff = 16;
  ecfg.vocab = vocab.size();
  ecfg.max_positions = 32;
  EncoderModel model(ecfg);
  model.init_params(3);
  std::vector<double> before = model.params();
  RetrainConfig rcfg;
  rcfg.epochs = 0;
  rcfg.batch_size = 4;
  rcfg.max_len = 32;
  rcfg.seed = 3;
  Checkpoint ckpt = retrain(model, vocab, corpus, rcfg, MaskingConfig{});
  CHECK(ckpt.params == before);
  CHECK(ckpt.epoch_loss.empty());
}

TEST_CASE("seeded retraining is reproducible and the loss history is recorded per epoch") {
  Vocab vocab = fixture_vocab(120);
  Corpus corpus = fixtures::corpus(fixtures::Domain::a, 30, 33);
  EncoderConfig ecfg;
  ecfg.layers = 1;
  ecfg.hidden = 8;
  ecfg.heads = 2;
  ecfg.ff = 16;
  ecfg.vocab = vocab.size();
  ecfg.max_positions = 32;
  RetrainConfig rcfg;
  rcfg.epochs = 3;
  rcfg.batch_size = 8;
  rcfg.max_len = 32;
  rcfg.learning_rate = 1e-3;
  rcfg.seed = 11;

  EncoderModel m1(ecfg), m2(ecfg);
  m1.init_params(rcfg.seed);
  m2.init_params(rcfg.seed);
  Checkpoint c1 = retrain(m1, vocab, corpus, rcfg, MaskingConfig{});
  Checkpoint c2 = retrain(m2, vocab, corpus, rcfg, MaskingConfig{});
  CHECK(c1.epoch_loss == c2.epoch_loss);
  CHECK(c1.params == c2.params);
  CHECK(c1.epoch_loss.size() == 3);
}

TEST_CASE("perplexity: uniform model scores V, training helps, seeds pin the value") {
  Vocab vocab = fixture_vocab(120);
  Corpus train_c = fixtures::corpus(fixtures::Domain::a, 60, 34);
  Corpus held = fixtures::corpus(fixtures::Domain::a, 15, 35);
  EncoderConfig ecfg;
  ecfg.layers = 1;
  ecfg.hidden = 16;
  ecfg.heads = 2;
  ecfg.ff = 32;
  ecfg.vocab = vocab.size();
  ecfg.max_positions = 32;

  // all-zero parameters produce exactly uniform logits
  EncoderModel uniform(ecfg);
  const double ppl_uniform = perplexity(uniform, vocab, held, MaskingConfig{}, 32, 8, 5);
  CHECK(ppl_uniform == doctest::Approx(static_cast<double>(vocab.size())).epsilon(1e-9));

  EncoderModel model(ecfg);
  model.init_params(2);
  const double before = perplexity(model, vocab, held, MaskingConfig{}, 32, 8, 5);
  CHECK(before == perplexity(model, vocab, held, MaskingConfig{}, 32, 8, 5));

  RetrainConfig rcfg;
  rcfg.epochs = 6;
  rcfg.batch_size = 8;
  rcfg.max_len = 32;
  rcfg.learning_rate = 2e-3;
  rcfg.seed = 2;
  retrain(model, vocab, train_c, rcfg, MaskingConfig{});
  const double after = perplexity(model, vocab, held, MaskingConfig{}, 32, 8, 5);
  CHECK(after < before);

  CHECK_THROWS_AS(perplexity(model, vocab, Corpus{}, MaskingConfig{}, 32, 8, 5), InvalidArgument);
}

TEST_SUITE_END();
