#include "dapt/mlm.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "dapt/kernels.hpp"
#include "json.hpp"

namespace dapt::nn {

namespace fs = std::filesystem;
using nlohmann::json;

void MaskingConfig::validate() const {
  if (mask_prob < 0.0 || mask_prob > 1.0) throw InvalidArgument("mask_prob must lie in [0,1]");
  const double s = mask_token_frac + random_frac + keep_frac;
  if (std::abs(s - 1.0) > 1e-9) throw InvalidArgument("corruption fractions must sum to 1");
  if (mask_token_frac < 0 || random_frac < 0 || keep_frac < 0)
    throw InvalidArgument("corruption fractions must be non-negative");
}

void RetrainConfig::validate() const {
  if (batch_size == 0 || max_len < 2) throw InvalidArgument("batch_size and max_len must be positive");
  if (learning_rate <= 0.0) throw InvalidArgument("learning_rate must be positive");
}

static bool is_special(int32_t id) { return id >= 0 && id < Vocab::kNumSpecials; }

MaskedBatch mask_batch(const std::vector<TokenSequence>& seqs, const MaskingConfig& cfg, Rng& rng,
                       size_t vocab_size) {
  cfg.validate();
  if (vocab_size <= static_cast<size_t>(Vocab::kNumSpecials))
    throw InvalidArgument("vocab_size leaves no content ids to draw from");
  MaskedBatch mb;
  mb.batch = make_batch(seqs);
  mb.label_ids.assign(mb.batch.positions(), MaskedBatch::kIgnore);
  for (size_t p = 0; p < mb.batch.positions(); ++p) {
    if (!mb.batch.valid[p]) continue;
    const int32_t original = mb.batch.ids[p];
    if (is_special(original)) continue;  // specials are never masked
    if (rng.next_double() >= cfg.mask_prob) continue;
    mb.label_ids[p] = original;
    mb.mask_positions.push_back(p);
    const double r = rng.next_double();
    if (r < cfg.mask_token_frac) {
      mb.batch.ids[p] = Vocab::kMask;
    } else if (r < cfg.mask_token_frac + cfg.random_frac) {
      const uint64_t content = vocab_size - static_cast<size_t>(Vocab::kNumSpecials);
      mb.batch.ids[p] = static_cast<int32_t>(Vocab::kNumSpecials + rng.next_below(content));
    }  // else: keep the original token
  }
  return mb;
}

MlmLoss mlm_loss(const std::vector<double>& logits, size_t vocab, const MaskedBatch& mb) {
  const size_t M = mb.labeled_count();
  if (M == 0) return MlmLoss{0.0, 0, true};
  if (logits.size() != M * vocab) throw InvalidArgument("logits shape does not match labeled positions x vocab");
  std::vector<double> per_row(M, 0.0);
  const long Ml = static_cast<long>(M);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < Ml; ++r) {
    const double* row = logits.data() + r * static_cast<long>(vocab);
    const int32_t label = mb.label_ids[mb.mask_positions[static_cast<size_t>(r)]];
    double mx = row[0];
    for (size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (size_t j = 0; j < vocab; ++j) sum += std::exp(row[j] - mx);
    per_row[r] = (std::log(sum) + mx) - row[label];
  }
  double total = 0.0;
  for (double v : per_row) total += v;  // fixed-order reduction
  return MlmLoss{total / static_cast<double>(M), M, false};
}

void mlm_loss_backward(const std::vector<double>& logits, size_t vocab, const MaskedBatch& mb,
                       std::vector<double>& d_logits) {
  const size_t M = mb.labeled_count();
  if (logits.size() != M * vocab) throw InvalidArgument("logits shape does not match labeled positions x vocab");
  d_logits.assign(M * vocab, 0.0);
  const double inv = M ? 1.0 / static_cast<double>(M) : 0.0;
  const long Ml = static_cast<long>(M);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < Ml; ++r) {
    const double* row = logits.data() + r * static_cast<long>(vocab);
    double* drow = d_logits.data() + r * static_cast<long>(vocab);
    const int32_t label = mb.label_ids[mb.mask_positions[static_cast<size_t>(r)]];
    double mx = row[0];
    for (size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (size_t j = 0; j < vocab; ++j) sum += std::exp(row[j] - mx);
    for (size_t j = 0; j < vocab; ++j) drow[j] = std::exp(row[j] - mx) / sum * inv;
    drow[label] -= inv;
  }
}

std::vector<TokenSequence> encode_corpus_chunked(const Corpus& corpus, const Vocab& vocab, size_t max_len) {
  if (max_len < 3) throw InvalidArgument("max_len must leave room for one content token");
  std::vector<TokenSequence> out;
  const size_t body = max_len - 2;
  for (const CleanDocument& d : corpus.documents) {
    TokenSequence content = vocab.segment(d.text);
    size_t off = 0;
    do {
      const size_t len = std::min(body, content.size() - off);
      TokenSequence seq;
      seq.reserve(len + 2);
      seq.push_back(Vocab::kCls);
      seq.insert(seq.end(), content.begin() + static_cast<long>(off), content.begin() + static_cast<long>(off + len));
      seq.push_back(Vocab::kSep);
      out.push_back(std::move(seq));
      off += len;
    } while (off < content.size());
  }
  return out;
}

// One optimization step; returns summed cross-entropy and labeled count.
static std::pair<double, size_t> train_step(EncoderModel& model, const MaskedBatch& mb,
                                            std::vector<double>& adam_m, std::vector<double>& adam_v, uint64_t t,
                                            const RetrainConfig& cfg) {
  Cache cache;
  model.forward(mb.batch, cache);
  std::vector<double> logits;
  model.head_logits(cache, mb.mask_positions, logits);
  MlmLoss loss = mlm_loss(logits, model.config().vocab, mb);
  if (loss.labeled == 0) return {0.0, 0};

  model.zero_grads();
  std::vector<double> d_logits, d_hidden;
  mlm_loss_backward(logits, model.config().vocab, mb, d_logits);
  model.head_backward(cache, mb.mask_positions, d_logits, d_hidden);
  model.backward(mb.batch, cache, d_hidden);
  par::adam_step(model.params().data(), adam_m.data(), adam_v.data(), model.grads().data(), model.param_count(), t,
                 cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  return {loss.value * static_cast<double>(loss.labeled), loss.labeled};
}

Checkpoint retrain(EncoderModel& model, const Vocab& vocab, const Corpus& corpus, const RetrainConfig& cfg,
                   const MaskingConfig& mcfg) {
  cfg.validate();
  mcfg.validate();
  std::vector<TokenSequence> seqs = encode_corpus_chunked(corpus, vocab, std::min(cfg.max_len, model.config().max_positions));

  std::vector<double> adam_m(model.param_count(), 0.0), adam_v(model.param_count(), 0.0);
  std::vector<double> epoch_loss;
  uint64_t step = 0;
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "retrain-epoch-" + std::to_string(epoch)));
    std::vector<size_t> order(seqs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    seeded_shuffle(order, rng);

    double ce_sum = 0.0;
    size_t labeled = 0;
    size_t batch_index = 0;
    for (size_t off = 0; off < order.size(); off += cfg.batch_size, ++batch_index) {
      const size_t end = std::min(order.size(), off + cfg.batch_size);
      std::vector<TokenSequence> batch_seqs;
      batch_seqs.reserve(end - off);
      for (size_t i = off; i < end; ++i) batch_seqs.push_back(seqs[order[i]]);
      MaskedBatch mb = mask_batch(batch_seqs, mcfg, rng, model.config().vocab);
      auto [ce, n] = train_step(model, mb, adam_m, adam_v, ++step, cfg);
      if (!std::isfinite(ce)) throw TrainingDiverged(epoch, batch_index, cfg.learning_rate);
      ce_sum += ce;
      labeled += n;
    }
    epoch_loss.push_back(labeled ? ce_sum / static_cast<double>(labeled) : 0.0);
  }

  Checkpoint ckpt;
  ckpt.encoder = model.config();
  ckpt.params = model.params();
  ckpt.vocab = vocab;
  ckpt.epoch_loss = std::move(epoch_loss);
  ckpt.seed = cfg.seed;
  json j{{"stage", "pretrain"},
         {"epochs", cfg.epochs},
         {"batch_size", cfg.batch_size},
         {"max_len", cfg.max_len},
         {"learning_rate", cfg.learning_rate},
         {"optimizer", "adam"},
         {"adam_beta1", cfg.adam_beta1},
         {"adam_beta2", cfg.adam_beta2},
         {"adam_eps", cfg.adam_eps},
         {"seed", cfg.seed},
         {"mask_prob", mcfg.mask_prob},
         {"mask_token_frac", mcfg.mask_token_frac},
         {"random_frac", mcfg.random_frac},
         {"keep_frac", mcfg.keep_frac},
         {"steps", step}};
  ckpt.trainer_config_json = j.dump(2);
  return ckpt;
}

static std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void Checkpoint::save(const std::string& dir) const {
  fs::create_directories(dir);
  // parameter file: magic, count, raw little-endian doubles
  std::string bin = "DAPTCKP1";
  uint64_t n = params.size();
  bin.append(reinterpret_cast<const char*>(&n), sizeof n);
  bin.append(reinterpret_cast<const char*>(params.data()), params.size() * sizeof(double));
  write_file(dir + "/model.bin", bin);

  json cfg;
  cfg["format_version"] = 1;
  cfg["encoder"] = json::parse(encoder.to_json());
  cfg["trainer"] = trainer_config_json.empty() ? json::object() : json::parse(trainer_config_json);
  cfg["seed"] = seed;
  write_file(dir + "/config.json", cfg.dump(2) + "\n");

  vocab.save(dir + "/vocab.txt");

  std::string hist = "epoch\tmean_loss\n";
  for (size_t e = 0; e < epoch_loss.size(); ++e)
    hist += std::to_string(e) + "\t" + format_double(epoch_loss[e]) + "\n";
  write_file(dir + "/loss_history.tsv", hist);
}

Checkpoint Checkpoint::load(const std::string& dir) {
  Checkpoint ckpt;
  std::string bin = read_file(dir + "/model.bin");
  if (bin.size() < 16 || bin.substr(0, 8) != "DAPTCKP1")
    throw InvalidArgument(dir + "/model.bin is not a version-1 checkpoint");
  uint64_t n = 0;
  std::memcpy(&n, bin.data() + 8, sizeof n);
  if (bin.size() != 16 + n * sizeof(double)) throw InvalidArgument(dir + "/model.bin is truncated");
  ckpt.params.resize(n);
  std::memcpy(ckpt.params.data(), bin.data() + 16, n * sizeof(double));

  json cfg = json::parse(read_file(dir + "/config.json"));
  if (cfg.at("format_version").get<int>() != 1) throw InvalidArgument("unsupported checkpoint format version");
  ckpt.encoder = EncoderConfig::from_json(cfg.at("encoder").dump());
  ckpt.trainer_config_json = cfg.at("trainer").dump(2);
  ckpt.seed = cfg.at("seed").get<uint64_t>();
  ckpt.vocab = Vocab::load(dir + "/vocab.txt");

  for (const std::string& line : split(read_file(dir + "/loss_history.tsv"), '\n')) {
    if (line.empty() || starts_with(line, "epoch")) continue;
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() == 2) ckpt.epoch_loss.push_back(std::stod(cols[1]));
  }
  if (ckpt.params.size() != ParamLayout::build(ckpt.encoder).total)
    throw InvalidArgument("checkpoint parameter count does not match its encoder config");
  return ckpt;
}

double perplexity(const EncoderModel& model, const Vocab& vocab, const Corpus& corpus, const MaskingConfig& mcfg,
                  size_t max_len, size_t batch_size, uint64_t seed) {
  if (corpus.documents.empty()) throw InvalidArgument("perplexity needs a non-empty corpus");
  mcfg.validate();
  std::vector<TokenSequence> seqs =
      encode_corpus_chunked(corpus, vocab, std::min(max_len, model.config().max_positions));
  Rng rng(derive_seed(seed, "perplexity"));
  double ce_sum = 0.0;
  size_t labeled = 0;
  for (size_t off = 0; off < seqs.size(); off += batch_size) {
    const size_t end = std::min(seqs.size(), off + batch_size);
    std::vector<TokenSequence> batch_seqs(seqs.begin() + static_cast<long>(off), seqs.begin() + static_cast<long>(end));
    MaskedBatch mb = mask_batch(batch_seqs, mcfg, rng, model.config().vocab);
    if (mb.labeled_count() == 0) continue;
    Cache cache;
    model.forward(mb.batch, cache);
    std::vector<double> logits;
    model.head_logits(cache, mb.mask_positions, logits);
    MlmLoss loss = mlm_loss(logits, model.config().vocab, mb);
    ce_sum += loss.value * static_cast<double>(loss.labeled);
    labeled += loss.labeled;
  }
  return std::exp(labeled ? ce_sum / static_cast<double>(labeled) : 0.0);
}

}  // namespace dapt::nn
