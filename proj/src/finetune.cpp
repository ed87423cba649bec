#include "dapt/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "dapt/kernels.hpp"
#include "json.hpp"

namespace dapt {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Batch;
using nn::Cache;

void FinetuneConfig::validate() const {
  if (learning_rate <= 0.0) throw InvalidArgument("learning_rate must be positive");
  if (batch_size == 0 || max_len < 2) throw InvalidArgument("batch_size and max_len must be positive");
}

static Batch make_text_batch(const std::vector<const LabeledExample*>& examples, const Vocab& vocab,
                             size_t max_len) {
  std::vector<TokenSequence> seqs;
  seqs.reserve(examples.size());
  for (const LabeledExample* ex : examples) seqs.push_back(encode(ex->text, vocab, max_len));
  return nn::make_batch(seqs);
}

// 2-class softmax cross-entropy over the CLS rows; returns mean loss and
// fills d_logits with its gradient.
static double classifier_loss(const std::vector<double>& logits, const std::vector<Label>& labels,
                              std::vector<double>* d_logits) {
  const size_t B = labels.size();
  if (d_logits) d_logits->assign(B * 2, 0.0);
  double total = 0.0;
  for (size_t i = 0; i < B; ++i) {
    const double a = logits[i * 2], b = logits[i * 2 + 1];
    const double mx = std::max(a, b);
    const double za = std::exp(a - mx), zb = std::exp(b - mx);
    const double sum = za + zb;
    const size_t y = labels[i] == Label::positive ? 1 : 0;
    total += std::log(sum) + mx - logits[i * 2 + y];
    if (d_logits) {
      (*d_logits)[i * 2] = za / sum / static_cast<double>(B);
      (*d_logits)[i * 2 + 1] = zb / sum / static_cast<double>(B);
      (*d_logits)[i * 2 + y] -= 1.0 / static_cast<double>(B);
    }
  }
  return total / static_cast<double>(B);
}

// CLS logits for a forward pass: logits[i,:] = hidden[i*T+0,:] * W + b.
static void cls_logits(const ClassifierModel& m, const Cache& cache, size_t B, size_t T,
                       std::vector<double>& logits) {
  const size_t H = m.encoder.config().hidden;
  std::vector<double> cls(B * H);
  for (size_t i = 0; i < B; ++i)
    for (size_t j = 0; j < H; ++j) cls[i * H + j] = cache.hidden[(i * T) * H + j];
  logits.assign(B * 2, 0.0);
  nn::par::gemm_nn(logits.data(), cls.data(), m.head_w.data(), {B, 2, H});
  nn::par::add_bias(logits.data(), m.head_b.data(), B, 2);
}

ClassifierModel finetune(const nn::Checkpoint& ckpt, const std::vector<LabeledExample>& train,
                         const FinetuneConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw InvalidArgument("finetune needs a non-empty training set");

  ClassifierModel model(ckpt.encoder);
  model.encoder.params() = ckpt.params;
  model.vocab = ckpt.vocab;
  model.max_len = std::min(cfg.max_len, ckpt.encoder.max_positions);
  const size_t H = ckpt.encoder.hidden;

  Rng init_rng(derive_seed(cfg.seed, "classifier-head-init"));
  model.head_w.assign(H * 2, 0.0);
  for (double& w : model.head_w) w = init_rng.next_normal() * 0.02;
  model.head_b.assign(2, 0.0);

  const size_t P = model.encoder.param_count();
  std::vector<double> m_enc(P, 0.0), v_enc(P, 0.0);
  std::vector<double> m_head(H * 2 + 2, 0.0), v_head(H * 2 + 2, 0.0);
  std::vector<double> head_grad(H * 2 + 2, 0.0);

  uint64_t step = 0;
  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, "finetune-epoch-" + std::to_string(epoch)));
    std::vector<size_t> order(train.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    seeded_shuffle(order, rng);

    for (size_t off = 0; off < order.size(); off += cfg.batch_size) {
      const size_t end = std::min(order.size(), off + cfg.batch_size);
      std::vector<const LabeledExample*> batch_ex;
      std::vector<Label> labels;
      for (size_t i = off; i < end; ++i) {
        batch_ex.push_back(&train[order[i]]);
        labels.push_back(train[order[i]].label);
      }
      const size_t B = batch_ex.size();
      Batch batch = make_text_batch(batch_ex, model.vocab, model.max_len);
      const size_t T = batch.seq_len;

      Cache cache;
      model.encoder.forward(batch, cache);
      std::vector<double> logits;
      cls_logits(model, cache, B, T, logits);
      std::vector<double> d_logits;
      const double loss = classifier_loss(logits, labels, &d_logits);
      if (!std::isfinite(loss))
        throw nn::TrainingDiverged(epoch, off / cfg.batch_size, cfg.learning_rate);

      // head backward
      std::vector<double> cls(B * H);
      for (size_t i = 0; i < B; ++i)
        for (size_t j = 0; j < H; ++j) cls[i * H + j] = cache.hidden[(i * T) * H + j];
      nn::par::gemm_tn(head_grad.data(), cls.data(), d_logits.data(), {H, 2, B});
      nn::par::bias_grad(head_grad.data() + H * 2, d_logits.data(), B, 2);
      std::vector<double> d_cls(B * H, 0.0);
      nn::par::gemm_nt(d_cls.data(), d_logits.data(), model.head_w.data(), {B, H, 2});

      std::vector<double> d_hidden(cache.hidden.size(), 0.0);
      for (size_t i = 0; i < B; ++i)
        for (size_t j = 0; j < H; ++j) d_hidden[(i * T) * H + j] = d_cls[i * H + j];
      model.encoder.zero_grads();
      model.encoder.backward(batch, cache, d_hidden);

      ++step;
      double lr = cfg.learning_rate;
      if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
        lr *= static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
      nn::par::adam_step(model.encoder.params().data(), m_enc.data(), v_enc.data(),
                         model.encoder.grads().data(), P, step, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      std::vector<double> head_params(H * 2 + 2);
      std::copy(model.head_w.begin(), model.head_w.end(), head_params.begin());
      std::copy(model.head_b.begin(), model.head_b.end(), head_params.begin() + static_cast<long>(H * 2));
      nn::par::adam_step(head_params.data(), m_head.data(), v_head.data(), head_grad.data(), H * 2 + 2, step, lr,
                         cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
      std::copy(head_params.begin(), head_params.begin() + static_cast<long>(H * 2), model.head_w.begin());
      std::copy(head_params.begin() + static_cast<long>(H * 2), head_params.end(), model.head_b.begin());
    }
  }
  return model;
}

Label decide(double negative_score, double positive_score) {
  return positive_score > negative_score ? Label::positive : Label::negative;
}

size_t best_run_index(const std::vector<RunResult>& runs) {
  if (runs.empty()) throw InvalidArgument("no runs to select from");
  size_t best = 0;
  for (size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].report.macro_f1 > runs[best].report.macro_f1 ||
        (runs[i].report.macro_f1 == runs[best].report.macro_f1 && runs[i].seed < runs[best].seed))
      best = i;
  }
  return best;
}

std::vector<Prediction> predict(const ClassifierModel& model, const std::vector<std::string>& texts,
                                size_t batch_size) {
  std::vector<Prediction> out;
  out.reserve(texts.size());
  for (size_t off = 0; off < texts.size(); off += batch_size) {
    const size_t end = std::min(texts.size(), off + batch_size);
    std::vector<TokenSequence> seqs;
    for (size_t i = off; i < end; ++i) seqs.push_back(encode(texts[i], model.vocab, model.max_len));
    Batch batch = nn::make_batch(seqs);
    Cache cache;
    model.encoder.forward(batch, cache);
    std::vector<double> logits;
    cls_logits(model, cache, end - off, batch.seq_len, logits);
    for (size_t i = 0; i < end - off; ++i) {
      const double a = logits[i * 2], b = logits[i * 2 + 1];
      const double mx = std::max(a, b);
      const double za = std::exp(a - mx), zb = std::exp(b - mx);
      Prediction p;
      p.positive_score = zb / (za + zb);
      p.label = decide(za / (za + zb), p.positive_score);
      out.push_back(p);
    }
  }
  return out;
}

EvalReport evaluate_model(const ClassifierModel& model, const std::vector<LabeledExample>& examples,
                          const std::string& dataset_name, const std::string& model_name) {
  std::vector<std::string> texts;
  std::vector<Label> gold;
  for (const LabeledExample& ex : examples) {
    texts.push_back(ex.text);
    gold.push_back(ex.label);
  }
  std::vector<Prediction> preds = predict(model, texts);
  std::vector<Label> pred_labels;
  pred_labels.reserve(preds.size());
  for (const Prediction& p : preds) pred_labels.push_back(p.label);
  return evaluate_labels(gold, pred_labels, dataset_name, model_name);
}

ReplicateSummary replicate(const nn::Checkpoint& ckpt, const DatasetSplit& split, const FinetuneConfig& cfg,
                           const std::vector<uint64_t>& seeds, std::vector<ClassifierModel>* models) {
  if (seeds.empty()) throw InvalidArgument("replicate needs at least one seed");
  ReplicateSummary summary;
  std::map<std::string, std::vector<double>> values;
  for (uint64_t seed : seeds) {
    FinetuneConfig run_cfg = cfg;
    run_cfg.seed = seed;
    ClassifierModel model = finetune(ckpt, split.train, run_cfg);
    EvalReport report = evaluate_model(model, split.test, split.provenance.name, "seed-" + std::to_string(seed));
    values["macro_f1"].push_back(report.macro_f1);
    values["positive_f1"].push_back(report.positive.f1);
    values["positive_precision"].push_back(report.positive.precision);
    values["positive_recall"].push_back(report.positive.recall);
    values["negative_f1"].push_back(report.negative.f1);
    summary.runs.push_back(RunResult{seed, std::move(report)});
    if (models) models->push_back(std::move(model));
  }
  for (const auto& [name, vals] : values) summary.metrics[name] = summarize(vals);

  summary.best_index = best_run_index(summary.runs);
  return summary;
}

const ClassifierModel& select_best(const ReplicateSummary& summary, const std::vector<ClassifierModel>& models) {
  if (models.size() != summary.runs.size())
    throw InvalidArgument("persisted model count does not match the replicate runs");
  if (models.empty()) throw InvalidArgument("no persisted models to select from");
  return models[summary.best_index];
}

PortabilityMatrix portability(const std::map<std::string, ClassifierModel>& models,
                              const std::map<std::string, DatasetSplit>& splits) {
  for (const auto& [name, _] : models)
    if (!splits.count(name)) throw InvalidArgument("portability: no dataset split named '" + name + "'");
  for (const auto& [name, _] : splits)
    if (!models.count(name)) throw InvalidArgument("portability: no model named '" + name + "'");
  PortabilityMatrix matrix;
  for (const auto& [name, _] : splits) matrix.datasets.push_back(name);
  for (const auto& [train_name, model] : models)
    for (const auto& [test_name, split] : splits)
      matrix.cells[{train_name, test_name}] =
          evaluate_model(model, split.test, test_name, "trained-on-" + train_name);
  return matrix;
}

std::string ReplicateSummary::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["stddev_kind"] = "population";
  j["runs"] = json::array();
  for (const RunResult& r : runs)
    j["runs"].push_back({{"seed", r.seed}, {"report", json::parse(r.report.to_json())}});
  j["metrics"] = json::object();
  for (const auto& [name, s] : metrics)
    j["metrics"][name] = {{"mean", s.mean}, {"stddev", s.stddev}, {"display", format_mean_std(s)}};
  j["best_index"] = best_index;
  return j.dump(2);
}

ReplicateSummary ReplicateSummary::from_json(const std::string& text) {
  json j = json::parse(text);
  ReplicateSummary s;
  for (const json& r : j.at("runs"))
    s.runs.push_back(RunResult{r.at("seed").get<uint64_t>(), EvalReport::from_json(r.at("report").dump())});
  for (auto& [name, m] : j.at("metrics").items())
    s.metrics[name] = MetricSummary{m.at("mean").get<double>(), m.at("stddev").get<double>()};
  s.best_index = j.at("best_index").get<size_t>();
  return s;
}

std::string render_tables(const std::vector<InDatasetRow>& in_dataset,
                          const std::map<std::string, PortabilityMatrix>& portability_by_model) {
  std::ostringstream ss;
  ss << "== In-dataset (mean±std over replicates, population std) ==\n";
  ss << "Dataset\tModel\tMacro F1\tPos. class - F1\n";
  if (in_dataset.empty()) ss << "(no runs)\n";
  for (const InDatasetRow& row : in_dataset)
    ss << row.dataset << '\t' << row.model << '\t' << format_mean_std(row.macro_f1) << '\t'
       << format_mean_std(row.positive_f1) << '\n';

  ss << "\n== Portability: macro F1 (rows train, columns test) ==\n";
  if (portability_by_model.empty()) ss << "(no runs)\n";
  for (const auto& [model_name, matrix] : portability_by_model) {
    ss << "Model " << model_name << "\n";
    ss << "Train";
    for (const std::string& d : matrix.datasets) ss << '\t' << d;
    ss << '\n';
    for (const std::string& train : matrix.datasets) {
      ss << train;
      for (const std::string& test : matrix.datasets) ss << '\t' << format_metric(matrix.at(train, test).macro_f1);
      ss << '\n';
    }
  }

  ss << "\n== Portability: positive-class P / R ==\n";
  if (portability_by_model.empty()) ss << "(no runs)\n";
  for (const auto& [model_name, matrix] : portability_by_model) {
    ss << "Model " << model_name << "\n";
    ss << "Train";
    for (const std::string& d : matrix.datasets) ss << '\t' << d << " P\t" << d << " R";
    ss << '\n';
    for (const std::string& train : matrix.datasets) {
      ss << train;
      for (const std::string& test : matrix.datasets) {
        const EvalReport& r = matrix.at(train, test);
        ss << '\t' << format_metric(r.positive.precision) << '\t' << format_metric(r.positive.recall);
      }
      ss << '\n';
    }
  }
  return ss.str();
}

void ClassifierModel::save(const std::string& dir) const {
  fs::create_directories(dir);
  std::string bin = "DAPTCLS1";
  const uint64_t n_enc = encoder.params().size();
  const uint64_t n_head = head_w.size() + head_b.size();
  bin.append(reinterpret_cast<const char*>(&n_enc), sizeof n_enc);
  bin.append(reinterpret_cast<const char*>(&n_head), sizeof n_head);
  bin.append(reinterpret_cast<const char*>(encoder.params().data()), n_enc * sizeof(double));
  bin.append(reinterpret_cast<const char*>(head_w.data()), head_w.size() * sizeof(double));
  bin.append(reinterpret_cast<const char*>(head_b.data()), head_b.size() * sizeof(double));
  write_file(dir + "/classifier.bin", bin);

  json cfg;
  cfg["format_version"] = 1;
  cfg["encoder"] = json::parse(encoder.config().to_json());
  cfg["max_len"] = max_len;
  write_file(dir + "/config.json", cfg.dump(2) + "\n");
  vocab.save(dir + "/vocab.txt");
}

ClassifierModel ClassifierModel::load(const std::string& dir) {
  json cfg = json::parse(read_file(dir + "/config.json"));
  if (cfg.at("format_version").get<int>() != 1) throw InvalidArgument("unsupported classifier format version");
  ClassifierModel model(nn::EncoderConfig::from_json(cfg.at("encoder").dump()));
  model.max_len = cfg.at("max_len").get<size_t>();
  model.vocab = Vocab::load(dir + "/vocab.txt");

  std::string bin = read_file(dir + "/classifier.bin");
  if (bin.size() < 24 || bin.substr(0, 8) != "DAPTCLS1")
    throw InvalidArgument(dir + "/classifier.bin is not a version-1 classifier");
  uint64_t n_enc = 0, n_head = 0;
  std::memcpy(&n_enc, bin.data() + 8, 8);
  std::memcpy(&n_head, bin.data() + 16, 8);
  const size_t H = model.encoder.config().hidden;
  if (n_enc != model.encoder.param_count() || n_head != H * 2 + 2 ||
      bin.size() != 24 + (n_enc + n_head) * sizeof(double))
    throw InvalidArgument(dir + "/classifier.bin does not match its config");
  std::memcpy(model.encoder.params().data(), bin.data() + 24, n_enc * sizeof(double));
  model.head_w.resize(H * 2);
  model.head_b.resize(2);
  std::memcpy(model.head_w.data(), bin.data() + 24 + n_enc * sizeof(double), H * 2 * sizeof(double));
  std::memcpy(model.head_b.data(), bin.data() + 24 + (n_enc + H * 2) * sizeof(double), 2 * sizeof(double));
  return model;
}

}  // namespace dapt
