#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dapt/metrics.hpp"
#include "dapt/mlm.hpp"
#include "dapt/task_data.hpp"

namespace dapt {

// Fine-tuning hyperparameters. The defaults are the published recipe and a
// test pins them against the bundled defaults file.
struct FinetuneConfig {
  double learning_rate = 1e-5;
  size_t epochs = 5;
  double adam_eps = 1e-8;
  size_t max_len = 100;
  size_t batch_size = 32;
  size_t warmup_steps = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  uint64_t seed = 0;
  void validate() const;
};

// Encoder plus a 2-class linear head over the first-position representation.
struct ClassifierModel {
  nn::EncoderModel encoder;
  Vocab vocab;
  std::vector<double> head_w;  // [hidden, 2]
  std::vector<double> head_b;  // [2]
  size_t max_len = 100;

  explicit ClassifierModel(nn::EncoderConfig cfg) : encoder(std::move(cfg)) {}

  void save(const std::string& dir) const;
  static ClassifierModel load(const std::string& dir);
};

struct Prediction {
  Label label = Label::negative;
  double positive_score = 0.0;  // softmax probability of the positive class
};

// The decision rule: higher score wins, an exact tie is negative. Invariant
// under any positive rescaling of both scores.
Label decide(double negative_score, double positive_score);

// Max test macro-F1; ties break to the lowest seed.
size_t best_run_index(const std::vector<struct RunResult>& runs);

// Full-model fine-tuning with Adam for cfg.epochs over seeded-shuffled
// batches.
ClassifierModel finetune(const nn::Checkpoint& ckpt, const std::vector<LabeledExample>& train,
                         const FinetuneConfig& cfg);

// Deterministic; an exact score tie predicts negative.
std::vector<Prediction> predict(const ClassifierModel& model, const std::vector<std::string>& texts,
                                size_t batch_size = 32);

EvalReport evaluate_model(const ClassifierModel& model, const std::vector<LabeledExample>& examples,
                          const std::string& dataset_name, const std::string& model_name);

struct RunResult {
  uint64_t seed = 0;
  EvalReport report;
};

struct ReplicateSummary {
  std::vector<RunResult> runs;
  // metric name -> mean / population stddev over runs
  std::map<std::string, MetricSummary> metrics;
  size_t best_index = 0;  // max test macro-F1, ties to the lowest seed

  std::string to_json() const;
  static ReplicateSummary from_json(const std::string& text);
};

// One fine-tune + evaluation per seed; models come back in seed order so the
// caller can persist them.
ReplicateSummary replicate(const nn::Checkpoint& ckpt, const DatasetSplit& split, const FinetuneConfig& cfg,
                           const std::vector<uint64_t>& seeds, std::vector<ClassifierModel>* models = nullptr);

const ClassifierModel& select_best(const ReplicateSummary& summary, const std::vector<ClassifierModel>& models);

// Every (train, test) pair: models[train] evaluated on splits[test].test.
PortabilityMatrix portability(const std::map<std::string, ClassifierModel>& models,
                              const std::map<std::string, DatasetSplit>& splits);

// Rendered report document: in-dataset table (mean±std), macro-F1 grid, and
// positive-class P/R grid.
struct InDatasetRow {
  std::string dataset;
  std::string model;
  MetricSummary macro_f1;
  MetricSummary positive_f1;
};
std::string render_tables(const std::vector<InDatasetRow>& in_dataset,
                          const std::map<std::string, PortabilityMatrix>& portability_by_model);

}  // namespace dapt
