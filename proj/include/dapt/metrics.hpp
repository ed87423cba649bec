#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dapt {

enum class Label : int8_t { negative = 0, positive = 1 };

// Counts with the positive class as reference. tp+fp+fn+tn equals the number
// of evaluated examples.
struct ConfusionCounts {
  uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  uint64_t total() const { return tp + fp + fn + tn; }
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // some denominator was 0 and defined away as 0
};

struct EvalReport {
  std::string dataset;
  std::string model;
  ConfusionCounts counts;
  ClassMetrics positive;
  ClassMetrics negative;
  double macro_f1 = 0.0;

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
};

ConfusionCounts confusion(const std::vector<Label>& gold, const std::vector<Label>& pred);

// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R); a zero denominator yields 0
// and sets the degenerate flag. The negative class swaps the roles of the
// counts symmetrically.
ClassMetrics prf(const ConfusionCounts& c, Label cls);

double macro_f1(const ConfusionCounts& c);

EvalReport evaluate_labels(const std::vector<Label>& gold, const std::vector<Label>& pred,
                           const std::string& dataset = "", const std::string& model = "");

// (train dataset, test dataset) -> report grid; the diagonal holds the
// in-dataset evaluations.
struct PortabilityMatrix {
  std::vector<std::string> datasets;
  std::map<std::pair<std::string, std::string>, EvalReport> cells;

  const EvalReport& at(const std::string& train, const std::string& test) const;
  std::string to_json() const;
  static PortabilityMatrix from_json(const std::string& text);
};

// Replicate aggregation: per-metric mean and population standard deviation.
struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by n)
};
MetricSummary summarize(const std::vector<double>& values);

// Table-style value rendering: 3 decimals, no leading zero (".765").
std::string format_metric(double v);
// ".765±.006"
std::string format_mean_std(const MetricSummary& s);

}  // namespace dapt
