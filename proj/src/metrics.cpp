#include "dapt/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "dapt/util.hpp"
#include "json.hpp"

namespace dapt {

using nlohmann::json;

ConfusionCounts confusion(const std::vector<Label>& gold, const std::vector<Label>& pred) {
  if (gold.empty()) throw InvalidArgument("confusion needs at least one example");
  if (gold.size() != pred.size())
    throw InvalidArgument("gold/pred length mismatch: " + std::to_string(gold.size()) + " vs " +
                          std::to_string(pred.size()));
  ConfusionCounts c;
  for (size_t i = 0; i < gold.size(); ++i) {
    const bool g = gold[i] == Label::positive;
    const bool p = pred[i] == Label::positive;
    if (g && p)
      ++c.tp;
    else if (!g && p)
      ++c.fp;
    else if (g && !p)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

ClassMetrics prf(const ConfusionCounts& c, Label cls) {
  // for the negative class the "hits" are the true negatives
  const double tp = cls == Label::positive ? static_cast<double>(c.tp) : static_cast<double>(c.tn);
  const double fp = cls == Label::positive ? static_cast<double>(c.fp) : static_cast<double>(c.fn);
  const double fn = cls == Label::positive ? static_cast<double>(c.fn) : static_cast<double>(c.fp);
  ClassMetrics m;
  if (tp + fp > 0)
    m.precision = tp / (tp + fp);
  else
    m.degenerate = true;
  if (tp + fn > 0)
    m.recall = tp / (tp + fn);
  else
    m.degenerate = true;
  if (m.precision + m.recall > 0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  else
    m.degenerate = true;
  return m;
}

double macro_f1(const ConfusionCounts& c) {
  return 0.5 * (prf(c, Label::positive).f1 + prf(c, Label::negative).f1);
}

EvalReport evaluate_labels(const std::vector<Label>& gold, const std::vector<Label>& pred,
                           const std::string& dataset, const std::string& model) {
  EvalReport r;
  r.dataset = dataset;
  r.model = model;
  r.counts = confusion(gold, pred);
  r.positive = prf(r.counts, Label::positive);
  r.negative = prf(r.counts, Label::negative);
  r.macro_f1 = 0.5 * (r.positive.f1 + r.negative.f1);
  return r;
}

static json class_to_json(const ClassMetrics& m) {
  return json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"degenerate", m.degenerate}};
}

static ClassMetrics class_from_json(const json& j) {
  ClassMetrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.degenerate = j.at("degenerate").get<bool>();
  return m;
}

std::string EvalReport::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["dataset"] = dataset;
  j["model"] = model;
  j["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}, {"tn", counts.tn}};
  j["positive"] = class_to_json(positive);
  j["negative"] = class_to_json(negative);
  j["macro_f1"] = macro_f1;
  return j.dump(2);
}

EvalReport EvalReport::from_json(const std::string& text) {
  json j = json::parse(text);
  EvalReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.counts.tp = j.at("counts").at("tp").get<uint64_t>();
  r.counts.fp = j.at("counts").at("fp").get<uint64_t>();
  r.counts.fn = j.at("counts").at("fn").get<uint64_t>();
  r.counts.tn = j.at("counts").at("tn").get<uint64_t>();
  r.positive = class_from_json(j.at("positive"));
  r.negative = class_from_json(j.at("negative"));
  r.macro_f1 = j.at("macro_f1").get<double>();
  return r;
}

const EvalReport& PortabilityMatrix::at(const std::string& train, const std::string& test) const {
  auto it = cells.find({train, test});
  if (it == cells.end()) throw InvalidArgument("portability matrix has no cell (" + train + ", " + test + ")");
  return it->second;
}

std::string PortabilityMatrix::to_json() const {
  json j;
  j["schema_version"] = 1;
  j["datasets"] = datasets;
  j["cells"] = json::array();
  for (const auto& [key, report] : cells) {
    j["cells"].push_back(
        {{"train", key.first}, {"test", key.second}, {"report", json::parse(report.to_json())}});
  }
  return j.dump(2);
}

PortabilityMatrix PortabilityMatrix::from_json(const std::string& text) {
  json j = json::parse(text);
  PortabilityMatrix m;
  m.datasets = j.at("datasets").get<std::vector<std::string>>();
  for (const json& cell : j.at("cells"))
    m.cells[{cell.at("train").get<std::string>(), cell.at("test").get<std::string>()}] =
        EvalReport::from_json(cell.at("report").dump());
  return m;
}

MetricSummary summarize(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgument("summarize needs at least one value");
  MetricSummary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (starts_with(s, "0.")) return s.substr(1);
  if (starts_with(s, "-0.")) return "-" + s.substr(2);
  return s;
}

std::string format_mean_std(const MetricSummary& s) {
  return format_metric(s.mean) + "\xc2\xb1" + format_metric(s.stddev);
}

}  // namespace dapt
