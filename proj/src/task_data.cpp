#include "dapt/task_data.hpp"

#include <sstream>

#include "dapt/util.hpp"

namespace dapt {

static std::vector<LabeledExample> load_tsv(const std::string& path, const DatasetSpec& spec) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw IoError(path + " is empty (expected a header row)");

  std::vector<std::string> header = split(lines[0], '\t');
  auto column = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw InvalidArgument(path + ": missing column '" + name + "' (header: " + lines[0] + ")");
  };
  const size_t id_col = column(spec.id_column);
  const size_t text_col = column(spec.text_column);
  const size_t label_col = column(spec.label_column);

  std::vector<LabeledExample> out;
  for (size_t row = 1; row < lines.size(); ++row) {
    if (trim(lines[row]).empty()) continue;
    std::vector<std::string> cols = split(lines[row], '\t');
    if (cols.size() <= std::max({id_col, text_col, label_col}))
      throw InvalidArgument(path + " row " + std::to_string(row + 1) + ": expected " +
                            std::to_string(header.size()) + " columns, got " + std::to_string(cols.size()));
    const std::string raw_label = trim(cols[label_col]);
    auto it = spec.label_map.find(raw_label);
    if (it == spec.label_map.end())
      throw InvalidArgument(path + " row " + std::to_string(row + 1) + ": unknown label '" + raw_label + "'");
    LabeledExample ex;
    ex.id = cols[id_col];
    ex.text = preprocess(cols[text_col], PreprocessMode::finetuning);
    ex.label = it->second;
    out.push_back(std::move(ex));
  }
  return out;
}

DatasetSplit load_dataset(const DatasetSpec& spec) {
  if (spec.label_map.empty()) throw InvalidArgument("dataset '" + spec.name + "' has an empty label mapping");
  DatasetSplit split;
  split.provenance = spec;
  split.train = load_tsv(spec.train_path, spec);
  split.test = load_tsv(spec.test_path, spec);
  return split;
}

uint64_t DatasetSplit::positives(bool test_part) const {
  const std::vector<LabeledExample>& part = test_part ? test : train;
  uint64_t n = 0;
  for (const LabeledExample& ex : part)
    if (ex.label == Label::positive) ++n;
  return n;
}

bool ValidationReport::all_pass() const {
  for (const ValidationEntry& e : entries)
    if (!e.pass) return false;
  return true;
}

std::string ValidationReport::to_text() const {
  std::ostringstream ss;
  ss << "dataset " << dataset << "\n";
  for (const ValidationEntry& e : entries)
    ss << "  " << (e.pass ? "PASS" : "FAIL") << "  " << e.check << ": expected " << e.expected << ", actual "
       << e.actual << "\n";
  return ss.str();
}

ValidationReport validate_dataset(const DatasetSplit& split) {
  const DatasetSpec& spec = split.provenance;
  ValidationReport report;
  report.dataset = spec.name;
  auto check = [&](const char* name, const std::optional<uint64_t>& expected, uint64_t actual) {
    if (!expected) return;
    report.entries.push_back({name, *expected, actual, *expected == actual});
  };
  check("train size", spec.expect_train_total, split.train.size());
  check("test size", spec.expect_test_total, split.test.size());
  check("train positives", spec.expect_train_positive, split.positives(false));
  check("test positives", spec.expect_test_positive, split.positives(true));
  return report;
}

}  // namespace dapt
