#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dapt/metrics.hpp"
#include "dapt/preprocess.hpp"

namespace dapt {

struct LabeledExample {
  std::string id;
  std::string text;  // normalized (fine-tuning mode) at load time
  Label label = Label::negative;
};

// Layout and expectations for one benchmark dataset. The bundled pipeline
// config records the three official layouts; synthetic fixtures reuse the
// same machinery.
struct DatasetSpec {
  std::string name;
  std::string train_path;
  std::string test_path;
  std::string id_column = "id";
  std::string text_column = "text";
  std::string label_column = "label";
  std::map<std::string, Label> label_map;  // raw value -> binary class
  // expected counts (unset = not checked)
  std::optional<uint64_t> expect_train_total, expect_test_total;
  std::optional<uint64_t> expect_train_positive, expect_test_positive;
};

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  DatasetSpec provenance;

  uint64_t positives(bool test_part) const;
};

// Reads both tab-separated files (header row required), applies the label
// mapping and fine-tuning-mode preprocessing. Unknown raw labels and missing
// columns are fatal, with the offending value and row in the message.
DatasetSplit load_dataset(const DatasetSpec& spec);

struct ValidationEntry {
  std::string check;
  uint64_t expected = 0;
  uint64_t actual = 0;
  bool pass = false;
};
struct ValidationReport {
  std::string dataset;
  std::vector<ValidationEntry> entries;
  bool all_pass() const;
  std::string to_text() const;
};

// Compares the loaded split against the spec's expected counts. Mismatches
// are report entries, never exceptions.
ValidationReport validate_dataset(const DatasetSplit& split);

}  // namespace dapt
