#pragma once

#include <string>
#include <vector>

#include "dapt/config.hpp"
#include "dapt/manifest.hpp"
#include "dapt/task_data.hpp"

namespace dapt {

// Files a stage read and wrote (outputs relative to out_dir).
struct StageIo {
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

// Executes one pipeline stage. Mutates cfg by filling defaulted paths in, so
// the recorded snapshot re-runs without relying on implicit locations.
// Stages: build-corpus, train-vocab, pretrain, finetune, evaluate,
// portability, report.
StageIo run_stage(const std::string& command, RawConfig& cfg, const std::string& out_dir);

// run_stage plus an append-only manifest with input/output digests.
RunManifest run_with_manifest(const std::string& command, RawConfig cfg, const std::string& out_dir);

struct ReproduceResult {
  std::vector<std::string> mismatches;  // human-readable divergence lines
  bool ok() const { return mismatches.empty(); }
};

// Re-runs the stage recorded in a manifest into scratch_dir and compares
// every recorded digest.
ReproduceResult reproduce(const std::string& manifest_path, const std::string& scratch_dir);

// [dataset:<name>] section -> loader spec.
DatasetSpec dataset_spec_from_config(const RawConfig& cfg, const std::string& name);

}  // namespace dapt
