#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dapt/config.hpp"

namespace dapt {

// Record of one pipeline run: enough to re-execute the stage bit-identically
// and to check that nothing drifted. Manifests are append-only files under
// <out>/manifests/.
struct RunManifest {
  std::string command;
  RawConfig config;  // fully resolved snapshot (defaults + file + overrides)
  std::string out_dir;
  std::vector<std::pair<std::string, std::string>> inputs;   // (path, sha256)
  std::vector<std::pair<std::string, std::string>> outputs;  // (relative path, sha256)
  int64_t started_unix_ms = 0;
  int64_t wall_ms = 0;
  int format_version = 1;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
  // Writes manifests/<command>-<n>.json, choosing the first free n.
  std::string write(const std::string& out_dir) const;
  static RunManifest load(const std::string& path);
};

}  // namespace dapt
