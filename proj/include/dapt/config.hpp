#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dapt/util.hpp"

namespace dapt {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Plain-text sectioned key=value configuration. Keys keep their order; every
// key must belong to the known schema (unknown keys are rejected with their
// line number).
class RawConfig {
 public:
  static RawConfig parse(std::string_view text, const std::string& origin = "<config>");
  static RawConfig parse_file(const std::string& path);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key) const;
  std::string get_or(const std::string& section, const std::string& key, const std::string& fallback) const;
  uint64_t get_u64(const std::string& section, const std::string& key, uint64_t fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;

  // "section.key=value", used by --set overrides.
  void set_dotted(const std::string& dotted, const std::string& value);
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::vector<std::string> sections() const;
  const std::vector<std::pair<std::string, std::string>>& section_items(const std::string& section) const;

  // Rejects keys outside the pipeline schema; names the key and line.
  void validate_schema() const;

  std::string serialize() const;  // canonical INI round-trip
  std::string to_json() const;
  static RawConfig from_json(const std::string& text);

 private:
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections_;
  std::map<std::string, int> line_of_;  // "section.key" -> line number
  std::string origin_ = "<config>";
};

// The paper-scale defaults every stage starts from; configs override them.
RawConfig default_config();

std::vector<std::string> parse_list(const std::string& value);  // comma-separated
std::vector<uint64_t> parse_u64_list(const std::string& value);

}  // namespace dapt
