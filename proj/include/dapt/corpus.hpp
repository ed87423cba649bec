#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dapt/util.hpp"

namespace dapt {

// One parsed dump record. Only text, community, and timestamp are ever kept.
struct RawComment {
  std::string body;
  std::string subreddit;  // case-normalized (lowercased, trimmed)
  int64_t created_utc = 0;
};

enum class SkipReason {
  missing_field,
  malformed_record,
  empty_body,
  not_allowlisted,
  out_of_window,
  dropped_body,
};
const char* skip_reason_name(SkipReason r);

struct ParseResult {
  std::optional<RawComment> comment;
  SkipReason reason = SkipReason::malformed_record;  // meaningful when !comment
};

struct CorpusConfig {
  std::set<std::string> allowlist;  // lowercased community names
  YearMonth window_start{2012, 1};
  YearMonth window_end{2015, 6};
  std::set<std::string> drop_bodies{"[deleted]", "[removed]"};

  void validate() const;
  static std::set<std::string> load_allowlist(const std::string& path);
};

struct CleanDocument {
  std::string text;
  std::string community;
  int64_t created_utc = 0;
  bool operator==(const CleanDocument&) const = default;
};

// Documents in stream order plus per-community counts. token_count uses
// whitespace tokens; every report that carries it names that basis.
struct Corpus {
  std::vector<CleanDocument> documents;
  std::map<std::string, uint64_t> stats;
  uint64_t token_count = 0;

  size_t size() const { return documents.size(); }
  std::string serialize_jsonl() const;
  static Corpus parse_jsonl(std::string_view content);
  void save_jsonl(const std::string& path) const;
  static Corpus load_jsonl(const std::string& path);
  // "community\tmessages" rows in lexicographic order plus a total line.
  std::string stats_table() const;
  std::string stats_json() const;
};

struct SplitCorpus {
  Corpus train;
  Corpus heldout;
  uint64_t seed = 0;
};

struct BuildCounters {
  uint64_t total_lines = 0;
  uint64_t accepted = 0;
  std::map<SkipReason, uint64_t> skipped;
  uint64_t skipped_total() const;
};

// Never throws and never aborts the stream: malformed input becomes a
// skip-marker with a reason code.
ParseResult parse_record(std::string_view line);

// Community allowlisted, timestamp inside the inclusive month window (UTC),
// body not a drop sentinel and not blank after trimming.
bool accept(const RawComment& c, const CorpusConfig& cfg);

using PreprocessFn = std::function<std::string(std::string_view)>;

// Builds the corpus from dump lines. Work is sharded across OpenMP threads;
// output order is (shard index, line index), so the result is byte-identical
// for any worker count. num_threads 0 = library default.
Corpus build(const std::vector<std::string>& lines, const CorpusConfig& cfg, const PreprocessFn& pre,
             BuildCounters* counters = nullptr, int num_threads = 0);

// Convenience wrapper over one or more dump files (plain or .gz).
Corpus build_from_files(const std::vector<std::string>& paths, const CorpusConfig& cfg, const PreprocessFn& pre,
                        BuildCounters* counters = nullptr, int num_threads = 0);

// Seeded uniform partition; order inside each part follows source order.
SplitCorpus split(const Corpus& corpus, size_t heldout_size, uint64_t seed);

// Per-community message counts (same map the corpus carries, recomputed).
std::map<std::string, uint64_t> stats(const Corpus& corpus);

uint64_t whitespace_token_count(std::string_view text);

}  // namespace dapt
