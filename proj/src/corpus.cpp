#include "dapt/corpus.hpp"

#include <omp.h>

#include <algorithm>
#include <sstream>

#include "json.hpp"

namespace dapt {

using nlohmann::json;

const char* skip_reason_name(SkipReason r) {
  switch (r) {
    case SkipReason::missing_field: return "missing-field";
    case SkipReason::malformed_record: return "malformed-record";
    case SkipReason::empty_body: return "empty-body";
    case SkipReason::not_allowlisted: return "not-allowlisted";
    case SkipReason::out_of_window: return "out-of-window";
    case SkipReason::dropped_body: return "dropped-body";
  }
  return "?";
}

void CorpusConfig::validate() const {
  if (allowlist.empty()) throw InvalidArgument("corpus allowlist is empty");
  if (window_start.index() > window_end.index())
    throw InvalidArgument("corpus window_start is after window_end");
}

std::set<std::string> CorpusConfig::load_allowlist(const std::string& path) {
  std::set<std::string> names;
  for (const std::string& raw : read_lines(path)) {
    std::string line = trim(raw);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    names.insert(to_lower_ascii(line));
  }
  return names;
}

uint64_t whitespace_token_count(std::string_view text) { return split_whitespace(text).size(); }

ParseResult parse_record(std::string_view line) {
  std::string trimmed = trim(line);
  if (trimmed.empty()) return {std::nullopt, SkipReason::malformed_record};
  json rec = json::parse(trimmed, nullptr, /*allow_exceptions=*/false);
  if (rec.is_discarded() || !rec.is_object()) return {std::nullopt, SkipReason::malformed_record};
  if (!rec.contains("body") || !rec.contains("subreddit") || !rec.contains("created_utc"))
    return {std::nullopt, SkipReason::missing_field};
  if (!rec["body"].is_string() || !rec["subreddit"].is_string())
    return {std::nullopt, SkipReason::missing_field};

  int64_t ts = 0;
  const json& cu = rec["created_utc"];
  if (cu.is_number_integer()) {
    ts = cu.get<int64_t>();
  } else if (cu.is_string()) {
    // dumps frequently carry the timestamp as a decimal string
    const std::string s = cu.get<std::string>();
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      return {std::nullopt, SkipReason::missing_field};
    ts = std::stoll(s);
  } else {
    return {std::nullopt, SkipReason::missing_field};
  }
  if (ts <= 0) return {std::nullopt, SkipReason::missing_field};

  std::string body = rec["body"].get<std::string>();
  std::string community = to_lower_ascii(trim(rec["subreddit"].get<std::string>()));
  if (body.empty()) return {std::nullopt, SkipReason::empty_body};
  if (community.empty()) return {std::nullopt, SkipReason::missing_field};
  return {RawComment{std::move(body), std::move(community), ts}, SkipReason::malformed_record};
}

bool accept(const RawComment& c, const CorpusConfig& cfg) {
  if (!cfg.allowlist.count(c.subreddit)) return false;
  int ym = utc_year_month(c.created_utc).index();
  if (ym < cfg.window_start.index() || ym > cfg.window_end.index()) return false;
  if (cfg.drop_bodies.count(c.body)) return false;
  if (trim(c.body).empty()) return false;
  return true;
}

// Classifies a rejected-but-parsed comment for the skip counters.
static SkipReason reject_reason(const RawComment& c, const CorpusConfig& cfg) {
  if (!cfg.allowlist.count(c.subreddit)) return SkipReason::not_allowlisted;
  int ym = utc_year_month(c.created_utc).index();
  if (ym < cfg.window_start.index() || ym > cfg.window_end.index()) return SkipReason::out_of_window;
  if (cfg.drop_bodies.count(c.body)) return SkipReason::dropped_body;
  return SkipReason::empty_body;  // blank after trimming
}

Corpus build(const std::vector<std::string>& lines, const CorpusConfig& cfg, const PreprocessFn& pre,
             BuildCounters* counters, int num_threads) {
  cfg.validate();
  const size_t n = lines.size();
  const int threads = num_threads > 0 ? num_threads : omp_get_max_threads();
  const size_t shards = std::max<size_t>(1, std::min<size_t>(static_cast<size_t>(threads) * 4, std::max<size_t>(n, 1)));
  const size_t shard_len = (n + shards - 1) / shards;

  struct ShardOut {
    std::vector<CleanDocument> docs;
    std::map<SkipReason, uint64_t> skipped;
  };
  std::vector<ShardOut> outs(shards);

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (size_t s = 0; s < shards; ++s) {
    size_t begin = s * shard_len;
    size_t end = std::min(n, begin + shard_len);
    ShardOut& out = outs[s];
    for (size_t i = begin; i < end; ++i) {
      ParseResult pr = parse_record(lines[i]);
      if (!pr.comment) {
        out.skipped[pr.reason]++;
        continue;
      }
      if (!accept(*pr.comment, cfg)) {
        out.skipped[reject_reason(*pr.comment, cfg)]++;
        continue;
      }
      out.docs.push_back(CleanDocument{pre(pr.comment->body), pr.comment->subreddit, pr.comment->created_utc});
    }
  }

  Corpus corpus;
  BuildCounters local;
  local.total_lines = n;
  for (ShardOut& out : outs) {
    for (auto& [reason, count] : out.skipped) local.skipped[reason] += count;
    for (CleanDocument& d : out.docs) {
      corpus.stats[d.community]++;
      corpus.token_count += whitespace_token_count(d.text);
      corpus.documents.push_back(std::move(d));
    }
  }
  local.accepted = corpus.documents.size();
  if (counters) *counters = local;
  return corpus;
}

Corpus build_from_files(const std::vector<std::string>& paths, const CorpusConfig& cfg, const PreprocessFn& pre,
                        BuildCounters* counters, int num_threads) {
  std::vector<std::string> lines;
  for (const std::string& path : paths) {
    std::vector<std::string> file_lines = read_lines(path);  // throws IoError with the file identity
    lines.insert(lines.end(), std::make_move_iterator(file_lines.begin()), std::make_move_iterator(file_lines.end()));
  }
  return build(lines, cfg, pre, counters, num_threads);
}

SplitCorpus split(const Corpus& corpus, size_t heldout_size, uint64_t seed) {
  if (heldout_size > corpus.size())
    throw InvalidArgument("heldout_size " + std::to_string(heldout_size) + " exceeds corpus size " +
                          std::to_string(corpus.size()));
  std::vector<size_t> idx(corpus.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, "corpus-split"));
  seeded_shuffle(idx, rng);
  std::vector<bool> in_heldout(corpus.size(), false);
  for (size_t i = 0; i < heldout_size; ++i) in_heldout[idx[i]] = true;

  SplitCorpus out;
  out.seed = seed;
  for (size_t i = 0; i < corpus.size(); ++i) {
    Corpus& part = in_heldout[i] ? out.heldout : out.train;
    const CleanDocument& d = corpus.documents[i];
    part.documents.push_back(d);
    part.stats[d.community]++;
    part.token_count += whitespace_token_count(d.text);
  }
  return out;
}

std::map<std::string, uint64_t> stats(const Corpus& corpus) {
  std::map<std::string, uint64_t> table;
  for (const CleanDocument& d : corpus.documents) table[d.community]++;
  return table;
}

uint64_t BuildCounters::skipped_total() const {
  uint64_t t = 0;
  for (const auto& [r, c] : skipped) t += c;
  return t;
}

std::string Corpus::serialize_jsonl() const {
  std::string out;
  for (const CleanDocument& d : documents) {
    json rec{{"text", d.text}, {"community", d.community}, {"created_utc", d.created_utc}};
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

Corpus Corpus::parse_jsonl(std::string_view content) {
  Corpus corpus;
  int line_no = 0;
  for (const std::string& line : split(content, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded())
      throw InvalidArgument("corpus line " + std::to_string(line_no) + " is not valid JSON");
    CleanDocument d{rec.at("text").get<std::string>(), rec.at("community").get<std::string>(),
                    rec.at("created_utc").get<int64_t>()};
    corpus.stats[d.community]++;
    corpus.token_count += whitespace_token_count(d.text);
    corpus.documents.push_back(std::move(d));
  }
  return corpus;
}

void Corpus::save_jsonl(const std::string& path) const { write_file(path, serialize_jsonl()); }

Corpus Corpus::load_jsonl(const std::string& path) { return parse_jsonl(read_file(path)); }

std::string Corpus::stats_table() const {
  std::ostringstream ss;
  ss << "community\tmessages\n";
  for (const auto& [community, count] : stats) ss << community << '\t' << count << '\n';
  ss << "TOTAL\t" << documents.size() << '\n';
  ss << "# token basis: whitespace tokens = " << token_count << '\n';
  return ss.str();
}

std::string Corpus::stats_json() const {
  json j;
  j["schema_version"] = 1;
  j["messages"] = documents.size();
  j["token_count"] = token_count;
  j["token_basis"] = "whitespace";
  j["per_community"] = json::object();
  for (const auto& [community, count] : stats) j["per_community"][community] = count;
  return j.dump(2) + "\n";
}

}  // namespace dapt
