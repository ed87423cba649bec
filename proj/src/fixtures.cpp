#include "dapt/fixtures.hpp"

#include <filesystem>

#include "json.hpp"

namespace dapt::fixtures {

namespace fs = std::filesystem;
using nlohmann::json;

static const std::vector<std::string> kFunctionWords = {"the", "a", "to", "and", "with", "it", "on"};

static const std::vector<std::string> kDomainA = {"zorp", "flim",  "brack", "twill", "norv", "quist",
                                                  "plarn", "dris", "kulm",  "veech", "smar", "glot",
                                                  "grax", "molp",  "vurn",  "trin"};
static const std::vector<std::string> kDomainB = {"murn", "pelt", "crav", "osk",  "jint", "wexa",
                                                  "dolb", "ruck", "hest", "abro", "fyne", "tolk",
                                                  "bron", "klee", "shem", "quol"};

const std::vector<std::string>& content_words(Domain d) { return d == Domain::a ? kDomainA : kDomainB; }

CuePair task_cues(Domain d, int variant) {
  if (d == Domain::a) return variant == 0 ? CuePair{"grax", "molp"} : CuePair{"vurn", "trin"};
  return variant == 0 ? CuePair{"bron", "klee"} : CuePair{"shem", "quol"};
}

std::string sentence(Domain d, Rng& rng) {
  // bigram chains: every word has two fixed successors, so the text carries
  // structure a language model can keep learning past the unigram stage
  const std::vector<std::string>& pool = content_words(d);
  const size_t n = pool.size();
  const size_t words = 5 + rng.next_below(7);
  size_t w = rng.next_below(n);
  std::string out;
  for (size_t i = 0; i < words; ++i) {
    if (!out.empty()) out += " ";
    if (rng.next_double() < 0.15) {
      out += kFunctionWords[rng.next_below(kFunctionWords.size())];
      out += " ";
    }
    out += pool[w];
    w = rng.next_double() < 0.5 ? (w * 5 + 3) % n : (w * 7 + 5) % n;
  }
  return out;
}

std::vector<std::string> documents(Domain d, size_t count, uint64_t seed) {
  Rng rng(derive_seed(seed, d == Domain::a ? "docs-a" : "docs-b"));
  std::vector<std::string> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) out.push_back(sentence(d, rng));
  return out;
}

Corpus corpus(Domain d, size_t count, uint64_t seed) {
  Corpus c;
  const std::string community = d == Domain::a ? "domain_a" : "domain_b";
  for (std::string& text : documents(d, count, seed)) {
    c.stats[community]++;
    c.token_count += whitespace_token_count(text);
    c.documents.push_back(CleanDocument{std::move(text), community, 1400000000});
  }
  return c;
}

std::vector<std::string> dump_lines(size_t count, uint64_t seed) {
  Rng rng(derive_seed(seed, "synth-dump"));
  const std::vector<std::string> communities = {"alpha", "bravo", "charlie", "delta", "echo"};
  const std::vector<double> weights = {0.30, 0.25, 0.15, 0.20, 0.10};
  // timestamps span 2011-03 .. 2016-03; the window is 2012-01 .. 2015-06
  const int64_t ts_lo = 1299000000, ts_hi = 1459000000;

  std::vector<std::string> lines;
  lines.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const double kind = rng.next_double();
    if (kind < 0.02) {
      lines.push_back("{not valid json");
      continue;
    }
    if (kind < 0.03) {
      lines.push_back("");
      continue;
    }
    double pick = rng.next_double();
    size_t ci = 0;
    for (double acc = 0.0; ci < communities.size(); ++ci) {
      acc += weights[ci];
      if (pick < acc) break;
    }
    if (ci == communities.size()) ci = communities.size() - 1;
    const int64_t ts = ts_lo + static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(ts_hi - ts_lo)));

    std::string body;
    const double body_kind = rng.next_double();
    if (body_kind < 0.03) {
      body = "[deleted]";
    } else if (body_kind < 0.05) {
      body = "[removed]";
    } else if (body_kind < 0.07) {
      body = "   ";
    } else {
      body = sentence(Domain::a, rng);
      const double decor = rng.next_double();
      if (decor < 0.10) body = "@someone " + body;
      if (decor >= 0.10 && decor < 0.18) body += " https://example.com/" + std::to_string(i);
      if (decor >= 0.18 && decor < 0.24) body += " #tag" + std::to_string(i % 7);
      if (decor >= 0.24 && decor < 0.28) body += " \xF0\x9F\x94\xA5";  // fire emoji
      if (decor >= 0.28 && decor < 0.31) body += "\n\nsecond  line";
    }

    json rec;
    const double field_kind = rng.next_double();
    if (field_kind < 0.01) {
      rec = json{{"subreddit", communities[ci]}, {"created_utc", ts}};  // body missing
    } else if (field_kind < 0.02) {
      rec = json{{"body", body}, {"created_utc", ts}};  // subreddit missing
    } else if (field_kind < 0.025) {
      rec = json{{"body", body}, {"subreddit", communities[ci]}};  // timestamp missing
    } else {
      rec = json{{"body", body}, {"subreddit", communities[ci]}, {"created_utc", ts}};
    }
    lines.push_back(rec.dump());
  }
  return lines;
}

std::string dump_allowlist() {
  return "# synthetic allowlist: three of the five dump communities\n"
         "alpha\n"
         "bravo\n"
         "charlie\n";
}

std::vector<TaskRow> task_rows(Domain d, int variant, size_t count, size_t positives, uint64_t seed) {
  if (positives > count) throw InvalidArgument("positives cannot exceed the row count");
  Rng rng(derive_seed(seed, "task-rows"));
  const CuePair cues = task_cues(d, variant);
  std::vector<TaskRow> rows;
  rows.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    TaskRow row;
    row.positive = i < positives;
    row.id = std::to_string(1000 + i);
    // base sentence, scrubbed of both cue words, then one cue inserted
    std::string base;
    do {
      base = sentence(d, rng);
    } while (base.find(cues.positive) != std::string::npos || base.find(cues.negative) != std::string::npos);
    const std::string& cue = row.positive ? cues.positive : cues.negative;
    std::vector<std::string_view> words = split_whitespace(base);
    const size_t at = rng.next_below(words.size() + 1);
    std::string text;
    for (size_t w = 0; w <= words.size(); ++w) {
      if (w == at) {
        if (!text.empty()) text += " ";
        text += cue;
      }
      if (w < words.size()) {
        if (!text.empty()) text += " ";
        text += std::string(words[w]);
      }
    }
    row.text = text;
    rows.push_back(std::move(row));
  }
  // stable seeded interleaving so labels are not position-correlated
  seeded_shuffle(rows, rng);
  return rows;
}

std::string task_tsv(const std::vector<TaskRow>& rows) {
  std::string out = "id\ttext\tlabel\n";
  for (const TaskRow& r : rows) out += r.id + "\t" + r.text + "\t" + (r.positive ? "POS" : "NEG") + "\n";
  return out;
}

void write_task_files(const std::string& dir, const std::string& name, Domain d, int variant, size_t train,
                      size_t train_pos, size_t test, size_t test_pos, uint64_t seed) {
  fs::create_directories(dir);
  write_file(dir + "/" + name + "_train.tsv", task_tsv(task_rows(d, variant, train, train_pos, seed)));
  write_file(dir + "/" + name + "_test.tsv", task_tsv(task_rows(d, variant, test, test_pos, seed + 1)));
}

void write_all(const std::string& dir) {
  fs::create_directories(dir);

  std::string dump;
  for (const std::string& line : dump_lines(1000, 42)) {
    dump += line;
    dump += "\n";
  }
  write_file(dir + "/synth_dump.jsonl", dump);
  write_file(dir + "/allowlist.txt", dump_allowlist());

  // portability trio: two domain-a tasks with different cues, one domain-b
  write_task_files(dir, "taska", Domain::a, 0, 240, 120, 60, 30, 7);
  write_task_files(dir, "taska2", Domain::a, 1, 160, 80, 40, 20, 8);
  write_task_files(dir, "taskb", Domain::b, 0, 160, 80, 40, 20, 9);

  // perturbed copies: counts deliberately off by one against the canonical
  // expectations (train 20/8, test 10/4)
  std::vector<TaskRow> train_rows = task_rows(Domain::a, 0, 20, 8, 11);
  std::vector<TaskRow> test_rows = task_rows(Domain::a, 0, 10, 4, 12);
  write_file(dir + "/perturbed_ok_train.tsv", task_tsv(train_rows));
  write_file(dir + "/perturbed_ok_test.tsv", task_tsv(test_rows));

  std::vector<TaskRow> short_train(train_rows.begin() + 1, train_rows.end());  // drops one row
  write_file(dir + "/perturbed_short_train.tsv", task_tsv(short_train));

  std::vector<TaskRow> flipped_test = test_rows;  // one negative flipped positive
  for (TaskRow& r : flipped_test)
    if (!r.positive) {
      r.positive = true;
      break;
    }
  write_file(dir + "/perturbed_flipped_test.tsv", task_tsv(flipped_test));
}

}  // namespace dapt::fixtures
