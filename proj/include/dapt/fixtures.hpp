#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dapt/corpus.hpp"
#include "dapt/util.hpp"

namespace dapt::fixtures {

// Deterministic synthetic data used by the demos and the test suites. Two
// disjoint content-word pools ("domain a" / "domain b") share only function
// words, which is what makes the domain-adaptation experiments measurable at
// desk scale.

enum class Domain { a, b };

const std::vector<std::string>& content_words(Domain d);
// cue pairs for the keyword classification tasks (positive cue, negative cue)
struct CuePair {
  std::string positive;
  std::string negative;
};
CuePair task_cues(Domain d, int variant);  // variant 0 or 1

std::string sentence(Domain d, Rng& rng);

// Plain documents for MLM corpora.
std::vector<std::string> documents(Domain d, size_t count, uint64_t seed);
Corpus corpus(Domain d, size_t count, uint64_t seed);

// Synthetic comment dump: `count` newline-delimited records over communities
// alpha/bravo/charlie (allowlisted) and delta/echo (not), timestamps
// straddling the 2012-01..2015-06 window, plus malformed lines, missing
// fields, deleted and blank bodies.
std::vector<std::string> dump_lines(size_t count, uint64_t seed);
std::string dump_allowlist();

// Keyword classification rows: header id/text/label, labels POS/NEG. The
// positive rows contain the positive cue, negative rows the negative cue.
struct TaskRow {
  std::string id;
  std::string text;
  bool positive = false;
};
std::vector<TaskRow> task_rows(Domain d, int variant, size_t count, size_t positives, uint64_t seed);
std::string task_tsv(const std::vector<TaskRow>& rows);
void write_task_files(const std::string& dir, const std::string& name, Domain d, int variant, size_t train,
                      size_t train_pos, size_t test, size_t test_pos, uint64_t seed);

// Writes every bundled fixture under dir: the dump + allowlist, the three
// portability datasets, the domain-a task, and perturbed copies whose counts
// deliberately contradict their declared expectations.
void write_all(const std::string& dir);

}  // namespace dapt::fixtures
