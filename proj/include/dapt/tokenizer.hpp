#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dapt/corpus.hpp"

namespace dapt {

using TokenSequence = std::vector<int32_t>;

// Subword vocabulary with fixed special-token ids. Tokens are stored with a
// U+2581 word-boundary marker (a word "cat" segments into units starting
// "▁c..."), which makes decode the exact inverse of encode for
// identical whitespace.
class Vocab {
 public:
  static constexpr int32_t kPad = 0;
  static constexpr int32_t kUnk = 1;
  static constexpr int32_t kCls = 2;
  static constexpr int32_t kSep = 3;
  static constexpr int32_t kMask = 4;
  static constexpr int32_t kNumSpecials = 5;

  static const char* special_surface(int32_t id);

  size_t size() const { return tokens_.size(); }
  const std::string& token(int32_t id) const;
  std::optional<int32_t> id_of(std::string_view token) const;
  bool uncased() const { return true; }

  // One token per line after a header line; the i-th token line carries id i.
  std::string serialize() const;
  static Vocab parse(std::string_view content);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  // Greedy longest-match segmentation of already-preprocessed text into
  // content ids (no CLS/SEP, no truncation). Unknown spans collapse to UNK.
  TokenSequence segment(std::string_view text) const;

  friend Vocab train_vocab(const Corpus& corpus, size_t target_size);

 private:
  void add_token(const std::string& t);
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int32_t> index_;
  size_t max_token_cps_ = 1;
};

// Deterministic frequency-driven pair-merge training. Ties in pair frequency
// break lexicographically (left unit first). Vocabulary ids: specials, then
// base units sorted bytewise, then merged units in merge order.
Vocab train_vocab(const Corpus& corpus, size_t target_size);

// Lowercase normalization used by encode (ASCII range; the model lineage is
// uncased).
std::string normalize_lower(std::string_view text);

// [CLS] content [SEP], truncated so the total length is at most max_len with
// the final SEP retained.
TokenSequence encode(std::string_view text, const Vocab& vocab, size_t max_len);

// Inverse of segmentation up to casing and UNK loss. Special tokens other
// than CLS/SEP/PAD surface as their bracketed names.
std::string decode(const TokenSequence& seq, const Vocab& vocab);

}  // namespace dapt
