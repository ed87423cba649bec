#include "dapt/tokenizer.hpp"

#include <algorithm>
#include <map>

namespace dapt {

static const char* kBoundary = "\xe2\x96\x81";  // U+2581

const char* Vocab::special_surface(int32_t id) {
  switch (id) {
    case kPad: return "[PAD]";
    case kUnk: return "[UNK]";
    case kCls: return "[CLS]";
    case kSep: return "[SEP]";
    case kMask: return "[MASK]";
  }
  return nullptr;
}

void Vocab::add_token(const std::string& t) {
  index_.emplace(t, static_cast<int32_t>(tokens_.size()));
  tokens_.push_back(t);
  size_t cps = utf8_decode(t).size();
  if (cps > max_token_cps_) max_token_cps_ = cps;
}

const std::string& Vocab::token(int32_t id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
    throw InvalidArgument("token id " + std::to_string(id) + " out of range (vocab size " +
                          std::to_string(tokens_.size()) + ")");
  return tokens_[static_cast<size_t>(id)];
}

std::optional<int32_t> Vocab::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string normalize_lower(std::string_view text) { return to_lower_ascii(text); }

Vocab train_vocab(const Corpus& corpus, size_t target_size) {
  if (corpus.documents.empty()) throw InvalidArgument("cannot train a vocabulary on an empty corpus");

  // word frequencies, lowercased
  std::map<std::string, uint64_t> word_freq;
  for (const CleanDocument& d : corpus.documents) {
    std::string lowered = normalize_lower(d.text);
    for (std::string_view w : split_whitespace(lowered)) word_freq[std::string(w)]++;
  }

  // every word starts as [boundary, cp, cp, ...]
  struct Word {
    std::vector<std::string> units;
    uint64_t freq;
  };
  std::vector<Word> words;
  std::map<std::string, uint64_t> base_units;  // bytewise order = id order
  base_units[kBoundary];
  for (const auto& [w, freq] : word_freq) {
    Word word;
    word.freq = freq;
    word.units.push_back(kBoundary);
    for (uint32_t cp : utf8_decode(w)) {
      std::string unit;
      utf8_append(unit, cp);
      base_units[unit]++;
      word.units.push_back(std::move(unit));
    }
    words.push_back(std::move(word));
  }

  const size_t floor_size = static_cast<size_t>(Vocab::kNumSpecials) + base_units.size();
  if (target_size < floor_size)
    throw InvalidArgument("vocab target_size " + std::to_string(target_size) + " is below the minimum " +
                          std::to_string(floor_size) + " (specials + observed characters)");

  Vocab v;
  for (int32_t s = 0; s < Vocab::kNumSpecials; ++s) v.add_token(Vocab::special_surface(s));
  for (const auto& [unit, _] : base_units) v.add_token(unit);

  // greedy pair merges; the vocabulary may saturate below target_size once
  // every word is a single unit
  while (v.size() < target_size) {
    std::map<std::pair<std::string, std::string>, uint64_t> pair_freq;
    for (const Word& w : words)
      for (size_t i = 0; i + 1 < w.units.size(); ++i)
        pair_freq[{w.units[i], w.units[i + 1]}] += w.freq;

    const std::pair<std::string, std::string>* best = nullptr;
    uint64_t best_freq = 0;
    for (const auto& [pair, freq] : pair_freq) {
      if (freq > best_freq) {  // ties keep the bytewise-smallest pair (map order)
        best_freq = freq;
        best = &pair;
      }
    }
    if (!best) break;

    std::string merged = best->first + best->second;
    for (Word& w : words) {
      std::vector<std::string> out;
      out.reserve(w.units.size());
      for (size_t i = 0; i < w.units.size(); ++i) {
        if (i + 1 < w.units.size() && w.units[i] == best->first && w.units[i + 1] == best->second) {
          out.push_back(merged);
          ++i;
        } else {
          out.push_back(w.units[i]);
        }
      }
      w.units = std::move(out);
    }
    v.add_token(merged);
  }
  return v;
}

TokenSequence Vocab::segment(std::string_view text) const {
  std::string lowered = normalize_lower(text);
  TokenSequence ids;
  for (std::string_view word : split_whitespace(lowered)) {
    std::string marked = std::string(kBoundary) + std::string(word);
    std::vector<uint32_t> cps = utf8_decode(marked);
    size_t i = 0;
    bool in_unknown = false;
    while (i < cps.size()) {
      // longest match, bounded by the longest token in the vocabulary
      size_t best_len = 0;
      int32_t best_id = 0;
      size_t cap = std::min(max_token_cps_, cps.size() - i);
      std::string candidate;
      for (size_t l = 1; l <= cap; ++l) {
        utf8_append(candidate, cps[i + l - 1]);
        auto it = index_.find(candidate);
        if (it != index_.end()) {
          best_len = l;
          best_id = it->second;
        }
      }
      if (best_len == 0) {
        if (!in_unknown) ids.push_back(kUnk);  // a maximal unknown span is one UNK
        in_unknown = true;
        ++i;
      } else {
        ids.push_back(best_id);
        in_unknown = false;
        i += best_len;
      }
    }
  }
  return ids;
}

TokenSequence encode(std::string_view text, const Vocab& vocab, size_t max_len) {
  if (max_len < 2) throw InvalidArgument("max_len must be at least 2");
  TokenSequence content = vocab.segment(text);
  if (content.size() > max_len - 2) content.resize(max_len - 2);
  TokenSequence out;
  out.reserve(content.size() + 2);
  out.push_back(Vocab::kCls);
  out.insert(out.end(), content.begin(), content.end());
  out.push_back(Vocab::kSep);
  return out;
}

std::string decode(const TokenSequence& seq, const Vocab& vocab) {
  std::string joined;
  for (int32_t id : seq) {
    if (id == Vocab::kCls || id == Vocab::kSep || id == Vocab::kPad) continue;
    joined += vocab.token(id);  // throws on out-of-range ids
  }
  // boundary markers back to spaces
  std::string out;
  size_t i = 0;
  const std::string boundary = kBoundary;
  while (i < joined.size()) {
    if (joined.compare(i, boundary.size(), boundary) == 0) {
      if (!out.empty()) out.push_back(' ');
      i += boundary.size();
    } else {
      out.push_back(joined[i++]);
    }
  }
  return out;
}

std::string Vocab::serialize() const {
  std::string out = "#dapt-vocab v1 casing=uncased pad=0 unk=1 cls=2 sep=3 mask=4\n";
  for (const std::string& t : tokens_) {
    out += t;
    out.push_back('\n');
  }
  return out;
}

Vocab Vocab::parse(std::string_view content) {
  std::vector<std::string> lines = split(content, '\n');
  if (lines.empty() || !starts_with(lines[0], "#dapt-vocab v1"))
    throw InvalidArgument("vocabulary file missing '#dapt-vocab v1' header");
  Vocab v;
  for (size_t i = 1; i < lines.size(); ++i) {
    if (i + 1 == lines.size() && lines[i].empty()) break;  // trailing newline
    v.add_token(lines[i]);
  }
  for (int32_t s = 0; s < kNumSpecials; ++s)
    if (v.size() <= static_cast<size_t>(s) || v.tokens_[s] != special_surface(s))
      throw InvalidArgument("vocabulary file lacks the fixed special tokens");
  return v;
}

void Vocab::save(const std::string& path) const { write_file(path, serialize()); }

Vocab Vocab::load(const std::string& path) { return parse(read_file(path)); }

}  // namespace dapt
