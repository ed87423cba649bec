#include "dapt/preprocess.hpp"

#include "dapt/util.hpp"

namespace dapt {

namespace detail {

static bool is_word_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

static bool is_space_char(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string replace_mentions(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '@' && i + 1 < text.size() && is_word_char(text[i + 1])) {
      size_t j = i + 1;
      while (j < text.size() && is_word_char(text[j])) ++j;
      out += "@USER";
      i = j;
    } else {
      out.push_back(text[i++]);
    }
  }
  return out;
}

std::string replace_urls(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  bool at_token_start = true;  // start of text or right after whitespace
  while (i < text.size()) {
    if (at_token_start && (starts_with(text.substr(i), "http://") || starts_with(text.substr(i), "https://") ||
                           starts_with(text.substr(i), "www."))) {
      while (i < text.size() && !is_space_char(text[i])) ++i;
      out += "URL";
      at_token_start = false;
      continue;
    }
    at_token_start = is_space_char(text[i]);
    out.push_back(text[i++]);
  }
  return out;
}

std::string strip_hash(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text)
    if (c != '#') out.push_back(c);
  return out;
}

std::string collapse_whitespace(std::string_view text, bool drop_blank_lines) {
  // \r\n and bare \r count as line breaks; within a line, runs of blanks
  // become one space and edges are trimmed.
  std::vector<std::string> lines;
  std::string cur;
  auto flush = [&] {
    lines.push_back(cur);
    cur.clear();
  };
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      flush();
    } else if (c == '\n') {
      flush();
    } else {
      cur.push_back(c);
    }
  }
  flush();

  std::string out;
  bool first = true;
  for (const std::string& line : lines) {
    std::string collapsed;
    bool pending_space = false;
    for (char c : line) {
      if (is_space_char(c)) {
        pending_space = !collapsed.empty();
      } else {
        if (pending_space) collapsed.push_back(' ');
        pending_space = false;
        collapsed.push_back(c);
      }
    }
    if (drop_blank_lines && collapsed.empty()) continue;
    if (!first) out.push_back('\n');
    out += collapsed;
    first = false;
  }
  if (drop_blank_lines) {
    // leading/trailing blank lines are gone already; nothing more to do
    return out;
  }
  return out;
}

}  // namespace detail

std::string demojize(std::string_view text, const EmojiAliasTable& aliases) {
  std::vector<uint32_t> cps = utf8_decode(text);
  std::string out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < cps.size()) {
    const std::string* alias = nullptr;
    size_t len = aliases.match(cps, i, &alias);
    if (len > 0) {
      out += *alias;
      i += len;
    } else {
      utf8_append(out, cps[i++]);
    }
  }
  return out;
}

std::string preprocess(std::string_view text, PreprocessMode mode, const EmojiAliasTable& aliases) {
  const bool drop_blank = mode == PreprocessMode::retraining;
  std::string cur(text);
  for (int pass = 0; pass < 10; ++pass) {
    std::string next = detail::replace_mentions(cur);
    next = detail::replace_urls(next);
    next = demojize(next, aliases);
    next = detail::strip_hash(next);
    next = detail::collapse_whitespace(next, drop_blank);
    if (next == cur) break;
    cur = std::move(next);
  }
  return cur;
}

}  // namespace dapt
