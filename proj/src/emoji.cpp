#include "dapt/emoji.hpp"

#include "dapt/util.hpp"

namespace dapt {

#include "emoji_table.inc"

static std::vector<uint32_t> parse_hex_seq(std::string_view field, int line_no) {
  std::vector<uint32_t> seq;
  for (const std::string& part : split(field, '-')) {
    if (part.empty()) throw InvalidArgument("emoji table line " + std::to_string(line_no) + ": empty codepoint");
    uint32_t cp = 0;
    for (char c : part) {
      cp <<= 4;
      if (c >= '0' && c <= '9')
        cp |= static_cast<uint32_t>(c - '0');
      else if (c >= 'A' && c <= 'F')
        cp |= static_cast<uint32_t>(c - 'A' + 10);
      else if (c >= 'a' && c <= 'f')
        cp |= static_cast<uint32_t>(c - 'a' + 10);
      else
        throw InvalidArgument("emoji table line " + std::to_string(line_no) + ": bad hex '" + part + "'");
    }
    seq.push_back(cp);
  }
  return seq;
}

EmojiAliasTable EmojiAliasTable::parse(std::string_view content) {
  EmojiAliasTable t;
  int line_no = 0;
  for (const std::string& raw : split(content, '\n')) {
    ++line_no;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (starts_with(line, "version=")) {
      t.version_ = line.substr(8);
      continue;
    }
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw InvalidArgument("emoji table line " + std::to_string(line_no) + ": expected two tab-separated columns");
    std::string alias = trim(line.substr(tab + 1));
    if (alias.size() < 3 || alias.front() != ':' || alias.back() != ':')
      throw InvalidArgument("emoji table line " + std::to_string(line_no) + ": alias must look like :name:");
    std::vector<uint32_t> seq = parse_hex_seq(line.substr(0, tab), line_no);
    t.add(seq, alias);
    // Register the presentation-selector variant of bare symbols too, so
    // text-style and emoji-style renderings demojize identically.
    if (seq.size() == 1) {
      std::vector<uint32_t> with_vs = seq;
      with_vs.push_back(0xFE0F);
      t.add(with_vs, alias);
    }
  }
  return t;
}

void EmojiAliasTable::add(const std::vector<uint32_t>& seq, const std::string& alias) {
  mapping_[seq] = alias;
  if (seq.size() > max_seq_) max_seq_ = seq.size();
}

const EmojiAliasTable& EmojiAliasTable::builtin() {
  static const EmojiAliasTable table = parse(kBuiltinEmojiTable);
  return table;
}

EmojiAliasTable EmojiAliasTable::load(const std::string& path) { return parse(read_file(path)); }

std::string EmojiAliasTable::serialize() const {
  std::string out = "version=" + version_ + "\n";
  for (const auto& [seq, alias] : mapping_) {
    // skip auto-added variation-selector twins of single-codepoint entries
    if (seq.size() == 2 && seq[1] == 0xFE0F && mapping_.count({seq[0]})) continue;
    static const char* hex = "0123456789ABCDEF";
    for (size_t i = 0; i < seq.size(); ++i) {
      if (i) out.push_back('-');
      std::string h;
      uint32_t cp = seq[i];
      do {
        h.insert(h.begin(), hex[cp & 0xf]);
        cp >>= 4;
      } while (cp);
      while (h.size() < 4) h.insert(h.begin(), '0');
      out += h;
    }
    out.push_back('\t');
    out += alias;
    out.push_back('\n');
  }
  return out;
}

void EmojiAliasTable::save(const std::string& path) const { write_file(path, serialize()); }

size_t EmojiAliasTable::match(const std::vector<uint32_t>& cps, size_t i, const std::string** alias) const {
  size_t longest = max_seq_;
  if (longest > cps.size() - i) longest = cps.size() - i;
  for (size_t len = longest; len >= 1; --len) {
    auto it = mapping_.find(std::vector<uint32_t>(cps.begin() + i, cps.begin() + i + len));
    if (it != mapping_.end()) {
      *alias = &it->second;
      return len;
    }
  }
  return 0;
}

}  // namespace dapt
