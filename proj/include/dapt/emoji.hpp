#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace dapt {

// Emoji -> ":alias:" substitution table. The bundled table is version-pinned;
// conformance tests reference it. Unmapped codepoints always pass through.
class EmojiAliasTable {
 public:
  // Pinned table shipped with the repository.
  static const EmojiAliasTable& builtin();

  // Two-column text format: "version=<id>" header, then
  // "<HEX>[-<HEX>...]\t:<alias>:" rows. '#' starts a comment.
  static EmojiAliasTable parse(std::string_view content);
  static EmojiAliasTable load(const std::string& path);
  std::string serialize() const;
  void save(const std::string& path) const;

  void add(const std::vector<uint32_t>& seq, const std::string& alias);

  const std::string& version() const { return version_; }
  size_t size() const { return mapping_.size(); }

  // Longest match starting at cps[i]; returns matched length (0 = no match)
  // and sets alias on success.
  size_t match(const std::vector<uint32_t>& cps, size_t i, const std::string** alias) const;

 private:
  std::string version_ = "1";
  std::map<std::vector<uint32_t>, std::string> mapping_;
  size_t max_seq_ = 0;
};

}  // namespace dapt
