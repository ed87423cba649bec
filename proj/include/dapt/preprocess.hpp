#pragma once

#include <string>
#include <string_view>

#include "dapt/emoji.hpp"

namespace dapt {

// Text normalization applied before retraining and fine-tuning. The two
// modes share every rule except blank-line removal, which only the
// retraining mode performs.
enum class PreprocessMode { retraining, finetuning };

// Replaces every mapped emoji sequence with its ":alias:" text; everything
// else passes through unchanged.
std::string demojize(std::string_view text, const EmojiAliasTable& aliases);

// Normalizes one piece of text. Rules, in order: user mentions -> "@USER",
// URLs -> "URL", emoji -> alias text, '#' removal, whitespace collapse
// (retraining mode additionally drops blank lines). Because '#' removal and
// emoji substitution can expose fresh mention/URL/emoji matches, the ordered
// pass is repeated until the text stops changing; the published examples all
// converge in one pass.
std::string preprocess(std::string_view text, PreprocessMode mode,
                       const EmojiAliasTable& aliases = EmojiAliasTable::builtin());

namespace detail {
std::string replace_mentions(std::string_view text);
std::string replace_urls(std::string_view text);
std::string strip_hash(std::string_view text);
std::string collapse_whitespace(std::string_view text, bool drop_blank_lines);
}  // namespace detail

}  // namespace dapt
