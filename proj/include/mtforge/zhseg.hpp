#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mtforge/script_ranges.hpp"

namespace mtforge {

// Removes every whitespace run that touches a character in `ranges` on either
// side; all other whitespace is preserved verbatim. Used to undo inconsistent
// tokenization of Chinese text before resegmenting it.
std::string zh_desegment(std::string_view line, const ScriptRangeSet& ranges = chinese_deseg_ranges());

// Inserts a single space between adjacent non-whitespace characters when at
// least one of them is in `ranges`; runs of other characters (Latin words,
// numbers, punctuation) stay together as single tokens. Idempotent.
std::string zh_char_segment(std::string_view line, const ScriptRangeSet& ranges = chinese_ranges());

void zh_transform_file(const std::filesystem::path& in, const std::filesystem::path& out, bool char_mode,
                       const ScriptRangeSet& ranges, unsigned threads = 1);

} // namespace mtforge
