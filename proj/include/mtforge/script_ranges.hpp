#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mtforge {

// A set of inclusive codepoint intervals classifying a script (by default
// "Chinese"). Intervals are kept disjoint and sorted.
class ScriptRangeSet {
public:
    struct Range {
        char32_t lo;
        char32_t hi;
    };

    ScriptRangeSet() = default;
    explicit ScriptRangeSet(std::vector<Range> ranges);

    bool contains(char32_t cp) const;
    bool empty() const { return ranges_.empty(); }
    const std::vector<Range>& ranges() const { return ranges_; }

    ScriptRangeSet with(Range extra) const;

    // "4E00-9FFF,3400-4DBF" (hex, inclusive; a bare value is a single
    // codepoint). Throws Error(errc::invalid_argument) on bad syntax.
    static ScriptRangeSet parse(std::string_view text);
    std::string to_string() const;

private:
    std::vector<Range> ranges_;
};

// CJK Unified Ideographs plus Extension A.
const ScriptRangeSet& chinese_ranges();

// chinese_ranges() plus CJK Symbols and Punctuation U+3000-303F; used for
// desegmentation, where full-width punctuation also attracts space removal.
const ScriptRangeSet& chinese_deseg_ranges();

} // namespace mtforge
