#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "mtforge/error.hpp"

namespace mtforge {

inline constexpr char32_t kInvalidCodepoint = 0xFFFFFFFF;

// Decodes one UTF-8 sequence starting at data[pos]. On success advances pos
// past the sequence and returns the codepoint. On malformed input (overlong,
// surrogate, out of range, truncated) returns kInvalidCodepoint and leaves
// pos unchanged.
char32_t decode_utf8(std::string_view data, std::size_t& pos);

void append_utf8(std::string& out, char32_t cp);

bool valid_utf8(std::string_view data);

// Decodes the whole string; throws Error(errc::invalid_utf8) on bad input.
std::u32string decode_codepoints(std::string_view data);

bool is_letter(char32_t cp);      // Unicode general category L*
bool is_punctuation(char32_t cp); // Unicode general category P*
bool is_whitespace(char32_t cp);  // Unicode White_Space

namespace detail {

struct CodepointRange {
    char32_t lo;
    char32_t hi;
};

extern const CodepointRange kLetterRanges[];
extern const std::size_t kLetterRangesCount;
extern const CodepointRange kPunctRanges[];
extern const std::size_t kPunctRangesCount;
extern const CodepointRange kWhitespaceRanges[];
extern const std::size_t kWhitespaceRangesCount;

bool in_ranges(char32_t cp, const CodepointRange* ranges, std::size_t count);

} // namespace detail

} // namespace mtforge
