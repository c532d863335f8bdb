#include "mtforge/unicode.hpp"

#include <algorithm>

namespace mtforge {

char32_t decode_utf8(std::string_view data, std::size_t& pos) {
    if (pos >= data.size()) return kInvalidCodepoint;
    const auto* bytes = reinterpret_cast<const unsigned char*>(data.data());
    unsigned char b0 = bytes[pos];
    if (b0 < 0x80) {
        ++pos;
        return b0;
    }
    std::size_t len;
    char32_t cp;
    char32_t min_cp;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
        min_cp = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
        min_cp = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
        min_cp = 0x10000;
    } else {
        return kInvalidCodepoint;
    }
    if (pos + len > data.size()) return kInvalidCodepoint;
    for (std::size_t i = 1; i < len; ++i) {
        unsigned char b = bytes[pos + i];
        if ((b & 0xC0) != 0x80) return kInvalidCodepoint;
        cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min_cp) return kInvalidCodepoint;                // overlong
    if (cp >= 0xD800 && cp <= 0xDFFF) return kInvalidCodepoint; // surrogate
    if (cp > 0x10FFFF) return kInvalidCodepoint;
    pos += len;
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool valid_utf8(std::string_view data) {
    std::size_t pos = 0;
    while (pos < data.size()) {
        if (decode_utf8(data, pos) == kInvalidCodepoint) return false;
    }
    return true;
}

std::u32string decode_codepoints(std::string_view data) {
    std::u32string out;
    out.reserve(data.size());
    std::size_t pos = 0;
    while (pos < data.size()) {
        char32_t cp = decode_utf8(data, pos);
        if (cp == kInvalidCodepoint) {
            fail(errc::invalid_utf8, "malformed byte at offset " + std::to_string(pos));
        }
        out.push_back(cp);
    }
    return out;
}

namespace detail {

bool in_ranges(char32_t cp, const CodepointRange* ranges, std::size_t count) {
    const CodepointRange* end = ranges + count;
    auto it = std::upper_bound(ranges, end, cp, [](char32_t v, const CodepointRange& r) { return v < r.lo; });
    if (it == ranges) return false;
    --it;
    return cp <= it->hi;
}

} // namespace detail

bool is_letter(char32_t cp) {
    if (cp < 0x80) return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    return detail::in_ranges(cp, detail::kLetterRanges, detail::kLetterRangesCount);
}

bool is_punctuation(char32_t cp) {
    return detail::in_ranges(cp, detail::kPunctRanges, detail::kPunctRangesCount);
}

bool is_whitespace(char32_t cp) {
    if (cp < 0x80) return cp == ' ' || (cp >= 0x09 && cp <= 0x0D);
    return detail::in_ranges(cp, detail::kWhitespaceRanges, detail::kWhitespaceRangesCount);
}

} // namespace mtforge
