#include "mtforge/script_ranges.hpp"

#include <algorithm>

#include "mtforge/error.hpp"

namespace mtforge {

ScriptRangeSet::ScriptRangeSet(std::vector<Range> ranges) : ranges_(std::move(ranges)) {
    std::sort(ranges_.begin(), ranges_.end(), [](const Range& a, const Range& b) { return a.lo < b.lo; });
    // merge overlaps so contains() can binary-search disjoint intervals
    std::vector<Range> merged;
    for (const Range& r : ranges_) {
        if (r.lo > r.hi) fail(errc::invalid_argument, "script range lo > hi");
        if (!merged.empty() && r.lo <= merged.back().hi + 1) {
            merged.back().hi = std::max(merged.back().hi, r.hi);
        } else {
            merged.push_back(r);
        }
    }
    ranges_ = std::move(merged);
}

bool ScriptRangeSet::contains(char32_t cp) const {
    auto it = std::upper_bound(ranges_.begin(), ranges_.end(), cp,
                               [](char32_t v, const Range& r) { return v < r.lo; });
    if (it == ranges_.begin()) return false;
    --it;
    return cp <= it->hi;
}

ScriptRangeSet ScriptRangeSet::with(Range extra) const {
    std::vector<Range> all = ranges_;
    all.push_back(extra);
    return ScriptRangeSet(std::move(all));
}

namespace {

char32_t parse_hex(std::string_view text) {
    if (text.empty() || text.size() > 6) fail(errc::invalid_argument, "bad codepoint '" + std::string(text) + "'");
    char32_t value = 0;
    for (char c : text) {
        value <<= 4;
        if (c >= '0' && c <= '9') value |= static_cast<char32_t>(c - '0');
        else if (c >= 'a' && c <= 'f') value |= static_cast<char32_t>(c - 'a' + 10);
        else if (c >= 'A' && c <= 'F') value |= static_cast<char32_t>(c - 'A' + 10);
        else fail(errc::invalid_argument, "bad codepoint '" + std::string(text) + "'");
    }
    return value;
}

} // namespace

ScriptRangeSet ScriptRangeSet::parse(std::string_view text) {
    std::vector<Range> ranges;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        std::string_view item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        pos = comma == std::string_view::npos ? text.size() : comma + 1;
        if (item.empty()) continue;
        std::size_t dash = item.find('-');
        if (dash == std::string_view::npos) {
            char32_t cp = parse_hex(item);
            ranges.push_back({cp, cp});
        } else {
            ranges.push_back({parse_hex(item.substr(0, dash)), parse_hex(item.substr(dash + 1))});
        }
    }
    if (ranges.empty()) fail(errc::invalid_argument, "empty script range set");
    return ScriptRangeSet(std::move(ranges));
}

std::string ScriptRangeSet::to_string() const {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    auto put = [&](char32_t cp) {
        char buf[6];
        int n = 0;
        do {
            buf[n++] = hex[cp & 0xF];
            cp >>= 4;
        } while (cp);
        while (n < 4) buf[n++] = '0';
        while (n) out.push_back(buf[--n]);
    };
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
        if (i) out.push_back(',');
        put(ranges_[i].lo);
        out.push_back('-');
        put(ranges_[i].hi);
    }
    return out;
}

const ScriptRangeSet& chinese_ranges() {
    static const ScriptRangeSet set({{0x4E00, 0x9FFF}, {0x3400, 0x4DBF}});
    return set;
}

const ScriptRangeSet& chinese_deseg_ranges() {
    static const ScriptRangeSet set = chinese_ranges().with({0x3000, 0x303F});
    return set;
}

} // namespace mtforge
