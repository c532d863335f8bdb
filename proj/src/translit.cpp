#include "mtforge/translit.hpp"

#include <fstream>
#include <unordered_map>

#include "mtforge/corpus.hpp"
#include "mtforge/error.hpp"
#include "mtforge/parallel.hpp"
#include "mtforge/unicode.hpp"

namespace mtforge {

namespace {

// Assigned codepoints of the Gujarati block U+0A80-0AFF (Unicode 13.0).
struct Range {
    char32_t lo, hi;
};
constexpr Range kAssignedGujarati[] = {
    {0x0A81, 0x0A83}, {0x0A85, 0x0A8D}, {0x0A8F, 0x0A91}, {0x0A93, 0x0AA8},
    {0x0AAA, 0x0AB0}, {0x0AB2, 0x0AB3}, {0x0AB5, 0x0AB9}, {0x0ABC, 0x0AC5},
    {0x0AC7, 0x0AC9}, {0x0ACB, 0x0ACD}, {0x0AD0, 0x0AD0}, {0x0AE0, 0x0AE3},
    {0x0AE6, 0x0AF1}, {0x0AF9, 0x0AFF},
};

bool gujarati_assigned(char32_t cp) {
    for (const Range& r : kAssignedGujarati) {
        if (cp >= r.lo && cp <= r.hi) return true;
    }
    return false;
}

char32_t parse_uplus(std::string_view field, const std::string& where) {
    if (field.size() < 3 || field.substr(0, 2) != "U+") fail(errc::malformed_line, where);
    char32_t cp = 0;
    for (char c : field.substr(2)) {
        cp <<= 4;
        if (c >= '0' && c <= '9') cp |= static_cast<char32_t>(c - '0');
        else if (c >= 'A' && c <= 'F') cp |= static_cast<char32_t>(c - 'A' + 10);
        else if (c >= 'a' && c <= 'f') cp |= static_cast<char32_t>(c - 'a' + 10);
        else fail(errc::malformed_line, where);
    }
    return cp;
}

std::string uplus(char32_t cp) {
    static const char* hex = "0123456789ABCDEF";
    std::string out = "U+";
    char buf[8];
    int n = 0;
    do {
        buf[n++] = hex[cp & 0xF];
        cp >>= 4;
    } while (cp);
    while (n < 4) buf[n++] = '0';
    while (n) out.push_back(buf[--n]);
    return out;
}

} // namespace

void TransliterationTable::set(char32_t from, char32_t to) {
    if (from < kBlockStart || from > kBlockEnd) {
        fail(errc::invalid_argument, "source " + uplus(from) + " outside the Devanagari block");
    }
    if (to < 0x0A80 || to > 0x0AFF || !gujarati_assigned(to)) {
        fail(errc::invalid_argument, "target " + uplus(to) + " is not an assigned Gujarati character");
    }
    for (char32_t t : targets_) {
        if (t == to) fail(errc::invalid_argument, "target " + uplus(to) + " mapped twice");
    }
    targets_[from - kBlockStart] = to;
}

std::vector<std::pair<char32_t, char32_t>> TransliterationTable::entries() const {
    std::vector<std::pair<char32_t, char32_t>> out;
    for (std::size_t i = 0; i < targets_.size(); ++i) {
        if (targets_[i] != 0) out.emplace_back(kBlockStart + static_cast<char32_t>(i), targets_[i]);
    }
    return out;
}

void TransliterationTable::save(const std::filesystem::path& path) const {
    std::vector<std::string> lines;
    for (const auto& [from, to] : entries()) lines.push_back(uplus(from) + " " + uplus(to));
    write_lines(path, lines);
}

TransliterationTable TransliterationTable::load(const std::filesystem::path& path) {
    TransliterationTable table;
    LineReader reader(path);
    std::string_view line;
    while (reader.next(line)) {
        std::vector<std::string_view> fields = split_tokens(line);
        if (fields.empty() || fields[0].front() == '#') continue;
        std::string where = path.string() + ":" + std::to_string(reader.line_number());
        if (fields.size() != 2) fail(errc::malformed_line, where);
        table.set(parse_uplus(fields[0], where), parse_uplus(fields[1], where));
    }
    return table;
}

TransliterationTable build_table() {
    TransliterationTable table;
    for (char32_t cp = TransliterationTable::kBlockStart; cp <= TransliterationTable::kBlockEnd; ++cp) {
        char32_t target = cp + 0x180;
        if (gujarati_assigned(target)) table.set(cp, target);
    }
    return table;
}

std::string transliterate(std::string_view line, const TransliterationTable& table) {
    std::string out;
    out.reserve(line.size());
    std::size_t pos = 0;
    while (pos < line.size()) {
        char32_t cp = decode_utf8(line, pos);
        if (cp == kInvalidCodepoint) fail(errc::invalid_utf8, "at offset " + std::to_string(pos));
        append_utf8(out, table.apply(cp));
    }
    return out;
}

void transliterate_file(const TransliterationTable& table, const std::filesystem::path& in,
                        const std::filesystem::path& out, unsigned threads) {
    LineReader reader(in);
    std::ofstream sink(out, std::ios::binary | std::ios::trunc);
    if (!sink) fail(errc::io_error, "cannot open " + out.string() + " for writing");
    std::vector<std::string> batch;
    std::vector<std::string> result;
    std::string_view line;
    bool more = true;
    while (more) {
        batch.clear();
        while (batch.size() < 8192 && (more = reader.next(line))) batch.emplace_back(line);
        result.assign(batch.size(), {});
        parallel_for(batch.size(), threads, [&](std::size_t i) { result[i] = transliterate(batch[i], table); });
        for (const std::string& r : result) {
            sink.write(r.data(), static_cast<std::streamsize>(r.size()));
            sink.put('\n');
        }
    }
    sink.flush();
    if (!sink) fail(errc::io_error, "write error in " + out.string());
}

TokenClass classify_overlap_token(std::string_view token) {
    bool all_punct = true;
    bool any_letter = false;
    bool non_latin_letter = false;
    std::size_t pos = 0;
    while (pos < token.size()) {
        char32_t cp = decode_utf8(token, pos);
        if (cp == kInvalidCodepoint) fail(errc::invalid_utf8, "in token");
        if (!is_punctuation(cp)) all_punct = false;
        if (is_letter(cp)) {
            any_letter = true;
            if (cp > 0x7F) non_latin_letter = true;
        }
    }
    if (all_punct && !token.empty()) return TokenClass::punctuation;
    if (any_letter && !non_latin_letter) return TokenClass::latin;
    return TokenClass::candidate;
}

OverlapStats overlap_stats(const std::filesystem::path& transliterated, const std::filesystem::path& reference) {
    LineReader hg(transliterated);
    LineReader ref(reference);
    OverlapStats stats;
    std::string_view hg_line;
    std::string_view ref_line;
    std::unordered_map<std::string, std::uint64_t> bag;
    while (hg.next(hg_line)) {
        if (!ref.next(ref_line)) {
            fail(errc::line_count_mismatch, reference.string() + " shorter than " + transliterated.string());
        }
        bag.clear();
        for (std::string_view token : split_tokens(ref_line)) ++bag[std::string(token)];
        for (std::string_view token : split_tokens(hg_line)) {
            switch (classify_overlap_token(token)) {
                case TokenClass::punctuation: ++stats.excluded_punct; continue;
                case TokenClass::latin: ++stats.excluded_latin; continue;
                case TokenClass::candidate: break;
            }
            ++stats.total_tokens;
            auto it = bag.find(std::string(token));
            if (it != bag.end() && it->second > 0) {
                --it->second;
                ++stats.exact_matches;
            }
        }
    }
    if (ref.next(ref_line)) {
        fail(errc::line_count_mismatch, transliterated.string() + " shorter than " + reference.string());
    }
    return stats;
}

} // namespace mtforge
