#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mtforge {

// Devanagari -> Gujarati codepoint map. Unmapped codepoints (Devanagari
// characters with no Gujarati slot, and everything outside the block) are
// copied through unchanged.
class TransliterationTable {
public:
    static constexpr char32_t kBlockStart = 0x0900;
    static constexpr char32_t kBlockEnd = 0x097F;

    bool maps(char32_t cp) const {
        return cp >= kBlockStart && cp <= kBlockEnd && targets_[cp - kBlockStart] != 0;
    }
    char32_t apply(char32_t cp) const {
        return maps(cp) ? targets_[cp - kBlockStart] : cp;
    }

    void set(char32_t from, char32_t to);
    std::vector<std::pair<char32_t, char32_t>> entries() const; // sorted by source

    // one "U+XXXX U+YYYY" pair per line
    void save(const std::filesystem::path& path) const;
    static TransliterationTable load(const std::filesystem::path& path);

private:
    std::array<char32_t, 0x80> targets_{}; // 0 = copy-through
};

// The shipped mapping: each Devanagari codepoint maps to codepoint + 0x180
// when that target is an assigned Gujarati character, and is copied through
// otherwise (e.g. the dandas, whose Gujarati slots are unassigned).
TransliterationTable build_table();

std::string transliterate(std::string_view line, const TransliterationTable& table);

void transliterate_file(const TransliterationTable& table, const std::filesystem::path& in,
                        const std::filesystem::path& out, unsigned threads = 1);

struct OverlapStats {
    std::uint64_t total_tokens = 0;  // candidate tokens after exclusions
    std::uint64_t exact_matches = 0;
    std::uint64_t excluded_punct = 0;
    std::uint64_t excluded_latin = 0;

    double match_fraction() const {
        return total_tokens == 0 ? 0.0 : static_cast<double>(exact_matches) / static_cast<double>(total_tokens);
    }
};

enum class TokenClass { candidate, punctuation, latin };

// punctuation: every character is Unicode P*. latin: has at least one letter
// and all its letters are Basic Latin (pure-digit tokens stay candidates).
TokenClass classify_overlap_token(std::string_view token);

// Line-aligned corpora. A candidate token in the transliterated file counts
// as a match when the identical string occurs in the corresponding reference
// sentence; each reference token can be consumed at most once (bag
// semantics).
OverlapStats overlap_stats(const std::filesystem::path& transliterated, const std::filesystem::path& reference);

} // namespace mtforge
