#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mtforge {

// Word-frequency table over whitespace tokens; the unit BPE learning works on.
using WordCounts = std::unordered_map<std::string, std::uint64_t>;

WordCounts count_words(const std::vector<std::filesystem::path>& files);

// An ordered merge list. End-of-word is implicit: merges are learned over
// plain character sequences and continuation pieces carry the marker suffix
// only at application time.
struct BpeModel {
    std::vector<std::pair<std::string, std::string>> merges;
    std::vector<std::string> alphabet; // distinct initial symbols, sorted
    std::string marker = "@@";
    std::uint64_t num_merges_requested = 0;

    void save(const std::filesystem::path& path) const;
    static BpeModel load(const std::filesystem::path& path);
};

// Greedy highest-frequency pair merging. Ties are broken by lexicographic
// (left, right) symbol order, smallest first, so the merge list is a pure
// function of the counts. Stops early once no pair occurs at least twice.
BpeModel bpe_learn(const WordCounts& counts, std::uint64_t num_merges);

// joint=true pools every input into one frequency table (joint vocabularies);
// joint=false accepts exactly one input.
BpeModel bpe_learn_files(const std::vector<std::filesystem::path>& inputs, std::uint64_t num_merges, bool joint);

struct Vocabulary {
    std::unordered_map<std::string, std::uint64_t> entries;
    std::uint64_t min_count = 1;

    bool contains(std::string_view token) const {
        return entries.find(std::string(token)) != entries.end();
    }
    std::size_t size() const { return entries.size(); }

    // token<TAB>count, sorted by descending count then lexicographic
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path, std::uint64_t min_count = 1);
};

Vocabulary prune_vocabulary(const WordCounts& counts, std::uint64_t min_count);
Vocabulary vocab_build_and_prune(const std::vector<std::filesystem::path>& segmented_files, std::uint64_t min_count);

// Applies a model. Stateless and const, safe to share across threads.
//
// With a pruned vocabulary attached, any piece whose marker-decorated form is
// missing from the vocabulary is re-split into its characters, so downstream
// consumers never see out-of-vocabulary multi-character pieces (characters
// themselves are always emitted as-is).
class BpeApplier {
public:
    explicit BpeApplier(const BpeModel& model, const Vocabulary* vocab = nullptr);

    // Raw pieces for one token, no marker decoration, no vocabulary fallback.
    std::vector<std::string> segment_token(std::string_view token) const;

    // Marker-decorated pieces for one token, vocabulary fallback applied.
    std::vector<std::string> apply_token(std::string_view token) const;

    // Whole line; whitespace between tokens is preserved verbatim so that
    // bpe_desegment(apply_line(s)) == s for any marker-free s.
    std::string apply_line(std::string_view line) const;

    const std::string& marker() const { return marker_; }

private:
    struct PairHash {
        std::size_t operator()(const std::pair<std::string, std::string>& p) const {
            std::size_t h = std::hash<std::string>{}(p.first);
            return h ^ (std::hash<std::string>{}(p.second) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2));
        }
    };
    std::unordered_map<std::pair<std::string, std::string>, std::size_t, PairHash> ranks_;
    std::string marker_;
    const Vocabulary* vocab_;
};

std::string bpe_desegment(std::string_view line, std::string_view marker = "@@");

void bpe_apply_file(const BpeApplier& applier, const std::filesystem::path& in, const std::filesystem::path& out,
                    unsigned threads = 1);
void bpe_desegment_file(const std::filesystem::path& in, const std::filesystem::path& out,
                        std::string_view marker = "@@");

// Uniform sample of n lines without replacement across the inputs (all lines
// when n exceeds the total), emitted in original order. Selection sampling
// over a counted stream; byte-identical for a given seed.
void sample_lines(const std::vector<std::filesystem::path>& inputs, std::uint64_t n, std::uint64_t seed,
                  const std::filesystem::path& out);

} // namespace mtforge
