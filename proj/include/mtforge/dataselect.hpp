#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtforge/corpus.hpp"

namespace mtforge {

// Exact n-gram counts over one shard's source side, for n in [n_min, n_max].
// Keys are the n-gram's tokens joined by single spaces.
struct NgramIndex {
    std::string shard_name;
    int n_min = 2;
    int n_max = 4;
    std::unordered_map<std::string, std::uint64_t> counts;

    std::uint64_t count(const std::string& ngram) const {
        auto it = counts.find(ngram);
        return it == counts.end() ? 0 : it->second;
    }

    void save(const std::filesystem::path& path) const; // versioned header + sorted "ngram<TAB>count"
    static NgramIndex load(const std::filesystem::path& path);
};

NgramIndex build_ngram_index(const CorpusShard& shard, int n_min, int n_max);

struct SelectionConfig {
    std::uint64_t rare_threshold = 50; // an n-gram is rare in a shard iff its count is in [1, rare_threshold)
    int n_min = 2;
    int n_max = 4;
    std::uint64_t budget = UINT64_MAX;
};

struct SelectedSentence {
    std::string shard;
    std::uint64_t id = 0;
    std::uint64_t score = 0; // number of distinct rare test n-grams the sentence contains
};

struct PoolShard {
    const CorpusShard* shard = nullptr;
    const NgramIndex* index = nullptr;
};

// Ranks pool sentences by overlap with the test set's rare n-grams: sentences
// with score > 0, ordered by (score desc, shard name, id) and truncated to
// the budget. Throws Error(errc::missing_index) when a pool shard has no
// index.
std::vector<SelectedSentence> select_finetune_data(const std::vector<std::string>& test_source,
                                                   const std::vector<PoolShard>& pool,
                                                   const SelectionConfig& config);

// --- training blends ---------------------------------------------------------

enum class BlendSampling { upsample_cycle, with_replacement };

struct BlendComponent {
    CorpusShard shard;
    double weight = 0.0;
};

struct BlendSpec {
    std::vector<BlendComponent> components; // weights must sum to 1 +- 1e-9
    std::uint64_t epoch_size = 0;
    BlendSampling sampling = BlendSampling::upsample_cycle;
    std::uint64_t seed = 0;
};

// Largest-remainder apportionment: counts sum to epoch_size exactly.
std::vector<std::uint64_t> blend_component_counts(const std::vector<double>& weights, std::uint64_t epoch_size);

// Emits epoch_size pairs: component i contributes its apportioned count
// (cycling from the start when exhausted, or drawing with replacement), then
// the pool is written in a seeded deterministic shuffle order.
void build_blend(const BlendSpec& spec, ShardWriter& out);

// blend.cfg: `epoch_size<TAB>N`, `seed<TAB>N`, optional `sampling`, `kind`,
// `src_ext`, `tgt_ext` keys, then one `shard_prefix<TAB>weight` line per
// component.
BlendSpec load_blend_spec(const std::filesystem::path& path);

} // namespace mtforge
