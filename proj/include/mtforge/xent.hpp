#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mtforge/corpus.hpp"

namespace mtforge {

// Per-pair cross-entropy scores in nats per token; lower is better. Reported
// score files with higher-is-better polarity must be inverted upstream.
struct ScoreRecord {
    std::uint64_t pair_id = 0;
    double h_fwd = 0.0;                // source -> target
    std::optional<double> h_bwd;       // target -> source
};

// TSV `pair_id<TAB>h_fwd[<TAB>h_bwd]`; exactly one record per shard pair.
// Returns records sorted by pair_id.
std::vector<ScoreRecord> ingest_scores(const std::filesystem::path& score_file, const CorpusShard& shard);

// |h_fwd - h_bwd| + (h_fwd + h_bwd) / 2; penalizes both high entropy and
// forward/backward disagreement.
double dual_score(const ScoreRecord& record);

struct FilterCut {
    enum class Mode { percentile_worst, absolute_threshold };
    enum class Direction { one_directional, dual };

    Mode mode = Mode::percentile_worst;
    double value = 0.05; // p in (0,1), or the absolute threshold
    Direction direction = Direction::one_directional;
};

struct CutResult {
    std::vector<std::uint64_t> kept;     // pair ids, original corpus order
    std::vector<std::uint64_t> rejected;
};

// Percentile mode removes exactly floor(p*N) worst-scoring records, breaking
// score ties at the boundary by keeping the lower pair_id. Absolute mode
// removes records with score strictly above the threshold.
CutResult apply_cut(const std::vector<ScoreRecord>& records, const FilterCut& cut);

// Hermetic stand-in scorer for running the pipeline without external
// translation models: add-one-smoothed token n-gram LM trained on the chosen
// side of the whole shard, each sentence scored by per-token cross-entropy in
// nats. Not equivalent to translation-model scoring; fills h_fwd only.
std::vector<ScoreRecord> fallback_lm_score(const CorpusShard& shard, Side side, int lm_order);

// Streams `shard` to `out`, keeping exactly the pairs whose ids appear in
// sorted_ids (ascending).
void copy_selected(const CorpusShard& shard, const std::vector<std::uint64_t>& sorted_ids, ShardWriter& out);

} // namespace mtforge
