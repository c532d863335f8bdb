#include "mtforge/xent.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <vector>

#include "mtforge/error.hpp"

namespace mtforge {

namespace {

double parse_score(std::string_view field, const std::string& where) {
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(std::string(field), &used);
        if (used != field.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        fail(errc::malformed_line, where + ": bad score '" + std::string(field) + "'");
    }
    if (!std::isfinite(v) || v < 0.0) {
        fail(errc::non_finite_score, where + ": scores must be finite and non-negative");
    }
    return v;
}

} // namespace

std::vector<ScoreRecord> ingest_scores(const std::filesystem::path& score_file, const CorpusShard& shard) {
    LineReader reader(score_file);
    std::vector<ScoreRecord> records;
    std::vector<bool> seen(shard.line_count, false);
    std::string_view line;
    while (reader.next(line)) {
        std::string where = score_file.string() + ":" + std::to_string(reader.line_number());
        std::vector<std::string_view> fields;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t tab = line.find('\t', pos);
            if (tab == std::string_view::npos) {
                fields.push_back(line.substr(pos));
                break;
            }
            fields.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        if (fields.size() < 2 || fields.size() > 3) fail(errc::malformed_line, where + ": want 2 or 3 fields");
        std::uint64_t id = 0;
        if (fields[0].empty()) fail(errc::malformed_line, where + ": empty pair id");
        for (char c : fields[0]) {
            if (c < '0' || c > '9') fail(errc::malformed_line, where + ": bad pair id '" + std::string(fields[0]) + "'");
            id = id * 10 + static_cast<std::uint64_t>(c - '0');
        }
        if (id >= shard.line_count) {
            fail(errc::unknown_pair_id, where + ": id " + std::to_string(id) + " not in shard of " +
                                            std::to_string(shard.line_count) + " pairs");
        }
        if (seen[id]) fail(errc::duplicate_id, where + ": id " + std::to_string(id) + " repeated");
        seen[id] = true;
        ScoreRecord record;
        record.pair_id = id;
        record.h_fwd = parse_score(fields[1], where);
        if (fields.size() == 3) record.h_bwd = parse_score(fields[2], where);
        records.push_back(record);
    }
    if (records.size() != shard.line_count) {
        for (std::uint64_t id = 0; id < shard.line_count; ++id) {
            if (!seen[id]) {
                fail(errc::missing_score, score_file.string() + ": no score for pair " + std::to_string(id));
            }
        }
    }
    std::sort(records.begin(), records.end(),
              [](const ScoreRecord& a, const ScoreRecord& b) { return a.pair_id < b.pair_id; });
    return records;
}

double dual_score(const ScoreRecord& record) {
    if (!record.h_bwd) {
        fail(errc::missing_backward_score, "pair " + std::to_string(record.pair_id) + " has no backward score");
    }
    double a = record.h_fwd;
    double b = *record.h_bwd;
    return std::abs(a - b) + 0.5 * (a + b);
}

CutResult apply_cut(const std::vector<ScoreRecord>& records, const FilterCut& cut) {
    auto score_of = [&](const ScoreRecord& r) {
        return cut.direction == FilterCut::Direction::dual ? dual_score(r) : r.h_fwd;
    };
    std::vector<std::pair<double, std::uint64_t>> scored;
    scored.reserve(records.size());
    for (const ScoreRecord& r : records) scored.emplace_back(score_of(r), r.pair_id);

    std::vector<std::uint64_t> removed;
    if (cut.mode == FilterCut::Mode::percentile_worst) {
        if (!(cut.value > 0.0 && cut.value < 1.0)) fail(errc::invalid_argument, "percentile must be in (0, 1)");
        std::size_t k = static_cast<std::size_t>(cut.value * static_cast<double>(scored.size()));
        // worst first; among equal scores the higher pair_id goes first, so
        // lower ids survive a tie at the boundary
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second > b.second;
        });
        removed.reserve(k);
        for (std::size_t i = 0; i < k && i < scored.size(); ++i) removed.push_back(scored[i].second);
    } else {
        for (const auto& [score, id] : scored) {
            if (score > cut.value) removed.push_back(id);
        }
    }
    std::sort(removed.begin(), removed.end());
    CutResult result;
    result.rejected = removed;
    result.kept.reserve(records.size() - removed.size());
    std::size_t r = 0;
    std::vector<std::uint64_t> ids;
    ids.reserve(records.size());
    for (const ScoreRecord& rec : records) ids.push_back(rec.pair_id);
    std::sort(ids.begin(), ids.end());
    for (std::uint64_t id : ids) {
        while (r < removed.size() && removed[r] < id) ++r;
        if (r < removed.size() && removed[r] == id) continue;
        result.kept.push_back(id);
    }
    return result;
}

std::vector<ScoreRecord> fallback_lm_score(const CorpusShard& shard, Side side, int lm_order) {
    if (lm_order < 1 || lm_order > 5) fail(errc::invalid_argument, "lm_order must be in [1, 5]");
    if (shard.line_count == 0) fail(errc::empty_shard, "shard '" + shard.name + "' is empty");
    if (shard.kind == ShardKind::mono && side == Side::tgt) {
        fail(errc::invalid_argument, "mono shard has no target side");
    }
    const std::string bos = "\x02"; // cannot collide with text tokens, which never hold control bytes
    auto context_key = [&](const std::vector<std::string_view>& toks, std::size_t i) {
        // the lm_order-1 tokens before position i, BOS-padded
        std::string key;
        for (int k = lm_order - 1; k >= 1; --k) {
            std::string_view t = i >= static_cast<std::size_t>(k) ? toks[i - k] : std::string_view(bos);
            key.append(t);
            key.push_back('\x1f');
        }
        return key;
    };

    std::unordered_map<std::string, std::uint64_t> context_counts;
    std::unordered_map<std::string, std::uint64_t> ngram_counts;
    std::unordered_map<std::string, std::uint64_t> vocab;
    {
        ShardReader reader(shard);
        PairView pair;
        while (reader.next(pair)) {
            std::string_view text = side == Side::src ? pair.src : pair.tgt;
            std::vector<std::string_view> toks = split_tokens(text);
            for (std::size_t i = 0; i < toks.size(); ++i) {
                ++vocab[std::string(toks[i])];
                std::string ctx = context_key(toks, i);
                ++context_counts[ctx];
                ctx.append(toks[i]);
                ++ngram_counts[ctx];
            }
        }
    }
    // add-one smoothing over |V|+1 outcomes (the +1 stands in for unseen types)
    const double denom_types = static_cast<double>(vocab.size()) + 1.0;

    std::vector<ScoreRecord> records;
    records.reserve(shard.line_count);
    ShardReader reader(shard);
    PairView pair;
    while (reader.next(pair)) {
        std::string_view text = side == Side::src ? pair.src : pair.tgt;
        std::vector<std::string_view> toks = split_tokens(text);
        double total = 0.0;
        for (std::size_t i = 0; i < toks.size(); ++i) {
            std::string ctx = context_key(toks, i);
            auto cit = context_counts.find(ctx);
            double ctx_count = cit == context_counts.end() ? 0.0 : static_cast<double>(cit->second);
            ctx.append(toks[i]);
            auto nit = ngram_counts.find(ctx);
            double ngram_count = nit == ngram_counts.end() ? 0.0 : static_cast<double>(nit->second);
            total += -std::log((ngram_count + 1.0) / (ctx_count + denom_types));
        }
        ScoreRecord record;
        record.pair_id = pair.id;
        record.h_fwd = toks.empty() ? 0.0 : total / static_cast<double>(toks.size());
        records.push_back(record);
    }
    return records;
}

void copy_selected(const CorpusShard& shard, const std::vector<std::uint64_t>& sorted_ids, ShardWriter& out) {
    ShardReader reader(shard);
    PairView pair;
    std::size_t next = 0;
    while (reader.next(pair) && next < sorted_ids.size()) {
        if (pair.id != sorted_ids[next]) continue;
        ++next;
        if (shard.kind == ShardKind::parallel) {
            out.write(pair.src, pair.tgt);
        } else {
            out.write(pair.src);
        }
    }
    if (next != sorted_ids.size()) {
        fail(errc::unknown_pair_id, "id " + std::to_string(sorted_ids[next]) + " beyond shard end");
    }
    out.close();
}

} // namespace mtforge
