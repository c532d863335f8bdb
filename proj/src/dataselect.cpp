#include "mtforge/dataselect.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mtforge/error.hpp"
#include "mtforge/rng.hpp"

namespace mtforge {

namespace {

constexpr std::string_view kIndexMagic = "mtforge-ngidx-v1";

void check_n_range(int n_min, int n_max) {
    if (n_min < 1 || n_min > n_max) fail(errc::invalid_argument, "need 1 <= n_min <= n_max");
}

template <typename Fn>
void each_ngram(const std::vector<std::string_view>& tokens, int n_min, int n_max, const Fn& fn) {
    for (int n = n_min; n <= n_max; ++n) {
        if (tokens.size() < static_cast<std::size_t>(n)) break;
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            std::string key(tokens[i]);
            for (int k = 1; k < n; ++k) {
                key.push_back(' ');
                key.append(tokens[i + k]);
            }
            fn(std::move(key));
        }
    }
}

} // namespace

NgramIndex build_ngram_index(const CorpusShard& shard, int n_min, int n_max) {
    check_n_range(n_min, n_max);
    NgramIndex index;
    index.shard_name = shard.name;
    index.n_min = n_min;
    index.n_max = n_max;
    ShardReader reader(shard);
    PairView pair;
    while (reader.next(pair)) {
        each_ngram(split_tokens(pair.src), n_min, n_max, [&](std::string key) { ++index.counts[std::move(key)]; });
    }
    return index;
}

void NgramIndex::save(const std::filesystem::path& path) const {
    if (shard_name.find_first_of(" \t") != std::string::npos) {
        fail(errc::invalid_argument, "shard name '" + shard_name + "' contains whitespace");
    }
    std::vector<std::pair<std::string_view, std::uint64_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end());
    std::vector<std::string> lines;
    lines.reserve(items.size() + 1);
    lines.push_back(std::string(kIndexMagic) + " shard=" + shard_name + " nmin=" + std::to_string(n_min) +
                    " nmax=" + std::to_string(n_max));
    for (const auto& [ngram, count] : items) {
        lines.push_back(std::string(ngram) + "\t" + std::to_string(count));
    }
    write_lines(path, lines);
}

NgramIndex NgramIndex::load(const std::filesystem::path& path) {
    LineReader reader(path);
    std::string_view line;
    if (!reader.next(line)) fail(errc::malformed_line, path.string() + ": missing header");
    std::vector<std::string_view> header = split_tokens(line);
    if (header.empty() || header[0] != kIndexMagic) {
        fail(errc::malformed_line, path.string() + ": not an n-gram index file");
    }
    NgramIndex index;
    try {
        for (std::size_t i = 1; i < header.size(); ++i) {
            std::string_view f = header[i];
            if (f.substr(0, 6) == "shard=") index.shard_name = std::string(f.substr(6));
            else if (f.substr(0, 5) == "nmin=") index.n_min = std::stoi(std::string(f.substr(5)));
            else if (f.substr(0, 5) == "nmax=") index.n_max = std::stoi(std::string(f.substr(5)));
        }
        check_n_range(index.n_min, index.n_max);
    } catch (const std::exception&) {
        fail(errc::malformed_line, path.string() + ": bad index header");
    }
    while (reader.next(line)) {
        std::size_t tab = line.rfind('\t');
        if (tab == std::string_view::npos || tab == 0) {
            fail(errc::malformed_line, path.string() + ":" + std::to_string(reader.line_number()));
        }
        std::uint64_t count = 0;
        for (char c : line.substr(tab + 1)) {
            if (c < '0' || c > '9') {
                fail(errc::malformed_line, path.string() + ":" + std::to_string(reader.line_number()));
            }
            count = count * 10 + static_cast<std::uint64_t>(c - '0');
        }
        if (count == 0) fail(errc::malformed_line, path.string() + ":" + std::to_string(reader.line_number()));
        index.counts.emplace(std::string(line.substr(0, tab)), count);
    }
    return index;
}

std::vector<SelectedSentence> select_finetune_data(const std::vector<std::string>& test_source,
                                                   const std::vector<PoolShard>& pool,
                                                   const SelectionConfig& config) {
    check_n_range(config.n_min, config.n_max);
    if (config.rare_threshold < 1) fail(errc::invalid_argument, "rare_threshold must be >= 1");
    if (config.budget < 1) fail(errc::invalid_argument, "budget must be >= 1");

    std::unordered_set<std::string> test_ngrams;
    for (const std::string& line : test_source) {
        each_ngram(split_tokens(line), config.n_min, config.n_max,
                   [&](std::string key) { test_ngrams.insert(std::move(key)); });
    }

    std::vector<SelectedSentence> selected;
    for (const PoolShard& entry : pool) {
        if (entry.shard == nullptr) fail(errc::invalid_argument, "null pool shard");
        if (entry.index == nullptr) fail(errc::missing_index, "no index for shard '" + entry.shard->name + "'");
        // rare in this shard: seen at least once, fewer than threshold times
        std::unordered_set<std::string> rare;
        for (const std::string& g : test_ngrams) {
            std::uint64_t c = entry.index->count(g);
            if (c >= 1 && c < config.rare_threshold) rare.insert(g);
        }
        if (rare.empty()) continue;
        ShardReader reader(*entry.shard);
        PairView pair;
        std::unordered_set<std::string> seen;
        while (reader.next(pair)) {
            seen.clear();
            std::uint64_t score = 0;
            each_ngram(split_tokens(pair.src), config.n_min, config.n_max, [&](std::string key) {
                if (rare.count(key) && seen.insert(std::move(key)).second) ++score;
            });
            if (score > 0) selected.push_back({entry.shard->name, pair.id, score});
        }
    }
    std::sort(selected.begin(), selected.end(), [](const SelectedSentence& a, const SelectedSentence& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.shard != b.shard) return a.shard < b.shard;
        return a.id < b.id;
    });
    if (selected.size() > config.budget) selected.resize(config.budget);
    return selected;
}

// --- blends ------------------------------------------------------------------

std::vector<std::uint64_t> blend_component_counts(const std::vector<double>& weights, std::uint64_t epoch_size) {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) fail(errc::invalid_argument, "negative blend weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail(errc::invalid_argument, "blend weights must sum to 1");
    std::vector<std::uint64_t> counts(weights.size());
    std::vector<std::pair<double, std::size_t>> remainders(weights.size());
    std::uint64_t assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        double quota = weights[i] * static_cast<double>(epoch_size);
        counts[i] = static_cast<std::uint64_t>(quota);
        assigned += counts[i];
        remainders[i] = {quota - static_cast<double>(counts[i]), i};
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (std::size_t k = 0; assigned < epoch_size; ++k, ++assigned) {
        ++counts[remainders[k % remainders.size()].second];
    }
    return counts;
}

void build_blend(const BlendSpec& spec, ShardWriter& out) {
    if (spec.components.empty()) fail(errc::invalid_argument, "blend needs components");
    if (spec.epoch_size < 1) fail(errc::invalid_argument, "epoch_size must be >= 1");
    std::vector<double> weights;
    for (const BlendComponent& c : spec.components) {
        if (c.shard.kind != out.kind()) fail(errc::kind_mismatch, "component kind differs from output kind");
        weights.push_back(c.weight);
    }
    std::vector<std::uint64_t> counts = blend_component_counts(weights, spec.epoch_size);

    Rng rng(spec.seed);
    std::vector<std::pair<std::string, std::string>> pool;
    pool.reserve(spec.epoch_size);
    for (std::size_t i = 0; i < spec.components.size(); ++i) {
        if (counts[i] == 0) continue;
        std::vector<std::pair<std::string, std::string>> pairs;
        ShardReader reader(spec.components[i].shard);
        PairView pair;
        while (reader.next(pair)) pairs.emplace_back(std::string(pair.src), std::string(pair.tgt));
        if (pairs.empty()) {
            fail(errc::empty_component, "component '" + spec.components[i].shard.name + "' is empty");
        }
        for (std::uint64_t j = 0; j < counts[i]; ++j) {
            std::size_t idx = spec.sampling == BlendSampling::upsample_cycle
                                  ? static_cast<std::size_t>(j % pairs.size())
                                  : static_cast<std::size_t>(rng.below(pairs.size()));
            pool.push_back(pairs[idx]);
        }
    }
    rng.shuffle(pool);
    for (const auto& [src, tgt] : pool) {
        if (out.kind() == ShardKind::parallel) {
            out.write(src, tgt);
        } else {
            out.write(src);
        }
    }
    out.close();
}

BlendSpec load_blend_spec(const std::filesystem::path& path) {
    BlendSpec spec;
    std::string src_ext = "src";
    std::string tgt_ext = "tgt";
    ShardKind kind = ShardKind::parallel;
    struct PendingComponent {
        std::string prefix;
        double weight;
    };
    std::vector<PendingComponent> pending;
    bool have_epoch = false;
    LineReader reader(path);
    std::string_view line;
    while (reader.next(line)) {
        std::string where = path.string() + ":" + std::to_string(reader.line_number());
        std::string_view body = line.substr(0, line.find('#'));
        std::vector<std::string_view> fields = split_tokens(body);
        if (fields.empty()) continue;
        if (fields.size() != 2) fail(errc::config_error, where + ": want 'key value' or 'shard weight'");
        std::string key(fields[0]);
        std::string value(fields[1]);
        if (key == "epoch_size") {
            spec.epoch_size = std::stoull(value);
            have_epoch = true;
        } else if (key == "seed") {
            spec.seed = std::stoull(value);
        } else if (key == "sampling") {
            if (value == "upsample_cycle") spec.sampling = BlendSampling::upsample_cycle;
            else if (value == "with_replacement") spec.sampling = BlendSampling::with_replacement;
            else fail(errc::config_error, where + ": unknown sampling '" + value + "'");
        } else if (key == "kind") {
            if (value == "parallel") kind = ShardKind::parallel;
            else if (value == "mono") kind = ShardKind::mono;
            else fail(errc::config_error, where + ": unknown kind '" + value + "'");
        } else if (key == "src_ext") {
            src_ext = value;
        } else if (key == "tgt_ext") {
            tgt_ext = value;
        } else {
            double weight = 0.0;
            try {
                std::size_t used = 0;
                weight = std::stod(value, &used);
                if (used != value.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                fail(errc::config_error, where + ": bad weight '" + value + "'");
            }
            pending.push_back({key, weight});
        }
    }
    if (!have_epoch) fail(errc::config_error, path.string() + ": missing epoch_size");
    if (pending.empty()) fail(errc::config_error, path.string() + ": no components");
    for (const PendingComponent& pc : pending) {
        std::filesystem::path prefix = path.parent_path() / pc.prefix;
        std::vector<std::filesystem::path> paths;
        if (kind == ShardKind::parallel) {
            paths = {prefix.string() + "." + src_ext, prefix.string() + "." + tgt_ext};
        } else {
            paths = {prefix.string() + "." + src_ext};
        }
        spec.components.push_back({load_shard(paths, kind), pc.weight});
    }
    return spec;
}

} // namespace mtforge
