#include "mtforge/bpe.hpp"

#include <algorithm>
#include <queue>
#include <unordered_set>

#include "mtforge/corpus.hpp"
#include "mtforge/error.hpp"
#include "mtforge/parallel.hpp"
#include "mtforge/rng.hpp"
#include "mtforge/unicode.hpp"

namespace mtforge {

WordCounts count_words(const std::vector<std::filesystem::path>& files) {
    WordCounts counts;
    for (const auto& path : files) {
        LineReader reader(path);
        std::string_view line;
        while (reader.next(line)) {
            for (std::string_view token : split_tokens(line)) {
                ++counts[std::string(token)];
            }
        }
    }
    return counts;
}

namespace {

std::vector<std::string> codepoint_symbols(std::string_view token) {
    std::vector<std::string> symbols;
    std::size_t pos = 0;
    while (pos < token.size()) {
        std::size_t start = pos;
        if (decode_utf8(token, pos) == kInvalidCodepoint) {
            fail(errc::invalid_utf8, "in token '" + std::string(token) + "'");
        }
        symbols.emplace_back(token.substr(start, pos - start));
    }
    return symbols;
}

// Learning state: words as symbol-id sequences, live pair counts, a lazy
// max-heap over (count, pair), and pair -> word occurrences with stale
// entries tolerated (revalidated when popped).
class Learner {
public:
    explicit Learner(const WordCounts& counts) {
        // sort words so results do not depend on hash iteration order
        std::vector<std::pair<std::string_view, std::uint64_t>> items(counts.begin(), counts.end());
        std::sort(items.begin(), items.end());
        words_.reserve(items.size());
        for (const auto& [word, freq] : items) {
            Word w;
            w.freq = freq;
            for (const std::string& sym : codepoint_symbols(word)) w.symbols.push_back(intern(sym));
            words_.push_back(std::move(w));
        }
        alphabet_size_ = symbols_.size();
        for (std::uint32_t wi = 0; wi < words_.size(); ++wi) add_word_pairs(wi, +1);
        for (const auto& [key, count] : pair_counts_) heap_.push({count, key});
    }

    std::vector<std::string> alphabet() const {
        std::vector<std::string> out(symbols_.begin(), symbols_.begin() + static_cast<long>(alphabet_size_));
        std::sort(out.begin(), out.end());
        return out;
    }

    // Returns false when no pair with frequency >= 2 remains.
    bool merge_step(std::pair<std::string, std::string>& merged) {
        std::uint64_t key;
        std::int64_t count;
        if (!pop_best(key, count)) return false;
        std::uint32_t left = static_cast<std::uint32_t>(key >> 32);
        std::uint32_t right = static_cast<std::uint32_t>(key & 0xFFFFFFFFu);
        merged = {symbols_[left], symbols_[right]};
        std::uint32_t sym = intern(symbols_[left] + symbols_[right]);

        auto occ = pair_words_.find(key);
        std::vector<std::uint32_t> affected;
        if (occ != pair_words_.end()) {
            affected = std::move(occ->second);
            pair_words_.erase(occ);
        }
        std::sort(affected.begin(), affected.end());
        affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
        for (std::uint32_t wi : affected) {
            Word& w = words_[wi];
            if (!contains_pair(w, left, right)) continue; // stale occurrence
            add_word_pairs(wi, -1);
            apply_merge(w, left, right, sym);
            add_word_pairs(wi, +1);
        }
        flush_dirty();
        return true;
    }

private:
    struct Word {
        std::vector<std::uint32_t> symbols;
        std::uint64_t freq = 0;
    };

    struct HeapNode {
        std::int64_t count;
        std::uint64_t key;
    };

    struct NodeLess {
        const std::vector<std::string>* syms;
        bool operator()(const HeapNode& a, const HeapNode& b) const {
            if (a.count != b.count) return a.count < b.count;
            const std::string& al = (*syms)[a.key >> 32];
            const std::string& bl = (*syms)[b.key >> 32];
            if (al != bl) return al > bl; // smaller left symbol wins ties
            return (*syms)[a.key & 0xFFFFFFFFu] > (*syms)[b.key & 0xFFFFFFFFu];
        }
    };

    std::uint32_t intern(const std::string& s) {
        auto [it, inserted] = symbol_ids_.emplace(s, static_cast<std::uint32_t>(symbols_.size()));
        if (inserted) symbols_.push_back(s);
        return it->second;
    }

    static std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    static bool contains_pair(const Word& w, std::uint32_t a, std::uint32_t b) {
        for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
            if (w.symbols[i] == a && w.symbols[i + 1] == b) return true;
        }
        return false;
    }

    void add_word_pairs(std::uint32_t wi, int sign) {
        const Word& w = words_[wi];
        for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
            std::uint64_t key = pair_key(w.symbols[i], w.symbols[i + 1]);
            pair_counts_[key] += sign * static_cast<std::int64_t>(w.freq);
            dirty_.insert(key);
            if (sign > 0) pair_words_[key].push_back(wi);
        }
    }

    // merge all non-overlapping occurrences, left to right
    static void apply_merge(Word& w, std::uint32_t a, std::uint32_t b, std::uint32_t merged) {
        std::vector<std::uint32_t> out;
        out.reserve(w.symbols.size());
        std::size_t i = 0;
        while (i < w.symbols.size()) {
            if (i + 1 < w.symbols.size() && w.symbols[i] == a && w.symbols[i + 1] == b) {
                out.push_back(merged);
                i += 2;
            } else {
                out.push_back(w.symbols[i]);
                ++i;
            }
        }
        w.symbols = std::move(out);
    }

    void flush_dirty() {
        for (std::uint64_t key : dirty_) {
            auto it = pair_counts_.find(key);
            if (it == pair_counts_.end()) continue;
            if (it->second <= 0) {
                pair_counts_.erase(it);
            } else {
                heap_.push({it->second, key});
            }
        }
        dirty_.clear();
    }

    bool pop_best(std::uint64_t& key, std::int64_t& count) {
        while (!heap_.empty()) {
            HeapNode node = heap_.top();
            auto it = pair_counts_.find(node.key);
            if (it == pair_counts_.end() || it->second != node.count) {
                heap_.pop(); // stale
                continue;
            }
            if (node.count < 2) return false;
            heap_.pop();
            key = node.key;
            count = node.count;
            return true;
        }
        return false;
    }

    std::vector<Word> words_;
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, std::uint32_t> symbol_ids_;
    std::size_t alphabet_size_ = 0;
    std::unordered_map<std::uint64_t, std::int64_t> pair_counts_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> pair_words_;
    std::unordered_set<std::uint64_t> dirty_;
    std::priority_queue<HeapNode, std::vector<HeapNode>, NodeLess> heap_{NodeLess{&symbols_}};
};

} // namespace

BpeModel bpe_learn(const WordCounts& counts, std::uint64_t num_merges) {
    if (counts.empty()) fail(errc::empty_corpus, "no words to learn from");
    Learner learner(counts);
    BpeModel model;
    model.num_merges_requested = num_merges;
    model.alphabet = learner.alphabet();
    std::pair<std::string, std::string> merged;
    for (std::uint64_t step = 0; step < num_merges; ++step) {
        if (!learner.merge_step(merged)) break;
        model.merges.push_back(merged);
    }
    return model;
}

BpeModel bpe_learn_files(const std::vector<std::filesystem::path>& inputs, std::uint64_t num_merges, bool joint) {
    if (inputs.empty()) fail(errc::empty_corpus, "no input files");
    if (!joint && inputs.size() != 1) {
        fail(errc::invalid_argument, "multiple inputs require joint learning");
    }
    return bpe_learn(count_words(inputs), num_merges);
}

// --- model io ------------------------------------------------------------

namespace {
constexpr std::string_view kModelMagic = "mtforge-bpe-v1";
}

void BpeModel::save(const std::filesystem::path& path) const {
    std::vector<std::string> lines;
    lines.reserve(merges.size() + 1);
    lines.push_back(std::string(kModelMagic) + " marker=" + marker);
    for (const auto& [l, r] : merges) lines.push_back(l + " " + r);
    write_lines(path, lines);
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
    std::vector<std::string> lines = read_lines(path);
    if (lines.empty()) fail(errc::malformed_line, path.string() + ": missing header");
    std::vector<std::string_view> header = split_tokens(lines[0]);
    if (header.empty() || header[0] != kModelMagic) {
        fail(errc::malformed_line, path.string() + ": not a bpe model file");
    }
    BpeModel model;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].substr(0, 7) == "marker=") model.marker = std::string(header[i].substr(7));
    }
    if (model.marker.empty()) fail(errc::malformed_line, path.string() + ": empty marker");
    // every merge part must be a single codepoint or the output of an
    // earlier merge
    std::unordered_set<std::string> produced;
    std::unordered_set<std::string> alphabet;
    auto valid_part = [&](std::string_view part) {
        if (produced.count(std::string(part))) return true;
        std::size_t pos = 0;
        return decode_utf8(part, pos) != kInvalidCodepoint && pos == part.size();
    };
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::size_t space = lines[i].find(' ');
        if (space == std::string::npos || space == 0 || space + 1 >= lines[i].size()) {
            fail(errc::malformed_line, path.string() + ":" + std::to_string(i + 1) + ": want 'left right'");
        }
        std::string left = lines[i].substr(0, space);
        std::string right = lines[i].substr(space + 1);
        if (!valid_part(left) || !valid_part(right)) {
            fail(errc::malformed_line,
                 path.string() + ":" + std::to_string(i + 1) + ": merge references unproducible symbol");
        }
        produced.insert(left + right);
        for (const std::string& part : {left, right}) {
            std::size_t pos = 0;
            if (decode_utf8(part, pos) != kInvalidCodepoint && pos == part.size()) alphabet.insert(part);
        }
        model.merges.emplace_back(std::move(left), std::move(right));
    }
    model.num_merges_requested = model.merges.size();
    model.alphabet.assign(alphabet.begin(), alphabet.end());
    std::sort(model.alphabet.begin(), model.alphabet.end());
    return model;
}

// --- vocabulary ------------------------------------------------------------

Vocabulary prune_vocabulary(const WordCounts& counts, std::uint64_t min_count) {
    if (min_count < 1) fail(errc::invalid_argument, "min_count must be >= 1");
    Vocabulary vocab;
    vocab.min_count = min_count;
    for (const auto& [token, count] : counts) {
        if (count >= min_count) vocab.entries.emplace(token, count);
    }
    return vocab;
}

Vocabulary vocab_build_and_prune(const std::vector<std::filesystem::path>& segmented_files,
                                 std::uint64_t min_count) {
    return prune_vocabulary(count_words(segmented_files), min_count);
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::vector<std::pair<std::string, std::uint64_t>> items(entries.begin(), entries.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> lines;
    lines.reserve(items.size());
    for (const auto& [token, count] : items) lines.push_back(token + "\t" + std::to_string(count));
    write_lines(path, lines);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path, std::uint64_t min_count) {
    Vocabulary vocab;
    vocab.min_count = min_count;
    LineReader reader(path);
    std::string_view line;
    while (reader.next(line)) {
        std::size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            fail(errc::malformed_line, path.string() + ":" + std::to_string(reader.line_number()));
        }
        std::string token(line.substr(0, tab));
        std::uint64_t count = 0;
        for (char c : line.substr(tab + 1)) {
            if (c < '0' || c > '9') {
                fail(errc::malformed_line, path.string() + ":" + std::to_string(reader.line_number()));
            }
            count = count * 10 + static_cast<std::uint64_t>(c - '0');
        }
        if (count >= min_count) vocab.entries.emplace(std::move(token), count);
    }
    return vocab;
}

// --- application -----------------------------------------------------------

BpeApplier::BpeApplier(const BpeModel& model, const Vocabulary* vocab) : marker_(model.marker), vocab_(vocab) {
    ranks_.reserve(model.merges.size() * 2);
    for (std::size_t i = 0; i < model.merges.size(); ++i) {
        ranks_.emplace(model.merges[i], i);
    }
}

std::vector<std::string> BpeApplier::segment_token(std::string_view token) const {
    std::vector<std::string> pieces = codepoint_symbols(token);
    if (pieces.size() < 2 || ranks_.empty()) return pieces;
    // repeatedly merge the lowest-ranked adjacent pair; equivalent to
    // replaying the merge list in order
    while (pieces.size() > 1) {
        std::size_t best_rank = ranks_.size();
        std::pair<std::string, std::string> best;
        for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
            auto it = ranks_.find({pieces[i], pieces[i + 1]});
            if (it != ranks_.end() && it->second < best_rank) {
                best_rank = it->second;
                best = it->first;
            }
        }
        if (best_rank == ranks_.size()) break;
        std::vector<std::string> merged;
        merged.reserve(pieces.size());
        std::size_t i = 0;
        while (i < pieces.size()) {
            if (i + 1 < pieces.size() && pieces[i] == best.first && pieces[i + 1] == best.second) {
                merged.push_back(pieces[i] + pieces[i + 1]);
                i += 2;
            } else {
                merged.push_back(std::move(pieces[i]));
                ++i;
            }
        }
        pieces = std::move(merged);
    }
    return pieces;
}

std::vector<std::string> BpeApplier::apply_token(std::string_view token) const {
    std::vector<std::string> pieces = segment_token(token);
    std::vector<std::string> out;
    out.reserve(pieces.size());
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        bool last = i + 1 == pieces.size();
        bool in_vocab = true;
        if (vocab_) {
            in_vocab = vocab_->contains(last ? pieces[i] : pieces[i] + marker_);
        }
        if (in_vocab) {
            out.push_back(std::move(pieces[i]));
        } else {
            for (std::string& c : codepoint_symbols(pieces[i])) out.push_back(std::move(c));
        }
    }
    for (std::size_t i = 0; i + 1 < out.size(); ++i) out[i] += marker_;
    return out;
}

std::string BpeApplier::apply_line(std::string_view line) const {
    std::string out;
    out.reserve(line.size() * 2);
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == ' ' || line[i] == '\t') {
            out.push_back(line[i]);
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        std::vector<std::string> pieces = apply_token(line.substr(start, i - start));
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            if (p) out.push_back(' ');
            out.append(pieces[p]);
        }
    }
    return out;
}

std::string bpe_desegment(std::string_view line, std::string_view marker) {
    std::string pattern(marker);
    pattern.push_back(' ');
    std::string out;
    out.reserve(line.size());
    std::size_t pos = 0;
    while (pos < line.size()) {
        std::size_t hit = line.find(pattern, pos);
        if (hit == std::string_view::npos) {
            out.append(line.substr(pos));
            break;
        }
        out.append(line.substr(pos, hit - pos));
        pos = hit + pattern.size();
    }
    return out;
}

void bpe_apply_file(const BpeApplier& applier, const std::filesystem::path& in, const std::filesystem::path& out,
                    unsigned threads) {
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
        parallel_for(batch.size(), threads, [&](std::size_t i) { result[i] = applier.apply_line(batch[i]); });
        for (const std::string& r : result) {
            sink.write(r.data(), static_cast<std::streamsize>(r.size()));
            sink.put('\n');
        }
    }
    sink.flush();
    if (!sink) fail(errc::io_error, "write error in " + out.string());
}

void bpe_desegment_file(const std::filesystem::path& in, const std::filesystem::path& out, std::string_view marker) {
    LineReader reader(in);
    std::ofstream sink(out, std::ios::binary | std::ios::trunc);
    if (!sink) fail(errc::io_error, "cannot open " + out.string() + " for writing");
    std::string_view line;
    while (reader.next(line)) {
        std::string r = bpe_desegment(line, marker);
        sink.write(r.data(), static_cast<std::streamsize>(r.size()));
        sink.put('\n');
    }
    sink.flush();
    if (!sink) fail(errc::io_error, "write error in " + out.string());
}

void sample_lines(const std::vector<std::filesystem::path>& inputs, std::uint64_t n, std::uint64_t seed,
                  const std::filesystem::path& out) {
    std::uint64_t total = 0;
    for (const auto& path : inputs) {
        LineReader reader(path);
        std::string_view line;
        while (reader.next(line)) ++total;
    }
    std::uint64_t want = std::min(n, total);
    std::ofstream sink(out, std::ios::binary | std::ios::trunc);
    if (!sink) fail(errc::io_error, "cannot open " + out.string() + " for writing");
    Rng rng(seed);
    std::uint64_t remaining = want;
    std::uint64_t seen = 0;
    for (const auto& path : inputs) {
        if (remaining == 0) break;
        LineReader reader(path);
        std::string_view line;
        while (remaining > 0 && reader.next(line)) {
            // selection sampling: uniform without replacement, order-preserving
            if (rng.below(total - seen) < remaining) {
                sink.write(line.data(), static_cast<std::streamsize>(line.size()));
                sink.put('\n');
                --remaining;
            }
            ++seen;
        }
    }
    sink.flush();
    if (!sink) fail(errc::io_error, "write error in " + out.string());
}

} // namespace mtforge
