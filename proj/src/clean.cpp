#include "mtforge/clean.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "mtforge/parallel.hpp"
#include "mtforge/unicode.hpp"

namespace mtforge {

const char* rule_name(RuleId id) {
    switch (id) {
        case RuleId::max_len: return "max_len";
        case RuleId::min_len: return "min_len";
        case RuleId::len_bounds: return "len_bounds";
        case RuleId::len_ratio: return "len_ratio";
        case RuleId::requires_diacritic: return "requires_diacritic";
        case RuleId::alpha_ratio: return "alpha_ratio";
        case RuleId::contains_link: return "contains_link";
        case RuleId::script_presence: return "script_presence";
        case RuleId::dedup_pair: return "dedup_pair";
        case RuleId::repeat_noise: return "repeat_noise";
    }
    return "?";
}

namespace {

std::string format_double(double v) {
    std::string s = std::to_string(v);
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

} // namespace

std::string CleanRule::params_string() const {
    switch (id) {
        case RuleId::max_len:
        case RuleId::min_len: return "limit=" + std::to_string(limit);
        case RuleId::len_bounds: return "min=" + std::to_string(min_tokens) + " max=" + std::to_string(max_tokens);
        case RuleId::len_ratio: return "max=" + format_double(max_ratio);
        case RuleId::requires_diacritic: return std::string("side=") + side_name(side);
        case RuleId::alpha_ratio: return "min=" + format_double(min_alpha_ratio);
        case RuleId::contains_link: return "";
        case RuleId::script_presence: return std::string("side=") + side_name(side) + " ranges=" + ranges.to_string();
        case RuleId::dedup_pair:
            return std::string("scope=") +
                   (dedup_scope == DedupScope::pair ? "pair" : dedup_scope == DedupScope::src ? "src" : "tgt");
        case RuleId::repeat_noise:
            return "max_char_run=" + std::to_string(max_char_run) + " max_token_run=" + std::to_string(max_token_run);
    }
    return "";
}

CleanRule max_len_rule(std::uint64_t limit) {
    CleanRule r;
    r.id = RuleId::max_len;
    r.limit = limit;
    return r;
}

CleanRule min_len_rule(std::uint64_t limit) {
    CleanRule r;
    r.id = RuleId::min_len;
    r.limit = limit;
    return r;
}

CleanRule len_bounds_rule(std::uint64_t min_tokens, std::uint64_t max_tokens) {
    CleanRule r;
    r.id = RuleId::len_bounds;
    r.min_tokens = min_tokens;
    r.max_tokens = max_tokens;
    return r;
}

CleanRule len_ratio_rule(double max_ratio) {
    CleanRule r;
    r.id = RuleId::len_ratio;
    r.max_ratio = max_ratio;
    return r;
}

CleanRule requires_diacritic_rule(Side side, std::u32string char_set) {
    CleanRule r;
    r.id = RuleId::requires_diacritic;
    r.side = side;
    r.char_set = std::move(char_set);
    return r;
}

CleanRule alpha_ratio_rule(double min_ratio) {
    CleanRule r;
    r.id = RuleId::alpha_ratio;
    r.min_alpha_ratio = min_ratio;
    return r;
}

CleanRule contains_link_rule() {
    CleanRule r;
    r.id = RuleId::contains_link;
    return r;
}

CleanRule script_presence_rule(Side script_side, ScriptRangeSet ranges) {
    CleanRule r;
    r.id = RuleId::script_presence;
    r.side = script_side;
    r.ranges = std::move(ranges);
    return r;
}

CleanRule dedup_pair_rule(DedupScope scope) {
    CleanRule r;
    r.id = RuleId::dedup_pair;
    r.dedup_scope = scope;
    return r;
}

CleanRule repeat_noise_rule(std::uint64_t max_char_run, std::uint64_t max_token_run) {
    CleanRule r;
    r.id = RuleId::repeat_noise;
    r.max_char_run = max_char_run;
    r.max_token_run = max_token_run;
    return r;
}

const std::u32string& czech_diacritics() {
    static const std::u32string set = U"áčďéěíňóřšťúůýžÁČĎÉĚÍŇÓŘŠŤÚŮÝŽ";
    return set;
}

void validate_rules(const std::vector<CleanRule>& rules, ShardKind kind) {
    bool parallel = kind == ShardKind::parallel;
    int dedup_count = 0;
    for (const CleanRule& r : rules) {
        switch (r.id) {
            case RuleId::max_len:
            case RuleId::min_len:
                if (r.limit < 1) fail(errc::invalid_argument, "length limit must be >= 1");
                break;
            case RuleId::len_bounds:
                if (r.min_tokens < 1 || r.min_tokens > r.max_tokens) {
                    fail(errc::invalid_argument, "len_bounds needs 1 <= min <= max");
                }
                break;
            case RuleId::len_ratio:
                if (!(r.max_ratio > 1.0)) fail(errc::invalid_argument, "len_ratio max must be > 1.0");
                if (!parallel) fail(errc::invalid_argument, "len_ratio needs a parallel shard");
                break;
            case RuleId::requires_diacritic:
                if (r.char_set.empty()) fail(errc::invalid_argument, "requires_diacritic needs a non-empty set");
                if (!parallel && r.side == Side::tgt) {
                    fail(errc::invalid_argument, "requires_diacritic side=tgt on a mono shard");
                }
                break;
            case RuleId::alpha_ratio:
                if (r.min_alpha_ratio < 0.0 || r.min_alpha_ratio > 1.0) {
                    fail(errc::invalid_argument, "alpha_ratio min must be in [0, 1]");
                }
                break;
            case RuleId::contains_link: break;
            case RuleId::script_presence:
                if (r.ranges.empty()) fail(errc::invalid_argument, "script_presence needs ranges");
                if (!parallel) fail(errc::invalid_argument, "script_presence needs a parallel shard");
                break;
            case RuleId::dedup_pair:
                ++dedup_count;
                if (!parallel && r.dedup_scope != DedupScope::src) {
                    fail(errc::invalid_argument, "dedup scope on a mono shard must be src");
                }
                break;
            case RuleId::repeat_noise:
                if (r.max_char_run < 2 || r.max_token_run < 2) {
                    fail(errc::invalid_argument, "repeat_noise runs must be >= 2");
                }
                break;
        }
    }
    if (dedup_count > 1) fail(errc::invalid_argument, "at most one dedup_pair rule");
}

// --- decisions ---------------------------------------------------------------

bool exceeds_max_len(std::string_view src, std::string_view tgt, bool parallel, std::uint64_t limit) {
    if (token_count(src) > limit) return true;
    return parallel && token_count(tgt) > limit;
}

bool outside_len_bounds(std::string_view src, std::string_view tgt, bool parallel, std::uint64_t min_tokens,
                        std::uint64_t max_tokens) {
    std::uint64_t s = token_count(src);
    if (s < min_tokens || s > max_tokens) return true;
    if (!parallel) return false;
    std::uint64_t t = token_count(tgt);
    return t < min_tokens || t > max_tokens;
}

RatioVerdict check_len_ratio(std::string_view src, std::string_view tgt, double max_ratio) {
    std::uint64_t s = token_count(src);
    std::uint64_t t = token_count(tgt);
    if (s == 0 || t == 0) return RatioVerdict::empty_side;
    std::uint64_t hi = std::max(s, t);
    std::uint64_t lo = std::min(s, t);
    return static_cast<double>(hi) > max_ratio * static_cast<double>(lo) ? RatioVerdict::reject : RatioVerdict::keep;
}

bool lacks_diacritic(std::string_view side_text, const std::u32string& char_set) {
    std::size_t pos = 0;
    while (pos < side_text.size()) {
        char32_t cp = decode_utf8(side_text, pos);
        if (cp == kInvalidCodepoint) fail(errc::invalid_utf8, "in rule input");
        if (char_set.find(cp) != std::u32string::npos) return false;
    }
    return true;
}

namespace {

// alphabetic = category L*; non-alphabetic excludes whitespace. A side with
// no non-alphabetic characters has infinite ratio and always passes.
bool side_below_alpha_ratio(std::string_view text, double min_ratio) {
    std::uint64_t alpha = 0;
    std::uint64_t non_alpha = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = decode_utf8(text, pos);
        if (cp == kInvalidCodepoint) fail(errc::invalid_utf8, "in rule input");
        if (is_letter(cp)) {
            ++alpha;
        } else if (!is_whitespace(cp)) {
            ++non_alpha;
        }
    }
    if (non_alpha == 0) return false;
    return static_cast<double>(alpha) < min_ratio * static_cast<double>(non_alpha);
}

bool token_is_link(std::string_view token) {
    if (token.find("http://") != std::string_view::npos) return true;
    if (token.find("https://") != std::string_view::npos) return true;
    // "www." followed by at least one dot-separated label
    if (token.size() > 4 && token.substr(0, 4) == "www." && token[4] != '.') return true;
    return false;
}

bool side_has_link(std::string_view text) {
    for (std::string_view token : split_tokens(text)) {
        if (token_is_link(token)) return true;
    }
    return false;
}

} // namespace

bool below_alpha_ratio(std::string_view src, std::string_view tgt, bool parallel, double min_ratio) {
    if (side_below_alpha_ratio(src, min_ratio)) return true;
    return parallel && side_below_alpha_ratio(tgt, min_ratio);
}

bool has_link(std::string_view src, std::string_view tgt, bool parallel) {
    if (side_has_link(src)) return true;
    return parallel && side_has_link(tgt);
}

bool violates_script_presence(std::string_view script_side, std::string_view other_side,
                              const ScriptRangeSet& ranges) {
    bool script_seen = false;
    std::size_t pos = 0;
    while (pos < script_side.size()) {
        char32_t cp = decode_utf8(script_side, pos);
        if (cp == kInvalidCodepoint) fail(errc::invalid_utf8, "in rule input");
        if (ranges.contains(cp)) {
            script_seen = true;
            break;
        }
    }
    if (!script_seen) return true;
    // other side must not consist solely of script characters and whitespace
    pos = 0;
    while (pos < other_side.size()) {
        char32_t cp = decode_utf8(other_side, pos);
        if (cp == kInvalidCodepoint) fail(errc::invalid_utf8, "in rule input");
        if (!ranges.contains(cp) && !(cp == ' ' || cp == '\t')) return false;
    }
    return true;
}

bool has_repeat_noise(std::string_view text, std::uint64_t max_char_run, std::uint64_t max_token_run) {
    char32_t prev = kInvalidCodepoint;
    std::uint64_t run = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        char32_t cp = decode_utf8(text, pos);
        if (cp == kInvalidCodepoint) fail(errc::invalid_utf8, "in rule input");
        run = (cp == prev) ? run + 1 : 1;
        if (run > max_char_run) return true;
        prev = cp;
    }
    std::vector<std::string_view> toks = split_tokens(text);
    std::uint64_t trun = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        trun = (i > 0 && toks[i] == toks[i - 1]) ? trun + 1 : 1;
        if (trun > max_token_run) return true;
    }
    return false;
}

bool rule_rejects(const CleanRule& rule, std::string_view src, std::string_view tgt, bool parallel) {
    switch (rule.id) {
        case RuleId::max_len: return exceeds_max_len(src, tgt, parallel, rule.limit);
        case RuleId::min_len:
            return token_count(src) < rule.limit || (parallel && token_count(tgt) < rule.limit);
        case RuleId::len_bounds:
            return outside_len_bounds(src, tgt, parallel, rule.min_tokens, rule.max_tokens);
        case RuleId::len_ratio: return check_len_ratio(src, tgt, rule.max_ratio) != RatioVerdict::keep;
        case RuleId::requires_diacritic:
            return lacks_diacritic(rule.side == Side::src ? src : tgt, rule.char_set);
        case RuleId::alpha_ratio: return below_alpha_ratio(src, tgt, parallel, rule.min_alpha_ratio);
        case RuleId::contains_link: return has_link(src, tgt, parallel);
        case RuleId::script_presence:
            return rule.side == Side::src ? violates_script_presence(src, tgt, rule.ranges)
                                          : violates_script_presence(tgt, src, rule.ranges);
        case RuleId::repeat_noise:
            return has_repeat_noise(src, rule.max_char_run, rule.max_token_run) ||
                   (parallel && has_repeat_noise(tgt, rule.max_char_run, rule.max_token_run));
        case RuleId::dedup_pair:
            fail(errc::invalid_argument, "dedup_pair is stateful and handled by the pipeline");
    }
    return false;
}

// --- engine ------------------------------------------------------------------

namespace {
constexpr std::size_t kNoReject = std::numeric_limits<std::size_t>::max();
}

struct CleanEngine::Impl {
    std::vector<CleanRule> rules;
    bool parallel;
    CleanOptions options;
    std::size_t dedup_index = kNoReject;
    std::unordered_set<std::string> seen;
    FilterReport report;
    std::uint64_t next_id = 0;
    std::vector<std::size_t> stateless_fail; // scratch, batch-sized

    std::string dedup_key(const std::string& src, const std::string& tgt) const {
        const CleanRule& rule = rules[dedup_index];
        switch (rule.dedup_scope) {
            case DedupScope::src: return src;
            case DedupScope::tgt: return tgt;
            case DedupScope::pair: break;
        }
        std::string key;
        key.reserve(src.size() + tgt.size() + 1);
        key.append(src);
        key.push_back('\n'); // lines cannot contain newlines, so the key is unambiguous
        key.append(tgt);
        return key;
    }

    std::size_t first_stateless_reject(const std::string& src, const std::string& tgt) const {
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (i == dedup_index) continue;
            if (rule_rejects(rules[i], src, tgt, parallel)) return i;
        }
        return kNoReject;
    }
};

CleanEngine::CleanEngine(std::vector<CleanRule> rules, ShardKind kind, CleanOptions options)
    : impl_(std::make_unique<Impl>()) {
    validate_rules(rules, kind);
    impl_->rules = std::move(rules);
    impl_->parallel = kind == ShardKind::parallel;
    impl_->options = options;
    impl_->report.rules.resize(impl_->rules.size());
    for (std::size_t i = 0; i < impl_->rules.size(); ++i) {
        if (impl_->rules[i].id == RuleId::dedup_pair) impl_->dedup_index = i;
    }
}

CleanEngine::~CleanEngine() = default;

void CleanEngine::process_batch(const std::vector<std::pair<std::string, std::string>>& batch, const KeepFn& keep) {
    Impl& im = *impl_;
    im.stateless_fail.assign(batch.size(), kNoReject);
    parallel_for(batch.size(), im.options.threads, [&](std::size_t i) {
        im.stateless_fail[i] = im.first_stateless_reject(batch[i].first, batch[i].second);
    });
    // resolve dedup and counts strictly in input order
    for (std::size_t i = 0; i < batch.size(); ++i) {
        std::uint64_t id = im.next_id++;
        ++im.report.total_in;
        std::size_t f = im.stateless_fail[i];
        std::size_t reject_at = f;
        if (im.dedup_index != kNoReject && im.dedup_index < f) {
            // the pair reaches the dedup rule; it registers there even if a
            // later rule rejects it, matching the sequential definition
            if (!im.seen.insert(im.dedup_key(batch[i].first, batch[i].second)).second) {
                reject_at = im.dedup_index;
            }
        }
        std::size_t examined_through = reject_at == kNoReject ? im.rules.size() : reject_at + 1;
        for (std::size_t r = 0; r < examined_through; ++r) ++im.report.rules[r].examined;
        if (reject_at == kNoReject) {
            ++im.report.total_out;
            keep(id, batch[i].first, batch[i].second);
        } else {
            ++im.report.rules[reject_at].rejected;
            if (im.options.reject_log) {
                (*im.options.reject_log) << id << '\t' << rule_name(im.rules[reject_at].id) << '\n';
            }
        }
    }
}

FilterReport CleanEngine::finish() {
    return impl_->report;
}

namespace {
constexpr std::size_t kBatchSize = 8192;
}

FilterReport run_pipeline(const CorpusShard& in, const std::vector<CleanRule>& rules, ShardWriter& out,
                          const CleanOptions& options) {
    CleanEngine engine(rules, in.kind, options);
    ShardReader reader(in);
    std::vector<std::pair<std::string, std::string>> batch;
    batch.reserve(kBatchSize);
    bool parallel = in.kind == ShardKind::parallel;
    auto keep = [&](std::uint64_t, const std::string& src, const std::string& tgt) {
        if (parallel) {
            out.write(src, tgt);
        } else {
            out.write(src);
        }
    };
    PairView pair;
    bool more = true;
    while (more) {
        batch.clear();
        while (batch.size() < kBatchSize && (more = reader.next(pair))) {
            batch.emplace_back(std::string(pair.src), std::string(pair.tgt));
        }
        engine.process_batch(batch, keep);
    }
    out.close();
    return engine.finish();
}

FilterReport run_pipeline_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                                const std::vector<CleanRule>& rules, ShardKind kind,
                                std::vector<std::uint64_t>* kept_ids, const CleanOptions& options) {
    CleanEngine engine(rules, kind, options);
    auto keep = [&](std::uint64_t id, const std::string&, const std::string&) {
        if (kept_ids) kept_ids->push_back(id);
    };
    std::size_t offset = 0;
    while (offset < pairs.size()) {
        std::size_t n = std::min(kBatchSize, pairs.size() - offset);
        std::vector<std::pair<std::string, std::string>> batch(pairs.begin() + offset, pairs.begin() + offset + n);
        engine.process_batch(batch, keep);
        offset += n;
    }
    return engine.finish();
}

FilterReport dedup_pairs(const CorpusShard& in, ShardWriter& out, const CleanOptions& options) {
    return run_pipeline(in, {dedup_pair_rule()}, out, options);
}

bool meets_min_avg_len(const CorpusStats& stats, double min_avg) {
    return stats.avg_len_src >= min_avg;
}

std::string report_json(const FilterReport& report, const std::vector<CleanRule>& rules) {
    nlohmann::json j;
    j["total_in"] = report.total_in;
    j["total_out"] = report.total_out;
    j["rules"] = nlohmann::json::array();
    for (std::size_t i = 0; i < rules.size(); ++i) {
        nlohmann::json r;
        r["rule"] = rule_name(rules[i].id);
        r["params"] = rules[i].params_string();
        r["examined"] = report.rules[i].examined;
        r["rejected"] = report.rules[i].rejected;
        j["rules"].push_back(std::move(r));
    }
    return j.dump(2);
}

// --- rule-file parsing -------------------------------------------------------

namespace {

std::uint64_t parse_u64(std::string_view value, std::string_view key) {
    std::uint64_t out = 0;
    if (value.empty()) fail(errc::config_error, "empty value for " + std::string(key));
    for (char c : value) {
        if (c < '0' || c > '9') fail(errc::config_error, "bad integer '" + std::string(value) + "' for " + std::string(key));
        out = out * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return out;
}

double parse_double(std::string_view value, std::string_view key) {
    try {
        std::size_t used = 0;
        double d = std::stod(std::string(value), &used);
        if (used != value.size()) throw std::invalid_argument("");
        return d;
    } catch (const std::exception&) {
        fail(errc::config_error, "bad number '" + std::string(value) + "' for " + std::string(key));
    }
}

Side parse_side(std::string_view value) {
    if (value == "src") return Side::src;
    if (value == "tgt") return Side::tgt;
    fail(errc::config_error, "bad side '" + std::string(value) + "' (want src or tgt)");
}

} // namespace

CleanRule parse_rule_line(std::string_view line) {
    std::vector<std::string_view> fields = split_tokens(line);
    if (fields.empty()) fail(errc::config_error, "empty rule line");
    std::string_view name = fields[0];
    auto kv = [&](std::string_view key) -> std::string_view {
        for (std::size_t i = 1; i < fields.size(); ++i) {
            std::size_t eq = fields[i].find('=');
            if (eq != std::string_view::npos && fields[i].substr(0, eq) == key) {
                return fields[i].substr(eq + 1);
            }
        }
        return {};
    };
    auto require = [&](std::string_view key) {
        std::string_view v = kv(key);
        if (v.empty()) fail(errc::config_error, std::string(name) + " needs " + std::string(key) + "=");
        return v;
    };
    if (name == "max_len") return max_len_rule(parse_u64(require("limit"), "limit"));
    if (name == "min_len") return min_len_rule(parse_u64(require("limit"), "limit"));
    if (name == "len_bounds") {
        return len_bounds_rule(parse_u64(require("min"), "min"), parse_u64(require("max"), "max"));
    }
    if (name == "len_ratio") return len_ratio_rule(parse_double(require("max"), "max"));
    if (name == "requires_diacritic") {
        std::string_view side = kv("side");
        std::string_view chars = kv("chars");
        return requires_diacritic_rule(side.empty() ? Side::tgt : parse_side(side),
                                       chars.empty() ? czech_diacritics() : decode_codepoints(chars));
    }
    if (name == "alpha_ratio") return alpha_ratio_rule(parse_double(require("min"), "min"));
    if (name == "contains_link") return contains_link_rule();
    if (name == "script_presence") {
        std::string_view side = kv("side");
        std::string_view ranges = kv("ranges");
        return script_presence_rule(side.empty() ? Side::src : parse_side(side),
                                    ranges.empty() ? chinese_ranges() : ScriptRangeSet::parse(ranges));
    }
    if (name == "dedup_pair") {
        std::string_view scope = kv("scope");
        DedupScope s = DedupScope::pair;
        if (scope == "src") s = DedupScope::src;
        else if (scope == "tgt") s = DedupScope::tgt;
        else if (!scope.empty() && scope != "pair") fail(errc::config_error, "bad dedup scope '" + std::string(scope) + "'");
        return dedup_pair_rule(s);
    }
    if (name == "repeat_noise") {
        std::string_view c = kv("max_char_run");
        std::string_view t = kv("max_token_run");
        return repeat_noise_rule(c.empty() ? 4 : parse_u64(c, "max_char_run"),
                                 t.empty() ? 3 : parse_u64(t, "max_token_run"));
    }
    fail(errc::config_error, "unknown rule '" + std::string(name) + "'");
}

std::vector<CleanRule> parse_rule_lines(const std::vector<std::string>& lines) {
    std::vector<CleanRule> rules;
    for (const std::string& raw : lines) {
        std::string_view line = raw;
        std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        if (split_tokens(line).empty()) continue;
        rules.push_back(parse_rule_line(line));
    }
    return rules;
}

std::vector<CleanRule> parse_rules_file(const std::filesystem::path& path) {
    return parse_rule_lines(read_lines(path));
}

} // namespace mtforge
