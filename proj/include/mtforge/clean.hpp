#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mtforge/corpus.hpp"
#include "mtforge/script_ranges.hpp"

namespace mtforge {

enum class RuleId {
    max_len,
    min_len,
    len_bounds,
    len_ratio,
    requires_diacritic,
    alpha_ratio,
    contains_link,
    script_presence,
    dedup_pair,
    repeat_noise,
};

const char* rule_name(RuleId id);

enum class DedupScope { pair, src, tgt };

// One configured rule instance. Only the fields relevant to `id` are used;
// the factory functions below fill them in.
struct CleanRule {
    RuleId id = RuleId::max_len;
    std::uint64_t limit = 0;            // max_len / min_len
    std::uint64_t min_tokens = 0;       // len_bounds
    std::uint64_t max_tokens = 0;       // len_bounds
    double max_ratio = 0.0;             // len_ratio
    double min_alpha_ratio = 0.0;       // alpha_ratio
    Side side = Side::tgt;              // requires_diacritic: side that must carry one;
                                        // script_presence: side that must contain the script
    std::u32string char_set;            // requires_diacritic
    ScriptRangeSet ranges;              // script_presence
    std::uint64_t max_char_run = 0;     // repeat_noise
    std::uint64_t max_token_run = 0;    // repeat_noise
    DedupScope dedup_scope = DedupScope::pair;

    std::string params_string() const;
};

CleanRule max_len_rule(std::uint64_t limit);
CleanRule min_len_rule(std::uint64_t limit);
CleanRule len_bounds_rule(std::uint64_t min_tokens, std::uint64_t max_tokens);
CleanRule len_ratio_rule(double max_ratio);
CleanRule requires_diacritic_rule(Side side, std::u32string char_set);
CleanRule alpha_ratio_rule(double min_ratio);
CleanRule contains_link_rule();
CleanRule script_presence_rule(Side script_side, ScriptRangeSet ranges);
CleanRule dedup_pair_rule(DedupScope scope = DedupScope::pair);
CleanRule repeat_noise_rule(std::uint64_t max_char_run, std::uint64_t max_token_run);

// á č ď é ě í ň ó ř š ť ú ů ý ž plus uppercase forms.
const std::u32string& czech_diacritics();

// Throws Error(errc::invalid_argument) on out-of-range parameters, a side
// rule on a mono shard, or more than one dedup rule.
void validate_rules(const std::vector<CleanRule>& rules, ShardKind kind);

// --- individual decisions (true = reject) ---------------------------------
// Pair forms reject when either side violates; pass an empty tgt and
// parallel=false for mono text.

bool exceeds_max_len(std::string_view src, std::string_view tgt, bool parallel, std::uint64_t limit);
bool outside_len_bounds(std::string_view src, std::string_view tgt, bool parallel, std::uint64_t min_tokens,
                        std::uint64_t max_tokens);

enum class RatioVerdict { keep, reject, empty_side };
RatioVerdict check_len_ratio(std::string_view src, std::string_view tgt, double max_ratio);

bool lacks_diacritic(std::string_view side_text, const std::u32string& char_set);
bool below_alpha_ratio(std::string_view src, std::string_view tgt, bool parallel, double min_ratio);
bool has_link(std::string_view src, std::string_view tgt, bool parallel);
bool violates_script_presence(std::string_view script_side, std::string_view other_side, const ScriptRangeSet& ranges);
bool has_repeat_noise(std::string_view text, std::uint64_t max_char_run, std::uint64_t max_token_run);

// Evaluates one stateless rule (everything except dedup_pair).
bool rule_rejects(const CleanRule& rule, std::string_view src, std::string_view tgt, bool parallel);

// --- pipeline ---------------------------------------------------------------

struct RuleCounts {
    std::uint64_t examined = 0;
    std::uint64_t rejected = 0;
};

// Rejections are attributed to the first failing rule in configured order;
// rules after it do not examine the pair.
struct FilterReport {
    std::uint64_t total_in = 0;
    std::uint64_t total_out = 0;
    std::vector<RuleCounts> rules;
};

std::string report_json(const FilterReport& report, const std::vector<CleanRule>& rules);

struct CleanOptions {
    unsigned threads = 1;
    std::ostream* reject_log = nullptr; // "id<TAB>rule" per rejected pair
};

// Streaming engine shared by the file and in-memory entry points. Pairs are
// numbered from 0 in feed order; batches may be evaluated on worker threads
// but results are resolved and emitted strictly in input order, so output is
// invariant to the thread count.
class CleanEngine {
public:
    CleanEngine(std::vector<CleanRule> rules, ShardKind kind, CleanOptions options);
    ~CleanEngine();

    using KeepFn = std::function<void(std::uint64_t id, const std::string& src, const std::string& tgt)>;

    void process_batch(const std::vector<std::pair<std::string, std::string>>& batch, const KeepFn& keep);
    FilterReport finish();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

FilterReport run_pipeline(const CorpusShard& in, const std::vector<CleanRule>& rules, ShardWriter& out,
                          const CleanOptions& options = {});

// In-memory variant; appends indices of surviving pairs to kept_ids.
FilterReport run_pipeline_pairs(const std::vector<std::pair<std::string, std::string>>& pairs,
                                const std::vector<CleanRule>& rules, ShardKind kind,
                                std::vector<std::uint64_t>* kept_ids, const CleanOptions& options = {});

FilterReport dedup_pairs(const CorpusShard& in, ShardWriter& out, const CleanOptions& options = {});

// Corpus-level gate: true when the shard's source-side average length
// reaches min_avg ("10 tokens or more" keeps a 10.0 average in).
bool meets_min_avg_len(const CorpusStats& stats, double min_avg);

// --- rule-file parsing -------------------------------------------------------
// One rule per line: `name key=value ...`, `#` comments, blank lines ignored.
// Example:
//   max_len limit=80
//   len_ratio max=1.3
//   requires_diacritic side=tgt
//   script_presence side=src ranges=4E00-9FFF,3400-4DBF
CleanRule parse_rule_line(std::string_view line);
std::vector<CleanRule> parse_rule_lines(const std::vector<std::string>& lines);
std::vector<CleanRule> parse_rules_file(const std::filesystem::path& path);

} // namespace mtforge
