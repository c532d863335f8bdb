#include "mtforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "mtforge/bpe.hpp"
#include "mtforge/clean.hpp"
#include "mtforge/dataselect.hpp"
#include "mtforge/error.hpp"
#include "mtforge/rng.hpp"
#include "mtforge/translit.hpp"
#include "mtforge/xent.hpp"
#include "mtforge/zhseg.hpp"

namespace mtforge {

const char* const kToolVersion = "mtforge 0.1.0";

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

bool valid_name(const std::string& name) {
    if (name.empty()) return false;
    for (char c : name) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '.' ||
                  c == '_' || c == '-';
        if (!ok) return false;
    }
    return true;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        std::size_t comma = value.find(',', pos);
        std::string item = trim(value.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

} // namespace

PipelineConfig parse_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();

    PipelineConfig config;
    config.raw_text = buffer.str();
    config.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    config.outdir = config.base_dir / "out";

    enum class Section { global, input, stage };
    Section section = Section::global;
    InputDecl* input = nullptr;
    StageConfig* stage = nullptr;
    std::filesystem::path input_src;
    std::filesystem::path input_tgt;

    auto finish_input = [&]() {
        if (!input) return;
        if (!input_src.empty()) input->paths.insert(input->paths.begin(), input_src);
        if (!input_tgt.empty()) input->paths.push_back(input_tgt);
        input = nullptr;
    };

    std::istringstream lines(config.raw_text);
    std::string raw;
    std::uint64_t line_no = 0;
    while (std::getline(lines, raw)) {
        ++line_no;
        std::string line = trim(raw);
        std::string where = path.string() + ":" + std::to_string(line_no);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(errc::config_error, where + ": unterminated section header");
            std::vector<std::string_view> head = split_tokens(std::string_view(line).substr(1, line.size() - 2));
            if (head.size() != 2) fail(errc::config_error, where + ": want [input NAME] or [stage NAME]");
            finish_input();
            stage = nullptr;
            if (head[0] == "input") {
                config.inputs.push_back({});
                input = &config.inputs.back();
                input->name = std::string(head[1]);
                input_src.clear();
                input_tgt.clear();
                section = Section::input;
            } else if (head[0] == "stage") {
                config.stages.push_back({});
                stage = &config.stages.back();
                stage->name = std::string(head[1]);
                section = Section::stage;
            } else {
                fail(errc::config_error, where + ": unknown section '" + std::string(head[0]) + "'");
            }
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(errc::config_error, where + ": want key = value");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) fail(errc::config_error, where + ": empty key");
        switch (section) {
            case Section::global:
                if (key == "seed") {
                    try {
                        config.seed = std::stoull(value);
                    } catch (const std::exception&) {
                        fail(errc::config_error, where + ": bad seed '" + value + "'");
                    }
                } else if (key == "outdir") {
                    config.outdir = config.base_dir / value;
                } else {
                    fail(errc::config_error, where + ": unknown global key '" + key + "'");
                }
                break;
            case Section::input:
                if (key == "kind") {
                    if (value == "parallel") input->kind = ShardKind::parallel;
                    else if (value == "mono") input->kind = ShardKind::mono;
                    else fail(errc::config_error, where + ": unknown kind '" + value + "'");
                } else if (key == "src" || key == "path") {
                    input_src = config.base_dir / value;
                } else if (key == "tgt") {
                    input_tgt = config.base_dir / value;
                } else {
                    fail(errc::config_error, where + ": unknown input key '" + key + "'");
                }
                break;
            case Section::stage:
                if (key == "rule") {
                    stage->rule_lines.push_back(value);
                } else if (key == "component") {
                    stage->component_lines.push_back(value);
                } else {
                    stage->params[key] = value;
                }
                break;
        }
    }
    finish_input();
    return config;
}

// --- validation ----------------------------------------------------------

namespace {

struct NameEnv {
    std::unordered_map<std::string, ShardKind> shards;
    std::set<std::string> artifacts;
};

std::optional<std::string> opt_param(const StageConfig& stage, const std::string& key) {
    auto it = stage.params.find(key);
    if (it == stage.params.end()) return std::nullopt;
    return it->second;
}

const std::set<std::string>& known_ops() {
    static const std::set<std::string> ops = {"clean",  "concat", "sample", "zh-seg",      "translit", "bpe-learn",
                                              "bpe-apply", "index", "select", "blend", "xent-filter", "stats"};
    return ops;
}

// Per-stage static checks; registers outputs in env. Appends messages to
// errors; every message names the stage.
void check_stage(const StageConfig& stage, NameEnv& env, std::vector<std::string>& errors) {
    auto say = [&](const std::string& msg) { errors.push_back("stage '" + stage.name + "': " + msg); };

    auto in_shard = [&](const std::string& key) -> std::optional<ShardKind> {
        auto value = opt_param(stage, key);
        if (!value) {
            say("missing " + key + " =");
            return std::nullopt;
        }
        auto it = env.shards.find(*value);
        if (it == env.shards.end()) {
            say("references undefined shard '" + *value + "'");
            return std::nullopt;
        }
        return it->second;
    };
    auto in_shard_list = [&](const std::string& key) -> std::optional<std::vector<ShardKind>> {
        auto value = opt_param(stage, key);
        if (!value) {
            say("missing " + key + " =");
            return std::nullopt;
        }
        std::vector<ShardKind> kinds;
        bool ok = true;
        for (const std::string& name : split_list(*value)) {
            auto it = env.shards.find(name);
            if (it == env.shards.end()) {
                say("references undefined shard '" + name + "'");
                ok = false;
            } else {
                kinds.push_back(it->second);
            }
        }
        if (kinds.empty() && ok) say(key + " = lists no shards");
        return ok && !kinds.empty() ? std::optional(kinds) : std::nullopt;
    };
    auto out_shard = [&](ShardKind kind, const std::string& key = "out") {
        auto value = opt_param(stage, key);
        if (!value) {
            say("missing " + key + " =");
            return;
        }
        if (!valid_name(*value)) {
            say("bad output name '" + *value + "'");
            return;
        }
        if (env.shards.count(*value) || env.artifacts.count(*value)) {
            say("output '" + *value + "' already defined");
            return;
        }
        env.shards.emplace(*value, kind);
    };
    auto out_artifact = [&](const std::string& key) {
        auto value = opt_param(stage, key);
        if (!value) {
            say("missing " + key + " =");
            return;
        }
        if (!valid_name(*value)) {
            say("bad output name '" + *value + "'");
            return;
        }
        if (env.shards.count(*value) || env.artifacts.count(*value)) {
            say("output '" + *value + "' already defined");
            return;
        }
        env.artifacts.insert(*value);
    };
    auto uint_param = [&](const std::string& key, std::uint64_t min_value,
                          std::optional<std::uint64_t> fallback) -> std::optional<std::uint64_t> {
        auto value = opt_param(stage, key);
        if (!value) {
            if (!fallback) say("missing " + key + " =");
            return fallback;
        }
        try {
            std::uint64_t v = std::stoull(*value);
            if (v < min_value) {
                say(key + " must be >= " + std::to_string(min_value));
                return std::nullopt;
            }
            return v;
        } catch (const std::exception&) {
            say("bad integer '" + *value + "' for " + key);
            return std::nullopt;
        }
    };

    if (!known_ops().count(stage.op)) {
        say(stage.op.empty() ? "missing op =" : "unknown op '" + stage.op + "'");
        return;
    }

    if (stage.op == "clean") {
        auto kind = in_shard("in");
        if (kind) {
            try {
                validate_rules(parse_rule_lines(stage.rule_lines), *kind);
            } catch (const Error& e) {
                say(e.what());
            }
            out_shard(*kind);
        }
    } else if (stage.op == "concat") {
        auto kinds = in_shard_list("in");
        if (kinds) {
            for (ShardKind k : *kinds) {
                if (k != kinds->front()) {
                    say("mixes parallel and mono inputs");
                    return;
                }
            }
            if (auto v = opt_param(stage, "min_avg_len")) {
                try {
                    if (std::stod(*v) < 0) say("min_avg_len must be >= 0");
                } catch (const std::exception&) {
                    say("bad number '" + *v + "' for min_avg_len");
                }
            }
            out_shard(kinds->front());
        }
    } else if (stage.op == "sample") {
        if (in_shard_list("in")) {
            uint_param("n", 1, std::nullopt);
            out_shard(ShardKind::mono);
        }
    } else if (stage.op == "zh-seg") {
        auto kind = in_shard("in");
        auto mode = opt_param(stage, "mode");
        if (!mode || (*mode != "char" && *mode != "deseg")) say("mode must be char or deseg");
        if (kind) {
            auto side = opt_param(stage, "side");
            if (*kind == ShardKind::parallel && !side) say("parallel input needs side = src|tgt");
            if (side && *side != "src" && *side != "tgt") say("bad side '" + *side + "'");
            if (auto r = opt_param(stage, "ranges")) {
                try {
                    ScriptRangeSet::parse(*r);
                } catch (const Error& e) {
                    say(e.what());
                }
            }
            out_shard(*kind);
        }
    } else if (stage.op == "translit") {
        auto kind = in_shard("in");
        if (kind) {
            if (*kind != ShardKind::mono) say("translit expects a mono shard");
            out_shard(ShardKind::mono);
        }
    } else if (stage.op == "bpe-learn") {
        auto kinds = in_shard_list("in");
        uint_param("merges", 0, std::nullopt);
        auto joint = opt_param(stage, "joint");
        if (joint && *joint != "true" && *joint != "false") say("joint must be true or false");
        if (kinds && joint && *joint == "false" &&
            (kinds->size() != 1 || kinds->front() != ShardKind::mono)) {
            say("joint = false requires a single mono input");
        }
        out_artifact("out");
    } else if (stage.op == "bpe-apply") {
        auto kind = in_shard("in");
        auto model = opt_param(stage, "model");
        if (!model) say("missing model =");
        uint_param("min_count", 1, 1);
        if (kind) out_shard(*kind);
        if (opt_param(stage, "emit_vocab")) out_artifact("emit_vocab");
    } else if (stage.op == "index") {
        auto kind = in_shard("in");
        auto nmin = uint_param("nmin", 1, 2);
        auto nmax = uint_param("nmax", 1, 4);
        if (nmin && nmax && *nmin > *nmax) say("nmin must be <= nmax");
        if (kind) out_artifact("out");
    } else if (stage.op == "select") {
        auto test_kind = in_shard("test");
        if (test_kind && *test_kind != ShardKind::mono) say("test must be a mono shard");
        auto kinds = in_shard_list("pool");
        auto indices = opt_param(stage, "indices");
        if (!indices) {
            say("missing indices =");
        } else if (kinds) {
            std::vector<std::string> names = split_list(*indices);
            if (names.size() != kinds->size()) say("indices list must match pool list");
            for (const std::string& a : names) {
                if (!env.artifacts.count(a)) say("references undefined artifact '" + a + "'");
            }
        }
        uint_param("threshold", 1, 50);
        auto nmin = uint_param("nmin", 1, 2);
        auto nmax = uint_param("nmax", 1, 4);
        if (nmin && nmax && *nmin > *nmax) say("nmin must be <= nmax");
        uint_param("budget", 1, UINT64_MAX);
        if (kinds) {
            for (ShardKind k : *kinds) {
                if (k != kinds->front()) {
                    say("pool mixes parallel and mono shards");
                    return;
                }
            }
            out_shard(kinds->front());
        }
        if (opt_param(stage, "ranking")) out_artifact("ranking");
    } else if (stage.op == "blend") {
        if (stage.component_lines.empty()) say("needs at least one component = line");
        std::optional<ShardKind> kind;
        double weight_sum = 0.0;
        for (const std::string& line : stage.component_lines) {
            std::vector<std::string_view> fields = split_tokens(line);
            if (fields.size() != 2) {
                say("bad component '" + line + "' (want: shard weight)");
                continue;
            }
            auto it = env.shards.find(std::string(fields[0]));
            if (it == env.shards.end()) {
                say("references undefined shard '" + std::string(fields[0]) + "'");
                continue;
            }
            if (!kind) kind = it->second;
            else if (*kind != it->second) say("components mix parallel and mono shards");
            try {
                weight_sum += std::stod(std::string(fields[1]));
            } catch (const std::exception&) {
                say("bad weight '" + std::string(fields[1]) + "'");
            }
        }
        if (!stage.component_lines.empty() && std::abs(weight_sum - 1.0) > 1e-9) {
            say("component weights must sum to 1");
        }
        uint_param("epoch_size", 1, std::nullopt);
        auto sampling = opt_param(stage, "sampling");
        if (sampling && *sampling != "upsample_cycle" && *sampling != "with_replacement") {
            say("bad sampling '" + *sampling + "'");
        }
        out_shard(kind.value_or(ShardKind::parallel));
    } else if (stage.op == "xent-filter") {
        auto kind = in_shard("in");
        auto scores = opt_param(stage, "scores");
        auto lm_order = opt_param(stage, "lm_order");
        if (!scores && !lm_order) say("needs scores = or lm_order =");
        if (lm_order) {
            uint_param("lm_order", 1, std::nullopt);
            auto side = opt_param(stage, "lm_side");
            if (side && *side != "src" && *side != "tgt") say("bad lm_side '" + *side + "'");
        }
        auto mode = opt_param(stage, "mode");
        if (!mode) {
            say("missing mode = (percentile:P or absolute:T)");
        } else {
            std::size_t colon = mode->find(':');
            std::string head = mode->substr(0, colon);
            if (colon == std::string::npos || (head != "percentile" && head != "absolute")) {
                say("bad mode '" + *mode + "'");
            } else {
                try {
                    double v = std::stod(mode->substr(colon + 1));
                    if (head == "percentile" && !(v > 0.0 && v < 1.0)) say("percentile must be in (0, 1)");
                } catch (const std::exception&) {
                    say("bad mode value in '" + *mode + "'");
                }
            }
        }
        auto direction = opt_param(stage, "direction");
        if (direction && *direction != "forward" && *direction != "dual") {
            say("bad direction '" + *direction + "' (want forward or dual)");
        }
        if (kind) out_shard(*kind);
    } else if (stage.op == "stats") {
        if (in_shard("in")) out_artifact("out");
    }
}

} // namespace

std::vector<std::string> validate(const PipelineConfig& config) {
    std::vector<std::string> errors;
    NameEnv env;
    for (const InputDecl& input : config.inputs) {
        if (!valid_name(input.name)) {
            errors.push_back("input '" + input.name + "': bad name");
            continue;
        }
        if (env.shards.count(input.name)) {
            errors.push_back("input '" + input.name + "': name already defined");
            continue;
        }
        std::size_t want = input.kind == ShardKind::parallel ? 2 : 1;
        if (input.paths.size() != want) {
            errors.push_back("input '" + input.name + "': " +
                             (want == 2 ? "parallel input needs src = and tgt =" : "mono input needs path ="));
            continue;
        }
        env.shards.emplace(input.name, input.kind);
    }
    std::set<std::string> stage_names;
    for (const StageConfig& stage : config.stages) {
        if (!valid_name(stage.name)) {
            errors.push_back("stage '" + stage.name + "': bad name");
            continue;
        }
        if (!stage_names.insert(stage.name).second) {
            errors.push_back("stage '" + stage.name + "': name already defined");
            continue;
        }
        StageConfig with_op = stage;
        auto op = opt_param(stage, "op");
        with_op.op = op.value_or("");
        check_stage(with_op, env, errors);
    }
    return errors;
}

// --- execution ---------------------------------------------------------------

namespace {

struct Runtime {
    const PipelineConfig& config;
    RunOptions options;
    std::unordered_map<std::string, CorpusShard> shards;
    std::unordered_map<std::string, std::filesystem::path> artifacts;
    std::vector<std::filesystem::path> created;

    std::filesystem::path track(const std::filesystem::path& p) {
        created.push_back(p);
        return p;
    }

    std::vector<std::filesystem::path> shard_out_paths(const std::string& name, ShardKind kind) {
        if (kind == ShardKind::parallel) {
            return {track(config.outdir / (name + ".src")), track(config.outdir / (name + ".tgt"))};
        }
        return {track(config.outdir / (name + ".txt"))};
    }

    std::filesystem::path artifact_out_path(const std::string& name) {
        std::filesystem::path p = track(config.outdir / name);
        artifacts.emplace(name, p);
        return p;
    }

    const CorpusShard& shard(const std::string& name) { return shards.at(name); }

    std::filesystem::path resolve_readable(const std::string& name_or_path) const {
        auto it = artifacts.find(name_or_path);
        if (it != artifacts.end()) return it->second;
        return config.base_dir / name_or_path;
    }

    void register_shard(const std::string& name, ShardKind kind, std::vector<std::filesystem::path> paths,
                        std::uint64_t lines) {
        CorpusShard shard;
        shard.name = name;
        shard.kind = kind;
        shard.paths = std::move(paths);
        shard.line_count = lines;
        shards.emplace(name, std::move(shard));
    }
};

std::string require(const StageConfig& stage, const std::string& key) {
    auto v = opt_param(stage, key);
    if (!v) fail(errc::config_error, "stage '" + stage.name + "': missing " + key + " =");
    return *v;
}

ScriptRangeSet stage_ranges(const StageConfig& stage, bool char_mode) {
    if (auto r = opt_param(stage, "ranges")) return ScriptRangeSet::parse(*r);
    return char_mode ? chinese_ranges() : chinese_deseg_ranges();
}

void record_io(StageRecord& record, Runtime& rt, const std::vector<std::string>& ins,
               const std::vector<std::string>& outs) {
    for (const std::string& name : ins) record.input_lines.emplace_back(name, rt.shard(name).line_count);
    for (const std::string& name : outs) record.output_lines.emplace_back(name, rt.shard(name).line_count);
}

void run_stage(const StageConfig& stage, Runtime& rt, std::uint64_t stage_seed, StageRecord& record) {
    unsigned threads = rt.options.threads;

    if (stage.op == "clean") {
        std::string in = require(stage, "in");
        std::string out = require(stage, "out");
        const CorpusShard& shard = rt.shard(in);
        std::vector<CleanRule> rules = parse_rule_lines(stage.rule_lines);
        ShardWriter writer(rt.shard_out_paths(out, shard.kind), shard.kind);
        CleanOptions opts;
        opts.threads = threads;
        FilterReport report = run_pipeline(shard, rules, writer, opts);
        rt.register_shard(out, shard.kind, writer.paths(), writer.lines_written());
        record.report_json = report_json(report, rules);
        record_io(record, rt, {in}, {out});
    } else if (stage.op == "concat") {
        std::vector<std::string> ins = split_list(require(stage, "in"));
        std::string out = require(stage, "out");
        auto min_avg = opt_param(stage, "min_avg_len");
        std::vector<CorpusShard> included;
        std::vector<std::string> excluded;
        for (const std::string& name : ins) {
            const CorpusShard& shard = rt.shard(name);
            if (min_avg && !meets_min_avg_len(compute_stats(shard), std::stod(*min_avg))) {
                excluded.push_back(name);
            } else {
                included.push_back(shard);
            }
        }
        ShardKind kind = rt.shard(ins.front()).kind;
        std::vector<std::filesystem::path> out_paths = rt.shard_out_paths(out, kind);
        if (included.empty()) {
            ShardWriter writer(out_paths, kind);
            writer.close();
            rt.register_shard(out, kind, out_paths, 0);
        } else {
            CorpusShard result = concat_shards(included, out_paths, out);
            rt.register_shard(out, kind, out_paths, result.line_count);
        }
        if (!excluded.empty()) {
            nlohmann::json j;
            j["excluded_below_min_avg_len"] = excluded;
            record.report_json = j.dump();
        }
        record_io(record, rt, ins, {out});
    } else if (stage.op == "sample") {
        std::vector<std::string> ins = split_list(require(stage, "in"));
        std::string out = require(stage, "out");
        std::uint64_t n = std::stoull(require(stage, "n"));
        std::vector<std::filesystem::path> files;
        for (const std::string& name : ins) {
            for (const auto& p : rt.shard(name).paths) files.push_back(p);
        }
        std::vector<std::filesystem::path> out_paths = rt.shard_out_paths(out, ShardKind::mono);
        sample_lines(files, n, stage_seed, out_paths[0]);
        rt.register_shard(out, ShardKind::mono, out_paths,
                          load_shard(out_paths, ShardKind::mono, out).line_count);
        record_io(record, rt, ins, {out});
    } else if (stage.op == "zh-seg") {
        std::string in = require(stage, "in");
        std::string out = require(stage, "out");
        bool char_mode = require(stage, "mode") == "char";
        const CorpusShard& shard = rt.shard(in);
        ScriptRangeSet ranges = stage_ranges(stage, char_mode);
        std::vector<std::filesystem::path> out_paths = rt.shard_out_paths(out, shard.kind);
        if (shard.kind == ShardKind::mono) {
            zh_transform_file(shard.paths[0], out_paths[0], char_mode, ranges, threads);
        } else {
            bool src_side = require(stage, "side") == "src";
            zh_transform_file(shard.paths[src_side ? 0 : 1], out_paths[src_side ? 0 : 1], char_mode, ranges,
                              threads);
            std::filesystem::copy_file(shard.paths[src_side ? 1 : 0], out_paths[src_side ? 1 : 0],
                                       std::filesystem::copy_options::overwrite_existing);
        }
        rt.register_shard(out, shard.kind, out_paths, shard.line_count);
        record_io(record, rt, {in}, {out});
    } else if (stage.op == "translit") {
        std::string in = require(stage, "in");
        std::string out = require(stage, "out");
        const CorpusShard& shard = rt.shard(in);
        TransliterationTable table =
            opt_param(stage, "table") ? TransliterationTable::load(rt.resolve_readable(*opt_param(stage, "table")))
                                      : build_table();
        std::vector<std::filesystem::path> out_paths = rt.shard_out_paths(out, ShardKind::mono);
        transliterate_file(table, shard.paths[0], out_paths[0], threads);
        rt.register_shard(out, ShardKind::mono, out_paths, shard.line_count);
        record_io(record, rt, {in}, {out});
    } else if (stage.op == "bpe-learn") {
        std::vector<std::string> ins = split_list(require(stage, "in"));
        std::string out = require(stage, "out");
        std::uint64_t merges = std::stoull(require(stage, "merges"));
        bool joint = opt_param(stage, "joint").value_or("true") == "true";
        std::vector<std::filesystem::path> files;
        for (const std::string& name : ins) {
            for (const auto& p : rt.shard(name).paths) files.push_back(p);
        }
        BpeModel model = bpe_learn_files(files, merges, joint);
        model.save(rt.artifact_out_path(out));
        record.artifacts.push_back(out);
        record_io(record, rt, ins, {});
    } else if (stage.op == "bpe-apply") {
        std::string in = require(stage, "in");
        std::string out = require(stage, "out");
        const CorpusShard& shard = rt.shard(in);
        BpeModel model = BpeModel::load(rt.resolve_readable(require(stage, "model")));
        Vocabulary vocab;
        bool have_vocab = false;
        if (auto v = opt_param(stage, "vocab")) {
            std::uint64_t min_count = std::stoull(opt_param(stage, "min_count").value_or("1"));
            vocab = Vocabulary::load(rt.resolve_readable(*v), min_count);
            have_vocab = true;
        }
        BpeApplier applier(model, have_vocab ? &vocab : nullptr);
        std::vector<std::filesystem::path> out_paths = rt.shard_out_paths(out, shard.kind);
        for (std::size_t i = 0; i < shard.paths.size(); ++i) {
            bpe_apply_file(applier, shard.paths[i], out_paths[i], threads);
        }
        rt.register_shard(out, shard.kind, out_paths, shard.line_count);
        if (auto ev = opt_param(stage, "emit_vocab")) {
            vocab_build_and_prune(out_paths, 1).save(rt.artifact_out_path(*ev));
            record.artifacts.push_back(*ev);
        }
        record_io(record, rt, {in}, {out});
    } else if (stage.op == "index") {
        std::string in = require(stage, "in");
        std::string out = require(stage, "out");
        int nmin = std::stoi(opt_param(stage, "nmin").value_or("2"));
        int nmax = std::stoi(opt_param(stage, "nmax").value_or("4"));
        build_ngram_index(rt.shard(in), nmin, nmax).save(rt.artifact_out_path(out));
        record.artifacts.push_back(out);
        record_io(record, rt, {in}, {});
    } else if (stage.op == "select") {
        std::string test = require(stage, "test");
        std::vector<std::string> pool_names = split_list(require(stage, "pool"));
        std::vector<std::string> index_names = split_list(require(stage, "indices"));
        std::string out = require(stage, "out");
        SelectionConfig cfg;
        cfg.rare_threshold = std::stoull(opt_param(stage, "threshold").value_or("50"));
        cfg.n_min = std::stoi(opt_param(stage, "nmin").value_or("2"));
        cfg.n_max = std::stoi(opt_param(stage, "nmax").value_or("4"));
        if (auto b = opt_param(stage, "budget")) cfg.budget = std::stoull(*b);
        std::vector<std::string> test_lines = read_lines(rt.shard(test).paths[0]);
        std::vector<NgramIndex> indices;
        indices.reserve(index_names.size());
        for (const std::string& name : index_names) indices.push_back(NgramIndex::load(rt.resolve_readable(name)));
        std::vector<PoolShard> pool;
        for (std::size_t i = 0; i < pool_names.size(); ++i) {
            pool.push_back({&rt.shard(pool_names[i]), &indices[i]});
        }
        std::vector<SelectedSentence> selected = select_finetune_data(test_lines, pool, cfg);
        // fetch the selected pairs shard by shard, then emit in rank order
        ShardKind kind = rt.shard(pool_names.front()).kind;
        std::unordered_map<std::string, std::unordered_map<std::uint64_t, std::pair<std::string, std::string>>>
            fetched;
        for (const std::string& name : pool_names) {
            std::unordered_map<std::uint64_t, std::pair<std::string, std::string>>& slot = fetched[name];
            std::unordered_set<std::uint64_t> wanted;
            for (const SelectedSentence& s : selected) {
                if (s.shard == rt.shard(name).name) wanted.insert(s.id);
            }
            if (wanted.empty()) continue;
            ShardReader reader(rt.shard(name));
            PairView pair;
            while (reader.next(pair)) {
                if (wanted.count(pair.id)) slot.emplace(pair.id, std::make_pair(std::string(pair.src), std::string(pair.tgt)));
            }
        }
        ShardWriter writer(rt.shard_out_paths(out, kind), kind);
        std::unordered_map<std::string, std::string> by_display_name;
        for (const std::string& name : pool_names) by_display_name[rt.shard(name).name] = name;
        for (const SelectedSentence& s : selected) {
            const auto& pair = fetched[by_display_name[s.shard]].at(s.id);
            if (kind == ShardKind::parallel) {
                writer.write(pair.first, pair.second);
            } else {
                writer.write(pair.first);
            }
        }
        writer.close();
        rt.register_shard(out, kind, writer.paths(), writer.lines_written());
        if (auto rk = opt_param(stage, "ranking")) {
            std::vector<std::string> lines;
            for (const SelectedSentence& s : selected) {
                lines.push_back(s.shard + "\t" + std::to_string(s.id) + "\t" + std::to_string(s.score));
            }
            write_lines(rt.artifact_out_path(*rk), lines);
            record.artifacts.push_back(*rk);
        }
        std::vector<std::string> ins = pool_names;
        ins.push_back(test);
        record_io(record, rt, ins, {out});
    } else if (stage.op == "blend") {
        std::string out = require(stage, "out");
        BlendSpec spec;
        spec.epoch_size = std::stoull(require(stage, "epoch_size"));
        spec.seed = opt_param(stage, "seed") ? std::stoull(*opt_param(stage, "seed")) : stage_seed;
        if (opt_param(stage, "sampling").value_or("upsample_cycle") == "with_replacement") {
            spec.sampling = BlendSampling::with_replacement;
        }
        std::vector<std::string> ins;
        for (const std::string& line : stage.component_lines) {
            std::vector<std::string_view> fields = split_tokens(line);
            ins.push_back(std::string(fields[0]));
            spec.components.push_back({rt.shard(ins.back()), std::stod(std::string(fields[1]))});
        }
        ShardKind kind = spec.components.front().shard.kind;
        ShardWriter writer(rt.shard_out_paths(out, kind), kind);
        build_blend(spec, writer);
        rt.register_shard(out, kind, writer.paths(), writer.lines_written());
        record_io(record, rt, ins, {out});
    } else if (stage.op == "xent-filter") {
        std::string in = require(stage, "in");
        std::string out = require(stage, "out");
        const CorpusShard& shard = rt.shard(in);
        std::vector<ScoreRecord> records;
        if (auto scores = opt_param(stage, "scores")) {
            records = ingest_scores(rt.resolve_readable(*scores), shard);
        } else {
            Side side = opt_param(stage, "lm_side").value_or("tgt") == "src" ? Side::src : Side::tgt;
            records = fallback_lm_score(shard, side, std::stoi(require(stage, "lm_order")));
        }
        std::string mode = require(stage, "mode");
        std::size_t colon = mode.find(':');
        FilterCut cut;
        cut.mode = mode.substr(0, colon) == "percentile" ? FilterCut::Mode::percentile_worst
                                                         : FilterCut::Mode::absolute_threshold;
        cut.value = std::stod(mode.substr(colon + 1));
        cut.direction = opt_param(stage, "direction").value_or("forward") == "dual"
                            ? FilterCut::Direction::dual
                            : FilterCut::Direction::one_directional;
        CutResult result = apply_cut(records, cut);
        ShardWriter writer(rt.shard_out_paths(out, shard.kind), shard.kind);
        copy_selected(shard, result.kept, writer);
        rt.register_shard(out, shard.kind, writer.paths(), writer.lines_written());
        nlohmann::json j;
        j["total_in"] = records.size();
        j["kept"] = result.kept.size();
        j["rejected"] = result.rejected.size();
        j["mode"] = mode;
        record.report_json = j.dump();
        record_io(record, rt, {in}, {out});
    } else if (stage.op == "stats") {
        std::string in = require(stage, "in");
        std::string out = require(stage, "out");
        CorpusStats stats = compute_stats(rt.shard(in));
        nlohmann::json j;
        j["sentence_count"] = stats.sentence_count;
        j["token_count_src"] = stats.token_count_src;
        j["token_count_tgt"] = stats.token_count_tgt;
        j["avg_len_src"] = stats.avg_len_src;
        j["avg_len_tgt"] = stats.avg_len_tgt;
        std::ofstream sink(rt.artifact_out_path(out), std::ios::binary | std::ios::trunc);
        sink << j.dump(2) << "\n";
        if (!sink) fail(errc::io_error, "write error");
        record.artifacts.push_back(out);
        record_io(record, rt, {in}, {});
    }
}

} // namespace

std::string RunManifest::to_json(bool include_wall_times) const {
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["tool_version"] = tool_version;
    j["seed"] = seed;
    j["stages"] = nlohmann::json::array();
    for (const StageRecord& s : stages) {
        nlohmann::json sj;
        sj["name"] = s.name;
        sj["op"] = s.op;
        sj["inputs"] = nlohmann::json::object();
        for (const auto& [name, lines] : s.input_lines) sj["inputs"][name] = lines;
        sj["outputs"] = nlohmann::json::object();
        for (const auto& [name, lines] : s.output_lines) sj["outputs"][name] = lines;
        if (!s.artifacts.empty()) sj["artifacts"] = s.artifacts;
        if (!s.report_json.empty()) sj["report"] = nlohmann::json::parse(s.report_json);
        if (include_wall_times) sj["wall_ms"] = s.wall_ms;
        j["stages"].push_back(std::move(sj));
    }
    return j.dump(2);
}

RunManifest run(const PipelineConfig& config, const RunOptions& options) {
    std::vector<std::string> errors = validate(config);
    if (!errors.empty()) {
        std::string msg = errors[0];
        if (errors.size() > 1) msg += " (and " + std::to_string(errors.size() - 1) + " more)";
        fail(errc::config_error, msg);
    }

    Runtime rt{config, options, {}, {}, {}};
    RunManifest manifest;
    manifest.config_hash = hex64(fnv1a64(config.raw_text));
    manifest.tool_version = kToolVersion;
    manifest.seed = config.seed;

    auto log = [&](const std::string& line) {
        if (!options.quiet) std::cerr << line << "\n";
    };

    try {
        std::filesystem::create_directories(config.outdir);
        for (const InputDecl& input : config.inputs) {
            rt.shards.emplace(input.name, load_shard(input.paths, input.kind, input.name));
        }
        for (std::size_t i = 0; i < config.stages.size(); ++i) {
            StageConfig stage = config.stages[i];
            stage.op = opt_param(stage, "op").value_or("");
            std::uint64_t stage_seed = mix_seed(config.seed, i);
            if (auto s = opt_param(stage, "seed")) stage_seed = std::stoull(*s);
            StageRecord record;
            record.name = stage.name;
            record.op = stage.op;
            auto start = std::chrono::steady_clock::now();
            run_stage(stage, rt, stage_seed, record);
            record.wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
            std::uint64_t out_lines = 0;
            for (const auto& [_, lines] : record.output_lines) out_lines += lines;
            log("[" + stage.name + "] " + stage.op + " done" +
                (record.output_lines.empty() ? "" : " (" + std::to_string(out_lines) + " lines out)") +
                (options.verbose ? " in " + std::to_string(record.wall_ms) + " ms" : ""));
            manifest.stages.push_back(std::move(record));
        }
    } catch (const Error& e) {
        for (const auto& p : rt.created) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
        if (e.code() == errc::config_error) throw;
        throw Error(errc::stage_error, e.what());
    } catch (const std::exception& e) {
        for (const auto& p : rt.created) {
            std::error_code ec;
            std::filesystem::remove(p, ec);
        }
        throw Error(errc::stage_error, e.what());
    }

    std::filesystem::path manifest_path = options.manifest_path.value_or(config.outdir / "manifest.json");
    std::ofstream sink(manifest_path, std::ios::binary | std::ios::trunc);
    sink << manifest.to_json(true) << "\n";
    if (!sink) fail(errc::io_error, "cannot write manifest " + manifest_path.string());
    return manifest;
}

} // namespace mtforge
