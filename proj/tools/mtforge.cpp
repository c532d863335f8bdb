// mtforge: deterministic corpus-engineering toolkit for MT data pipelines.
//
// Exit codes: 0 success, 1 data error, 2 config error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtforge/bpe.hpp"
#include "mtforge/clean.hpp"
#include "mtforge/corpus.hpp"
#include "mtforge/dataselect.hpp"
#include "mtforge/error.hpp"
#include "mtforge/pipeline.hpp"
#include "mtforge/translit.hpp"
#include "mtforge/xent.hpp"
#include "mtforge/zhseg.hpp"

namespace {

using namespace mtforge;

unsigned env_threads() {
    const char* value = std::getenv("MTFORGE_THREADS");
    if (!value) return 1;
    int n = std::atoi(value);
    return n > 0 ? static_cast<unsigned>(n) : 1;
}

ShardKind kind_of(const std::vector<std::string>& files) {
    return files.size() == 2 ? ShardKind::parallel : ShardKind::mono;
}

std::vector<std::filesystem::path> to_paths(const std::vector<std::string>& files) {
    return {files.begin(), files.end()};
}

CorpusShard load_files(const std::vector<std::string>& files, const std::string& name = "") {
    return load_shard(to_paths(files), kind_of(files), name);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) fail(errc::io_error, "cannot write " + path.string());
}

FilterCut parse_cut(const std::string& mode, const std::string& direction) {
    FilterCut cut;
    std::size_t colon = mode.find(':');
    std::string head = mode.substr(0, colon);
    if (colon == std::string::npos || (head != "percentile" && head != "absolute")) {
        fail(errc::config_error, "bad --mode '" + mode + "' (want percentile:P or absolute:T)");
    }
    cut.mode = head == "percentile" ? FilterCut::Mode::percentile_worst : FilterCut::Mode::absolute_threshold;
    try {
        cut.value = std::stod(mode.substr(colon + 1));
    } catch (const std::exception&) {
        fail(errc::config_error, "bad --mode value in '" + mode + "'");
    }
    if (direction == "dual") cut.direction = FilterCut::Direction::dual;
    else if (direction == "forward") cut.direction = FilterCut::Direction::one_directional;
    else fail(errc::config_error, "bad --direction '" + direction + "' (want forward or dual)");
    return cut;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mtforge: deterministic corpus-engineering toolkit for MT data pipelines"};
    app.require_subcommand(1);

    unsigned threads = env_threads();
    bool quiet = false;
    bool verbose = false;
    app.add_option("--threads", threads, "worker threads (also MTFORGE_THREADS)")->capture_default_str();
    app.add_flag("--quiet", quiet, "suppress progress output");
    app.add_flag("--verbose", verbose, "more progress output");

    // clean
    auto* clean = app.add_subcommand("clean", "filter a corpus with an ordered rule file");
    std::string clean_rules;
    std::vector<std::string> clean_in;
    std::vector<std::string> clean_out;
    std::string clean_report;
    std::string clean_reject_log;
    clean->add_option("--rules", clean_rules, "rule file, one rule per line")->required();
    clean->add_option("--in", clean_in, "input file(s): src [tgt]")->required()->expected(1, 2);
    clean->add_option("--out", clean_out, "output file(s), same arity as --in")->required()->expected(1, 2);
    clean->add_option("--report", clean_report, "write the JSON filter report here");
    clean->add_option("--reject-log", clean_reject_log, "write 'id<TAB>rule' lines for rejected pairs");
    clean->callback([&] {
        if (clean_in.size() != clean_out.size()) {
            fail(errc::config_error, "--in and --out must list the same number of files");
        }
        CorpusShard shard = load_files(clean_in);
        std::vector<CleanRule> rules = parse_rules_file(clean_rules);
        std::ofstream log_stream;
        CleanOptions options;
        options.threads = threads;
        if (!clean_reject_log.empty()) {
            log_stream.open(clean_reject_log, std::ios::binary | std::ios::trunc);
            if (!log_stream) fail(errc::io_error, "cannot write " + clean_reject_log);
            options.reject_log = &log_stream;
        }
        ShardWriter writer(to_paths(clean_out), shard.kind);
        FilterReport report = run_pipeline(shard, rules, writer, options);
        std::string json = report_json(report, rules);
        if (!clean_report.empty()) write_text(clean_report, json + "\n");
        if (!quiet) {
            std::cerr << "kept " << report.total_out << " of " << report.total_in << " pairs\n";
        }
    });

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "sentence/token counts and average lengths");
    std::vector<std::string> stats_in;
    stats_cmd->add_option("--in", stats_in, "input file(s): src [tgt]")->required()->expected(1, 2);
    stats_cmd->callback([&] {
        CorpusStats stats = compute_stats(load_files(stats_in));
        nlohmann::json j;
        j["sentence_count"] = stats.sentence_count;
        j["token_count_src"] = stats.token_count_src;
        j["token_count_tgt"] = stats.token_count_tgt;
        j["avg_len_src"] = stats.avg_len_src;
        j["avg_len_tgt"] = stats.avg_len_tgt;
        std::cout << j.dump(2) << "\n";
    });

    // bpe-learn
    auto* bpe_learn_cmd = app.add_subcommand("bpe-learn", "learn a BPE merge list");
    std::vector<std::string> learn_in;
    std::string learn_model;
    std::uint64_t learn_merges = 0;
    bool learn_joint = false;
    std::uint64_t learn_sample = 0;
    std::uint64_t learn_seed = 0;
    bpe_learn_cmd->add_option("--in", learn_in, "training text file(s)")->required();
    bpe_learn_cmd->add_option("--merges", learn_merges, "number of merge operations")->required();
    bpe_learn_cmd->add_flag("--joint", learn_joint, "pool all inputs into one frequency table");
    bpe_learn_cmd->add_option("--model", learn_model, "output model file")->required();
    bpe_learn_cmd->add_option("--sample", learn_sample, "learn on a uniform sample of this many sentences");
    bpe_learn_cmd->add_option("--seed", learn_seed, "sampling seed")->capture_default_str();
    bpe_learn_cmd->callback([&] {
        std::vector<std::filesystem::path> files = to_paths(learn_in);
        std::filesystem::path sampled;
        if (learn_sample > 0) {
            // sampling pools the inputs, so the result is a joint table by construction
            sampled = std::filesystem::path(learn_model).string() + ".sample.tmp";
            sample_lines(files, learn_sample, learn_seed, sampled);
            files = {sampled};
            learn_joint = true;
        }
        BpeModel model = bpe_learn_files(files, learn_merges, learn_joint);
        model.save(learn_model);
        if (!sampled.empty()) std::filesystem::remove(sampled);
        if (!quiet) std::cerr << "learned " << model.merges.size() << " merges\n";
    });

    // bpe-apply
    auto* bpe_apply_cmd = app.add_subcommand("bpe-apply", "segment text with a BPE model");
    std::string apply_model;
    std::string apply_vocab;
    std::uint64_t apply_min_count = 1;
    std::vector<std::string> apply_in;
    std::vector<std::string> apply_out;
    std::string apply_emit_vocab;
    bpe_apply_cmd->add_option("--model", apply_model, "model file from bpe-learn")->required();
    bpe_apply_cmd->add_option("--vocab", apply_vocab,
                              "vocabulary file; pieces missing from it fall back to characters");
    bpe_apply_cmd->add_option("--min-count", apply_min_count, "prune the vocabulary below this count")
        ->capture_default_str();
    bpe_apply_cmd->add_option("--in", apply_in, "input text file(s)")->required();
    bpe_apply_cmd->add_option("--out", apply_out, "output file(s), same arity as --in")->required();
    bpe_apply_cmd->add_option("--emit-vocab", apply_emit_vocab, "write token counts of the output here");
    bpe_apply_cmd->callback([&] {
        if (apply_in.size() != apply_out.size()) {
            fail(errc::config_error, "--in and --out must list the same number of files");
        }
        BpeModel model = BpeModel::load(apply_model);
        Vocabulary vocab;
        bool have_vocab = !apply_vocab.empty();
        if (have_vocab) vocab = Vocabulary::load(apply_vocab, apply_min_count);
        BpeApplier applier(model, have_vocab ? &vocab : nullptr);
        for (std::size_t i = 0; i < apply_in.size(); ++i) {
            bpe_apply_file(applier, apply_in[i], apply_out[i], threads);
        }
        if (!apply_emit_vocab.empty()) {
            vocab_build_and_prune(to_paths(apply_out), 1).save(apply_emit_vocab);
        }
    });

    // zh-seg
    auto* zh = app.add_subcommand("zh-seg", "Chinese desegmentation / character segmentation");
    std::string zh_mode;
    std::string zh_in;
    std::string zh_out;
    std::string zh_ranges;
    zh->add_option("--mode", zh_mode, "char or deseg")->required()->check(CLI::IsMember({"char", "deseg"}));
    zh->add_option("--in", zh_in, "input text file")->required();
    zh->add_option("--out", zh_out, "output text file")->required();
    zh->add_option("--ranges", zh_ranges, "override script ranges, e.g. 4E00-9FFF,3400-4DBF");
    zh->callback([&] {
        bool char_mode = zh_mode == "char";
        ScriptRangeSet ranges = zh_ranges.empty() ? (char_mode ? chinese_ranges() : chinese_deseg_ranges())
                                                  : ScriptRangeSet::parse(zh_ranges);
        zh_transform_file(zh_in, zh_out, char_mode, ranges, threads);
    });

    // translit
    auto* translit_cmd = app.add_subcommand("translit", "Devanagari -> Gujarati transliteration");
    std::string translit_table;
    std::string translit_in;
    std::string translit_out;
    translit_cmd->add_option("--table", translit_table, "mapping file (default: built-in table)");
    translit_cmd->add_option("--in", translit_in, "input text file")->required();
    translit_cmd->add_option("--out", translit_out, "output text file")->required();
    translit_cmd->callback([&] {
        TransliterationTable table =
            translit_table.empty() ? build_table() : TransliterationTable::load(translit_table);
        transliterate_file(table, translit_in, translit_out, threads);
    });

    // translit-stats
    auto* tstats = app.add_subcommand("translit-stats", "token overlap between transliterated and reference text");
    std::string tstats_hg;
    std::string tstats_ref;
    tstats->add_option("--hg", tstats_hg, "transliterated file")->required();
    tstats->add_option("--ref", tstats_ref, "line-aligned reference file")->required();
    tstats->callback([&] {
        OverlapStats stats = overlap_stats(tstats_hg, tstats_ref);
        nlohmann::json j;
        j["total_tokens"] = stats.total_tokens;
        j["exact_matches"] = stats.exact_matches;
        j["match_fraction"] = stats.match_fraction();
        j["excluded_punctuation"] = stats.excluded_punct;
        j["excluded_latin"] = stats.excluded_latin;
        std::cout << j.dump(2) << "\n";
    });

    // index
    auto* index_cmd = app.add_subcommand("index", "build a per-shard n-gram count index");
    std::vector<std::string> index_in;
    std::string index_out;
    std::string index_name;
    int index_nmin = 2;
    int index_nmax = 4;
    index_cmd->add_option("--in", index_in, "shard file(s): src [tgt]")->required()->expected(1, 2);
    index_cmd->add_option("--out", index_out, "output index file")->required();
    index_cmd->add_option("--name", index_name, "shard name (default: src file stem)");
    index_cmd->add_option("--nmin", index_nmin, "smallest n")->capture_default_str();
    index_cmd->add_option("--nmax", index_nmax, "largest n")->capture_default_str();
    index_cmd->callback([&] {
        CorpusShard shard = load_files(index_in, index_name);
        build_ngram_index(shard, index_nmin, index_nmax).save(index_out);
    });

    // select
    auto* select_cmd = app.add_subcommand("select", "rank pool sentences by rare test-set n-gram overlap");
    std::string select_test;
    std::vector<std::string> select_pool;
    std::string select_indices;
    std::uint64_t select_threshold = 50;
    int select_nmin = 2;
    int select_nmax = 4;
    std::uint64_t select_budget = UINT64_MAX;
    std::string select_out;
    select_cmd->add_option("--test", select_test, "test-set source file")->required();
    select_cmd->add_option("--pool", select_pool, "pool shard 'src[,tgt]'; repeatable, one entry per shard")
        ->required();
    select_cmd->add_option("--indices", select_indices, "directory of <shard>.ngidx files")->required();
    select_cmd->add_option("--threshold", select_threshold, "rare means fewer than this many occurrences")
        ->capture_default_str();
    select_cmd->add_option("--nmin", select_nmin, "smallest n")->capture_default_str();
    select_cmd->add_option("--nmax", select_nmax, "largest n")->capture_default_str();
    select_cmd->add_option("--budget", select_budget, "maximum sentences to select");
    select_cmd->add_option("--out", select_out, "write ranking TSV here instead of stdout");
    select_cmd->callback([&] {
        std::vector<CorpusShard> shards;
        std::vector<NgramIndex> indices;
        shards.reserve(select_pool.size());
        for (const std::string& entry : select_pool) {
            std::vector<std::string> files;
            std::size_t comma = entry.find(',');
            files.push_back(entry.substr(0, comma));
            if (comma != std::string::npos) files.push_back(entry.substr(comma + 1));
            shards.push_back(load_files(files));
        }
        indices.reserve(shards.size());
        for (const CorpusShard& shard : shards) {
            std::filesystem::path index_path = std::filesystem::path(select_indices) / (shard.name + ".ngidx");
            if (!std::filesystem::exists(index_path)) {
                fail(errc::missing_index, "no index " + index_path.string() + " for shard '" + shard.name + "'");
            }
            indices.push_back(NgramIndex::load(index_path));
        }
        SelectionConfig cfg;
        cfg.rare_threshold = select_threshold;
        cfg.n_min = select_nmin;
        cfg.n_max = select_nmax;
        cfg.budget = select_budget;
        std::vector<PoolShard> pool;
        for (std::size_t i = 0; i < shards.size(); ++i) pool.push_back({&shards[i], &indices[i]});
        std::vector<SelectedSentence> selected = select_finetune_data(read_lines(select_test), pool, cfg);
        std::ostringstream body;
        for (const SelectedSentence& s : selected) {
            body << s.shard << '\t' << s.id << '\t' << s.score << '\n';
        }
        if (select_out.empty()) {
            std::cout << body.str();
        } else {
            write_text(select_out, body.str());
        }
    });

    // blend
    auto* blend_cmd = app.add_subcommand("blend", "assemble a training corpus from weighted shards");
    std::string blend_spec_path;
    std::vector<std::string> blend_out;
    blend_cmd->add_option("--spec", blend_spec_path, "blend.cfg with shard/weight lines")->required();
    blend_cmd->add_option("--out", blend_out, "output file(s): src [tgt]")->required()->expected(1, 2);
    blend_cmd->callback([&] {
        BlendSpec spec = load_blend_spec(blend_spec_path);
        ShardWriter writer(to_paths(blend_out), kind_of(blend_out));
        build_blend(spec, writer);
        if (!quiet) std::cerr << "blended " << writer.lines_written() << " pairs\n";
    });

    // xent-filter
    auto* xent_cmd = app.add_subcommand("xent-filter", "cut a corpus by cross-entropy scores");
    std::string xent_scores;
    int xent_lm_order = 0;
    std::string xent_lm_side = "tgt";
    std::string xent_mode = "percentile:0.05";
    std::string xent_direction = "forward";
    std::vector<std::string> xent_in;
    std::vector<std::string> xent_out;
    std::string xent_report;
    xent_cmd->add_option("--scores", xent_scores, "TSV pair_id<TAB>h_fwd[<TAB>h_bwd]");
    xent_cmd->add_option("--lm-order", xent_lm_order, "use the built-in n-gram fallback scorer instead");
    xent_cmd->add_option("--lm-side", xent_lm_side, "side the fallback scorer models")->capture_default_str();
    xent_cmd->add_option("--mode", xent_mode, "percentile:P or absolute:T")->capture_default_str();
    xent_cmd->add_option("--direction", xent_direction, "forward or dual")->capture_default_str();
    xent_cmd->add_option("--in", xent_in, "input file(s): src [tgt]")->required()->expected(1, 2);
    xent_cmd->add_option("--out", xent_out, "output file(s)")->required()->expected(1, 2);
    xent_cmd->add_option("--report", xent_report, "write a JSON cut report here");
    xent_cmd->callback([&] {
        CorpusShard shard = load_files(xent_in);
        std::vector<ScoreRecord> records;
        if (!xent_scores.empty()) {
            records = ingest_scores(xent_scores, shard);
        } else if (xent_lm_order > 0) {
            records = fallback_lm_score(shard, xent_lm_side == "src" ? Side::src : Side::tgt, xent_lm_order);
        } else {
            fail(errc::config_error, "need --scores or --lm-order");
        }
        FilterCut cut = parse_cut(xent_mode, xent_direction);
        CutResult result = apply_cut(records, cut);
        ShardWriter writer(to_paths(xent_out), shard.kind);
        copy_selected(shard, result.kept, writer);
        if (!xent_report.empty()) {
            nlohmann::json j;
            j["total_in"] = records.size();
            j["kept"] = result.kept.size();
            j["rejected"] = result.rejected.size();
            j["mode"] = xent_mode;
            j["direction"] = xent_direction;
            write_text(xent_report, j.dump(2) + "\n");
        }
        if (!quiet) std::cerr << "kept " << result.kept.size() << " of " << records.size() << " pairs\n";
    });

    // run / validate
    auto* run_cmd = app.add_subcommand("run", "execute a declarative pipeline config");
    std::string run_config;
    std::string run_manifest;
    run_cmd->add_option("--config", run_config, "pipeline config file")->required();
    run_cmd->add_option("--manifest", run_manifest, "manifest path (default: <outdir>/manifest.json)");
    run_cmd->callback([&] {
        PipelineConfig config = parse_pipeline_config(run_config);
        RunOptions options;
        options.threads = threads;
        options.quiet = quiet;
        options.verbose = verbose;
        if (!run_manifest.empty()) options.manifest_path = run_manifest;
        run(config, options);
    });

    auto* validate_cmd = app.add_subcommand("validate", "statically check a pipeline config");
    std::string validate_config;
    validate_cmd->add_option("--config", validate_config, "pipeline config file")->required();
    validate_cmd->callback([&] {
        std::vector<std::string> errors = validate(parse_pipeline_config(validate_config));
        for (const std::string& e : errors) std::cout << e << "\n";
        if (!errors.empty()) fail(errc::config_error, std::to_string(errors.size()) + " config error(s)");
        if (!quiet) std::cerr << "ok\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "mtforge: " << e.what() << "\n";
        return e.code() == errc::config_error ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "mtforge: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
