#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "mtforge/pipeline.hpp"
#include "testutil.hpp"

using namespace mtforge;
using namespace mtforge::test;

namespace {

// Toy finalization: clean synthetic data of repeat noise, then concatenate the
// genuine corpora whose average source length reaches 10 with it.
std::filesystem::path write_toy_config(const TempDir& dir, const std::string& extra = "") {
    write_file(dir.file("genuine.src"), {
                                            "one two three four five six seven eight nine ten",
                                            "deset slov v této řadě je přesně deset slov zde",
                                        });
    write_file(dir.file("genuine.tgt"), {"g1 target sentence with about ten tokens in it yes",
                                         "g2 target sentence with about ten tokens in it yes"});
    write_file(dir.file("titles.src"), {"short title", "tiny one"});
    write_file(dir.file("titles.tgt"), {"t1 t", "t2 t"});
    write_file(dir.file("synth.src"), {
                                          "clean synthetic sentence number one here with three extra words",
                                          "noisy noisy noisy noisy synthetic sentence padded to ten tokens",
                                          "clean synthetic sentence number two here with three extra words",
                                      });
    write_file(dir.file("synth.tgt"), {"s1 syntetická věta", "s2 šum šum šum šum", "s3 syntetická věta"});
    std::vector<std::string> config = {
        "seed = 42",
        "outdir = out",
        "",
        "[input genuine]",
        "kind = parallel",
        "src = genuine.src",
        "tgt = genuine.tgt",
        "",
        "[input titles]",
        "kind = parallel",
        "src = titles.src",
        "tgt = titles.tgt",
        "",
        "[input synth]",
        "kind = parallel",
        "src = synth.src",
        "tgt = synth.tgt",
        "",
        "[stage clean_synth]",
        "op = clean",
        "in = synth",
        "out = synth_clean",
        "rule = repeat_noise max_char_run=4 max_token_run=3",
        "",
        "[stage finalize]",
        "op = concat",
        "in = genuine, titles, synth_clean",
        "out = final",
        "min_avg_len = 10",
    };
    if (!extra.empty()) config.push_back(extra);
    return write_file(dir.file("pipeline.cfg"), config);
}

} // namespace

TEST_CASE("toy finalization run produces hand-traced counts") {
    TempDir dir;
    PipelineConfig config = parse_pipeline_config(write_toy_config(dir));
    CHECK(validate(config).empty());
    RunManifest manifest = run(config, {});
    REQUIRE(manifest.stages.size() == 2);
    // repeat-noise drops 1 of 3 synthetic pairs
    CHECK(manifest.stages[0].output_lines[0].second == 2);
    // titles (avg 2) is excluded by the min-avg-len gate: 2 genuine + 2 synthetic
    CHECK(manifest.stages[1].output_lines[0].second == 4);
    CHECK(slurp(dir.file("out/final.src")).find("short title") == std::string::npos);
    CHECK(slurp(dir.file("out/final.src")).find("noisy noisy") == std::string::npos);
    CHECK(std::filesystem::exists(dir.file("out/manifest.json")));

    nlohmann::json j = nlohmann::json::parse(slurp(dir.file("out/manifest.json")));
    CHECK(j["tool_version"] == kToolVersion);
    CHECK(j["stages"][0]["report"]["total_out"] == 2);
    CHECK(j["stages"][1]["report"]["excluded_below_min_avg_len"][0] == "titles");
}

TEST_CASE("validate accepts the toy config and rejects broken ones") {
    TempDir dir;
    PipelineConfig config = parse_pipeline_config(write_toy_config(dir));
    CHECK(validate(config).empty());

    SUBCASE("unknown op") {
        std::string text = slurp(dir.file("pipeline.cfg"));
        write_file(dir.file("bad.cfg"), {text + "\n[stage oops]\nop = frobnicate\nin = final\nout = x\n"});
        std::vector<std::string> errors = validate(parse_pipeline_config(dir.file("bad.cfg")));
        REQUIRE(errors.size() == 1);
        CHECK(errors[0].find("oops") != std::string::npos);
        CHECK(errors[0].find("frobnicate") != std::string::npos);
    }
    SUBCASE("out-of-range rule parameter") {
        std::string text = slurp(dir.file("pipeline.cfg"));
        write_file(dir.file("bad.cfg"),
                   {text + "\n[stage r]\nop = clean\nin = final\nout = y\nrule = len_ratio max=0.9\n"});
        std::vector<std::string> errors = validate(parse_pipeline_config(dir.file("bad.cfg")));
        REQUIRE(errors.size() == 1);
        CHECK(errors[0].find("len_ratio") != std::string::npos);
    }
    SUBCASE("cyclic shard reference") {
        std::string text = slurp(dir.file("pipeline.cfg"));
        write_file(dir.file("bad.cfg"),
                   {text + "\n[stage loop]\nop = clean\nin = later\nout = later\n"});
        std::vector<std::string> errors = validate(parse_pipeline_config(dir.file("bad.cfg")));
        CHECK(!errors.empty());
        CHECK(errors[0].find("undefined shard 'later'") != std::string::npos);
    }
    SUBCASE("duplicate output name") {
        std::string text = slurp(dir.file("pipeline.cfg"));
        write_file(dir.file("bad.cfg"),
                   {text + "\n[stage dup]\nop = concat\nin = genuine\nout = final\n"});
        std::vector<std::string> errors = validate(parse_pipeline_config(dir.file("bad.cfg")));
        REQUIRE(errors.size() == 1);
        CHECK(errors[0].find("already defined") != std::string::npos);
    }
}

TEST_CASE("empty stage list runs to an empty manifest") {
    TempDir dir;
    write_file(dir.file("empty.cfg"), {"seed = 1", "outdir = out"});
    PipelineConfig config = parse_pipeline_config(dir.file("empty.cfg"));
    CHECK(validate(config).empty());
    RunManifest manifest = run(config, {});
    CHECK(manifest.stages.empty());
}

TEST_CASE("run on an invalid config throws ConfigError") {
    TempDir dir;
    write_file(dir.file("bad.cfg"), {"seed = 1", "[stage s]", "op = clean", "in = nowhere", "out = x"});
    PipelineConfig config = parse_pipeline_config(dir.file("bad.cfg"));
    try {
        run(config, {});
        FAIL("expected ConfigError");
    } catch (const Error& e) {
        CHECK(e.code() == errc::config_error);
    }
}

TEST_CASE("a failing stage removes its partial outputs") {
    TempDir dir;
    write_file(dir.file("a.src"), {"x", "y"});
    write_file(dir.file("a.tgt"), {"1", "2"});
    write_file(dir.file("short.txt"), {"only one line"});
    write_file(dir.file("fail.cfg"), {
                                         "seed = 1",
                                         "outdir = out",
                                         "[input a]",
                                         "kind = parallel",
                                         "src = a.src",
                                         "tgt = a.tgt",
                                         "[input b]",
                                         "kind = parallel",
                                         "src = a.src",
                                         "tgt = short.txt", // line count mismatch surfaces at load
                                         "[stage c]",
                                         "op = concat",
                                         "in = a, b",
                                         "out = merged",
                                     });
    PipelineConfig config = parse_pipeline_config(dir.file("fail.cfg"));
    CHECK(validate(config).empty());
    try {
        run(config, {});
        FAIL("expected StageError");
    } catch (const Error& e) {
        CHECK(e.code() == errc::stage_error);
    }
    CHECK_FALSE(std::filesystem::exists(dir.file("out/merged.src")));
    CHECK_FALSE(std::filesystem::exists(dir.file("out/manifest.json")));
}

TEST_CASE("rerunning an unchanged config is byte-identical, including the manifest modulo wall times") {
    TempDir dir;
    PipelineConfig config = parse_pipeline_config(write_toy_config(dir));
    run(config, {});
    std::string src1 = slurp(dir.file("out/final.src"));
    std::string tgt1 = slurp(dir.file("out/final.tgt"));
    nlohmann::json m1 = nlohmann::json::parse(slurp(dir.file("out/manifest.json")));
    run(config, {});
    std::string src2 = slurp(dir.file("out/final.src"));
    nlohmann::json m2 = nlohmann::json::parse(slurp(dir.file("out/manifest.json")));
    CHECK(src1 == src2);
    CHECK(tgt1 == slurp(dir.file("out/final.tgt")));
    for (auto& s : m1["stages"]) s.erase("wall_ms");
    for (auto& s : m2["stages"]) s.erase("wall_ms");
    CHECK(m1 == m2);
}

TEST_CASE("bpe stages: learn, apply with vocabulary, and sample") {
    TempDir dir;
    std::vector<std::string> src;
    std::vector<std::string> tgt;
    for (int i = 0; i < 40; ++i) {
        src.push_back("hug hugs pug");
        tgt.push_back("hug hug mug");
    }
    write_file(dir.file("c.src"), src);
    write_file(dir.file("c.tgt"), tgt);
    write_file(dir.file("bpe.cfg"), {
                                        "seed = 9",
                                        "outdir = out",
                                        "[input c]",
                                        "kind = parallel",
                                        "src = c.src",
                                        "tgt = c.tgt",
                                        "[stage sample10]",
                                        "op = sample",
                                        "in = c",
                                        "n = 10",
                                        "out = sampled",
                                        "[stage learn]",
                                        "op = bpe-learn",
                                        "in = c",
                                        "merges = 5",
                                        "joint = true",
                                        "out = model.bpe",
                                        "[stage apply]",
                                        "op = bpe-apply",
                                        "in = c",
                                        "model = model.bpe",
                                        "out = segmented",
                                        "emit_vocab = vocab.tsv",
                                    });
    PipelineConfig config = parse_pipeline_config(dir.file("bpe.cfg"));
    REQUIRE(validate(config).empty());
    RunManifest manifest = run(config, {});
    CHECK(manifest.stages.size() == 3);
    CHECK(std::filesystem::exists(dir.file("out/model.bpe")));
    CHECK(std::filesystem::exists(dir.file("out/vocab.tsv")));
    CHECK(read_lines(dir.file("out/sampled.txt")).size() == 10);
    CHECK(read_lines(dir.file("out/segmented.src")).size() == 40);
}

TEST_CASE("xent-filter stage with the fallback scorer") {
    TempDir dir;
    std::vector<std::string> src;
    std::vector<std::string> tgt;
    for (int i = 0; i < 20; ++i) {
        src.push_back("ordinary source " + std::to_string(i % 2));
        tgt.push_back("běžná věta " + std::to_string(i % 2));
    }
    src.push_back("zzz qqq vvv www uuu");
    tgt.push_back("šum šum");
    write_file(dir.file("p.src"), src);
    write_file(dir.file("p.tgt"), tgt);
    write_file(dir.file("x.cfg"), {
                                      "seed = 3",
                                      "outdir = out",
                                      "[input p]",
                                      "kind = parallel",
                                      "src = p.src",
                                      "tgt = p.tgt",
                                      "[stage filter]",
                                      "op = xent-filter",
                                      "in = p",
                                      "lm_order = 2",
                                      "lm_side = src",
                                      "mode = percentile:0.05",
                                      "out = filtered",
                                  });
    PipelineConfig config = parse_pipeline_config(dir.file("x.cfg"));
    REQUIRE(validate(config).empty());
    RunManifest manifest = run(config, {});
    // floor(0.05 * 21) = 1 pair removed, and it is the junk one
    CHECK(manifest.stages[0].output_lines[0].second == 20);
    CHECK(slurp(dir.file("out/filtered.src")).find("zzz") == std::string::npos);
}

TEST_CASE("index and select stages connect through artifacts") {
    TempDir dir;
    write_file(dir.file("pool.src"), {"alpha beta gamma", "delta epsilon zeta", "alpha beta delta"});
    write_file(dir.file("pool.tgt"), {"1", "2", "3"});
    write_file(dir.file("test.txt"), {"alpha beta"});
    write_file(dir.file("sel.cfg"), {
                                        "seed = 4",
                                        "outdir = out",
                                        "[input pool]",
                                        "kind = parallel",
                                        "src = pool.src",
                                        "tgt = pool.tgt",
                                        "[input testset]",
                                        "kind = mono",
                                        "path = test.txt",
                                        "[stage idx]",
                                        "op = index",
                                        "in = pool",
                                        "nmin = 2",
                                        "nmax = 2",
                                        "out = pool.ngidx",
                                        "[stage pick]",
                                        "op = select",
                                        "test = testset",
                                        "pool = pool",
                                        "indices = pool.ngidx",
                                        "threshold = 50",
                                        "nmin = 2",
                                        "nmax = 2",
                                        "out = selected",
                                        "ranking = ranking.tsv",
                                    });
    PipelineConfig config = parse_pipeline_config(dir.file("sel.cfg"));
    REQUIRE(validate(config).empty());
    run(config, {});
    // "alpha beta" occurs twice (rare), so sentences 0 and 2 are selected
    CHECK(read_lines(dir.file("out/selected.src")) ==
          std::vector<std::string>{"alpha beta gamma", "alpha beta delta"});
    CHECK(read_lines(dir.file("out/ranking.tsv")) ==
          std::vector<std::string>{"pool\t0\t1", "pool\t2\t1"});
}

TEST_CASE("blend stage honors the 75/25 arithmetic") {
    TempDir dir;
    std::vector<std::string> s_src;
    std::vector<std::string> s_tgt;
    for (int i = 0; i < 90; ++i) {
        s_src.push_back("s" + std::to_string(i));
        s_tgt.push_back("S" + std::to_string(i));
    }
    write_file(dir.file("synth.src"), s_src);
    write_file(dir.file("synth.tgt"), s_tgt);
    write_file(dir.file("gen.src"), {"g0", "g1", "g2", "g3", "g4", "g5", "g6", "g7", "g8", "g9"});
    write_file(dir.file("gen.tgt"), {"G0", "G1", "G2", "G3", "G4", "G5", "G6", "G7", "G8", "G9"});
    write_file(dir.file("b.cfg"), {
                                      "seed = 6",
                                      "outdir = out",
                                      "[input synth]",
                                      "kind = parallel",
                                      "src = synth.src",
                                      "tgt = synth.tgt",
                                      "[input gen]",
                                      "kind = parallel",
                                      "src = gen.src",
                                      "tgt = gen.tgt",
                                      "[stage mix]",
                                      "op = blend",
                                      "component = synth 0.75",
                                      "component = gen 0.25",
                                      "epoch_size = 40",
                                      "out = blended",
                                  });
    PipelineConfig config = parse_pipeline_config(dir.file("b.cfg"));
    REQUIRE(validate(config).empty());
    run(config, {});
    std::uint64_t synth_count = 0;
    for (const std::string& line : read_lines(dir.file("out/blended.src"))) {
        if (line[0] == 's') ++synth_count;
    }
    CHECK(synth_count == 30);
}

TEST_CASE("zh-seg and translit stages") {
    TempDir dir;
    write_file(dir.file("zh.src"), {"我喜欢NASA的工作"});
    write_file(dir.file("zh.tgt"), {"I like working at NASA"});
    write_file(dir.file("hi.txt"), {"का 123"});
    write_file(dir.file("t.cfg"), {
                                      "seed = 2",
                                      "outdir = out",
                                      "[input zh]",
                                      "kind = parallel",
                                      "src = zh.src",
                                      "tgt = zh.tgt",
                                      "[input hi]",
                                      "kind = mono",
                                      "path = hi.txt",
                                      "[stage seg]",
                                      "op = zh-seg",
                                      "in = zh",
                                      "mode = char",
                                      "side = src",
                                      "out = zh_char",
                                      "[stage hg]",
                                      "op = translit",
                                      "in = hi",
                                      "out = hi2gu",
                                  });
    PipelineConfig config = parse_pipeline_config(dir.file("t.cfg"));
    REQUIRE(validate(config).empty());
    run(config, {});
    CHECK(read_lines(dir.file("out/zh_char.src")) == std::vector<std::string>{"我 喜 欢 NASA 的 工 作"});
    CHECK(read_lines(dir.file("out/zh_char.tgt")) == std::vector<std::string>{"I like working at NASA"});
    CHECK(read_lines(dir.file("out/hi2gu.txt")) == std::vector<std::string>{"કા 123"});
}
