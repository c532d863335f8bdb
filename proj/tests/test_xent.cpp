#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mtforge/rng.hpp"
#include "mtforge/xent.hpp"
#include "testutil.hpp"

using namespace mtforge;
using namespace mtforge::test;

namespace {

CorpusShard three_pair_shard(const TempDir& dir) {
    return make_parallel(dir, "three", {{"a", "1"}, {"b", "2"}, {"c", "3"}});
}

ScoreRecord rec(std::uint64_t id, double fwd, std::optional<double> bwd = std::nullopt) {
    ScoreRecord r;
    r.pair_id = id;
    r.h_fwd = fwd;
    r.h_bwd = bwd;
    return r;
}

} // namespace

TEST_CASE("ingest accepts a complete two-column file") {
    TempDir dir;
    CorpusShard shard = three_pair_shard(dir);
    write_file(dir.file("s.tsv"), {"0\t1.5", "1\t2.0", "2\t0.25"});
    std::vector<ScoreRecord> records = ingest_scores(dir.file("s.tsv"), shard);
    REQUIRE(records.size() == 3);
    CHECK(records[0].h_fwd == doctest::Approx(1.5));
    CHECK_FALSE(records[0].h_bwd.has_value());
    write_file(dir.file("d.tsv"), {"0\t1.5\t1.0", "1\t2.0\t2.5", "2\t0.25\t0.5"});
    std::vector<ScoreRecord> dual = ingest_scores(dir.file("d.tsv"), shard);
    CHECK(dual[2].h_bwd == doctest::Approx(0.5));
}

TEST_CASE("ingest error paths") {
    TempDir dir;
    CorpusShard shard = three_pair_shard(dir);
    auto expect = [&](const std::vector<std::string>& lines, errc code) {
        write_file(dir.file("x.tsv"), lines);
        try {
            ingest_scores(dir.file("x.tsv"), shard);
            FAIL("expected error ", errc_name(code));
        } catch (const Error& e) {
            CHECK(e.code() == code);
        }
    };
    expect({"0\t1", "1\t1", "7\t1"}, errc::unknown_pair_id);
    expect({"0\t1", "0\t1", "1\t1"}, errc::duplicate_id);
    expect({"0\t1", "1\tNaN", "2\t1"}, errc::non_finite_score);
    expect({"0\t1", "1\t-3", "2\t1"}, errc::non_finite_score);
    expect({"0\t1", "junk", "2\t1"}, errc::malformed_line);
    expect({"0\t1\t2\t3", "1\t1", "2\t1"}, errc::malformed_line);
    expect({"0\t1", "1\t1"}, errc::missing_score);
}

TEST_CASE("dual score formula") {
    CHECK(dual_score(rec(0, 2.0, 2.0)) == doctest::Approx(2.0));
    CHECK(dual_score(rec(0, 1.0, 3.0)) == doctest::Approx(4.0));
    CHECK(dual_score(rec(0, 0.0, 0.0)) == doctest::Approx(0.0));
    CHECK_THROWS_AS(dual_score(rec(0, 1.0)), Error);
}

TEST_CASE("dual score is symmetric and collapses on agreement") {
    Rng rng(64);
    for (int i = 0; i < 100; ++i) {
        double a = static_cast<double>(rng.below(1000)) / 100.0;
        double b = static_cast<double>(rng.below(1000)) / 100.0;
        CHECK(dual_score(rec(0, a, b)) == doctest::Approx(dual_score(rec(0, b, a))));
        CHECK(dual_score(rec(0, a, a)) == doctest::Approx(a));
    }
}

TEST_CASE("percentile cut removes exactly the floor(p*N) worst records") {
    std::vector<ScoreRecord> records;
    for (int i = 0; i < 20; ++i) records.push_back(rec(i, i + 1.0));
    FilterCut cut;
    cut.mode = FilterCut::Mode::percentile_worst;
    cut.value = 0.05;
    CutResult result = apply_cut(records, cut);
    REQUIRE(result.rejected.size() == 1);
    CHECK(result.rejected[0] == 19); // the score-20 record
    CHECK(result.kept.size() == 19);
}

TEST_CASE("absolute cut at the maximum removes nothing") {
    std::vector<ScoreRecord> records;
    for (int i = 0; i < 10; ++i) records.push_back(rec(i, i * 0.5));
    FilterCut cut;
    cut.mode = FilterCut::Mode::absolute_threshold;
    cut.value = 4.5;
    CutResult result = apply_cut(records, cut);
    CHECK(result.rejected.empty());
    cut.value = 4.4;
    CHECK(apply_cut(records, cut).rejected.size() == 1);
}

TEST_CASE("a tie spanning the percentile boundary keeps the lower pair ids") {
    // 93 clean records, then a 7-way tie at the top; p=0.05 over N=100 removes 5
    std::vector<ScoreRecord> records;
    for (int i = 0; i < 93; ++i) records.push_back(rec(i, 1.0));
    for (int i = 93; i < 100; ++i) records.push_back(rec(i, 9.0));
    FilterCut cut;
    cut.mode = FilterCut::Mode::percentile_worst;
    cut.value = 0.05;
    CutResult result = apply_cut(records, cut);
    REQUIRE(result.rejected.size() == 5);
    CHECK(result.rejected == std::vector<std::uint64_t>{95, 96, 97, 98, 99});
    CHECK(result.kept.size() == 95);
    // the tied records with the lowest ids survive
    CHECK(std::find(result.kept.begin(), result.kept.end(), 93) != result.kept.end());
    CHECK(std::find(result.kept.begin(), result.kept.end(), 94) != result.kept.end());
}

TEST_CASE("percentile sizes on pinned corpus sizes") {
    for (auto [n, expect] : std::vector<std::pair<int, std::size_t>>{{20, 1}, {100, 5}, {101, 5}}) {
        std::vector<ScoreRecord> records;
        for (int i = 0; i < n; ++i) records.push_back(rec(i, static_cast<double>(i)));
        FilterCut cut;
        cut.mode = FilterCut::Mode::percentile_worst;
        cut.value = 0.05;
        CHECK(apply_cut(records, cut).rejected.size() == expect);
    }
}

TEST_CASE("survivors come back in original corpus order") {
    std::vector<ScoreRecord> records;
    for (int i = 0; i < 50; ++i) records.push_back(rec(i, (i * 7919) % 13 + 0.1 * i));
    FilterCut cut;
    cut.mode = FilterCut::Mode::percentile_worst;
    cut.value = 0.2;
    CutResult result = apply_cut(records, cut);
    CHECK(std::is_sorted(result.kept.begin(), result.kept.end()));
    CHECK(result.kept.size() + result.rejected.size() == records.size());
}

TEST_CASE("dual direction uses the combined score") {
    std::vector<ScoreRecord> records = {rec(0, 1.0, 1.0), rec(1, 2.0, 0.1), rec(2, 0.5, 0.5)};
    // dual scores: 1.0, 2.95, 0.5
    FilterCut cut;
    cut.mode = FilterCut::Mode::absolute_threshold;
    cut.value = 1.5;
    cut.direction = FilterCut::Direction::dual;
    CutResult result = apply_cut(records, cut);
    CHECK(result.rejected == std::vector<std::uint64_t>{1});
}

TEST_CASE("fallback unigram entropy matches hand arithmetic") {
    TempDir dir;
    CorpusShard shard = make_mono(dir, "aaa", {"a a a"});
    std::vector<ScoreRecord> records = fallback_lm_score(shard, Side::src, 1);
    REQUIRE(records.size() == 1);
    // p(a) = (3+1)/(3+1+1) = 4/5; per-token entropy = -ln(0.8)
    CHECK(records[0].h_fwd == doctest::Approx(-std::log(0.8)));
}

TEST_CASE("frequent-token sentences score better than rare-token ones") {
    TempDir dir;
    std::vector<std::string> lines(20, "x y z");
    lines.push_back("x y z");  // frequent tokens, length 3
    lines.push_back("q w e");  // tokens seen once each, length 3
    CorpusShard shard = make_mono(dir, "lm", lines);
    for (int order : {1, 2, 3}) {
        std::vector<ScoreRecord> records = fallback_lm_score(shard, Side::src, order);
        CHECK(records[20].h_fwd < records[21].h_fwd);
    }
}

TEST_CASE("identical sentences get identical scores") {
    TempDir dir;
    CorpusShard shard = make_mono(dir, "same", {"a b c", "d e", "a b c"});
    std::vector<ScoreRecord> records = fallback_lm_score(shard, Side::src, 2);
    CHECK(records[0].h_fwd == records[2].h_fwd);
}

TEST_CASE("fallback scorer argument validation") {
    TempDir dir;
    CorpusShard shard = make_mono(dir, "v", {"a"});
    CHECK_THROWS_AS(fallback_lm_score(shard, Side::src, 0), Error);
    CHECK_THROWS_AS(fallback_lm_score(shard, Side::src, 6), Error);
    CHECK_THROWS_AS(fallback_lm_score(shard, Side::tgt, 2), Error);
    CorpusShard empty = make_mono(dir, "e", {});
    try {
        fallback_lm_score(empty, Side::src, 1);
        FAIL("expected EmptyShard");
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_shard);
    }
}

TEST_CASE("copy_selected keeps exactly the requested pairs in order") {
    TempDir dir;
    CorpusShard shard = make_parallel(dir, "p", {{"a", "1"}, {"b", "2"}, {"c", "3"}, {"d", "4"}});
    ShardWriter writer({dir.file("k.src"), dir.file("k.tgt")}, ShardKind::parallel);
    copy_selected(shard, {0, 2, 3}, writer);
    CHECK(slurp(dir.file("k.src")) == "a\nc\nd\n");
    CHECK(slurp(dir.file("k.tgt")) == "1\n3\n4\n");
}
