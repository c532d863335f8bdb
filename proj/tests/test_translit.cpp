#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "mtforge/translit.hpp"
#include "mtforge/unicode.hpp"
#include "testutil.hpp"

using namespace mtforge;
using namespace mtforge::test;

namespace {

std::string u8of(std::initializer_list<char32_t> cps) {
    std::string out;
    for (char32_t cp : cps) append_utf8(out, cp);
    return out;
}

} // namespace

TEST_CASE("chart-checked codepoint pairs") {
    TransliterationTable table = build_table();
    // 21 pairs read off the Devanagari/Gujarati code charts
    const std::pair<char32_t, char32_t> pairs[] = {
        {0x0905, 0x0A85}, {0x0906, 0x0A86}, {0x0915, 0x0A95}, {0x0916, 0x0A96}, {0x0917, 0x0A97},
        {0x091C, 0x0A9C}, {0x0924, 0x0AA4}, {0x0928, 0x0AA8}, {0x092A, 0x0AAA}, {0x092E, 0x0AAE},
        {0x092F, 0x0AAF}, {0x0930, 0x0AB0}, {0x0932, 0x0AB2}, {0x0935, 0x0AB5}, {0x0938, 0x0AB8},
        {0x0939, 0x0AB9}, {0x093E, 0x0ABE}, {0x0940, 0x0AC0}, {0x094D, 0x0ACD}, {0x0950, 0x0AD0},
        {0x0966, 0x0AE6},
    };
    for (const auto& [from, to] : pairs) {
        INFO("U+", std::hex, static_cast<unsigned>(from));
        CHECK(table.maps(from));
        CHECK(table.apply(from) == to);
    }
}

TEST_CASE("danda and double danda are copied through") {
    TransliterationTable table = build_table();
    CHECK_FALSE(table.maps(0x0964)); // the Gujarati block has no danda slot
    CHECK_FALSE(table.maps(0x0965));
    CHECK(table.apply(0x0964) == 0x0964);
    // same for the Devanagari letters with unassigned Gujarati slots
    CHECK_FALSE(table.maps(0x0929));
    CHECK_FALSE(table.maps(0x0931));
}

TEST_CASE("table is injective and targets stay inside the Gujarati block") {
    TransliterationTable table = build_table();
    std::set<char32_t> targets;
    for (const auto& [from, to] : table.entries()) {
        CHECK(to >= 0x0A80);
        CHECK(to <= 0x0AFF);
        CHECK(targets.insert(to).second);
        CHECK(from + 0x180 == to);
    }
    CHECK(table.entries().size() == 91);
}

TEST_CASE("transliterate substitutes per codepoint and copies the rest") {
    TransliterationTable table = build_table();
    CHECK(transliterate("plain latin text 123!", table) == "plain latin text 123!");
    CHECK(transliterate(u8of({0x0915}) + " 123", table) == u8of({0x0A95}) + " 123");
    // danda copies, letters map
    CHECK(transliterate(u8of({0x0915, 0x0964}), table) == u8of({0x0A95, 0x0964}));
}

TEST_CASE("transliterate is idempotent and Gujarati text is a fixed point") {
    TransliterationTable table = build_table();
    std::string gujarati = u8of({0x0A95, 0x0ABE, 0x0AB5}) + " text";
    CHECK(transliterate(gujarati, table) == gujarati);
    std::string hindi = u8of({0x0915, 0x093E, 0x0935, 0x0964}) + " word 12";
    std::string once = transliterate(hindi, table);
    CHECK(transliterate(once, table) == once);
}

TEST_CASE("transliterate preserves the codepoint count") {
    TransliterationTable table = build_table();
    for (const std::string& s : {std::string("abc"), u8of({0x0915, 0x0916, 0x0917, 0x20, 0x31}),
                                 u8of({0x0964, 0x0965, 0x0950})}) {
        CHECK(decode_codepoints(transliterate(s, table)).size() == decode_codepoints(s).size());
    }
}

TEST_CASE("reverse table composed with forward is the identity on mapped codepoints") {
    TransliterationTable table = build_table();
    for (const auto& [from, to] : table.entries()) {
        // reverse = subtract the block offset
        CHECK(to - 0x180 == from);
    }
}

TEST_CASE("table file round trip and the shipped data file audit") {
    TempDir dir;
    TransliterationTable table = build_table();
    table.save(dir.file("t.map"));
    TransliterationTable loaded = TransliterationTable::load(dir.file("t.map"));
    CHECK(loaded.entries() == table.entries());

    // the versioned data file must equal the generated mapping
    TransliterationTable shipped = TransliterationTable::load(std::filesystem::path(MTFORGE_SOURCE_DIR) / "data" / "hi2gu.map");
    CHECK(shipped.entries() == table.entries());
}

TEST_CASE("table loader rejects bad targets") {
    TempDir dir;
    write_file(dir.file("bad.map"), {"U+0915 U+0061"}); // 'a' is not Gujarati
    CHECK_THROWS_AS(TransliterationTable::load(dir.file("bad.map")), Error);
    write_file(dir.file("dup.map"), {"U+0915 U+0A95", "U+0916 U+0A95"});
    CHECK_THROWS_AS(TransliterationTable::load(dir.file("dup.map")), Error);
    write_file(dir.file("junk.map"), {"0915 0A95"});
    CHECK_THROWS_AS(TransliterationTable::load(dir.file("junk.map")), Error);
}

TEST_CASE("overlap token classification") {
    CHECK(classify_overlap_token("...") == TokenClass::punctuation);
    CHECK(classify_overlap_token("word") == TokenClass::latin);
    CHECK(classify_overlap_token("NASA123") == TokenClass::latin);
    CHECK(classify_overlap_token("123") == TokenClass::candidate); // digits alone are not a word
    CHECK(classify_overlap_token(u8of({0x0A95, 0x0ABE})) == TokenClass::candidate);
    CHECK(classify_overlap_token(u8of({0x0964})) == TokenClass::punctuation); // danda is Po
}

TEST_CASE("overlap stats on identical and disjoint corpora") {
    TempDir dir;
    std::string guj1 = u8of({0x0A95, 0x0ABE}) + " " + u8of({0x0AB5});
    std::string guj2 = u8of({0x0A86, 0x0AA4});
    write_file(dir.file("hg.txt"), {guj1, guj2});
    write_file(dir.file("gu.txt"), {guj1, guj2});
    OverlapStats same = overlap_stats(dir.file("hg.txt"), dir.file("gu.txt"));
    CHECK(same.match_fraction() == doctest::Approx(1.0));
    CHECK(same.total_tokens == 3);

    write_file(dir.file("other.txt"), {u8of({0x0A9C}), u8of({0x0AA8})});
    OverlapStats none = overlap_stats(dir.file("hg.txt"), dir.file("other.txt"));
    CHECK(none.match_fraction() == doctest::Approx(0.0));
}

TEST_CASE("overlap stats toy fixture: one match, one excluded Latin token") {
    TempDir dir;
    std::string ka = u8of({0x0A95});
    std::string kha = u8of({0x0A96});
    std::string ga = u8of({0x0A97});
    std::string gha = u8of({0x0A98});
    // 4 transliterated tokens: one Latin (excluded), three candidates of which
    // exactly one occurs in the reference sentence -> 1/3
    write_file(dir.file("hg.txt"), {ka + " word " + kha + " " + ga});
    write_file(dir.file("gu.txt"), {ka + " " + gha + " " + gha});
    OverlapStats stats = overlap_stats(dir.file("hg.txt"), dir.file("gu.txt"));
    CHECK(stats.total_tokens == 3);
    CHECK(stats.exact_matches == 1);
    CHECK(stats.excluded_latin == 1);
    CHECK(stats.match_fraction() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("overlap bag semantics consume reference tokens") {
    TempDir dir;
    std::string ka = u8of({0x0A95});
    write_file(dir.file("hg.txt"), {ka + " " + ka + " " + ka});
    write_file(dir.file("gu.txt"), {ka + " " + ka});
    OverlapStats stats = overlap_stats(dir.file("hg.txt"), dir.file("gu.txt"));
    CHECK(stats.total_tokens == 3);
    CHECK(stats.exact_matches == 2); // only two reference copies to consume
}

TEST_CASE("overlap stats require aligned line counts") {
    TempDir dir;
    write_file(dir.file("hg.txt"), {"a b", "c"});
    write_file(dir.file("gu.txt"), {"a b"});
    try {
        overlap_stats(dir.file("hg.txt"), dir.file("gu.txt"));
        FAIL("expected LineCountMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == errc::line_count_mismatch);
    }
}

TEST_CASE("file transliteration matches the per-line function") {
    TempDir dir;
    TransliterationTable table = build_table();
    std::string hindi = u8of({0x0915, 0x093E}) + " ok";
    write_file(dir.file("in.txt"), {hindi, "latin"});
    transliterate_file(table, dir.file("in.txt"), dir.file("out.txt"), 2);
    CHECK(read_lines(dir.file("out.txt")) ==
          std::vector<std::string>{transliterate(hindi, table), "latin"});
}
