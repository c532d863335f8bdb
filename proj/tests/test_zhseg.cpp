#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "mtforge/rng.hpp"
#include "mtforge/unicode.hpp"
#include "mtforge/zhseg.hpp"
#include "testutil.hpp"

using namespace mtforge;
using namespace mtforge::test;

namespace {

std::string random_mixed(Rng& rng) {
    static const std::vector<std::string> pool = {"我", "喜", "欢", "你", "好", "世", "界", "N", "A", "S",
                                                  "x", "1", "9", ",", ".", "，", "。", "é"};
    std::string out;
    std::size_t len = rng.below(30);
    for (std::size_t i = 0; i < len; ++i) {
        std::uint64_t roll = rng.below(pool.size() + 3);
        if (roll >= pool.size()) {
            out += (roll == pool.size() ? " " : roll == pool.size() + 1 ? "\t" : "  ");
        } else {
            out += pool[roll];
        }
    }
    return out;
}

std::map<char32_t, int> non_space_multiset(std::string_view s) {
    std::map<char32_t, int> out;
    for (char32_t cp : decode_codepoints(s)) {
        if (cp != U' ' && cp != U'\t') ++out[cp];
    }
    return out;
}

} // namespace

TEST_CASE("desegment removes whitespace adjacent to Chinese characters") {
    CHECK(zh_desegment("我 喜 欢 NASA") == "我喜欢NASA");
    CHECK(zh_desegment("NASA is great") == "NASA is great");
    // ASCII comma is not Chinese, so the space before "world" survives
    CHECK(zh_desegment("你 好 , world") == "你好, world");
}

TEST_CASE("desegment treats full-width punctuation as Chinese") {
    CHECK(zh_desegment("你 。 好") == "你。好");
    CHECK(zh_desegment("word 。 word") == "word。word");
}

TEST_CASE("desegment edge whitespace") {
    CHECK(zh_desegment(" 你好") == "你好");
    CHECK(zh_desegment("你好 ") == "你好");
    CHECK(zh_desegment(" latin ") == " latin ");
}

TEST_CASE("char segmentation splits Chinese but keeps other runs together") {
    CHECK(zh_char_segment("我喜欢NASA的工作") == "我 喜 欢 NASA 的 工 作");
    CHECK(zh_char_segment("hello world 123") == "hello world 123");
    CHECK(zh_char_segment("你好") == "你 好");
    // full-width punctuation stays attached to its non-Chinese neighbours
    CHECK(zh_char_segment("。。") == "。。");
}

TEST_CASE("char segmentation is idempotent on random mixed strings") {
    Rng rng(31337);
    for (int i = 0; i < 1000; ++i) {
        std::string s = random_mixed(rng);
        std::string once = zh_char_segment(s);
        CHECK(zh_char_segment(once) == once);
    }
}

TEST_CASE("desegment after char segmentation equals plain desegment") {
    Rng rng(777);
    for (int i = 0; i < 1000; ++i) {
        std::string s = random_mixed(rng);
        CHECK(zh_desegment(zh_char_segment(s)) == zh_desegment(s));
    }
}

TEST_CASE("both transforms preserve the non-whitespace character multiset") {
    Rng rng(2024);
    for (int i = 0; i < 500; ++i) {
        std::string s = random_mixed(rng);
        CHECK(non_space_multiset(zh_char_segment(s)) == non_space_multiset(s));
        CHECK(non_space_multiset(zh_desegment(s)) == non_space_multiset(s));
    }
}

TEST_CASE("char segmentation never decreases the token count") {
    Rng rng(5150);
    for (int i = 0; i < 500; ++i) {
        std::string s = random_mixed(rng);
        CHECK(token_count(zh_char_segment(s)) >= token_count(s));
    }
}

TEST_CASE("file transform matches the per-line function") {
    TempDir dir;
    write_file(dir.file("in.txt"), {"我喜欢NASA的工作", "hello", "你 好"});
    zh_transform_file(dir.file("in.txt"), dir.file("out.txt"), true, chinese_ranges(), 2);
    CHECK(read_lines(dir.file("out.txt")) ==
          std::vector<std::string>{"我 喜 欢 NASA 的 工 作", "hello", "你 好"});
    zh_transform_file(dir.file("in.txt"), dir.file("out2.txt"), false, chinese_deseg_ranges(), 1);
    CHECK(read_lines(dir.file("out2.txt")) == std::vector<std::string>{"我喜欢NASA的工作", "hello", "你好"});
}

TEST_CASE("script range parsing round trip") {
    ScriptRangeSet ranges = ScriptRangeSet::parse("4E00-9FFF,3400-4DBF,3007");
    CHECK(ranges.contains(0x4E2D));
    CHECK(ranges.contains(0x3007));
    CHECK_FALSE(ranges.contains(0x3006));
    CHECK(ScriptRangeSet::parse(ranges.to_string()).to_string() == ranges.to_string());
    CHECK_THROWS_AS(ScriptRangeSet::parse(""), Error);
    CHECK_THROWS_AS(ScriptRangeSet::parse("xyz"), Error);
}
