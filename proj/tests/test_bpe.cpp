#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>

#include "mtforge/bpe.hpp"
#include "mtforge/corpus.hpp"
#include "mtforge/rng.hpp"
#include "mtforge/unicode.hpp"
#include "testutil.hpp"

using namespace mtforge;
using namespace mtforge::test;

namespace {

// Independent reference learner: recounts every adjacent pair from scratch at
// each step. Deliberately shares no code with bpe_learn.
std::vector<std::pair<std::string, std::string>> oracle_learn(const WordCounts& counts, std::uint64_t num_merges) {
    std::vector<std::pair<std::vector<std::string>, std::uint64_t>> words;
    for (const auto& [word, freq] : counts) {
        std::vector<std::string> symbols;
        std::size_t pos = 0;
        while (pos < word.size()) {
            std::size_t start = pos;
            decode_utf8(word, pos);
            symbols.push_back(word.substr(start, pos - start));
        }
        words.emplace_back(std::move(symbols), freq);
    }
    std::vector<std::pair<std::string, std::string>> merges;
    for (std::uint64_t step = 0; step < num_merges; ++step) {
        std::map<std::pair<std::string, std::string>, std::uint64_t> pair_counts;
        for (const auto& [symbols, freq] : words) {
            for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
                pair_counts[{symbols[i], symbols[i + 1]}] += freq;
            }
        }
        std::pair<std::string, std::string> best;
        std::uint64_t best_count = 0;
        for (const auto& [pair, count] : pair_counts) { // std::map: lexicographic order
            if (count > best_count) {
                best = pair;
                best_count = count;
            }
        }
        if (best_count < 2) break;
        merges.push_back(best);
        for (auto& [symbols, freq] : words) {
            std::vector<std::string> next;
            std::size_t i = 0;
            while (i < symbols.size()) {
                if (i + 1 < symbols.size() && symbols[i] == best.first && symbols[i + 1] == best.second) {
                    next.push_back(symbols[i] + symbols[i + 1]);
                    i += 2;
                } else {
                    next.push_back(symbols[i]);
                    ++i;
                }
            }
            symbols = std::move(next);
        }
    }
    return merges;
}

std::string random_marker_free_string(Rng& rng, bool allow_ws = true) {
    static const std::vector<std::string> pool = {
        "a", "b", "c", "x", "y", "z", "1", "9", ".", ",", "!", "é", "ř", "š", "好", "界", "क", "ક", "-",
    };
    std::size_t len = rng.below(25);
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        std::uint64_t roll = rng.below(allow_ws ? 22 : 19);
        if (roll >= pool.size()) {
            out += (roll == 19 ? " " : roll == 20 ? "\t" : "  ");
        } else {
            out += pool[roll];
        }
    }
    return out;
}

WordCounts random_word_counts(Rng& rng) {
    static const char alphabet[] = {'a', 'b', 'c', 'd'};
    WordCounts counts;
    std::size_t distinct = 1 + rng.below(50);
    for (std::size_t w = 0; w < distinct; ++w) {
        std::size_t len = 1 + rng.below(8);
        std::string word;
        for (std::size_t i = 0; i < len; ++i) word.push_back(alphabet[rng.below(4)]);
        counts[word] += 1 + rng.below(20);
    }
    return counts;
}

} // namespace

TEST_CASE("first merge on the hug/pug/hugs counts is (u,g)") {
    WordCounts counts = {{"hug", 2}, {"pug", 1}, {"hugs", 1}};
    BpeModel model = bpe_learn(counts, 1);
    REQUIRE(model.merges.size() == 1);
    CHECK(model.merges[0] == std::pair<std::string, std::string>{"u", "g"});
}

TEST_CASE("zero merges yields character segmentation") {
    BpeModel model = bpe_learn({{"hello", 3}}, 0);
    CHECK(model.merges.empty());
    CHECK(model.num_merges_requested == 0);
    BpeApplier applier(model);
    CHECK(applier.apply_line("hello") == "h@@ e@@ l@@ l@@ o");
}

TEST_CASE("single candidate pair gets merged") {
    BpeModel model = bpe_learn({{"aa", 3}}, 1);
    REQUIRE(model.merges.size() == 1);
    CHECK(model.merges[0] == std::pair<std::string, std::string>{"a", "a"});
}

TEST_CASE("learning stops when no pair occurs twice") {
    BpeModel model = bpe_learn({{"abc", 1}}, 10);
    CHECK(model.merges.empty());
}

TEST_CASE("learning an empty corpus is an error") {
    try {
        bpe_learn({}, 5);
        FAIL("expected EmptyCorpus");
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_corpus);
    }
}

TEST_CASE("apply follows the end-marker convention") {
    WordCounts counts = {{"hug", 2}, {"pug", 1}, {"hugs", 1}};
    BpeModel model = bpe_learn(counts, 1);
    BpeApplier applier(model);
    CHECK(applier.apply_line("hug") == "h@@ ug");
    CHECK(applier.apply_line("a") == "a");       // single-symbol token unchanged
    CHECK(applier.apply_line("hug hug") == "h@@ ug h@@ ug");
}

TEST_CASE("desegment inverts the marker convention") {
    CHECK(bpe_desegment("h@@ ug") == "hug");
    CHECK(bpe_desegment("hello world") == "hello world");
    CHECK(bpe_desegment("a@@ b@@ c x@@ y") == "abc xy");
}

TEST_CASE("apply then desegment is the identity on 1000 random marker-free strings") {
    WordCounts counts = {{"hug", 2}, {"pug", 1}, {"hugs", 1}, {"ab", 5}, {"abc", 3}, {"好界", 4}};
    BpeModel model = bpe_learn(counts, 10);
    BpeApplier applier(model);
    Rng rng(20240601);
    for (int i = 0; i < 1000; ++i) {
        std::string s = random_marker_free_string(rng);
        CHECK(bpe_desegment(applier.apply_line(s)) == s);
    }
}

TEST_CASE("learned merges equal the recount-from-scratch oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        WordCounts counts = random_word_counts(rng);
        BpeModel model = bpe_learn(counts, 30);
        auto expected = oracle_learn(counts, 30);
        REQUIRE(model.merges.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            INFO("trial ", trial, " merge ", i);
            CHECK(model.merges[i] == expected[i]);
        }
    }
}

TEST_CASE("monotone refinement: the m-merge model is a prefix of the 2m-merge model") {
    Rng rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        WordCounts counts = random_word_counts(rng);
        for (std::uint64_t m : {5ULL, 10ULL, 20ULL}) {
            BpeModel small = bpe_learn(counts, m);
            BpeModel large = bpe_learn(counts, 2 * m);
            REQUIRE(small.merges.size() <= large.merges.size());
            for (std::size_t i = 0; i < small.merges.size(); ++i) {
                CHECK(small.merges[i] == large.merges[i]);
            }
        }
    }
}

TEST_CASE("more merges never increase a sentence's token count") {
    Rng rng(123);
    WordCounts counts = random_word_counts(rng);
    std::vector<std::string> sentences;
    for (int i = 0; i < 30; ++i) sentences.push_back(random_marker_free_string(rng));
    std::vector<std::size_t> previous(sentences.size(), SIZE_MAX);
    for (std::uint64_t m : {0ULL, 4ULL, 8ULL, 16ULL, 32ULL}) {
        BpeModel model = bpe_learn(counts, m);
        BpeApplier applier(model);
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            std::size_t count = token_count(applier.apply_line(sentences[i]));
            CHECK(count <= previous[i]);
            previous[i] = count;
        }
    }
}

TEST_CASE("learning determinism across runs") {
    Rng rng(5);
    WordCounts counts = random_word_counts(rng);
    BpeModel a = bpe_learn(counts, 25);
    BpeModel b = bpe_learn(counts, 25);
    CHECK(a.merges == b.merges);
    CHECK(a.alphabet == b.alphabet);
}

TEST_CASE("model file round trip") {
    TempDir dir;
    WordCounts counts = {{"hug", 2}, {"pug", 1}, {"hugs", 1}};
    BpeModel model = bpe_learn(counts, 3);
    model.save(dir.file("m.bpe"));
    BpeModel loaded = BpeModel::load(dir.file("m.bpe"));
    CHECK(loaded.merges == model.merges);
    CHECK(loaded.marker == "@@");
}

TEST_CASE("model load rejects unproducible symbols") {
    TempDir dir;
    write_file(dir.file("bad.bpe"), {"mtforge-bpe-v1 marker=@@", "ab cd"}); // ab never produced
    try {
        BpeModel::load(dir.file("bad.bpe"));
        FAIL("expected MalformedLine");
    } catch (const Error& e) {
        CHECK(e.code() == errc::malformed_line);
    }
    write_file(dir.file("ok.bpe"), {"mtforge-bpe-v1 marker=@@", "a b", "c d", "ab cd"});
    CHECK(BpeModel::load(dir.file("ok.bpe")).merges.size() == 3);
    write_file(dir.file("nohdr.bpe"), {"a b"});
    CHECK_THROWS_AS(BpeModel::load(dir.file("nohdr.bpe")), Error);
}

TEST_CASE("vocabulary pruning") {
    Vocabulary pruned = prune_vocabulary({{"a", 12}, {"b", 9}}, 10);
    CHECK(pruned.size() == 1);
    CHECK(pruned.contains("a"));
    CHECK_FALSE(pruned.contains("b"));

    Vocabulary all = prune_vocabulary({{"a", 12}, {"b", 9}}, 1);
    CHECK(all.size() == 2);

    // five types, two below the threshold
    Vocabulary five = prune_vocabulary({{"q", 30}, {"w", 10}, {"e", 10}, {"r", 9}, {"t", 1}}, 10);
    CHECK(five.size() == 3);
}

TEST_CASE("vocabulary file round trip sorts by count then token") {
    TempDir dir;
    Vocabulary vocab;
    vocab.entries = {{"b", 5}, {"a", 5}, {"c", 7}};
    vocab.save(dir.file("v.tsv"));
    CHECK(slurp(dir.file("v.tsv")) == "c\t7\na\t5\nb\t5\n");
    Vocabulary loaded = Vocabulary::load(dir.file("v.tsv"), 5);
    CHECK(loaded.size() == 3);
    CHECK(Vocabulary::load(dir.file("v.tsv"), 6).size() == 1);
}

TEST_CASE("out-of-vocabulary pieces fall back to characters") {
    WordCounts counts = {{"hug", 2}, {"pug", 1}, {"hugs", 1}};
    BpeModel model = bpe_learn(counts, 1); // merges (u,g)
    Vocabulary vocab;
    vocab.entries = {{"h@@", 100}}; // "ug" absent
    BpeApplier applier(model, &vocab);
    CHECK(applier.apply_line("hug") == "h@@ u@@ g");
    // desegmentation still restores the surface form
    CHECK(bpe_desegment(applier.apply_line("hug")) == "hug");
}

TEST_CASE("count_words pools whitespace tokens") {
    TempDir dir;
    write_file(dir.file("a.txt"), {"x y x", "z"});
    write_file(dir.file("b.txt"), {"x"});
    WordCounts counts = count_words({dir.file("a.txt"), dir.file("b.txt")});
    CHECK(counts.at("x") == 3);
    CHECK(counts.at("y") == 1);
    CHECK(counts.at("z") == 1);
}

TEST_CASE("bpe_learn_files joint pooling and the non-joint restriction") {
    TempDir dir;
    write_file(dir.file("en.txt"), {"aa aa"});
    write_file(dir.file("cs.txt"), {"aa"});
    BpeModel joint = bpe_learn_files({dir.file("en.txt"), dir.file("cs.txt")}, 1, true);
    CHECK(joint.merges.size() == 1);
    CHECK_THROWS_AS(bpe_learn_files({dir.file("en.txt"), dir.file("cs.txt")}, 1, false), Error);
}

TEST_CASE("sampling: n at least the population returns everything in order") {
    TempDir dir;
    std::vector<std::string> lines;
    for (int i = 0; i < 100; ++i) lines.push_back("line " + std::to_string(i));
    write_file(dir.file("in.txt"), lines);
    sample_lines({dir.file("in.txt")}, 100, 1, dir.file("out.txt"));
    CHECK(read_lines(dir.file("out.txt")) == lines);
    sample_lines({dir.file("in.txt")}, 1000, 1, dir.file("out2.txt"));
    CHECK(read_lines(dir.file("out2.txt")) == lines);
}

TEST_CASE("sampling is deterministic under a seed and preserves order") {
    TempDir dir;
    std::vector<std::string> lines;
    for (int i = 0; i < 100; ++i) lines.push_back("line " + std::to_string(i));
    write_file(dir.file("in.txt"), lines);
    sample_lines({dir.file("in.txt")}, 10, 42, dir.file("s1.txt"));
    sample_lines({dir.file("in.txt")}, 10, 42, dir.file("s2.txt"));
    CHECK(slurp(dir.file("s1.txt")) == slurp(dir.file("s2.txt")));
    std::vector<std::string> sampled = read_lines(dir.file("s1.txt"));
    CHECK(sampled.size() == 10);
    CHECK(std::is_sorted(sampled.begin(), sampled.end(), [&](const std::string& a, const std::string& b) {
        auto pos = [&](const std::string& s) {
            return std::find(lines.begin(), lines.end(), s) - lines.begin();
        };
        return pos(a) < pos(b);
    }));
}

TEST_CASE("sampling inclusion is uniform across the pooled corpora (chi-square)") {
    TempDir dir;
    std::vector<std::string> a;
    std::vector<std::string> b;
    for (int i = 0; i < 60; ++i) a.push_back("a" + std::to_string(i));
    for (int i = 0; i < 40; ++i) b.push_back("b" + std::to_string(i));
    write_file(dir.file("a.txt"), a);
    write_file(dir.file("b.txt"), b);
    std::map<std::string, int> included;
    const int runs = 2000;
    for (int seed = 0; seed < runs; ++seed) {
        sample_lines({dir.file("a.txt"), dir.file("b.txt")}, 50, static_cast<std::uint64_t>(seed),
                     dir.file("s.txt"));
        for (const std::string& line : read_lines(dir.file("s.txt"))) ++included[line];
    }
    REQUIRE(included.size() == 100);
    double expected = runs * 50.0 / 100.0;
    double chi2 = 0.0;
    for (const auto& [line, count] : included) {
        double d = count - expected;
        chi2 += d * d / expected;
    }
    // 99 degrees of freedom; the fixed seed set makes this a constant.
    // A sampler biased toward either file or either end blows past 1000.
    CHECK(chi2 < 200.0);
    CHECK(chi2 > 1.0);
}
