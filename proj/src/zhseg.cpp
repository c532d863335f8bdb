#include "mtforge/zhseg.hpp"

#include <fstream>
#include <vector>

#include "mtforge/corpus.hpp"
#include "mtforge/error.hpp"
#include "mtforge/parallel.hpp"
#include "mtforge/unicode.hpp"

namespace mtforge {

namespace {

inline bool is_sep(char32_t cp) {
    return cp == U' ' || cp == U'\t';
}

} // namespace

std::string zh_desegment(std::string_view line, const ScriptRangeSet& ranges) {
    std::u32string cps = decode_codepoints(line);
    std::string out;
    out.reserve(line.size());
    std::size_t i = 0;
    while (i < cps.size()) {
        if (!is_sep(cps[i])) {
            append_utf8(out, cps[i]);
            ++i;
            continue;
        }
        std::size_t end = i;
        while (end < cps.size() && is_sep(cps[end])) ++end;
        bool prev_zh = i > 0 && ranges.contains(cps[i - 1]);
        bool next_zh = end < cps.size() && ranges.contains(cps[end]);
        if (!prev_zh && !next_zh) {
            for (std::size_t k = i; k < end; ++k) append_utf8(out, cps[k]);
        }
        i = end;
    }
    return out;
}

std::string zh_char_segment(std::string_view line, const ScriptRangeSet& ranges) {
    std::u32string cps = decode_codepoints(line);
    std::string out;
    out.reserve(line.size() * 2);
    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (i > 0 && !is_sep(cps[i - 1]) && !is_sep(cps[i]) &&
            (ranges.contains(cps[i - 1]) || ranges.contains(cps[i]))) {
            out.push_back(' ');
        }
        append_utf8(out, cps[i]);
    }
    return out;
}

void zh_transform_file(const std::filesystem::path& in, const std::filesystem::path& out, bool char_mode,
                       const ScriptRangeSet& ranges, unsigned threads) {
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
        parallel_for(batch.size(), threads, [&](std::size_t i) {
            result[i] = char_mode ? zh_char_segment(batch[i], ranges) : zh_desegment(batch[i], ranges);
        });
        for (const std::string& r : result) {
            sink.write(r.data(), static_cast<std::streamsize>(r.size()));
            sink.put('\n');
        }
    }
    sink.flush();
    if (!sink) fail(errc::io_error, "write error in " + out.string());
}

} // namespace mtforge
