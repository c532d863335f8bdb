#include "mtforge/corpus.hpp"

#include "mtforge/unicode.hpp"

namespace mtforge {

namespace {

inline bool is_sep(char c) {
    return c == ' ' || c == '\t';
}

} // namespace

std::size_t token_count(std::string_view text) {
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_sep(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

std::vector<std::string_view> split_tokens(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_sep(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_sep(text[i])) ++i;
        if (i > start) out.push_back(text.substr(start, i - start));
    }
    return out;
}

const char* side_name(Side side) {
    return side == Side::src ? "src" : "tgt";
}

LineReader::LineReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) fail(errc::io_error, "cannot open " + path.string());
}

bool LineReader::next(std::string_view& line) {
    if (!std::getline(in_, buffer_)) {
        if (in_.bad()) fail(errc::io_error, "read error in " + path_.string());
        return false;
    }
    if (!buffer_.empty() && buffer_.back() == '\r') buffer_.pop_back();
    ++line_number_;
    line = buffer_;
    return true;
}

namespace {

std::uint64_t count_and_validate(const std::filesystem::path& path) {
    LineReader reader(path);
    std::string_view line;
    std::uint64_t count = 0;
    while (reader.next(line)) {
        ++count;
        if (!valid_utf8(line)) {
            fail(errc::invalid_utf8, path.string() + ":" + std::to_string(reader.line_number()));
        }
    }
    return count;
}

std::string default_name(const std::filesystem::path& path) {
    return path.stem().string();
}

} // namespace

CorpusShard load_shard(const std::vector<std::filesystem::path>& paths, ShardKind kind, std::string name) {
    if (kind == ShardKind::parallel && paths.size() != 2) {
        fail(errc::invalid_argument, "parallel shard needs exactly two files, got " + std::to_string(paths.size()));
    }
    if (kind == ShardKind::mono && paths.size() != 1) {
        fail(errc::invalid_argument, "mono shard needs exactly one file, got " + std::to_string(paths.size()));
    }
    CorpusShard shard;
    shard.kind = kind;
    shard.paths = paths;
    shard.name = name.empty() ? default_name(paths[0]) : std::move(name);
    shard.line_count = count_and_validate(paths[0]);
    if (kind == ShardKind::parallel) {
        std::uint64_t tgt_count = count_and_validate(paths[1]);
        if (tgt_count != shard.line_count) {
            fail(errc::line_count_mismatch,
                 paths[0].string() + " has " + std::to_string(shard.line_count) + " lines, " + paths[1].string() +
                     " has " + std::to_string(tgt_count));
        }
    }
    return shard;
}

ShardReader::ShardReader(const CorpusShard& shard) : kind_(shard.kind), src_(shard.paths.at(0)) {
    if (kind_ == ShardKind::parallel) tgt_.emplace_back(shard.paths.at(1));
}

bool ShardReader::next(PairView& out) {
    std::string_view src;
    if (!src_.next(src)) {
        if (kind_ == ShardKind::parallel) {
            std::string_view tgt;
            if (tgt_[0].next(tgt)) {
                fail(errc::line_count_mismatch, "target file longer than source file");
            }
        }
        return false;
    }
    out.src = src;
    out.tgt = {};
    if (kind_ == ShardKind::parallel) {
        std::string_view tgt;
        if (!tgt_[0].next(tgt)) {
            fail(errc::line_count_mismatch, "source file longer than target file");
        }
        out.tgt = tgt;
    }
    out.id = next_id_++;
    return true;
}

CorpusStats compute_stats(const CorpusShard& shard) {
    CorpusStats stats;
    ShardReader reader(shard);
    PairView pair;
    while (reader.next(pair)) {
        ++stats.sentence_count;
        stats.token_count_src += token_count(pair.src);
        if (shard.kind == ShardKind::parallel) stats.token_count_tgt += token_count(pair.tgt);
    }
    if (stats.sentence_count > 0) {
        stats.avg_len_src = static_cast<double>(stats.token_count_src) / static_cast<double>(stats.sentence_count);
        stats.avg_len_tgt = static_cast<double>(stats.token_count_tgt) / static_cast<double>(stats.sentence_count);
    }
    return stats;
}

ShardWriter::ShardWriter(const std::vector<std::filesystem::path>& paths, ShardKind kind)
    : paths_(paths), kind_(kind) {
    if (kind == ShardKind::parallel && paths.size() != 2) {
        fail(errc::invalid_argument, "parallel writer needs exactly two paths");
    }
    if (kind == ShardKind::mono && paths.size() != 1) {
        fail(errc::invalid_argument, "mono writer needs exactly one path");
    }
    src_out_.open(paths[0], std::ios::binary | std::ios::trunc);
    if (!src_out_) fail(errc::io_error, "cannot open " + paths[0].string() + " for writing");
    if (kind == ShardKind::parallel) {
        tgt_out_.open(paths[1], std::ios::binary | std::ios::trunc);
        if (!tgt_out_) fail(errc::io_error, "cannot open " + paths[1].string() + " for writing");
    }
}

void ShardWriter::write(std::string_view src) {
    if (kind_ != ShardKind::mono) fail(errc::kind_mismatch, "parallel writer given one side");
    src_out_.write(src.data(), static_cast<std::streamsize>(src.size()));
    src_out_.put('\n');
    ++lines_;
}

void ShardWriter::write(std::string_view src, std::string_view tgt) {
    if (kind_ != ShardKind::parallel) fail(errc::kind_mismatch, "mono writer given two sides");
    src_out_.write(src.data(), static_cast<std::streamsize>(src.size()));
    src_out_.put('\n');
    tgt_out_.write(tgt.data(), static_cast<std::streamsize>(tgt.size()));
    tgt_out_.put('\n');
    ++lines_;
}

void ShardWriter::close() {
    if (closed_) return;
    closed_ = true;
    src_out_.flush();
    if (!src_out_) fail(errc::io_error, "write error in " + paths_[0].string());
    src_out_.close();
    if (kind_ == ShardKind::parallel) {
        tgt_out_.flush();
        if (!tgt_out_) fail(errc::io_error, "write error in " + paths_[1].string());
        tgt_out_.close();
    }
}

ShardWriter::~ShardWriter() {
    try {
        close();
    } catch (...) {
        // destructor must not throw; close() explicitly to observe errors
    }
}

CorpusShard concat_shards(const std::vector<CorpusShard>& shards,
                          const std::vector<std::filesystem::path>& out_paths, std::string name) {
    if (shards.empty()) fail(errc::invalid_argument, "no shards to concatenate");
    ShardKind kind = shards[0].kind;
    for (const CorpusShard& s : shards) {
        if (s.kind != kind) {
            fail(errc::kind_mismatch, "shard '" + s.name + "' differs in kind from '" + shards[0].name + "'");
        }
    }
    ShardWriter writer(out_paths, kind);
    for (const CorpusShard& s : shards) {
        ShardReader reader(s);
        PairView pair;
        while (reader.next(pair)) {
            if (kind == ShardKind::parallel) {
                writer.write(pair.src, pair.tgt);
            } else {
                writer.write(pair.src);
            }
        }
    }
    writer.close();
    CorpusShard out;
    out.kind = kind;
    out.paths = out_paths;
    out.name = name.empty() ? default_name(out_paths[0]) : std::move(name);
    out.line_count = writer.lines_written();
    return out;
}

std::vector<SentencePair> read_all_pairs(const CorpusShard& shard) {
    std::vector<SentencePair> pairs;
    pairs.reserve(shard.line_count);
    ShardReader reader(shard);
    PairView view;
    while (reader.next(view)) {
        SentencePair pair;
        pair.id = view.id;
        pair.src.text = std::string(view.src);
        pair.tgt.text = std::string(view.tgt);
        pair.provenance = shard.name;
        pairs.push_back(std::move(pair));
    }
    return pairs;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    LineReader reader(path);
    std::vector<std::string> lines;
    std::string_view line;
    while (reader.next(line)) {
        if (!valid_utf8(line)) {
            fail(errc::invalid_utf8, path.string() + ":" + std::to_string(reader.line_number()));
        }
        lines.emplace_back(line);
    }
    return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io_error, "cannot open " + path.string() + " for writing");
    for (const std::string& line : lines) {
        out.write(line.data(), static_cast<std::streamsize>(line.size()));
        out.put('\n');
    }
    out.flush();
    if (!out) fail(errc::io_error, "write error in " + path.string());
}

} // namespace mtforge
