#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "mtforge/error.hpp"

namespace mtforge {

// A token is a maximal run of characters that are not ASCII space or tab.
// The toolkit never re-tokenizes language-specifically; it counts and splits
// exactly what external tokenizers produced.
std::size_t token_count(std::string_view text);
std::vector<std::string_view> split_tokens(std::string_view text);

enum class ShardKind { parallel, mono };
enum class Side { src, tgt };

const char* side_name(Side side);

struct Sentence {
    std::string text;

    std::size_t token_count() const { return mtforge::token_count(text); }
    std::vector<std::string_view> tokens() const { return split_tokens(text); }
};

struct SentencePair {
    std::uint64_t id = 0; // 0-based ordinal within the shard
    Sentence src;
    Sentence tgt;
    std::string provenance;
};

// Handle to an on-disk corpus. Immutable after load; concurrent readers are
// safe. Loading validates UTF-8 on every line and, for parallel shards, that
// source and target line counts agree.
struct CorpusShard {
    std::string name;
    ShardKind kind = ShardKind::mono;
    std::vector<std::filesystem::path> paths; // {src, tgt} for parallel, {path} for mono
    std::uint64_t line_count = 0;

    const std::filesystem::path& src_path() const { return paths.at(0); }
    const std::filesystem::path& tgt_path() const { return paths.at(kind == ShardKind::parallel ? 1 : 0); }
};

struct CorpusStats {
    std::uint64_t sentence_count = 0;
    std::uint64_t token_count_src = 0;
    std::uint64_t token_count_tgt = 0;
    double avg_len_src = 0.0; // tokens per sentence; 0 when empty
    double avg_len_tgt = 0.0;
};

CorpusShard load_shard(const std::vector<std::filesystem::path>& paths, ShardKind kind,
                       std::string name = "");

CorpusStats compute_stats(const CorpusShard& shard);

// Concatenates shards of one kind in order into out_paths; line order within
// each shard is preserved.
CorpusShard concat_shards(const std::vector<CorpusShard>& shards,
                          const std::vector<std::filesystem::path>& out_paths,
                          std::string name = "");

// Streams one file line by line. Lines are returned without the trailing LF;
// a trailing CR (CRLF input) is stripped too, since output is canonically LF.
class LineReader {
public:
    explicit LineReader(const std::filesystem::path& path);

    // False at end of file. The view stays valid until the next call.
    bool next(std::string_view& line);
    std::uint64_t line_number() const { return line_number_; } // 1-based, of last line read
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::string buffer_;
    std::uint64_t line_number_ = 0;
};

struct PairView {
    std::uint64_t id = 0;
    std::string_view src;
    std::string_view tgt; // empty for mono shards
};

// Streams a shard in file order, yielding ids contiguous from 0.
class ShardReader {
public:
    explicit ShardReader(const CorpusShard& shard);

    bool next(PairView& out);
    ShardKind kind() const { return kind_; }

private:
    ShardKind kind_;
    LineReader src_;
    std::vector<LineReader> tgt_; // one element for parallel shards
    std::uint64_t next_id_ = 0;
};

// Writes a shard with LF line terminators. Exclusive per output file.
class ShardWriter {
public:
    ShardWriter(const std::vector<std::filesystem::path>& paths, ShardKind kind);

    void write(std::string_view src);                        // mono
    void write(std::string_view src, std::string_view tgt); // parallel
    void close(); // flushes and checks stream state; called by the destructor too
    std::uint64_t lines_written() const { return lines_; }
    ShardKind kind() const { return kind_; }
    const std::vector<std::filesystem::path>& paths() const { return paths_; }

    ~ShardWriter();
    ShardWriter(const ShardWriter&) = delete;
    ShardWriter& operator=(const ShardWriter&) = delete;

private:
    std::vector<std::filesystem::path> paths_;
    ShardKind kind_;
    std::ofstream src_out_;
    std::ofstream tgt_out_;
    std::uint64_t lines_ = 0;
    bool closed_ = false;
};

// Reads a whole file into memory as validated lines.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

// Materializes a shard; prefer ShardReader for streaming.
std::vector<SentencePair> read_all_pairs(const CorpusShard& shard);

} // namespace mtforge
