#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtforge/corpus.hpp"

namespace mtforge {

// Declarative pipeline: plain-text config with [input NAME] / [stage NAME]
// sections forming a linear DAG over shard and artifact names. Example:
//
//   seed = 42
//   outdir = out
//
//   [input synth]
//   kind = parallel
//   src = synth.en
//   tgt = synth.gu
//
//   [stage clean_synth]
//   op = clean
//   in = synth
//   out = synth_clean
//   rule = repeat_noise max_char_run=4 max_token_run=3
//
// Input paths and outdir are resolved relative to the config file. Output
// shards are written as outdir/NAME.src/.tgt (parallel) or outdir/NAME.txt
// (mono); artifact outputs use their name verbatim as the file name.

struct InputDecl {
    std::string name;
    ShardKind kind = ShardKind::parallel;
    std::vector<std::filesystem::path> paths;
};

struct StageConfig {
    std::string name;
    std::string op;
    std::map<std::string, std::string> params;    // last occurrence wins
    std::vector<std::string> rule_lines;          // repeated `rule =` entries, in order
    std::vector<std::string> component_lines;     // repeated `component =` entries (blend)
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path base_dir;  // directory of the config file
    std::filesystem::path outdir;    // resolved against base_dir
    std::vector<InputDecl> inputs;
    std::vector<StageConfig> stages;
    std::string raw_text;            // hashed into the manifest
};

PipelineConfig parse_pipeline_config(const std::filesystem::path& path);

// Static validation only; never touches corpus data. Empty result means the
// config is runnable.
std::vector<std::string> validate(const PipelineConfig& config);

struct StageRecord {
    std::string name;
    std::string op;
    std::vector<std::pair<std::string, std::uint64_t>> input_lines;
    std::vector<std::pair<std::string, std::uint64_t>> output_lines;
    std::vector<std::string> artifacts;
    std::string report_json; // clean / xent-filter stage reports
    double wall_ms = 0.0;
};

struct RunManifest {
    std::string config_hash;
    std::string tool_version;
    std::uint64_t seed = 0;
    std::vector<StageRecord> stages;

    std::string to_json(bool include_wall_times = true) const;
};

struct RunOptions {
    unsigned threads = 1;
    bool quiet = false;
    bool verbose = false;
    std::optional<std::filesystem::path> manifest_path; // default: outdir/manifest.json
};

// Executes stages in order. Any failure removes every file this run created
// and rethrows (module errors are wrapped as errc::stage_error, config
// problems as errc::config_error).
RunManifest run(const PipelineConfig& config, const RunOptions& options = {});

extern const char* const kToolVersion;

} // namespace mtforge
