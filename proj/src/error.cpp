#include "mtforge/error.hpp"

namespace mtforge {

const char* errc_name(errc code) {
    switch (code) {
        case errc::io_error: return "IoError";
        case errc::invalid_utf8: return "InvalidUtf8";
        case errc::line_count_mismatch: return "LineCountMismatch";
        case errc::kind_mismatch: return "KindMismatch";
        case errc::empty_side: return "EmptySide";
        case errc::empty_corpus: return "EmptyCorpus";
        case errc::empty_shard: return "EmptyShard";
        case errc::empty_component: return "EmptyComponent";
        case errc::unknown_pair_id: return "UnknownPairId";
        case errc::duplicate_id: return "DuplicateId";
        case errc::malformed_line: return "MalformedLine";
        case errc::non_finite_score: return "NonFiniteScore";
        case errc::missing_score: return "MissingScore";
        case errc::missing_backward_score: return "MissingBackwardScore";
        case errc::missing_index: return "MissingIndex";
        case errc::invalid_argument: return "InvalidArgument";
        case errc::config_error: return "ConfigError";
        case errc::stage_error: return "StageError";
    }
    return "UnknownError";
}

} // namespace mtforge
