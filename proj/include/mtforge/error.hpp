#pragma once

#include <stdexcept>
#include <string>

namespace mtforge {

enum class errc {
    io_error,
    invalid_utf8,
    line_count_mismatch,
    kind_mismatch,
    empty_side,
    empty_corpus,
    empty_shard,
    empty_component,
    unknown_pair_id,
    duplicate_id,
    malformed_line,
    non_finite_score,
    missing_score,
    missing_backward_score,
    missing_index,
    invalid_argument,
    config_error,
    stage_error,
};

const char* errc_name(errc code);

// All recoverable toolkit failures throw this; code() lets callers and tests
// distinguish causes without parsing messages.
class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& message) {
    throw Error(code, message);
}

} // namespace mtforge
