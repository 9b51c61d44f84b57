// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace cogr {

enum class ErrorCode {
    invalid_input,
    degenerate_vector,
    invalid_distribution,
    probe_failure,
    shape,
    invalid_k,
    invalid_expert,
    invalid_routing,
    invalid_label,
    insufficient_variants,
    insufficient_samples,
    insufficient_concepts,
    undefined_sharpness,
    regeneration_failed,
    missing_cue,
    parse,
    consistency,
    divergence,
    usage,
    io,
};

const char* error_code_name(ErrorCode code);

/// Base exception for every failure raised by the library. The code lets
/// callers (the CLI in particular) map failures to exit statuses.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

}  // namespace cogr
