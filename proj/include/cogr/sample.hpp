// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cogr/cues.hpp"
#include "cogr/numerics.hpp"

namespace cogr {

struct AnswerOption {
    Embedding text;
    std::optional<CueSet> cues;  ///< absent for cue-free inference data

    bool operator==(const AnswerOption&) const = default;
};

/// One multiple-choice instance.
struct Sample {
    std::string id;
    Embedding input;  ///< image-question stand-in
    std::vector<AnswerOption> options;
    std::size_t correct = 0;
    std::string category;

    bool operator==(const Sample&) const = default;
};

/// Throws invalid_input on fewer than two options, an out-of-range correct
/// index, or embeddings whose dimension differs from `dim`.
void validate_sample(const Sample& sample, std::size_t dim);

}  // namespace cogr
