// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "cogr/cues.hpp"
#include "cogr/moe.hpp"
#include "cogr/numerics.hpp"
#include "cogr/sample.hpp"

namespace cogr::test {

inline Vector random_vector(Rng& rng, std::size_t dim, double sd = 1.0) { return rng.normal_vector(dim, sd); }

inline Vector random_distribution(Rng& rng, std::size_t dim) {
    Vector p(dim);
    double s = 0.0;
    for (auto& v : p) {
        v = rng.uniform(0.01, 1.0);
        s += v;
    }
    for (auto& v : p) v /= s;
    return p;
}

/// Scored cue set built straight from random vectors.
inline CueSet random_cues(Rng& rng, const Embedding& image, std::size_t dim, std::size_t variants = 3) {
    CueSet c;
    c.positive = random_vector(rng, dim);
    c.negative = random_vector(rng, dim);
    for (std::size_t v = 0; v < variants; ++v) c.variants.push_back(random_vector(rng, dim));
    score_cues(c, image);
    return c;
}

inline Sample random_sample(Rng& rng, std::size_t dim, std::size_t options, bool with_cues = true) {
    Sample s;
    s.id = "s" + std::to_string(rng.uniform_index(1000000));
    s.input = random_vector(rng, dim);
    s.correct = rng.uniform_index(options);
    s.category = "c" + std::to_string(rng.uniform_index(3));
    for (std::size_t j = 0; j < options; ++j) {
        AnswerOption o;
        o.text = random_vector(rng, dim);
        if (with_cues) o.cues = random_cues(rng, s.input, dim);
        s.options.push_back(std::move(o));
    }
    return s;
}

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("cogr_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace cogr::test
