// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cogr/error.hpp"

namespace cogr {

/// Dense real vector. Embeddings, logits and gates all use this type.
using Vector = std::vector<double>;
using Embedding = Vector;

/// Row-major dense matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// Elementwise helpers. All binary helpers require equal dims (shape error).
Vector add(std::span<const double> a, std::span<const double> b);
Vector sub(std::span<const double> a, std::span<const double> b);
Vector scaled(std::span<const double> a, double s);
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);
double norm1(std::span<const double> a);
bool all_finite(std::span<const double> a);

/// xᵀ·W for x of length W.rows(); result has length W.cols().
Vector vec_mat(std::span<const double> x, const Matrix& w);

/// Max-subtracted softmax. Throws invalid_input on empty or non-finite input.
Vector softmax(std::span<const double> logits);

/// Cosine similarity, clamped into [-1, 1]. Throws degenerate_vector on a
/// zero-norm operand.
double cosine(std::span<const double> a, std::span<const double> b);

/// KL(p || q) with 0·log(0/q) = 0. Both arguments must be probability
/// vectors (sum within 1e-6 of one); q must be strictly positive where p is.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Logistic link with temperature. Probabilities are clamped to
/// [1e-12, 1 - 1e-12] before taking logs.
double binary_cross_entropy(double score, int label, double temperature);

/// d/dscore of binary_cross_entropy; zero where the clamp is active.
double binary_cross_entropy_grad(double score, int label, double temperature);

inline constexpr double kProbClamp = 1e-12;

/// Central-difference gradient of `loss` at `params`.
/// Throws probe_failure naming the parameter index when a probe is non-finite.
std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> params, double step = 1e-5);

/// Relative error with the floor used by every gradient check in the project.
inline double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    return std::abs(analytic - numeric) / denom;
}

/// Deterministic random stream. The distributions are implemented here on
/// top of the raw 64-bit engine so the streams are identical on every
/// platform (std::normal_distribution is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n).
    std::size_t uniform_index(std::size_t n);
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    /// Index drawn proportionally to non-negative weights.
    std::size_t categorical(std::span<const double> weights);
    Vector normal_vector(std::size_t dim, double stddev = 1.0);

    template <class T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace cogr
