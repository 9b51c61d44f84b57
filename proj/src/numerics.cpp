// SPDX-License-Identifier: Apache-2.0
#include "cogr/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace cogr {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_input: return "invalid-input";
        case ErrorCode::degenerate_vector: return "degenerate-vector";
        case ErrorCode::invalid_distribution: return "invalid-distribution";
        case ErrorCode::probe_failure: return "probe-failure";
        case ErrorCode::shape: return "shape";
        case ErrorCode::invalid_k: return "invalid-K";
        case ErrorCode::invalid_expert: return "invalid-expert";
        case ErrorCode::invalid_routing: return "invalid-routing";
        case ErrorCode::invalid_label: return "invalid-label";
        case ErrorCode::insufficient_variants: return "insufficient-variants";
        case ErrorCode::insufficient_samples: return "insufficient-samples";
        case ErrorCode::insufficient_concepts: return "insufficient-concepts";
        case ErrorCode::undefined_sharpness: return "undefined-sharpness";
        case ErrorCode::regeneration_failed: return "regeneration-failed";
        case ErrorCode::missing_cue: return "missing-cue";
        case ErrorCode::parse: return "parse";
        case ErrorCode::consistency: return "consistency";
        case ErrorCode::divergence: return "divergence";
        case ErrorCode::usage: return "usage";
        case ErrorCode::io: return "io";
    }
    return "unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows * cols) {
        fail(ErrorCode::shape, "matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                                   " given " + std::to_string(values_.size()) + " values");
    }
}

namespace {

void require_same_dim(std::span<const double> a, std::span<const double> b, const char* op) {
    if (a.size() != b.size()) {
        fail(ErrorCode::shape, std::string(op) + ": dimension mismatch " +
                                   std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
}

}  // namespace

Vector add(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "add");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Vector sub(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "sub");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Vector scaled(std::span<const double> a, double s) {
    Vector out(a.begin(), a.end());
    for (auto& v : out) v *= s;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double norm1(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) s += std::abs(v);
    return s;
}

bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

Vector vec_mat(std::span<const double> x, const Matrix& w) {
    if (x.size() != w.rows()) {
        fail(ErrorCode::shape, "vec_mat: input dim " + std::to_string(x.size()) +
                                   " does not match matrix rows " + std::to_string(w.rows()));
    }
    Vector out(w.cols(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const double xr = x[r];
        for (std::size_t c = 0; c < w.cols(); ++c) out[c] += xr * w(r, c);
    }
    return out;
}

Vector softmax(std::span<const double> logits) {
    if (logits.empty()) fail(ErrorCode::invalid_input, "softmax: empty logits");
    if (!all_finite(logits)) fail(ErrorCode::invalid_input, "softmax: non-finite logit");
    const double m = *std::max_element(logits.begin(), logits.end());
    Vector out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        total += out[i];
    }
    for (auto& v : out) v /= total;
    return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
    require_same_dim(a, b, "cosine");
    const double na = norm2(a);
    const double nb = norm2(b);
    if (!(na > 0.0) || !(nb > 0.0)) {
        fail(ErrorCode::degenerate_vector, "cosine: zero-norm operand");
    }
    return std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    require_same_dim(p, q, "kl_divergence");
    auto check = [](std::span<const double> d, const char* name) {
        double total = 0.0;
        for (double v : d) {
            if (!std::isfinite(v) || v < 0.0) {
                fail(ErrorCode::invalid_distribution,
                     std::string("kl_divergence: ") + name + " has a negative or non-finite entry");
            }
            total += v;
        }
        if (std::abs(total - 1.0) > 1e-6) {
            fail(ErrorCode::invalid_distribution,
                 std::string("kl_divergence: ") + name + " sums to " + std::to_string(total));
        }
    };
    check(p, "p");
    check(q, "q");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] <= 0.0) {
            fail(ErrorCode::invalid_distribution, "kl_divergence: q vanishes where p does not");
        }
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return std::max(kl, 0.0);
}

namespace {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_bce_args(double score, int label, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        fail(ErrorCode::invalid_input, "binary_cross_entropy: temperature must be positive");
    }
    if (!std::isfinite(score)) fail(ErrorCode::invalid_input, "binary_cross_entropy: non-finite score");
    if (label != 0 && label != 1) fail(ErrorCode::invalid_label, "binary_cross_entropy: label must be 0 or 1");
}

}  // namespace

double binary_cross_entropy(double score, int label, double temperature) {
    check_bce_args(score, label, temperature);
    const double p = std::clamp(sigmoid(temperature * score), kProbClamp, 1.0 - kProbClamp);
    return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double binary_cross_entropy_grad(double score, int label, double temperature) {
    check_bce_args(score, label, temperature);
    const double raw = sigmoid(temperature * score);
    if (raw < kProbClamp || raw > 1.0 - kProbClamp) return 0.0;
    return temperature * (raw - static_cast<double>(label));
}

std::vector<double> finite_difference_gradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> params, double step) {
    if (!(step > 0.0)) fail(ErrorCode::invalid_input, "finite_difference_gradient: step must be positive");
    std::vector<double> probe(params.begin(), params.end());
    std::vector<double> grad(params.size(), 0.0);
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + step;
        const double up = loss(probe);
        probe[i] = saved - step;
        const double down = loss(probe);
        probe[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            fail(ErrorCode::probe_failure,
                 "finite_difference_gradient: non-finite loss probing parameter " + std::to_string(i));
        }
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

double Rng::uniform() {
    // 53 high bits -> [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::uniform_index(std::size_t n) {
    if (n == 0) fail(ErrorCode::invalid_input, "uniform_index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw;
    do {
        draw = engine_();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % bound);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 kept away from zero.
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::size_t Rng::categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) fail(ErrorCode::invalid_input, "categorical: bad weight");
        total += w;
    }
    if (!(total > 0.0)) fail(ErrorCode::invalid_input, "categorical: weights sum to zero");
    const double target = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (target < acc) return i;
    }
    // Rounding can leave target == total; return the last positive weight.
    for (std::size_t i = weights.size(); i > 0; --i) {
        if (weights[i - 1] > 0.0) return i - 1;
    }
    return 0;
}

Vector Rng::normal_vector(std::size_t dim, double stddev) {
    Vector out(dim);
    for (auto& v : out) v = stddev * normal();
    return out;
}

}  // namespace cogr
