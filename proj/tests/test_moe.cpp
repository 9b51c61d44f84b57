// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cogr/moe.hpp"
#include "support.hpp"

using namespace cogr;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (auto& v : m.values()) v = rng.normal();
    return m;
}

// Brute-force xᵀW with explicit loops.
Vector ref_product(const Vector& x, const Matrix& w) {
    Vector out(w.cols(), 0.0);
    for (std::size_t j = 0; j < w.cols(); ++j) {
        long double s = 0.0L;
        for (std::size_t i = 0; i < w.rows(); ++i) s += static_cast<long double>(x[i]) * w(i, j);
        out[j] = static_cast<double>(s);
    }
    return out;
}

std::vector<std::size_t> ref_topk(const Vector& gate, std::size_t k) {
    std::vector<std::size_t> idx(gate.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return gate[a] > gate[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Embedding ref_expert(const Embedding& x, const ExpertBlock& b) {
    const std::size_t h = b.b1.size();
    const std::size_t d = b.b2.size();
    Vector hidden(h);
    for (std::size_t j = 0; j < h; ++j) {
        double s = b.b1[j];
        for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * b.w1(i, j);
        hidden[j] = std::tanh(s);
    }
    Embedding out(d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = b.b2[j];
        for (std::size_t i = 0; i < h; ++i) s += hidden[i] * b.w2(i, j);
        out[j] = s;
    }
    return out;
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::invalid_input;
}

}  // namespace

TEST_CASE("base logits") {
    Rng rng(41);
    RouterParams r{random_matrix(rng, 4, 3), random_matrix(rng, 4, 3)};
    CHECK(base_logits(Vector(4, 0.0), r) == Vector(3, 0.0));
    RouterParams id{Matrix(2, 2, std::vector<double>{0.3, -0.7, 1.1, 2.0}), Matrix(2, 2)};
    CHECK(base_logits(Vector{1, 0}, id) == Vector{0.3, -0.7});
    for (int t = 0; t < 100; ++t) {
        const Vector x = rng.normal_vector(4);
        const Vector z = base_logits(x, r);
        const Vector ref = ref_product(x, r.gating);
        for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(z[i] - ref[i]) <= 1e-12);
    }
    CHECK(code_of([&] { base_logits(Vector(5, 1.0), r); }) == ErrorCode::shape);
}

TEST_CASE("semantic direction") {
    Rng rng(42);
    RouterParams r{random_matrix(rng, 4, 3), random_matrix(rng, 4, 3)};
    const Vector p = rng.normal_vector(4);
    const Vector n = rng.normal_vector(4);
    CHECK(semantic_direction(p, p, r) == Vector(3, 0.0));
    const Vector s = semantic_direction(p, n, r);
    const Vector t = semantic_direction(n, p, r);
    const Vector ref = ref_product(sub(p, n), r.semantic);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(s[i] == -t[i]);
        CHECK(std::abs(s[i] - ref[i]) <= 1e-12);
    }
    CHECK(code_of([&] { semantic_direction(p, Vector(3, 1.0), r); }) == ErrorCode::shape);
}

TEST_CASE("teacher and student gates") {
    Rng rng(43);
    const Vector z = rng.normal_vector(5);
    const Vector s = rng.normal_vector(5);
    const auto [logits0, gate0] = teacher_gate(z, s, 0.0);
    CHECK(gate0 == student_gate(z));
    const auto [logits, gate] = teacher_gate(z, s, 0.5);
    for (std::size_t i = 0; i < 5; ++i) CHECK(logits[i] == z[i] + 0.5 * s[i]);
    CHECK(gate == softmax(logits));
    CHECK(student_gate(Vector(4, 1.3)) == Vector(4, 0.25));
    CHECK(code_of([&] { teacher_gate(z, Vector(4, 0.0), 0.5); }) == ErrorCode::shape);
}

TEST_CASE("gates are valid distributions") {
    Rng rng(44);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t e = 2 + rng.uniform_index(15);
        const Vector z = rng.normal_vector(e, 3.0);
        for (const Vector& g : {teacher_gate(z, rng.normal_vector(e), rng.uniform()).second, student_gate(z)}) {
            CHECK(std::abs(std::accumulate(g.begin(), g.end(), 0.0) - 1.0) <= 1e-12);
            CHECK(*std::min_element(g.begin(), g.end()) > 0.0);
        }
    }
}

TEST_CASE("injection bound holds and scales with strength") {
    Rng rng(45);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t e = 2 + rng.uniform_index(15);
        const Vector z = rng.normal_vector(e, 2.0);
        const Vector s = rng.normal_vector(e, 2.0);
        for (double lambda : {0.1, 0.5, 1.0}) {
            const double gap = norm1(sub(teacher_gate(z, s, lambda).second, student_gate(z)));
            CHECK(gap <= 2.0 * lambda * norm_inf(s) + 1e-15);
            const double half = norm1(sub(teacher_gate(z, s, lambda / 2).second, student_gate(z)));
            CHECK(half <= lambda * norm_inf(s) + 1e-15);
        }
    }
}

TEST_CASE("top-k selection") {
    CHECK(select_topk(Vector{0.1, 0.4, 0.4, 0.1}, 2) == std::vector<std::size_t>{1, 2});
    CHECK(select_topk(Vector{0.4, 0.2, 0.4}, 1) == std::vector<std::size_t>{0});
    CHECK(select_topk(Vector{0.25, 0.25, 0.25, 0.25}, 4) == std::vector<std::size_t>{0, 1, 2, 3});
    CHECK(code_of([] { select_topk(Vector{0.5, 0.5}, 0); }) == ErrorCode::invalid_k);
    CHECK(code_of([] { select_topk(Vector{0.5, 0.5}, 3); }) == ErrorCode::invalid_k);
    Rng rng(46);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t e = 1 + rng.uniform_index(12);
        const std::size_t k = 1 + rng.uniform_index(e);
        Vector gate = softmax(rng.normal_vector(e));
        if (t % 3 == 0) gate[rng.uniform_index(e)] = gate[rng.uniform_index(e)];
        const auto sel = select_topk(gate, k);
        CHECK(sel == ref_topk(gate, k));
        CHECK(select_topk(gate, k) == sel);
    }
}

TEST_CASE("expert forward") {
    Rng rng(47);
    const ModelDims dims{4, 3, 2, 5};
    Model m = init_model(dims, rng);
    for (auto& b : m.experts.blocks) {
        for (auto& v : b.b1) v = rng.normal();
        for (auto& v : b.b2) v = rng.normal();
    }
    const Embedding x = rng.normal_vector(4);
    const std::vector<std::size_t> all{0, 1, 2};
    const std::vector<std::size_t> some{2, 0};
    const auto full = expert_forward(x, m.experts, all);
    const auto part = expert_forward(x, m.experts, some);
    CHECK(part[0] == full[2]);
    CHECK(part[1] == full[0]);
    for (std::size_t e = 0; e < 3; ++e) {
        const Embedding ref = ref_expert(x, m.experts.blocks[e]);
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(full[e][i] - ref[i]) <= 1e-12);
    }

    ExpertBlock zero = m.experts.blocks[1];
    std::fill(zero.w1.values().begin(), zero.w1.values().end(), 0.0);
    std::fill(zero.b1.begin(), zero.b1.end(), 0.0);
    CHECK(expert_output(x, zero) == zero.b2);

    const std::vector<std::size_t> bad{3};
    CHECK(code_of([&] { expert_forward(x, m.experts, bad); }) == ErrorCode::invalid_expert);
}

TEST_CASE("initialization and flattening") {
    Rng a(48);
    Rng b(48);
    const ModelDims dims{6, 4, 2, 3};
    const Model m = init_model(dims, a);
    CHECK(m == init_model(dims, b));
    CHECK(m.parameter_count() == 2 * 6 * 4 + 4 * (6 * 3 + 3 + 3 * 6 + 6));
    const auto flat = flatten(m);
    CHECK(flat.size() == m.parameter_count());
    Model z = zeros_like(dims);
    unflatten(flat, z);
    CHECK(z == m);
    CHECK(m.tensors().front().name == "router.gating");
    CHECK(m.tensors()[1].name == "router.semantic");
    CHECK(m.tensors()[2].name == "experts.0.w1");

    // Entry spread near 1/sqrt(rows).
    Rng c(49);
    const Model big = init_model({64, 16, 2, 64}, c);
    double sq = 0.0;
    for (double v : big.router.gating.values()) sq += v * v;
    CHECK(std::sqrt(sq / big.router.gating.size()) == doctest::Approx(1.0 / 8.0).epsilon(0.05));
}

TEST_CASE("dimension validation") {
    CHECK(code_of([] { validate_dims({4, 3, 4, 2}); }) == ErrorCode::invalid_k);
    CHECK(code_of([] { validate_dims({4, 3, 0, 2}); }) == ErrorCode::invalid_k);
    CHECK_THROWS_AS(validate_dims({0, 3, 1, 2}), Error);
}

TEST_CASE("checkpoint round trip") {
    test::TempDir dir("ckpt");
    Rng rng(50);
    const Checkpoint ck{init_model({5, 3, 2, 4}, rng), "00ff00ff00ff00ff", "{\"d\":5}"};
    save_checkpoint(ck, dir.path / "c.json");
    const Checkpoint back = load_checkpoint(dir.path / "c.json");
    CHECK(back.model == ck.model);
    CHECK(back.config_hash == ck.config_hash);
    CHECK(back.config_json == ck.config_json);
    std::ofstream(dir.path / "bad.json") << "{\"format\":\"nope\"}";
    CHECK_THROWS_AS(load_checkpoint(dir.path / "bad.json"), Error);
}
