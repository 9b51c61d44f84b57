// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "cogr/option_scoring.hpp"
#include "support.hpp"

using namespace cogr;

namespace {

// Residual of projecting v onto span(basis) via Gram-Schmidt.
double span_residual(const Embedding& v, const std::vector<Embedding>& basis) {
    std::vector<Embedding> q;
    for (const auto& b : basis) {
        Embedding u = b;
        for (const auto& e : q) u = sub(u, scaled(e, dot(u, e)));
        const double n = norm2(u);
        if (n > 1e-12) q.push_back(scaled(u, 1.0 / n));
    }
    Embedding r = v;
    for (const auto& e : q) r = sub(r, scaled(e, dot(r, e)));
    return norm2(r);
}

Vector restricted_softmax(const Vector& logits, const std::vector<std::size_t>& topk) {
    Vector sub_logits;
    for (auto i : topk) sub_logits.push_back(logits[i]);
    return softmax(sub_logits);
}

}  // namespace

TEST_CASE("option gate") {
    const Vector z{0.2, -0.4, 1.0, 0.3};
    const std::vector<std::size_t> topk{0, 2};
    const Vector g0 = option_gate(z, topk, Vector{5, 5, -5, 5}, 0.0);
    const Vector full = softmax(z);
    CHECK(g0[0] == doctest::Approx(full[0] / (full[0] + full[2])).epsilon(1e-14));
    CHECK(g0[1] == doctest::Approx(full[2] / (full[0] + full[2])).epsilon(1e-14));

    // s_j differing only outside Top-K.
    CHECK(option_gate(z, topk, Vector{0.1, 9, 0.2, -9}, 0.5) == option_gate(z, topk, Vector{0.1, -3, 0.2, 4}, 0.5));
    const Vector g = option_gate(z, topk, Vector{0.1, 0, 0.7, 0}, 0.5);
    CHECK(g == restricted_softmax(add(z, Vector{0.05, 0, 0.35, 0}), topk));
    CHECK_THROWS_AS(option_gate(z, {}, Vector(4, 0.0), 0.5), Error);
}

TEST_CASE("aggregation") {
    const std::vector<Embedding> hs{{1, 2, 3}, {-1, 0, 4}};
    CHECK(aggregate(Vector{1, 0}, hs) == hs[0]);
    CHECK(aggregate(Vector{0, 1}, hs) == hs[1]);
    CHECK(aggregate(Vector{0.5, 0.5}, hs) == Embedding{0, 1, 3.5});
    CHECK_THROWS_AS(aggregate(Vector{1.0}, hs), Error);
    Rng rng(51);
    for (int t = 0; t < 100; ++t) {
        std::vector<Embedding> h;
        for (int k = 0; k < 3; ++k) h.push_back(rng.normal_vector(6));
        const Vector g = softmax(rng.normal_vector(3));
        const Embedding a = aggregate(g, h);
        for (std::size_t i = 0; i < 6; ++i) {
            const double ref = g[0] * h[0][i] + g[1] * h[1][i] + g[2] * h[2][i];
            CHECK(std::abs(a[i] - ref) <= 1e-12);
        }
    }
}

TEST_CASE("score and predict") {
    const Embedding t{0.5, -1, 2};
    CHECK(score_option(scaled(t, 3.0), t) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(score_option(Embedding{1, 0, 0}, Embedding{0, 1, 0}) == 0.0);
    CHECK_THROWS_AS(score_option(Embedding{0, 0, 0}, t), Error);
    CHECK(predict(Vector{0.1, 0.9, 0.3, 0.2}) == 1);
    CHECK(predict(Vector{0.4, 0.4, 0.4}) == 0);
    CHECK(predict(Vector{0.1, 0.7, 0.7}) == 1);
    CHECK_THROWS_AS(predict(Vector{}), Error);
    Rng rng(52);
    for (int t2 = 0; t2 < 100; ++t2) {
        Vector s = rng.normal_vector(5);
        const std::size_t p = predict(s);
        for (auto& v : s) v += 3.7;
        CHECK(predict(s) == p);
    }
}

TEST_CASE("all options share one Top-K set in both modes") {
    Rng rng(53);
    for (int t = 0; t < 1000; ++t) {
        const ModelDims dims{6, 2 + rng.uniform_index(5), 1, 4};
        ModelDims d = dims;
        d.top_k = 1 + rng.uniform_index(d.experts);
        const Model m = init_model(d, rng);
        const Sample s = test::random_sample(rng, 6, 2 + rng.uniform_index(4));
        for (RoutingMode mode : {RoutingMode::teacher, RoutingMode::student}) {
            const SampleScoring sc = score_all_options(s, m, mode, RoutingOptions{});
            CHECK(sc.routing.topk.size() == d.top_k);
            CHECK(sc.options.size() == s.options.size());
            for (const auto& o : sc.options) {
                CHECK(o.gate.size() == d.top_k);
                CHECK(std::abs(std::accumulate(o.gate.begin(), o.gate.end(), 0.0) - 1.0) <= 1e-12);
            }
            const Vector& g = mode == RoutingMode::teacher ? sc.routing.teacher_gate : sc.routing.student_gate;
            CHECK(sc.routing.topk == select_topk(g, d.top_k));
        }
    }
}

TEST_CASE("teacher mode uses cue directions and student mode uses text") {
    Rng rng(54);
    const ModelDims dims{5, 4, 2, 3};
    const Model m = init_model(dims, rng);
    const Sample s = test::random_sample(rng, 5, 3);
    const RoutingOptions opts;
    const auto& answer = *s.options[s.correct].cues;

    const SampleScoring t = score_all_options(s, m, RoutingMode::teacher, opts);
    const Vector z = base_logits(s.input, m.router);
    const Vector sa = semantic_direction(answer.positive, answer.negative, m.router);
    const auto [tl, tg] = teacher_gate(z, sa, opts.lambda_a);
    CHECK(t.routing.teacher_gate == tg);
    CHECK(t.routing.topk == select_topk(tg, 2));
    const auto expert_out = expert_forward(s.input, m.experts, t.routing.topk);
    for (std::size_t j = 0; j < s.options.size(); ++j) {
        const auto& c = *s.options[j].cues;
        const Vector g = option_gate(tl, t.routing.topk, semantic_direction(c.positive, c.negative, m.router), 0.5);
        CHECK(t.options[j].gate == g);
        const Embedding h = aggregate(g, expert_out);
        CHECK(t.options[j].score == doctest::Approx(cosine(h, s.options[j].text)).epsilon(1e-14));
        CHECK(span_residual(t.options[j].aggregated, expert_out) < 1e-9);
    }

    Sample bare = s;
    for (auto& o : bare.options) o.cues.reset();
    const SampleScoring st = score_all_options(bare, m, RoutingMode::student, opts);
    CHECK(st.routing.topk == select_topk(softmax(z), 2));
    for (std::size_t j = 0; j < s.options.size(); ++j) {
        const Vector sj = vec_mat(s.options[j].text, m.router.semantic);
        CHECK(st.options[j].gate == option_gate(z, st.routing.topk, sj, 0.5));
    }
    // Cues are ignored entirely in student mode.
    const SampleScoring with = score_all_options(s, m, RoutingMode::student, opts);
    CHECK(with.scores() == st.scores());
}

TEST_CASE("missing cues in teacher mode name the sample and option") {
    Rng rng(55);
    const Model m = init_model({4, 3, 2, 4}, rng);
    Sample s = test::random_sample(rng, 4, 3);
    s.id = "sample-7";
    s.options[1].cues.reset();
    try {
        score_all_options(s, m, RoutingMode::teacher, RoutingOptions{});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::missing_cue);
        CHECK(std::string(e.what()).find("sample-7") != std::string::npos);
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
}

TEST_CASE("with K equal to E the modes differ only through the answer injection") {
    Rng rng(56);
    const Model m = init_model({4, 3, 3, 4}, rng);
    const Sample s = test::random_sample(rng, 4, 2);
    RoutingOptions no_injection;
    no_injection.lambda_a = 0.0;
    const SampleScoring t = score_all_options(s, m, RoutingMode::teacher, no_injection);
    CHECK(t.routing.teacher_gate == t.routing.student_gate);
    CHECK(t.routing.topk == std::vector<std::size_t>{0, 1, 2});
    RoutingOptions no_dirs = no_injection;
    no_dirs.lambda_o = 0.0;
    CHECK(score_all_options(s, m, RoutingMode::teacher, no_dirs).scores() ==
          score_all_options(s, m, RoutingMode::student, no_dirs).scores());
}

TEST_CASE("routing mode names") {
    CHECK(parse_routing_mode("teacher") == RoutingMode::teacher);
    CHECK(parse_routing_mode("student") == RoutingMode::student);
    CHECK(std::string(routing_mode_name(RoutingMode::student)) == "student");
    CHECK_THROWS_AS(parse_routing_mode("oracle"), Error);
}
