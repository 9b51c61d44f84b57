// SPDX-License-Identifier: Apache-2.0
#include "cogr/option_scoring.hpp"

#include <algorithm>
#include <string>
#include <tuple>

namespace cogr {

void validate_sample(const Sample& sample, std::size_t dim) {
    auto bad = [&](const std::string& msg) { fail(ErrorCode::invalid_input, "sample " + sample.id + ": " + msg); };
    if (sample.options.size() < 2) bad("needs at least 2 options");
    if (sample.correct >= sample.options.size()) bad("correct index out of range");
    if (sample.input.size() != dim) bad("input dimension mismatch");
    for (const auto& opt : sample.options) {
        if (opt.text.size() != dim) bad("option text dimension mismatch");
        if (opt.cues && (opt.cues->positive.size() != dim || opt.cues->negative.size() != dim)) {
            bad("cue dimension mismatch");
        }
    }
}

const char* routing_mode_name(RoutingMode mode) {
    return mode == RoutingMode::teacher ? "teacher" : "student";
}

RoutingMode parse_routing_mode(const std::string& text) {
    if (text == "teacher") return RoutingMode::teacher;
    if (text == "student") return RoutingMode::student;
    fail(ErrorCode::usage, "unknown mode '" + text + "' (expected teacher|student)");
}

Vector option_gate(const Vector& teacher_logits, std::span<const std::size_t> topk, const Vector& s_j,
                   double lambda_o) {
    if (topk.empty()) fail(ErrorCode::invalid_routing, "option_gate: empty Top-K set");
    if (!(lambda_o >= 0.0)) fail(ErrorCode::invalid_input, "option_gate: lambda_o must be >= 0");
    if (s_j.size() != teacher_logits.size()) fail(ErrorCode::shape, "option_gate: s_j length mismatch");
    Vector logits;
    logits.reserve(topk.size());
    for (std::size_t i : topk) {
        if (i >= teacher_logits.size()) fail(ErrorCode::invalid_routing, "option_gate: expert index out of range");
        logits.push_back(teacher_logits[i] + lambda_o * s_j[i]);
    }
    return softmax(logits);
}

Embedding aggregate(const Vector& gate, const std::vector<Embedding>& expert_outputs) {
    if (gate.size() != expert_outputs.size() || gate.empty()) {
        fail(ErrorCode::shape, "aggregate: gate has " + std::to_string(gate.size()) + " entries for " +
                                   std::to_string(expert_outputs.size()) + " expert outputs");
    }
    Embedding out(expert_outputs[0].size(), 0.0);
    for (std::size_t k = 0; k < gate.size(); ++k) {
        if (expert_outputs[k].size() != out.size()) fail(ErrorCode::shape, "aggregate: ragged expert outputs");
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += gate[k] * expert_outputs[k][i];
    }
    return out;
}

double score_option(const Embedding& aggregated, const Embedding& option_text) {
    return cosine(aggregated, option_text);
}

std::size_t predict(std::span<const double> scores) {
    if (scores.empty()) fail(ErrorCode::invalid_input, "predict: no scores");
    std::size_t best = 0;
    for (std::size_t j = 1; j < scores.size(); ++j) {
        if (scores[j] > scores[best]) best = j;
    }
    return best;
}

std::vector<double> SampleScoring::scores() const {
    std::vector<double> out;
    out.reserve(options.size());
    for (const auto& o : options) out.push_back(o.score);
    return out;
}

namespace {

const CueSet& require_cues(const Sample& sample, std::size_t j) {
    const auto& cues = sample.options[j].cues;
    if (!cues) {
        fail(ErrorCode::missing_cue, "missing cues for (sample " + sample.id + ", option " + std::to_string(j) + ")");
    }
    return *cues;
}

}  // namespace

SampleScoring score_all_options(const Sample& sample, const Model& model, RoutingMode mode,
                                const RoutingOptions& opts) {
    validate_sample(sample, model.dims.d);
    SampleScoring out;
    GatingDecision& r = out.routing;
    r.base_logits = base_logits(sample.input, model.router);
    r.student_gate = student_gate(r.base_logits);

    std::vector<Vector> option_dirs;
    option_dirs.reserve(sample.options.size());
    const Vector* routing_gate = nullptr;
    const Vector* routing_logits = nullptr;
    if (mode == RoutingMode::teacher) {
        const CueSet& answer = require_cues(sample, sample.correct);
        const Vector s_a = semantic_direction(answer.positive, answer.negative, model.router);
        std::tie(r.teacher_logits, r.teacher_gate) = teacher_gate(r.base_logits, s_a, opts.effective_lambda_a());
        for (std::size_t j = 0; j < sample.options.size(); ++j) {
            const CueSet& c = require_cues(sample, j);
            option_dirs.push_back(semantic_direction(c.positive, c.negative, model.router));
        }
        routing_gate = &r.teacher_gate;
        routing_logits = &r.teacher_logits;
    } else {
        r.teacher_logits = r.base_logits;
        r.teacher_gate = r.student_gate;
        for (const auto& opt : sample.options) option_dirs.push_back(vec_mat(opt.text, model.router.semantic));
        routing_gate = &r.student_gate;
        routing_logits = &r.base_logits;
    }

    r.topk = select_topk(*routing_gate, model.dims.top_k);
    out.expert_outputs = expert_forward(sample.input, model.experts, r.topk);

    double mass = 0.0;
    for (std::size_t i : r.topk) mass += (*routing_gate)[i];
    for (std::size_t i : r.topk) out.topk_gate.push_back((*routing_gate)[i] / mass);

    const double lambda_o = opts.effective_lambda_o();
    out.options.reserve(sample.options.size());
    for (std::size_t j = 0; j < sample.options.size(); ++j) {
        OptionRepresentation rep;
        rep.gate = option_gate(*routing_logits, r.topk, option_dirs[j], lambda_o);
        rep.aggregated = aggregate(rep.gate, out.expert_outputs);
        rep.score = score_option(rep.aggregated, sample.options[j].text);
        out.options.push_back(std::move(rep));
    }
    return out;
}

}  // namespace cogr
