// SPDX-License-Identifier: Apache-2.0
#include "cogr/objective.hpp"

#include <string>

namespace cogr {

ModelVars record_parameters(Tape& tape, const Model& model) {
    ModelVars vars;
    vars.gating = tape.parameter(model.router.gating.values());
    vars.semantic = tape.parameter(model.router.semantic.values());
    vars.experts.reserve(model.experts.blocks.size());
    for (const auto& b : model.experts.blocks) {
        vars.experts.push_back({tape.parameter(b.w1.values()), tape.parameter(b.b1), tape.parameter(b.w2.values()),
                                tape.parameter(b.b2)});
    }
    return vars;
}

void accumulate_gradients(const Tape& tape, const ModelVars& vars, Model& grads) {
    auto add_into = [&tape](Var v, std::span<double> dst) {
        const Vector& g = tape.grad(v);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    };
    add_into(vars.gating, grads.router.gating.values());
    add_into(vars.semantic, grads.router.semantic.values());
    for (std::size_t e = 0; e < vars.experts.size(); ++e) {
        auto& b = grads.experts.blocks[e];
        add_into(vars.experts[e][0], b.w1.values());
        add_into(vars.experts[e][1], b.b1);
        add_into(vars.experts[e][2], b.w2.values());
        add_into(vars.experts[e][3], b.b2);
    }
}

namespace {

const CueSet& cues_of(const Sample& sample, std::size_t j) {
    const auto& c = sample.options[j].cues;
    if (!c) fail(ErrorCode::missing_cue, "missing cues for (sample " + sample.id + ", option " + std::to_string(j) + ")");
    return *c;
}

Var expert_graph(Tape& tape, const ModelVars& vars, const Model& model, Var x, std::size_t e) {
    const auto& dims = model.dims;
    const auto& ev = vars.experts[e];
    Var hidden = tape.tanh(tape.add(tape.vec_mat(x, ev[0], dims.d, dims.hidden), ev[1]));
    return tape.add(tape.vec_mat(hidden, ev[2], dims.hidden, dims.d), ev[3]);
}

}  // namespace

SampleObjective record_sample_objective(Tape& tape, const ModelVars& vars, const Model& model,
                                        const Sample& sample, const ObjectiveOptions& opts,
                                        const Model* target_model) {
    validate_sample(sample, model.dims.d);
    const auto& dims = model.dims;
    const std::size_t n_opt = sample.options.size();
    SampleObjective out;

    Var x = tape.constant(sample.input);
    Var z_base = tape.vec_mat(x, vars.gating, dims.d, dims.experts);
    GatingDecision& r = out.routing;
    r.base_logits = tape.value(z_base);
    r.student_gate = softmax(r.base_logits);

    // Routing logits (z^T, or z_base when training cue-free) and option directions.
    Var routing_logits = z_base;
    std::vector<Var> option_dirs;
    option_dirs.reserve(n_opt);
    if (opts.cue_free) {
        for (const auto& opt : sample.options) {
            option_dirs.push_back(tape.vec_mat(tape.constant(opt.text), vars.semantic, dims.d, dims.experts));
        }
    } else {
        const CueSet& answer = cues_of(sample, sample.correct);
        const double lambda_a = opts.routing.effective_lambda_a();
        if (lambda_a != 0.0) {
            Var diff = tape.constant(sub(answer.positive, answer.negative));
            Var s_a = tape.vec_mat(diff, vars.semantic, dims.d, dims.experts);
            routing_logits = tape.add(z_base, tape.scale(s_a, lambda_a));
        }
        for (std::size_t j = 0; j < n_opt; ++j) {
            const CueSet& c = cues_of(sample, j);
            option_dirs.push_back(
                tape.vec_mat(tape.constant(sub(c.positive, c.negative)), vars.semantic, dims.d, dims.experts));
        }
    }
    r.teacher_logits = tape.value(routing_logits);
    r.teacher_gate = softmax(r.teacher_logits);
    r.topk = select_topk(r.teacher_gate, dims.top_k);

    std::vector<Var> expert_outs;
    for (std::size_t e : r.topk) expert_outs.push_back(expert_graph(tape, vars, model, x, e));

    Var routed = tape.gather(routing_logits, r.topk);
    const double lambda_o = opts.routing.effective_lambda_o();
    std::vector<Var> aggregated;
    std::vector<Var> scores;
    for (std::size_t j = 0; j < n_opt; ++j) {
        Var logits = routed;
        if (lambda_o != 0.0) logits = tape.add(routed, tape.scale(tape.gather(option_dirs[j], r.topk), lambda_o));
        Var gate = tape.softmax(logits);
        Var h = tape.weighted_sum(gate, expert_outs);
        aggregated.push_back(h);
        scores.push_back(tape.cosine(h, tape.constant(sample.options[j].text)));
        out.scores.push_back(tape.scalar_value(scores.back()));
    }

    // Main loss.
    out.weights.assign(n_opt, 1.0);
    if (opts.use_uncertainty && !opts.cue_free) {
        for (std::size_t j = 0; j < n_opt; ++j) {
            const CueSet& c = cues_of(sample, j);
            if (!c.uncertainty) {
                fail(ErrorCode::invalid_input, "unscored cues for (sample " + sample.id + ", option " +
                                                   std::to_string(j) + ")");
            }
            out.weights[j] = option_weight(*c.uncertainty);
        }
    }
    if (opts.ce_mode == CeMode::per_option_binary) {
        std::vector<Var> weighted;
        for (std::size_t j = 0; j < n_opt; ++j) {
            Var ce = tape.binary_cross_entropy(scores[j], j == sample.correct ? 1 : 0, opts.temperature);
            out.ce_terms.push_back(ce);
            weighted.push_back(tape.scale(ce, out.weights[j]));
        }
        out.main = tape.sum(weighted);
    } else {
        Var logits = tape.scale(tape.stack(scores), opts.temperature);
        Var ce = tape.softmax_cross_entropy(logits, sample.correct);
        out.ce_terms.push_back(ce);
        out.main = tape.scale(ce, out.weights[sample.correct]);
    }

    // Contrastive loss.
    if (opts.use_contrast && !opts.cue_free) {
        const CueSet& answer = cues_of(sample, sample.correct);
        std::vector<Var> wrong_scores;
        std::vector<Var> wrong_reps;
        for (std::size_t j = 0; j < n_opt; ++j) {
            if (j == sample.correct) continue;
            wrong_scores.push_back(scores[j]);
            wrong_reps.push_back(aggregated[j]);
        }
        Var omega = tape.softmax(tape.stack(wrong_scores));
        Var h_wrong = tape.weighted_sum(omega, wrong_reps);
        Var pos = tape.cosine(aggregated[sample.correct], tape.constant(answer.positive));
        Var neg = tape.cosine(h_wrong, tape.constant(answer.negative));
        out.contrast = tape.scale(tape.sub(pos, neg), -opts.lambda_c);
    } else {
        out.contrast = tape.scalar(0.0);
    }

    // Distillation: the teacher gate is a constant target.
    if (opts.use_distill && !opts.cue_free) {
        Vector target = r.teacher_gate;
        if (target_model != nullptr) {
            Vector logits = vec_mat(sample.input, target_model->router.gating);
            const double lambda_a = opts.routing.effective_lambda_a();
            if (lambda_a != 0.0) {
                const CueSet& answer = cues_of(sample, sample.correct);
                const Vector s_a = vec_mat(sub(answer.positive, answer.negative), target_model->router.semantic);
                logits = add(logits, scaled(s_a, lambda_a));
            }
            target = softmax(logits);
        }
        out.distill = tape.kl_from_target(target, tape.softmax(z_base));
    } else {
        out.distill = tape.scalar(0.0);
    }

    const std::array<Var, 3> parts{out.main, out.contrast, out.distill};
    out.total = tape.sum(parts);
    return out;
}

namespace {

struct RecordedBatch {
    Var mean_total;
    LossBreakdown loss;
    std::size_t correct = 0;
};

RecordedBatch record_batch(Tape& tape, const ModelVars& vars, const Model& model,
                           std::span<const Sample* const> batch, const ObjectiveOptions& opts,
                           const Model* target_model = nullptr) {
    if (batch.empty()) fail(ErrorCode::invalid_input, "empty batch");
    RecordedBatch rb;
    std::vector<Var> totals;
    totals.reserve(batch.size());
    for (const Sample* s : batch) {
        SampleObjective so = record_sample_objective(tape, vars, model, *s, opts, target_model);
        totals.push_back(so.total);
        rb.loss.main += tape.scalar_value(so.main);
        rb.loss.contrast += tape.scalar_value(so.contrast);
        rb.loss.distill += tape.scalar_value(so.distill);
        rb.loss.option_weights.insert(rb.loss.option_weights.end(), so.weights.begin(), so.weights.end());
        if (predict(so.scores) == s->correct) ++rb.correct;
    }
    const double inv = 1.0 / static_cast<double>(batch.size());
    rb.mean_total = tape.scale(tape.sum(totals), inv);
    rb.loss.main *= inv;
    rb.loss.contrast *= inv;
    rb.loss.distill *= inv;
    rb.loss.total = tape.scalar_value(rb.mean_total);
    return rb;
}

}  // namespace

BatchGradient batch_gradient(const Model& model, std::span<const Sample* const> batch, const ObjectiveOptions& opts) {
    Tape tape;
    const ModelVars vars = record_parameters(tape, model);
    RecordedBatch rb = record_batch(tape, vars, model, batch, opts);
    tape.backward(rb.mean_total);
    BatchGradient out{std::move(rb.loss), zeros_like(model.dims), rb.correct};
    accumulate_gradients(tape, vars, out.grad);
    return out;
}

double batch_loss(const Model& model, std::span<const Sample* const> batch, const ObjectiveOptions& opts,
                  const Model* target_model) {
    Tape tape;
    const ModelVars vars = record_parameters(tape, model);
    return record_batch(tape, vars, model, batch, opts, target_model).loss.total;
}

}  // namespace cogr
