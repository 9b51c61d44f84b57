// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cogr/moe.hpp"
#include "cogr/sample.hpp"

namespace cogr {

enum class RoutingMode { teacher, student };

const char* routing_mode_name(RoutingMode mode);
RoutingMode parse_routing_mode(const std::string& text);

/// Routing strengths and the switches that remove the cue terms. A disabled
/// term behaves exactly as if its strength were zero.
struct RoutingOptions {
    double lambda_a = 0.5;
    double lambda_o = 0.5;
    bool use_answer_direction = true;  ///< s_a in the teacher logits
    bool use_option_direction = true;  ///< s_j in the option gates

    double effective_lambda_a() const { return use_answer_direction ? lambda_a : 0.0; }
    double effective_lambda_o() const { return use_option_direction ? lambda_o : 0.0; }
};

struct OptionRepresentation {
    Vector gate;          ///< over the shared Top-K, in topk order
    Embedding aggregated; ///< gate-weighted sum of the selected expert outputs
    double score = 0.0;   ///< cosine(aggregated, option text)
};

/// softmax over topk of (logits[i] + lambda_o * s_j[i]); entries of s_j
/// outside topk are never read.
Vector option_gate(const Vector& teacher_logits, std::span<const std::size_t> topk, const Vector& s_j,
                   double lambda_o);

/// Σ_k gate[k] · outputs[k].
Embedding aggregate(const Vector& gate, const std::vector<Embedding>& expert_outputs);

double score_option(const Embedding& aggregated, const Embedding& option_text);

/// Argmax with ties to the lower index.
std::size_t predict(std::span<const double> scores);

struct SampleScoring {
    GatingDecision routing;
    std::vector<Embedding> expert_outputs;  ///< aligned with routing.topk
    std::vector<OptionRepresentation> options;

    std::vector<double> scores() const;
    /// Routing gate of the active mode restricted to topk and renormalized.
    Vector topk_gate;
};

/// Full forward pass for one sample. Teacher mode routes on z_base + λ_a·s_a
/// with s_a from the correct option's cues and uses each option's own cue
/// difference as s_j. Student mode routes on z_base alone and derives s_j
/// from the option text embedding; it reads no cues.
SampleScoring score_all_options(const Sample& sample, const Model& model, RoutingMode mode,
                                const RoutingOptions& opts);

}  // namespace cogr
