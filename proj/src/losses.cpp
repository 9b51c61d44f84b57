// SPDX-License-Identifier: Apache-2.0
#include "cogr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cogr {

const char* ce_mode_name(CeMode mode) {
    return mode == CeMode::per_option_binary ? "binary" : "softmax";
}

CeMode parse_ce_mode(const std::string& text) {
    if (text == "binary") return CeMode::per_option_binary;
    if (text == "softmax") return CeMode::softmax_over_options;
    fail(ErrorCode::usage, "unknown ce_mode '" + text + "' (expected binary|softmax)");
}

double option_weight(double uncertainty) {
    if (!(uncertainty >= 0.0)) fail(ErrorCode::invalid_input, "option_weight: uncertainty must be >= 0");
    return std::clamp(1.0 / (1.0 + uncertainty), kMinOptionWeight, kMaxOptionWeight);
}

std::pair<double, std::vector<double>> main_loss(std::span<const double> scores, std::size_t label,
                                                 std::span<const double> uncertainties, double temperature,
                                                 bool use_uncertainty, CeMode mode) {
    if (scores.empty()) fail(ErrorCode::invalid_input, "main_loss: no scores");
    if (label >= scores.size()) {
        fail(ErrorCode::invalid_label, "main_loss: label " + std::to_string(label) + " out of range");
    }
    if (uncertainties.size() != scores.size()) fail(ErrorCode::shape, "main_loss: scores/uncertainties misaligned");

    std::vector<double> weights(scores.size(), 1.0);
    if (use_uncertainty) {
        for (std::size_t j = 0; j < scores.size(); ++j) weights[j] = option_weight(uncertainties[j]);
    }

    double loss = 0.0;
    if (mode == CeMode::per_option_binary) {
        for (std::size_t j = 0; j < scores.size(); ++j) {
            loss += weights[j] * binary_cross_entropy(scores[j], j == label ? 1 : 0, temperature);
        }
    } else {
        if (!(temperature > 0.0)) fail(ErrorCode::invalid_input, "main_loss: temperature must be positive");
        const Vector probs = softmax(scaled(scores, temperature));
        loss = -weights[label] * std::log(std::max(probs[label], kProbClamp));
    }
    return {loss, std::move(weights)};
}

double contrastive_loss(const Embedding& h_correct, const Embedding& h_wrong, const Embedding& c_pos,
                        const Embedding& c_neg, double lambda_c) {
    return -lambda_c * (cosine(h_correct, c_pos) - cosine(h_wrong, c_neg));
}

std::vector<double> wrong_option_weights(std::span<const double> scores, std::size_t label) {
    if (scores.size() < 2) fail(ErrorCode::invalid_input, "wrong_option_weights: need an incorrect option");
    if (label >= scores.size()) fail(ErrorCode::invalid_label, "wrong_option_weights: label out of range");
    std::vector<double> wrong;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j != label) wrong.push_back(scores[j]);
    }
    return softmax(wrong);
}

Embedding wrong_representation(const std::vector<OptionRepresentation>& reps, std::size_t label) {
    std::vector<double> scores;
    for (const auto& r : reps) scores.push_back(r.score);
    const auto weights = wrong_option_weights(scores, label);
    Embedding out(reps[0].aggregated.size(), 0.0);
    std::size_t k = 0;
    for (std::size_t j = 0; j < reps.size(); ++j) {
        if (j == label) continue;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * reps[j].aggregated[i];
        ++k;
    }
    return out;
}

double distill_loss(const Vector& teacher_gate, const Vector& student_gate) {
    return kl_divergence(teacher_gate, student_gate);
}

double total_loss(double main, double contrast, double distill) { return main + contrast + distill; }

}  // namespace cogr
