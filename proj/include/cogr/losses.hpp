// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cogr/numerics.hpp"
#include "cogr/option_scoring.hpp"

namespace cogr {

struct LossBreakdown {
    double main = 0.0;
    double contrast = 0.0;
    double distill = 0.0;
    double total = 0.0;
    std::vector<double> option_weights;
};

inline constexpr double kMinOptionWeight = 0.1;
inline constexpr double kMaxOptionWeight = 1.0;

/// How the per-option CE term in the main loss is realized.
enum class CeMode {
    per_option_binary,     ///< Σ_j w_j · BCE(σ(τ·score_j), y_j)
    softmax_over_options,  ///< w_label · -log softmax(τ·scores)[label]
};

const char* ce_mode_name(CeMode mode);
CeMode parse_ce_mode(const std::string& text);

/// clip(1 / (1 + unc), 0.1, 1.0).
double option_weight(double uncertainty);

/// Uncertainty-weighted main loss. Returns the loss and the clipped per-option
/// weights. With `use_uncertainty` false all weights are exactly 1.
std::pair<double, std::vector<double>> main_loss(std::span<const double> scores, std::size_t label,
                                                 std::span<const double> uncertainties, double temperature,
                                                 bool use_uncertainty = true,
                                                 CeMode mode = CeMode::per_option_binary);

/// -λ_c·[cos(h_correct, c⁺) - cos(h_wrong, c⁻)].
double contrastive_loss(const Embedding& h_correct, const Embedding& h_wrong, const Embedding& c_pos,
                        const Embedding& c_neg, double lambda_c);

/// Softmax over the incorrect options' scores, in option order with the
/// label skipped.
std::vector<double> wrong_option_weights(std::span<const double> scores, std::size_t label);

/// Score-weighted pooling of the incorrect options' aggregated representations.
Embedding wrong_representation(const std::vector<OptionRepresentation>& reps, std::size_t label);

/// KL(g_T || g_S).
double distill_loss(const Vector& teacher_gate, const Vector& student_gate);

double total_loss(double main, double contrast, double distill);

}  // namespace cogr
