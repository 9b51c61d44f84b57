// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "cogr/autodiff.hpp"
#include "cogr/losses.hpp"
#include "cogr/moe.hpp"
#include "cogr/option_scoring.hpp"
#include "cogr/sample.hpp"

namespace cogr {

/// Switches and strengths for the training objective. Each `use_*` flag
/// removes exactly its term when false.
struct ObjectiveOptions {
    RoutingOptions routing;
    double lambda_c = 0.3;
    double temperature = 5.0;
    CeMode ce_mode = CeMode::per_option_binary;
    bool use_uncertainty = true;
    bool use_contrast = true;
    bool use_distill = true;
    /// Train without any cue signal: route and build option directions the
    /// way inference does.
    bool cue_free = false;
};

/// Tape leaves for every model tensor.
struct ModelVars {
    Var gating;
    Var semantic;
    std::vector<std::array<Var, 4>> experts;  // w1, b1, w2, b2
};

ModelVars record_parameters(Tape& tape, const Model& model);

/// Adds d(root)/d(param) from the last backward pass into `grads`, which must
/// share the model's shapes.
void accumulate_gradients(const Tape& tape, const ModelVars& vars, Model& grads);

struct SampleObjective {
    Var main;
    Var contrast;
    Var distill;
    Var total;
    std::vector<Var> ce_terms;  ///< per-option weighted-free CE terms (binary mode)
    std::vector<double> weights;
    std::vector<double> scores;
    GatingDecision routing;
};

/// Records the forward pass and all loss terms for one sample. Disabled
/// terms are recorded as constant zeros. The distillation target is the
/// teacher gate of `target_model` when given, else of `model`; either way it
/// is a constant on the tape.
SampleObjective record_sample_objective(Tape& tape, const ModelVars& vars, const Model& model,
                                        const Sample& sample, const ObjectiveOptions& opts,
                                        const Model* target_model = nullptr);

/// Mean loss over a batch plus its parameter gradient.
struct BatchGradient {
    LossBreakdown loss;  ///< batch means; option_weights concatenated
    Model grad;
    std::size_t correct = 0;  ///< teacher-path predictions matching the label
};

BatchGradient batch_gradient(const Model& model, std::span<const Sample* const> batch,
                             const ObjectiveOptions& opts);

/// Total loss (batch mean) with no gradient; used as the finite-difference
/// oracle's objective. Pass the unperturbed model as `target_model` to hold
/// the distillation target fixed, matching the analytic gradient.
double batch_loss(const Model& model, std::span<const Sample* const> batch, const ObjectiveOptions& opts,
                  const Model* target_model = nullptr);

}  // namespace cogr
