// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cogr/numerics.hpp"

namespace cogr {

struct ModelDims {
    std::size_t d = 32;       ///< embedding dimension
    std::size_t experts = 8;  ///< E
    std::size_t top_k = 2;    ///< K
    std::size_t hidden = 32;  ///< expert hidden width

    bool operator==(const ModelDims&) const = default;
};

/// Router weights: `gating` (d x E) produces the base logits, `semantic`
/// (d x E) projects cue differences into expert-logit space.
struct RouterParams {
    Matrix gating;
    Matrix semantic;

    bool operator==(const RouterParams&) const = default;
};

/// One expert: d -> hidden (tanh) -> d.
struct ExpertBlock {
    Matrix w1;  // d x hidden
    Vector b1;  // hidden
    Matrix w2;  // hidden x d
    Vector b2;  // d

    bool operator==(const ExpertBlock&) const = default;
};

struct ExpertParams {
    std::vector<ExpertBlock> blocks;

    bool operator==(const ExpertParams&) const = default;
};

/// Named view over one parameter tensor.
struct TensorView {
    std::string name;
    std::span<double> values;
};
struct ConstTensorView {
    std::string name;
    std::span<const double> values;
};

struct Model {
    ModelDims dims;
    RouterParams router;
    ExpertParams experts;

    /// Fixed enumeration order: router.gating, router.semantic, then
    /// experts.<i>.{w1,b1,w2,b2}.
    std::vector<TensorView> tensors();
    std::vector<ConstTensorView> tensors() const;
    std::size_t parameter_count() const;

    bool operator==(const Model&) const = default;
};

void validate_dims(const ModelDims& dims);

/// All-zero model with the given shapes (also used as a gradient buffer).
Model zeros_like(const ModelDims& dims);

/// Gaussian weights with stddev 1/sqrt(fan-in); zero biases.
Model init_model(const ModelDims& dims, Rng& rng);

std::vector<double> flatten(const Model& model);
void unflatten(std::span<const double> flat, Model& model);

/// Router outputs for one sample.
struct GatingDecision {
    Vector base_logits;     ///< z_base
    Vector teacher_logits;  ///< z_base + lambda_a * s_a
    Vector teacher_gate;    ///< softmax(teacher_logits)
    Vector student_gate;    ///< softmax(base_logits)
    std::vector<std::size_t> topk;
};

/// z_base = xᵀ · gating.
Vector base_logits(const Embedding& x, const RouterParams& router);

/// s = (positive - negative)ᵀ · semantic.
Vector semantic_direction(const Embedding& positive, const Embedding& negative,
                          const RouterParams& router);

/// Returns (teacher_logits, teacher_gate).
std::pair<Vector, Vector> teacher_gate(const Vector& z_base, const Vector& s_a, double lambda_a);

/// softmax(z_base); takes no cue input.
Vector student_gate(const Vector& z_base);

/// Indices of the K largest gate entries, ties to the lower index, sorted
/// ascending.
std::vector<std::size_t> select_topk(const Vector& gate, std::size_t k);

Embedding expert_output(const Embedding& x, const ExpertBlock& expert);

/// Evaluates only the listed experts, in the listed order.
std::vector<Embedding> expert_forward(const Embedding& x, const ExpertParams& experts,
                                      std::span<const std::size_t> topk);

/// Model plus the serialized training config it was produced with.
struct Checkpoint {
    Model model;
    std::string config_hash;
    std::string config_json;  ///< opaque to this module
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cogr
