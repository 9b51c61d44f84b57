// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cogr/numerics.hpp"

namespace cogr {

/// Handle to a value recorded on a Tape. Scalars are length-1 values.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Minimal reverse-mode tape over vector-valued nodes.
///
/// Every op evaluates eagerly and records a closure that propagates the
/// node's gradient to its inputs. Gradients are zero until backward() runs
/// and always have the same shape as the value. A tape is confined to one
/// thread and one optimization step.
class Tape {
public:
    Var constant(Vector value);
    Var parameter(std::span<const double> value);
    Var scalar(double value) { return constant(Vector{value}); }

    const Vector& value(Var v) const { return nodes_[v.id].value; }
    double scalar_value(Var v) const { return nodes_[v.id].value.at(0); }
    const Vector& grad(Var v) const { return nodes_[v.id].grad; }
    bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Zeroes all gradients, seeds d(root)/d(root) = 1 and propagates.
    void backward(Var root);

    // xᵀ·W where W is a parameter holding rows x cols values row-major.
    Var vec_mat(Var x, Var w, std::size_t rows, std::size_t cols);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double s);
    Var tanh(Var a);
    Var gather(Var a, std::span<const std::size_t> indices);
    Var softmax(Var a);
    /// Σ_k w[k]·items[k]; w has length items.size().
    Var weighted_sum(Var w, std::span<const Var> items);
    Var cosine(Var a, Var b);
    Var binary_cross_entropy(Var score, int label, double temperature);
    /// KL(target || q) with target held constant; q must be a distribution.
    Var kl_from_target(const Vector& target, Var q);
    /// -log softmax(logits)[label].
    Var softmax_cross_entropy(Var logits, std::size_t label);
    Var sum(std::span<const Var> scalars);
    /// Packs scalars into one vector.
    Var stack(std::span<const Var> scalars);

private:
    using Backward = std::function<void(Tape&, std::size_t)>;

    struct Node {
        Vector value;
        Vector grad;
        Backward backward;
        bool needs_grad = false;
    };

    Var push(Vector value, bool needs_grad, Backward backward);
    Node& node(Var v) { return nodes_[v.id]; }
    Vector& grad_of(std::size_t id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace cogr
