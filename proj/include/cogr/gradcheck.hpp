// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cogr/moe.hpp"
#include "cogr/objective.hpp"

namespace cogr {

struct TensorGradCheck {
    std::string name;
    std::size_t size = 0;
    double analytic_norm = 0.0;
    double numeric_norm = 0.0;
    /// ||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-8)
    double relative_error = 0.0;
    /// Largest per-entry relative_error() over entries whose magnitude
    /// exceeds `entry_floor` (smaller entries sit at the finite-difference
    /// noise floor).
    double max_entry_error = 0.0;
};

struct GradCheckReport {
    std::vector<TensorGradCheck> tensors;
    double max_relative_error = 0.0;

    bool passed(double tolerance) const { return max_relative_error <= tolerance; }
};

/// Compares the tape gradient of the batch-mean total loss with central
/// differences, tensor by tensor.
GradCheckReport check_gradients(const Model& model, std::span<const Sample* const> batch,
                                const ObjectiveOptions& opts, double step = 1e-5, double entry_floor = 1e-6);

}  // namespace cogr
