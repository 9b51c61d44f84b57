// SPDX-License-Identifier: Apache-2.0
#include "cogr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace cogr {

GradCheckReport check_gradients(const Model& model, std::span<const Sample* const> batch,
                                const ObjectiveOptions& opts, double step, double entry_floor) {
    const BatchGradient bg = batch_gradient(model, batch, opts);
    const std::vector<double> analytic = flatten(bg.grad);

    Model probe = model;
    const std::vector<double> numeric = finite_difference_gradient(
        [&](std::span<const double> flat) {
            unflatten(flat, probe);
            return batch_loss(probe, batch, opts, &model);
        },
        flatten(model), step);

    GradCheckReport report;
    std::size_t offset = 0;
    for (const auto& t : model.tensors()) {
        TensorGradCheck tc;
        tc.name = t.name;
        tc.size = t.values.size();
        double diff2 = 0.0;
        double a2 = 0.0;
        double n2 = 0.0;
        for (std::size_t i = offset; i < offset + tc.size; ++i) {
            const double a = analytic[i];
            const double n = numeric[i];
            diff2 += (a - n) * (a - n);
            a2 += a * a;
            n2 += n * n;
            if (std::max(std::abs(a), std::abs(n)) > entry_floor) {
                tc.max_entry_error = std::max(tc.max_entry_error, relative_error(a, n));
            }
        }
        tc.analytic_norm = std::sqrt(a2);
        tc.numeric_norm = std::sqrt(n2);
        tc.relative_error = std::sqrt(diff2) / std::max({tc.analytic_norm, tc.numeric_norm, 1e-8});
        report.max_relative_error = std::max({report.max_relative_error, tc.relative_error, tc.max_entry_error});
        report.tensors.push_back(std::move(tc));
        offset += t.values.size();
    }
    return report;
}

}  // namespace cogr
