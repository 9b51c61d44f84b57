// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cogr/numerics.hpp"

namespace cogr {

/// Routing variance is reported multiplied by this factor.
inline constexpr double kVarianceReportScale = 10.0;

/// cos(Σ_k gate[k]·outputs[k], direction). `direction` lives in the expert
/// output space; callers pass the raw cue difference c⁺ - c⁻.
double sim_score(const std::vector<Embedding>& expert_outputs, const Vector& gate, const Vector& direction);

/// Mean gate over topk minus mean gate over the other experts.
double routing_sharpness(const Vector& gate, std::span<const std::size_t> topk, std::size_t num_experts);

struct CategoryVariance {
    double raw = 0.0;
    double scaled = 0.0;  ///< raw * kVarianceReportScale
};

/// Per category: (1/E)·Σ_i sample-variance over samples of gate[i].
std::map<std::string, CategoryVariance> routing_variance(
    const std::map<std::string, std::vector<Vector>>& gates_by_category);

struct RoutingRecord {
    std::string category;
    std::vector<std::size_t> topk;
};

/// Categories (sorted) x experts matrix of Top-K selection frequencies.
struct SelectionHeatmap {
    std::vector<std::string> categories;
    Matrix frequency;
};

SelectionHeatmap selection_heatmap(const std::vector<RoutingRecord>& decisions, std::size_t num_experts);

void write_heatmap_csv(const SelectionHeatmap& heatmap, const std::filesystem::path& path);
SelectionHeatmap read_heatmap_csv(const std::filesystem::path& path);

/// Everything gathered from one pass over a dataset.
struct RoutingDiagnostics {
    double sim = 0.0;        ///< mean over samples
    double sharpness = 0.0;  ///< mean over samples
    double variance_raw = 0.0;     ///< mean over categories
    double variance_scaled = 0.0;
    std::map<std::string, double> sharpness_by_category;
    std::map<std::string, double> sim_by_category;
    std::map<std::string, CategoryVariance> variance_by_category;
    SelectionHeatmap heatmap;
};

/// Per-sample routing observations accumulated by evaluation.
struct RoutingObservation {
    std::string category;
    Vector gate;  ///< full-length routing gate
    std::vector<std::size_t> topk;
    double sim = 0.0;
};

RoutingDiagnostics summarize_routing(const std::vector<RoutingObservation>& observations, std::size_t num_experts);

/// diagnostics.csv: one row per category plus an "overall" row.
void write_diagnostics_csv(const RoutingDiagnostics& diag, const std::string& run_id,
                           const std::filesystem::path& path);

}  // namespace cogr
