// SPDX-License-Identifier: Apache-2.0
#include "cogr/diagnostics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace cogr {

double sim_score(const std::vector<Embedding>& expert_outputs, const Vector& gate, const Vector& direction) {
    if (expert_outputs.size() != gate.size() || gate.empty()) {
        fail(ErrorCode::shape, "sim_score: gate and expert outputs misaligned");
    }
    Embedding pooled(expert_outputs[0].size(), 0.0);
    for (std::size_t k = 0; k < gate.size(); ++k) {
        if (expert_outputs[k].size() != pooled.size()) fail(ErrorCode::shape, "sim_score: ragged expert outputs");
        for (std::size_t i = 0; i < pooled.size(); ++i) pooled[i] += gate[k] * expert_outputs[k][i];
    }
    return cosine(pooled, direction);
}

double routing_sharpness(const Vector& gate, std::span<const std::size_t> topk, std::size_t num_experts) {
    if (gate.size() != num_experts) fail(ErrorCode::shape, "routing_sharpness: gate length != E");
    if (topk.empty() || topk.size() > num_experts) fail(ErrorCode::invalid_k, "routing_sharpness: bad Top-K size");
    if (topk.size() == num_experts) {
        fail(ErrorCode::undefined_sharpness, "routing_sharpness: K = E leaves no unselected experts");
    }
    std::vector<bool> selected(num_experts, false);
    for (std::size_t i : topk) {
        if (i >= num_experts) fail(ErrorCode::invalid_expert, "routing_sharpness: expert index out of range");
        selected[i] = true;
    }
    double in = 0.0;
    double out = 0.0;
    for (std::size_t i = 0; i < num_experts; ++i) (selected[i] ? in : out) += gate[i];
    const auto k = static_cast<double>(topk.size());
    return in / k - out / (static_cast<double>(num_experts) - k);
}

std::map<std::string, CategoryVariance> routing_variance(
    const std::map<std::string, std::vector<Vector>>& gates_by_category) {
    std::map<std::string, CategoryVariance> out;
    for (const auto& [category, gates] : gates_by_category) {
        if (gates.size() < 2) {
            fail(ErrorCode::insufficient_samples,
                 "routing_variance: category '" + category + "' has fewer than 2 samples");
        }
        const std::size_t e = gates[0].size();
        const auto n = static_cast<double>(gates.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < e; ++i) {
            double mean = 0.0;
            for (const auto& g : gates) {
                if (g.size() != e) fail(ErrorCode::shape, "routing_variance: ragged gates");
                mean += g[i];
            }
            mean /= n;
            double ss = 0.0;
            for (const auto& g : gates) ss += (g[i] - mean) * (g[i] - mean);
            acc += ss / (n - 1.0);
        }
        const double raw = acc / static_cast<double>(e);
        out[category] = {raw, raw * kVarianceReportScale};
    }
    return out;
}

SelectionHeatmap selection_heatmap(const std::vector<RoutingRecord>& decisions, std::size_t num_experts) {
    if (decisions.empty()) fail(ErrorCode::invalid_input, "selection_heatmap: empty decision log");
    std::set<std::string> cats;
    for (const auto& d : decisions) cats.insert(d.category);
    SelectionHeatmap hm;
    hm.categories.assign(cats.begin(), cats.end());
    hm.frequency = Matrix(hm.categories.size(), num_experts);
    std::vector<double> counts(hm.categories.size(), 0.0);
    for (const auto& d : decisions) {
        const auto row = static_cast<std::size_t>(
            std::lower_bound(hm.categories.begin(), hm.categories.end(), d.category) - hm.categories.begin());
        counts[row] += 1.0;
        for (std::size_t i : d.topk) {
            if (i >= num_experts) fail(ErrorCode::invalid_expert, "selection_heatmap: expert index out of range");
            hm.frequency(row, i) += 1.0;
        }
    }
    for (std::size_t r = 0; r < hm.categories.size(); ++r) {
        for (std::size_t c = 0; c < num_experts; ++c) hm.frequency(r, c) /= counts[r];
    }
    return hm;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_heatmap_csv(const SelectionHeatmap& heatmap, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write " + path.string());
    out << "category";
    for (std::size_t c = 0; c < heatmap.frequency.cols(); ++c) out << ",expert_" << c;
    out << '\n';
    for (std::size_t r = 0; r < heatmap.categories.size(); ++r) {
        out << heatmap.categories[r];
        for (std::size_t c = 0; c < heatmap.frequency.cols(); ++c) out << ',' << fmt_double(heatmap.frequency(r, c));
        out << '\n';
    }
}

SelectionHeatmap read_heatmap_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(ErrorCode::parse, path.string() + ": missing header");
    const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
    SelectionHeatmap hm;
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        hm.categories.push_back(cell);
        std::size_t n = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                values.push_back(std::stod(cell));
            } catch (const std::exception&) {
                fail(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
            ++n;
        }
        if (n != cols) fail(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": wrong column count");
    }
    hm.frequency = Matrix(hm.categories.size(), cols, std::move(values));
    return hm;
}

RoutingDiagnostics summarize_routing(const std::vector<RoutingObservation>& observations, std::size_t num_experts) {
    if (observations.empty()) fail(ErrorCode::invalid_input, "summarize_routing: no observations");
    RoutingDiagnostics diag;
    std::map<std::string, std::vector<Vector>> gates;
    std::map<std::string, std::pair<double, double>> sharp_acc;
    std::map<std::string, double> sim_acc;
    std::vector<RoutingRecord> records;
    const bool sharp_defined = observations.front().topk.size() < num_experts;
    for (const auto& o : observations) {
        gates[o.category].push_back(o.gate);
        records.push_back({o.category, o.topk});
        auto& acc = sharp_acc[o.category];
        acc.second += 1.0;
        sim_acc[o.category] += o.sim;
        diag.sim += o.sim;
        if (sharp_defined) {
            const double s = routing_sharpness(o.gate, o.topk, num_experts);
            acc.first += s;
            diag.sharpness += s;
        }
    }
    const auto n = static_cast<double>(observations.size());
    diag.sim /= n;
    diag.sharpness /= n;
    for (const auto& [cat, acc] : sharp_acc) {
        diag.sharpness_by_category[cat] = acc.first / acc.second;
        diag.sim_by_category[cat] = sim_acc[cat] / acc.second;
    }
    // Singleton categories carry no spread information; skip them.
    std::map<std::string, std::vector<Vector>> usable;
    for (auto& [cat, g] : gates) {
        if (g.size() >= 2) usable.emplace(cat, std::move(g));
    }
    if (!usable.empty()) {
        diag.variance_by_category = routing_variance(usable);
        for (const auto& [cat, v] : diag.variance_by_category) diag.variance_raw += v.raw;
        diag.variance_raw /= static_cast<double>(diag.variance_by_category.size());
        diag.variance_scaled = diag.variance_raw * kVarianceReportScale;
    }
    diag.heatmap = selection_heatmap(records, num_experts);
    return diag;
}

void write_diagnostics_csv(const RoutingDiagnostics& diag, const std::string& run_id,
                           const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write " + path.string());
    out << "run_id,category,sharpness,variance_raw,variance_x10,sim_mean\n";
    for (const auto& [cat, sharp] : diag.sharpness_by_category) {
        auto it = diag.variance_by_category.find(cat);
        const CategoryVariance v = it == diag.variance_by_category.end() ? CategoryVariance{} : it->second;
        out << run_id << ',' << cat << ',' << fmt_double(sharp) << ',' << fmt_double(v.raw) << ','
            << fmt_double(v.scaled) << ',' << fmt_double(diag.sim_by_category.at(cat)) << '\n';
    }
    out << run_id << ",overall," << fmt_double(diag.sharpness) << ',' << fmt_double(diag.variance_raw) << ','
        << fmt_double(diag.variance_scaled) << ',' << fmt_double(diag.sim) << '\n';
}

}  // namespace cogr
