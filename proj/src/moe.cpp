// SPDX-License-Identifier: Apache-2.0
#include "cogr/moe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>

namespace cogr {

using nlohmann::json;

void validate_dims(const ModelDims& dims) {
    if (dims.d == 0 || dims.experts == 0 || dims.hidden == 0) {
        fail(ErrorCode::invalid_input, "model dims must be positive");
    }
    if (dims.top_k < 1 || dims.top_k > dims.experts) {
        fail(ErrorCode::invalid_k, "top_k must lie in [1, experts], got " + std::to_string(dims.top_k));
    }
}

Model zeros_like(const ModelDims& dims) {
    validate_dims(dims);
    Model m;
    m.dims = dims;
    m.router.gating = Matrix(dims.d, dims.experts);
    m.router.semantic = Matrix(dims.d, dims.experts);
    m.experts.blocks.resize(dims.experts);
    for (auto& b : m.experts.blocks) {
        b.w1 = Matrix(dims.d, dims.hidden);
        b.b1.assign(dims.hidden, 0.0);
        b.w2 = Matrix(dims.hidden, dims.d);
        b.b2.assign(dims.d, 0.0);
    }
    return m;
}

Model init_model(const ModelDims& dims, Rng& rng) {
    Model m = zeros_like(dims);
    auto fill = [&rng](Matrix& w) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(w.rows()));
        for (auto& v : w.values()) v = scale * rng.normal();
    };
    fill(m.router.gating);
    fill(m.router.semantic);
    for (auto& b : m.experts.blocks) {
        fill(b.w1);
        fill(b.w2);
    }
    return m;
}

std::vector<TensorView> Model::tensors() {
    std::vector<TensorView> out;
    out.push_back({"router.gating", router.gating.values()});
    out.push_back({"router.semantic", router.semantic.values()});
    for (std::size_t i = 0; i < experts.blocks.size(); ++i) {
        auto& b = experts.blocks[i];
        const std::string p = "experts." + std::to_string(i) + ".";
        out.push_back({p + "w1", b.w1.values()});
        out.push_back({p + "b1", b.b1});
        out.push_back({p + "w2", b.w2.values()});
        out.push_back({p + "b2", b.b2});
    }
    return out;
}

std::vector<ConstTensorView> Model::tensors() const {
    std::vector<ConstTensorView> out;
    for (auto& t : const_cast<Model*>(this)->tensors()) out.push_back({t.name, t.values});
    return out;
}

std::size_t Model::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.values.size();
    return n;
}

std::vector<double> flatten(const Model& model) {
    std::vector<double> flat;
    flat.reserve(model.parameter_count());
    for (const auto& t : model.tensors()) flat.insert(flat.end(), t.values.begin(), t.values.end());
    return flat;
}

void unflatten(std::span<const double> flat, Model& model) {
    if (flat.size() != model.parameter_count()) fail(ErrorCode::shape, "unflatten: parameter count mismatch");
    std::size_t offset = 0;
    for (auto& t : model.tensors()) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(offset), t.values.size(), t.values.begin());
        offset += t.values.size();
    }
}

Vector base_logits(const Embedding& x, const RouterParams& router) { return vec_mat(x, router.gating); }

Vector semantic_direction(const Embedding& positive, const Embedding& negative, const RouterParams& router) {
    return vec_mat(sub(positive, negative), router.semantic);
}

std::pair<Vector, Vector> teacher_gate(const Vector& z_base, const Vector& s_a, double lambda_a) {
    if (!(lambda_a >= 0.0)) fail(ErrorCode::invalid_input, "teacher_gate: lambda_a must be >= 0");
    if (z_base.size() != s_a.size()) fail(ErrorCode::shape, "teacher_gate: logit length mismatch");
    Vector logits = z_base;
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += lambda_a * s_a[i];
    Vector gate = softmax(logits);
    return {std::move(logits), std::move(gate)};
}

Vector student_gate(const Vector& z_base) { return softmax(z_base); }

std::vector<std::size_t> select_topk(const Vector& gate, std::size_t k) {
    if (k < 1 || k > gate.size()) {
        fail(ErrorCode::invalid_k, "select_topk: K=" + std::to_string(k) + " outside [1, " +
                                       std::to_string(gate.size()) + "]");
    }
    std::vector<std::size_t> order(gate.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&gate](std::size_t a, std::size_t b) {
                          if (gate[a] != gate[b]) return gate[a] > gate[b];
                          return a < b;
                      });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

Embedding expert_output(const Embedding& x, const ExpertBlock& expert) {
    Vector hidden = vec_mat(x, expert.w1);
    for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = std::tanh(hidden[i] + expert.b1[i]);
    Vector out = vec_mat(hidden, expert.w2);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += expert.b2[i];
    return out;
}

std::vector<Embedding> expert_forward(const Embedding& x, const ExpertParams& experts,
                                      std::span<const std::size_t> topk) {
    std::vector<Embedding> outs;
    outs.reserve(topk.size());
    for (std::size_t i : topk) {
        if (i >= experts.blocks.size()) {
            fail(ErrorCode::invalid_expert, "expert_forward: expert " + std::to_string(i) + " does not exist");
        }
        outs.push_back(expert_output(x, experts.blocks[i]));
    }
    return outs;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto& dims = ckpt.model.dims;
    json j;
    j["format"] = "cogr-moe-checkpoint";
    j["version"] = 1;
    j["dims"] = {{"d", dims.d}, {"E", dims.experts}, {"K", dims.top_k}, {"hidden", dims.hidden}};
    j["config_hash"] = ckpt.config_hash;
    j["config"] = ckpt.config_json.empty() ? json(nullptr) : json::parse(ckpt.config_json);
    json tensors = json::object();
    for (const auto& t : ckpt.model.tensors()) {
        tensors[t.name] = std::vector<double>(t.values.begin(), t.values.end());
    }
    j["tensors"] = std::move(tensors);
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
    if (!out) fail(ErrorCode::io, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open checkpoint " + path.string());
    json j;
    try {
        j = json::parse(in);
        Checkpoint ckpt;
        ModelDims dims;
        const auto& jd = j.at("dims");
        dims.d = jd.at("d").get<std::size_t>();
        dims.experts = jd.at("E").get<std::size_t>();
        dims.top_k = jd.at("K").get<std::size_t>();
        dims.hidden = jd.at("hidden").get<std::size_t>();
        ckpt.model = zeros_like(dims);
        const auto& jt = j.at("tensors");
        for (auto& t : ckpt.model.tensors()) {
            const auto values = jt.at(t.name).get<std::vector<double>>();
            if (values.size() != t.values.size()) {
                fail(ErrorCode::consistency, "checkpoint tensor " + t.name + " has " +
                                                 std::to_string(values.size()) + " values, expected " +
                                                 std::to_string(t.values.size()));
            }
            std::copy(values.begin(), values.end(), t.values.begin());
        }
        ckpt.config_hash = j.value("config_hash", std::string{});
        if (j.contains("config") && !j["config"].is_null()) ckpt.config_json = j["config"].dump();
        return ckpt;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, "checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace cogr
