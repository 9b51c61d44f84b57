// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cogr/diagnostics.hpp"
#include "cogr/losses.hpp"
#include "cogr/moe.hpp"
#include "cogr/objective.hpp"
#include "cogr/option_scoring.hpp"
#include "cogr/sample.hpp"

namespace cogr {

/// Component switches. Each removes one mechanism; see objective_options().
struct Ablations {
    bool no_sa = false;          ///< no answer direction in the teacher logits
    bool no_sj = false;          ///< no option directions in the option gates
    bool no_unc = false;         ///< uniform option weights
    bool no_contrast = false;    ///< drop the contrastive term
    bool no_distill = false;     ///< drop the distillation term
    bool prompt_only = false;    ///< train without cues; inference unchanged
    bool only_variance = false;  ///< uncertainty from variance alone

    bool operator==(const Ablations&) const = default;
};

inline constexpr const char* kAblationNames[] = {"no_sa",      "no_sj",       "no_unc",       "no_contrast",
                                                 "no_distill", "prompt_only", "only_variance"};

/// Sets the named flag; throws usage on an unknown name.
void set_ablation(Ablations& ablations, const std::string& name);
/// Comma-separated list, e.g. "no_sa,no_contrast".
void apply_ablation_list(Ablations& ablations, const std::string& list);

struct TrainConfig {
    // Model.
    std::size_t d = 32;
    std::size_t E = 8;
    std::size_t K = 2;
    std::size_t hidden = 32;
    std::size_t option_count = 4;
    // Mechanism.
    double lambda_a = 0.5;
    double lambda_o = 0.5;
    double lambda_c = 0.3;
    double temperature = 5.0;
    CeMode ce_mode = CeMode::per_option_binary;
    // Optimization.
    double lr = 1e-4;
    double lr_min = 1e-6;
    std::size_t warmup_steps = 100;
    std::size_t total_steps = 2000;
    std::size_t batch = 32;
    double grad_clip_norm = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.01;
    // Cues.
    double unc_threshold = 0.5;
    int max_regen_rounds = 3;
    // Synthetic data.
    std::size_t concepts = 8;
    std::size_t train_size = 2000;
    std::size_t eval_size = 500;
    std::size_t styles = 4;     ///< nuisance clusters mixed into every input
    double style_scale = 0.75;  ///< nuisance norm relative to a concept centroid
    double input_noise = 1.0;
    double text_noise = 0.5;
    double cue_noise = 0.75;
    std::size_t variant_count = 4;
    std::string cue_prompt = "full";  ///< "full" or "minimal" (noisier cues)
    // Bookkeeping.
    std::size_t eval_every = 100;
    std::uint64_t seed = 0;
    Ablations ablations;

    ModelDims dims() const { return {d, E, K, hidden}; }
    bool operator==(const TrainConfig&) const = default;
};

/// Throws usage naming the offending field.
void validate_config(const TrainConfig& cfg);

std::string config_to_json(const TrainConfig& cfg);
/// Unknown or mistyped fields are a usage error naming the field.
TrainConfig config_from_json(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);
/// FNV-1a 64 over the canonical JSON serialization, as 16 hex digits.
std::string config_hash(const TrainConfig& cfg);

ObjectiveOptions objective_options(const TrainConfig& cfg);
RoutingOptions routing_options(const TrainConfig& cfg);

struct Dataset {
    std::size_t dim = 0;
    std::vector<Sample> samples;

    bool operator==(const Dataset&) const = default;
};

struct GeneratedData {
    Dataset train;
    Dataset eval;
    std::size_t options_scored = 0;
    std::size_t options_regenerated = 0;
};

/// Concept-cluster multiple-choice task. Concept centroids are random
/// directions of norm sqrt(d); each sample's input lies near one centroid
/// plus one of `styles` shared nuisance offsets, the correct option's text and
/// cues near the same centroid and the distractors near other centroids.
/// Correct positions are balanced across the option slots.
GeneratedData generate_dataset(const TrainConfig& cfg, std::uint64_t seed);

/// Recomputes every option's agreement/variance/uncertainty for `cfg`
/// (the only_variance switch changes the scoring rule).
void rescore_cues(Dataset& data, const TrainConfig& cfg);

/// <dir>/<split>.jsonl holds the samples, <dir>/<split>_cues.jsonl the cues.
void save_dataset(const Dataset& data, const std::filesystem::path& dir, const std::string& split);
/// With `require_cues` a missing cue file or entry raises missing_cue.
Dataset load_dataset(const std::filesystem::path& dir, const std::string& split, bool require_cues);

/// Linear warmup to cfg.lr, then cosine decay to cfg.lr_min at total_steps.
double lr_at(std::size_t step, const TrainConfig& cfg);

struct TrainState {
    Model model;
    Model first_moment;
    Model second_moment;
    std::size_t updates = 0;
};

TrainState init_train_state(const TrainConfig& cfg);

struct StepResult {
    LossBreakdown loss;
    double grad_norm = 0.0;     ///< before clipping
    double clipped_norm = 0.0;  ///< after clipping
    double lr = 0.0;
    std::size_t correct = 0;
};

/// Raised when a step produces a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, LossBreakdown loss);
    std::size_t step() const noexcept { return step_; }
    const LossBreakdown& loss() const noexcept { return loss_; }

private:
    std::size_t step_;
    LossBreakdown loss_;
};

/// Scales `grads` in place so its global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(Model& grads, double max_norm);

/// One AdamW update with the learning rate lr_at(step).
StepResult train_step(TrainState& state, std::span<const Sample* const> batch, const TrainConfig& cfg,
                      std::size_t step);

struct EvalMetrics {
    double accuracy = 0.0;
    double sim = 0.0;
    std::size_t count = 0;
    RoutingDiagnostics diagnostics;
};

/// Scores every sample in `mode`. Sim uses the mode's Top-K gate and the
/// correct option's cue difference; samples without cues are left out of Sim.
EvalMetrics evaluate(const Model& model, const Dataset& data, RoutingMode mode, const TrainConfig& cfg);

/// Per-step metrics row. Evaluation columns are empty except on eval steps.
struct MetricsRow {
    std::size_t step = 0;
    double lr = 0.0;
    LossBreakdown loss;
    double train_acc = 0.0;
    std::optional<double> eval_acc_teacher;
    std::optional<double> eval_acc_student;
    std::optional<double> sim;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

struct TrainResult {
    TrainState state;
    std::vector<MetricsRow> history;
    EvalMetrics initial_student;
    EvalMetrics final_teacher;
    EvalMetrics final_student;
};

/// Full training run: seeded init, shuffled epochs of cfg.batch samples,
/// cfg.total_steps updates. `on_row` sees every metrics row as it is made.
TrainResult train(const TrainConfig& cfg, const Dataset& train_data, const Dataset& eval_data,
                  const std::function<void(const MetricsRow&)>& on_row = {});

struct SweepRow {
    std::size_t n = 0;
    std::size_t k = 0;
    double acc = 0.0;  ///< held-out student accuracy, percent
    double sim = 0.0;
    std::string status;  ///< "ok" or "failed: <reason>"
};

/// One fresh seeded run per (n, K) pair of the two grids.
std::vector<SweepRow> sweep(std::span<const std::size_t> n_values, std::span<const std::size_t> k_values,
                            const TrainConfig& cfg);

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

}  // namespace cogr
