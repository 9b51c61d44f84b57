// SPDX-License-Identifier: Apache-2.0
#include "cogr/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <ostream>
#include <sstream>

namespace cogr {

using nlohmann::json;

namespace {

// Centroids have norm sqrt(d), i.e. unit per-coordinate scale, which is the
// scale the 1/sqrt(d) weight init preserves.
Embedding concept_centroid(std::size_t d, Rng& rng) {
    Embedding v;
    double n = 0.0;
    do {
        v = rng.normal_vector(d);
        n = norm2(v);
    } while (!(n > 1e-12));
    return scaled(v, std::sqrt(static_cast<double>(d)) / n);
}

// Per-coordinate noise; `relative` is the noise norm as a fraction of the
// centroid norm.
Embedding jitter(const Embedding& center, double relative, Rng& rng) {
    return add(center, rng.normal_vector(center.size(), relative));
}

}  // namespace

GeneratedData generate_dataset(const TrainConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    if (cfg.option_count > cfg.concepts) {
        fail(ErrorCode::insufficient_concepts, "option_count " + std::to_string(cfg.option_count) +
                                                   " exceeds the " + std::to_string(cfg.concepts) + " concepts");
    }
    Rng rng(seed);
    std::vector<Embedding> centroids;
    std::vector<Embedding> negatives;
    std::vector<Embedding> styles;
    for (std::size_t c = 0; c < cfg.concepts; ++c) centroids.push_back(concept_centroid(cfg.d, rng));
    for (std::size_t c = 0; c < cfg.concepts; ++c) negatives.push_back(concept_centroid(cfg.d, rng));
    for (std::size_t q = 0; q < cfg.styles; ++q) {
        styles.push_back(scaled(concept_centroid(cfg.d, rng), cfg.style_scale));
    }

    const double cue_sigma = cfg.cue_noise * (cfg.cue_prompt == "minimal" ? 2.0 : 1.0);
    const bool use_agreement = !cfg.ablations.only_variance;

    GeneratedData out;
    auto make_split = [&](const std::string& split, std::size_t count) {
        Dataset ds;
        ds.dim = cfg.d;
        std::vector<std::size_t> slots(count);
        for (std::size_t i = 0; i < count; ++i) slots[i] = i % cfg.option_count;
        rng.shuffle(slots);
        for (std::size_t i = 0; i < count; ++i) {
            Sample s;
            s.id = split + "-" + std::to_string(i);
            const std::size_t concept_id = rng.uniform_index(cfg.concepts);
            s.category = "concept_" + std::to_string(concept_id);
            const std::size_t style = rng.uniform_index(cfg.styles);
            s.input = jitter(add(centroids[concept_id], styles[style]), cfg.input_noise, rng);
            s.correct = slots[i];

            std::vector<std::size_t> others;
            for (std::size_t c = 0; c < cfg.concepts; ++c) {
                if (c != concept_id) others.push_back(c);
            }
            rng.shuffle(others);
            std::vector<std::size_t> option_concepts;
            std::size_t next = 0;
            for (std::size_t j = 0; j < cfg.option_count; ++j) {
                option_concepts.push_back(j == s.correct ? concept_id : others[next++]);
            }

            for (std::size_t j = 0; j < cfg.option_count; ++j) {
                const std::size_t oc = option_concepts[j];
                AnswerOption opt;
                opt.text = jitter(centroids[oc], cfg.text_noise, rng);
                auto draw = [&](int) {
                    return synthesize_cues(centroids[oc], negatives[oc], cue_sigma, cfg.variant_count, rng);
                };
                const auto regen = regenerate_if_uncertain(draw(0), s.input, cfg.unc_threshold, draw,
                                                           cfg.max_regen_rounds, use_agreement);
                ++out.options_scored;
                if (regen.rounds > 0) ++out.options_regenerated;
                opt.cues = regen.cues;
                s.options.push_back(std::move(opt));
            }
            ds.samples.push_back(std::move(s));
        }
        return ds;
    };
    out.train = make_split("train", cfg.train_size);
    out.eval = make_split("eval", cfg.eval_size);
    return out;
}

void rescore_cues(Dataset& data, const TrainConfig& cfg) {
    const bool use_agreement = !cfg.ablations.only_variance;
    for (auto& s : data.samples) {
        for (auto& opt : s.options) {
            if (opt.cues) score_cues(*opt.cues, s.input, use_agreement);
        }
    }
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir, const std::string& split) {
    std::filesystem::create_directories(dir);
    const auto sample_path = dir / (split + ".jsonl");
    std::ofstream out(sample_path);
    if (!out) fail(ErrorCode::io, "cannot write " + sample_path.string());
    out << json{{"dim", data.dim}, {"version", 1}, {"split", split}, {"count", data.samples.size()}}.dump() << '\n';
    CueTable cues;
    cues.dim = data.dim;
    for (const auto& s : data.samples) {
        json options = json::array();
        for (const auto& o : s.options) options.push_back(o.text);
        out << json{{"id", s.id},
                    {"category", s.category},
                    {"input", s.input},
                    {"options", options},
                    {"correct", s.correct}}
                   .dump()
            << '\n';
        for (std::size_t j = 0; j < s.options.size(); ++j) {
            if (s.options[j].cues) cues.entries[{s.id, static_cast<int>(j)}] = *s.options[j].cues;
        }
    }
    if (!out) fail(ErrorCode::io, "failed writing " + sample_path.string());
    save_cue_table(cues, dir / (split + "_cues.jsonl"));
}

Dataset load_dataset(const std::filesystem::path& dir, const std::string& split, bool require_cues) {
    const auto sample_path = dir / (split + ".jsonl");
    std::ifstream in(sample_path);
    if (!in) fail(ErrorCode::io, "cannot open " + sample_path.string());
    Dataset ds;
    std::string text;
    std::size_t line = 0;
    bool header = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        const std::string where = sample_path.string() + ":" + std::to_string(line);
        try {
            const json j = json::parse(text);
            if (!header) {
                ds.dim = j.at("dim").get<std::size_t>();
                header = true;
                continue;
            }
            Sample s;
            s.id = j.at("id").get<std::string>();
            s.category = j.at("category").get<std::string>();
            s.input = j.at("input").get<Embedding>();
            for (const auto& o : j.at("options")) s.options.push_back({o.get<Embedding>(), std::nullopt});
            s.correct = j.at("correct").get<std::size_t>();
            ds.samples.push_back(std::move(s));
        } catch (const json::exception& e) {
            fail(ErrorCode::parse, where + ": " + e.what());
        }
        try {
            validate_sample(ds.samples.back(), ds.dim);
        } catch (const Error& e) {
            fail(ErrorCode::consistency, where + ": " + e.what());
        }
    }
    if (!header) fail(ErrorCode::parse, sample_path.string() + ": missing header record");

    const auto cue_path = dir / (split + "_cues.jsonl");
    if (!std::filesystem::exists(cue_path)) {
        if (require_cues) fail(ErrorCode::missing_cue, "missing cue file " + cue_path.string());
        return ds;
    }
    const CueTable table = load_cue_table(cue_path);
    if (table.dim != ds.dim && !table.entries.empty()) {
        fail(ErrorCode::consistency, cue_path.string() + ": cue dimension differs from sample dimension");
    }
    for (auto& s : ds.samples) {
        for (std::size_t j = 0; j < s.options.size(); ++j) {
            const CueSet* c = table.find(s.id, static_cast<int>(j));
            if (c) {
                s.options[j].cues = *c;
            } else if (require_cues) {
                fail(ErrorCode::missing_cue,
                     "missing cues for (sample " + s.id + ", option " + std::to_string(j) + ")");
            }
        }
    }
    return ds;
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
    if (step < cfg.warmup_steps) {
        return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    }
    if (step >= cfg.total_steps) return cfg.lr_min;
    const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    const double progress = static_cast<double>(step - cfg.warmup_steps) / span;
    return cfg.lr_min + 0.5 * (cfg.lr - cfg.lr_min) * (1.0 + std::cos(M_PI * progress));
}

TrainState init_train_state(const TrainConfig& cfg) {
    validate_config(cfg);
    Rng rng(cfg.seed);
    TrainState st;
    st.model = init_model(cfg.dims(), rng);
    st.first_moment = zeros_like(cfg.dims());
    st.second_moment = zeros_like(cfg.dims());
    return st;
}

namespace {

std::string describe(const LossBreakdown& l) {
    std::ostringstream os;
    os << "main=" << l.main << " contrast=" << l.contrast << " distill=" << l.distill << " total=" << l.total;
    return os.str();
}

}  // namespace

DivergenceError::DivergenceError(std::size_t step, LossBreakdown loss)
    : Error(ErrorCode::divergence, "non-finite loss at step " + std::to_string(step) + " (" + describe(loss) + ")"),
      step_(step),
      loss_(std::move(loss)) {}

double clip_global_norm(Model& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& t : std::as_const(grads).tensors()) {
        for (double g : t.values) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double factor = max_norm / norm;
        for (auto& t : grads.tensors()) {
            for (double& g : t.values) g *= factor;
        }
    }
    return norm;
}

StepResult train_step(TrainState& state, std::span<const Sample* const> batch, const TrainConfig& cfg,
                      std::size_t step) {
    StepResult res;
    res.lr = lr_at(step, cfg);
    BatchGradient bg = batch_gradient(state.model, batch, objective_options(cfg));
    res.loss = std::move(bg.loss);
    res.correct = bg.correct;
    if (!std::isfinite(res.loss.total) || !std::isfinite(res.loss.main) || !std::isfinite(res.loss.contrast) ||
        !std::isfinite(res.loss.distill)) {
        throw DivergenceError(step, res.loss);
    }
    res.grad_norm = clip_global_norm(bg.grad, cfg.grad_clip_norm);
    res.clipped_norm = std::min(res.grad_norm, cfg.grad_clip_norm);

    ++state.updates;
    const double t = static_cast<double>(state.updates);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    auto params = state.model.tensors();
    auto m = state.first_moment.tensors();
    auto v = state.second_moment.tensors();
    const auto grads = std::as_const(bg.grad).tensors();
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto p = params[k].values;
        auto mk = m[k].values;
        auto vk = v[k].values;
        auto g = grads[k].values;
        for (std::size_t i = 0; i < p.size(); ++i) {
            mk[i] = cfg.beta1 * mk[i] + (1.0 - cfg.beta1) * g[i];
            vk[i] = cfg.beta2 * vk[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = mk[i] / bc1;
            const double vhat = vk[i] / bc2;
            p[i] -= res.lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * p[i]);
        }
    }
    return res;
}

EvalMetrics evaluate(const Model& model, const Dataset& data, RoutingMode mode, const TrainConfig& cfg) {
    if (data.samples.empty()) fail(ErrorCode::invalid_input, "evaluate: empty dataset");
    const RoutingOptions opts = routing_options(cfg);
    EvalMetrics em;
    std::vector<RoutingObservation> observations;
    observations.reserve(data.samples.size());
    std::size_t correct = 0;
    std::size_t sim_count = 0;
    for (const auto& s : data.samples) {
        const SampleScoring sc = score_all_options(s, model, mode, opts);
        if (predict(sc.scores()) == s.correct) ++correct;
        RoutingObservation obs;
        obs.category = s.category;
        obs.gate = mode == RoutingMode::teacher ? sc.routing.teacher_gate : sc.routing.student_gate;
        obs.topk = sc.routing.topk;
        if (const auto& cues = s.options[s.correct].cues) {
            obs.sim = sim_score(sc.expert_outputs, sc.topk_gate, sub(cues->positive, cues->negative));
            em.sim += obs.sim;
            ++sim_count;
        }
        observations.push_back(std::move(obs));
    }
    em.count = data.samples.size();
    em.accuracy = static_cast<double>(correct) / static_cast<double>(em.count);
    if (sim_count > 0) em.sim /= static_cast<double>(sim_count);
    em.diagnostics = summarize_routing(observations, model.dims.experts);
    em.diagnostics.sim = em.sim;
    return em;
}

namespace {

std::string csv_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string csv_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_optional(const std::optional<double>& v) { return v ? csv_number(*v) : std::string{}; }

}  // namespace

void write_metrics_header(std::ostream& out) {
    out << "step,lr,L_main,L_contrast,L_distill,L_total,train_acc,eval_acc_teacher,eval_acc_student,sim\n";
}

void write_metrics_row(std::ostream& out, const MetricsRow& r) {
    out << r.step << ',' << csv_number(r.lr) << ',' << csv_number(r.loss.main) << ','
        << csv_number(r.loss.contrast) << ',' << csv_number(r.loss.distill) << ',' << csv_number(r.loss.total)
        << ',' << csv_number(r.train_acc) << ',' << csv_optional(r.eval_acc_teacher) << ','
        << csv_optional(r.eval_acc_student) << ',' << csv_optional(r.sim) << '\n';
}

TrainResult train(const TrainConfig& cfg, const Dataset& train_data, const Dataset& eval_data,
                  const std::function<void(const MetricsRow&)>& on_row) {
    validate_config(cfg);
    if (train_data.samples.empty()) fail(ErrorCode::invalid_input, "train: empty training set");
    Dataset train_set = train_data;
    Dataset eval_set = eval_data;
    rescore_cues(train_set, cfg);
    rescore_cues(eval_set, cfg);
    const bool eval_has_cues = !eval_set.samples.empty() &&
                               std::all_of(eval_set.samples.begin(), eval_set.samples.end(), [](const Sample& s) {
                                   return std::all_of(s.options.begin(), s.options.end(),
                                                      [](const AnswerOption& o) { return o.cues.has_value(); });
                               });

    TrainResult result;
    result.state = init_train_state(cfg);
    if (!eval_set.samples.empty()) {
        result.initial_student = evaluate(result.state.model, eval_set, RoutingMode::student, cfg);
    }

    Rng order_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<std::size_t> order(train_set.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    order_rng.shuffle(order);
    std::size_t cursor = 0;

    std::vector<const Sample*> batch;
    result.history.reserve(cfg.total_steps);
    for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
        batch.clear();
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            if (cursor == order.size()) {
                order_rng.shuffle(order);
                cursor = 0;
            }
            batch.push_back(&train_set.samples[order[cursor++]]);
        }
        const StepResult sr = train_step(result.state, batch, cfg, step);

        MetricsRow row;
        row.step = step;
        row.lr = sr.lr;
        row.loss = sr.loss;
        row.train_acc = static_cast<double>(sr.correct) / static_cast<double>(batch.size());
        if (!eval_set.samples.empty() && (step % cfg.eval_every == 0 || step == cfg.total_steps)) {
            const auto student = evaluate(result.state.model, eval_set, RoutingMode::student, cfg);
            row.eval_acc_student = student.accuracy;
            row.sim = student.sim;
            if (eval_has_cues) {
                row.eval_acc_teacher = evaluate(result.state.model, eval_set, RoutingMode::teacher, cfg).accuracy;
            }
        }
        if (on_row) on_row(row);
        result.history.push_back(std::move(row));
    }

    if (!eval_set.samples.empty()) {
        result.final_student = evaluate(result.state.model, eval_set, RoutingMode::student, cfg);
        if (eval_has_cues) result.final_teacher = evaluate(result.state.model, eval_set, RoutingMode::teacher, cfg);
    }
    return result;
}

std::vector<SweepRow> sweep(std::span<const std::size_t> n_values, std::span<const std::size_t> k_values,
                            const TrainConfig& cfg) {
    if (n_values.empty() || k_values.empty()) fail(ErrorCode::usage, "sweep: empty grid");
    const GeneratedData data = generate_dataset(cfg, cfg.seed);
    std::vector<SweepRow> rows;
    for (std::size_t n : n_values) {
        for (std::size_t k : k_values) {
            SweepRow row{n, k, 0.0, 0.0, "ok"};
            try {
                TrainConfig cell = cfg;
                cell.E = n;
                cell.K = k;
                validate_config(cell);
                const TrainResult tr = train(cell, data.train, data.eval);
                row.acc = 100.0 * tr.final_student.accuracy;
                row.sim = tr.final_student.sim;
            } catch (const std::exception& e) {
                std::string why = e.what();
                std::replace(why.begin(), why.end(), ',', ';');
                std::replace(why.begin(), why.end(), '\n', ' ');
                row.status = "failed: " + why;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write " + path.string());
    out << "n,K,Acc,Sim,status\n";
    for (const auto& r : rows) {
        out << r.n << ',' << r.k << ',';
        if (r.status == "ok") out << csv_exact(r.acc) << ',' << csv_exact(r.sim);
        else out << ',';
        out << ',' << r.status << '\n';
    }
}

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "n,K,Acc,Sim,status") fail(ErrorCode::parse, path.string() + ": bad header");
    std::vector<SweepRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        for (int i = 0; i < 4 && std::getline(ss, cell, ','); ++i) cells.push_back(cell);
        std::getline(ss, cell);
        cells.push_back(cell);
        if (cells.size() != 5) fail(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": bad row");
        try {
            SweepRow r;
            r.n = std::stoul(cells[0]);
            r.k = std::stoul(cells[1]);
            r.status = cells[4];
            if (r.status == "ok") {
                r.acc = std::stod(cells[2]);
                r.sim = std::stod(cells[3]);
            } else if (r.status.rfind("failed", 0) != 0) {
                fail(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": bad status");
            }
            rows.push_back(std::move(r));
        } catch (const std::invalid_argument&) {
            fail(ErrorCode::parse, path.string() + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    return rows;
}

}  // namespace cogr
