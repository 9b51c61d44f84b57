// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. One line per criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cogr/gradcheck.hpp"
#include "cogr/trainer.hpp"
#include "support.hpp"

using namespace cogr;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("%s [%2d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool valid_distribution(const Vector& g) {
    double s = 0.0;
    for (double v : g) {
        if (!(v > 0.0)) return false;
        s += v;
    }
    return std::abs(s - 1.0) <= 1e-12;
}

ModelDims random_dims(Rng& rng, std::size_t max_d, std::size_t max_e, std::size_t max_k) {
    ModelDims d;
    d.d = 2 + rng.uniform_index(max_d - 1);
    d.experts = 2 + rng.uniform_index(max_e - 1);
    d.top_k = 1 + rng.uniform_index(std::min(max_k, d.experts));
    d.hidden = 2 + rng.uniform_index(max_d - 1);
    return d;
}

Outcome gating_validity() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    std::size_t bad = 0;
    std::size_t gates = 0;
    for (int t = 0; t < 1000; ++t) {
        const ModelDims dims = random_dims(rng, 16, 16, 16);
        const Model m = init_model(dims, rng);
        const Sample s = test::random_sample(rng, dims.d, 2 + rng.uniform_index(5));
        RoutingOptions opts;
        opts.lambda_a = rng.uniform(0, 2);
        opts.lambda_o = rng.uniform(0, 2);
        for (RoutingMode mode : {RoutingMode::teacher, RoutingMode::student}) {
            const SampleScoring sc = score_all_options(s, m, mode, opts);
            std::vector<const Vector*> all{&sc.routing.teacher_gate, &sc.routing.student_gate};
            for (const auto& o : sc.options) all.push_back(&o.gate);
            for (const Vector* g : all) {
                ++gates;
                if (!valid_distribution(*g)) ++bad;
            }
        }
    }
    const double secs = elapsed(t0);
    return {bad == 0 && secs < 1.0, fmt("%zu of %zu gates invalid, %.3f s (limit 1 s)", bad, gates, secs)};
}

Outcome injection_bound() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1002);
    std::size_t violations = 0;
    double worst_ratio = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t e = 2 + rng.uniform_index(15);
        const Vector z = rng.normal_vector(e, 2.0);
        const Vector s_a = rng.normal_vector(e, 2.0);
        for (double lambda : {0.1, 0.5, 1.0}) {
            const double gap = norm1(sub(teacher_gate(z, s_a, lambda).second, student_gate(z)));
            const double bound = 2.0 * lambda * norm_inf(s_a);
            worst_ratio = std::max(worst_ratio, gap / bound);
            if (gap > bound) ++violations;
        }
    }
    const double secs = elapsed(t0);
    return {violations == 0 && secs < 1.0,
            fmt("%zu violations in 3000 draws, max gap/bound %.3f, %.3f s", violations, worst_ratio, secs)};
}

Outcome shared_topk() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1003);
    std::size_t mismatches = 0;
    for (int t = 0; t < 1000; ++t) {
        const ModelDims dims = random_dims(rng, 12, 8, 4);
        const Model m = init_model(dims, rng);
        const Sample s = test::random_sample(rng, dims.d, 2 + rng.uniform_index(5));
        for (RoutingMode mode : {RoutingMode::teacher, RoutingMode::student}) {
            const RoutingOptions opts;
            const SampleScoring sc = score_all_options(s, m, mode, opts);
            // Every option must have been scored over this one set.
            const auto outs = expert_forward(s.input, m.experts, sc.routing.topk);
            for (std::size_t j = 0; j < s.options.size(); ++j) {
                if (sc.options[j].gate.size() != sc.routing.topk.size()) ++mismatches;
                else if (norm_inf(sub(aggregate(sc.options[j].gate, outs), sc.options[j].aggregated)) > 1e-12) {
                    ++mismatches;
                }
            }
            // Replacing every option's text and non-answer cues leaves the set unchanged.
            Sample changed = s;
            for (std::size_t j = 0; j < changed.options.size(); ++j) {
                changed.options[j].text = rng.normal_vector(dims.d);
                if (j != s.correct) changed.options[j].cues = test::random_cues(rng, s.input, dims.d);
            }
            if (score_all_options(changed, m, mode, opts).routing.topk != sc.routing.topk) ++mismatches;
        }
    }
    const double secs = elapsed(t0);
    return {mismatches == 0 && secs < 1.0, fmt("%zu mismatched sets over 2000 sample-modes, %.3f s", mismatches, secs)};
}

Outcome gradient_bound() {
    Rng rng(1004);
    std::size_t violations = 0;
    std::size_t checks = 0;
    for (int t = 0; t < 100; ++t) {
        const ModelDims dims = random_dims(rng, 8, 6, 3);
        const Model m = init_model(dims, rng);
        Sample s = test::random_sample(rng, dims.d, 2 + rng.uniform_index(4));
        for (auto& o : s.options) {
            o.cues->variance = rng.uniform(0, 20);
            o.cues->agreement = rng.uniform(0, 2);
            o.cues->uncertainty = uncertainty(*o.cues->agreement, *o.cues->variance);
        }
        ObjectiveOptions opts;
        opts.use_contrast = false;
        opts.use_distill = false;
        Tape tape;
        const ModelVars vars = record_parameters(tape, m);
        const SampleObjective so = record_sample_objective(tape, vars, m, s, opts);
        auto norms = [&] {
            Model g = zeros_like(dims);
            accumulate_gradients(tape, vars, g);
            std::vector<double> out;
            for (const auto& tv : g.tensors()) out.push_back(norm2(tv.values));
            return out;
        };
        tape.backward(so.main);
        const auto main = norms();
        std::vector<double> bound(main.size(), 0.0);
        for (Var ce : so.ce_terms) {
            tape.backward(ce);
            const auto n = norms();
            for (std::size_t k = 0; k < n.size(); ++k) bound[k] += n[k];
        }
        const double wmax = *std::max_element(so.weights.begin(), so.weights.end());
        for (std::size_t k = 0; k < main.size(); ++k) {
            ++checks;
            if (main[k] > wmax * bound[k] * (1.0 + 1e-12) + 1e-15) ++violations;
        }
    }
    return {violations == 0, fmt("%zu violations over %zu tensor checks on 100 instances", violations, checks)};
}

Outcome gradient_correctness() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1005);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const ModelDims dims = random_dims(rng, 8, 4, 2);
        const Model m = init_model(dims, rng);
        std::vector<Sample> samples;
        for (int i = 0; i < 4; ++i) samples.push_back(test::random_sample(rng, dims.d, 2 + rng.uniform_index(3)));
        std::vector<const Sample*> batch;
        for (const auto& s : samples) batch.push_back(&s);
        worst = std::max(worst, check_gradients(m, batch, ObjectiveOptions{}).max_relative_error);
    }
    const double secs = elapsed(t0);
    return {worst <= 1e-4 && secs < 30.0, fmt("max relative error %.3g over 20 configs (limit 1e-4), %.2f s", worst, secs)};
}

struct SeedRuns {
    std::uint64_t seed = 0;
    TrainResult full;
    TrainResult baseline;
    TrainResult no_sa;
};

std::vector<SeedRuns> train_runs() {
    std::vector<SeedRuns> runs;
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        TrainConfig cfg;
        cfg.seed = seed;
        const GeneratedData data = generate_dataset(cfg, seed);
        SeedRuns r;
        r.seed = seed;
        r.full = train(cfg, data.train, data.eval);
        TrainConfig base = cfg;
        apply_ablation_list(base.ablations, "no_sa,no_sj,no_unc,no_contrast,no_distill");
        r.baseline = train(base, data.train, data.eval);
        TrainConfig nosa = cfg;
        nosa.ablations.no_sa = true;
        r.no_sa = train(nosa, data.train, data.eval);
        runs.push_back(std::move(r));
    }
    return runs;
}

Outcome sim_alignment(const std::vector<SeedRuns>& runs) {
    double gain = 0.0;
    std::string per;
    for (const auto& r : runs) {
        const double g = r.full.final_student.sim - r.full.initial_student.sim;
        gain += g;
        per += fmt(" %.3f->%.3f", r.full.initial_student.sim, r.full.final_student.sim);
    }
    gain /= static_cast<double>(runs.size());
    return {gain >= 0.05, fmt("mean Sim gain %.3f (need >= 0.05); per seed%s", gain, per.c_str())};
}

Outcome mechanism_efficacy(const std::vector<SeedRuns>& runs) {
    double gap = 0.0;
    std::string per;
    for (const auto& r : runs) {
        const double g = 100.0 * (r.full.final_student.accuracy - r.baseline.final_student.accuracy);
        gap += g;
        per += fmt(" %.1f/%.1f", 100.0 * r.full.final_student.accuracy, 100.0 * r.baseline.final_student.accuracy);
    }
    gap /= static_cast<double>(runs.size());
    return {gap >= 5.0, fmt("mean gap %.2f points (need >= 5); full/baseline per seed%s", gap, per.c_str())};
}

Outcome cue_free_inference(const std::vector<SeedRuns>& runs) {
    double gap = 0.0;
    double worst = 0.0;
    std::string per;
    for (const auto& r : runs) {
        const double g = 100.0 * std::abs(r.full.final_teacher.accuracy - r.full.final_student.accuracy);
        gap += g;
        worst = std::max(worst, g);
        per += fmt(" %.1f/%.1f", 100.0 * r.full.final_teacher.accuracy, 100.0 * r.full.final_student.accuracy);
    }
    gap /= static_cast<double>(runs.size());
    return {gap <= 2.0,
            fmt("mean |teacher-student| %.2f points, worst seed %.2f (need mean <= 2); teacher/student%s", gap, worst,
                per.c_str())};
}

Outcome routing_consistency(const std::vector<SeedRuns>& runs) {
    bool ok = true;
    std::string per;
    for (const auto& r : runs) {
        const auto& f = r.full.final_student.diagnostics;
        const auto& n = r.no_sa.final_student.diagnostics;
        ok = ok && f.variance_raw < n.variance_raw && f.sharpness > n.sharpness;
        per += fmt(" seed %llu var %.4f vs %.4f sharp %.3f vs %.3f;", static_cast<unsigned long long>(r.seed),
                   f.variance_raw, n.variance_raw, f.sharpness, n.sharpness);
    }
    return {ok, "full vs no_sa:" + per};
}

Outcome uncertainty_behavior() {
    const int n = 100;
    std::size_t bad = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double agr = 2.0 * i / (n - 1);
            const double var = 1.0 * j / (n - 1);
            const double u = uncertainty(agr, var);
            if (i + 1 < n && uncertainty(2.0 * (i + 1) / (n - 1), var) > u) ++bad;
            if (j + 1 < n && uncertainty(agr, 1.0 * (j + 1) / (n - 1)) < u) ++bad;
        }
    }
    Rng rng(1010);
    std::size_t mismatch = 0;
    for (int t = 0; t < 1000; ++t) {
        const Embedding x = rng.normal_vector(8);
        CueSet c = synthesize_cues(rng.normal_vector(8), rng.normal_vector(8), rng.uniform(0, 1), 4, rng);
        score_cues(c, x, false);
        if (*c.uncertainty != *c.variance) ++mismatch;
    }
    return {bad == 0 && mismatch == 0,
            fmt("%zu monotonicity violations on the grid; %zu of 1000 only-variance sets with unc != Var", bad, mismatch)};
}

Outcome sweep_harness() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::size_t> n{2, 4, 8};
    const std::vector<std::size_t> k{1, 2, 3};
    const auto rows = sweep(n, k, TrainConfig{});
    const auto path = std::filesystem::temp_directory_path() / ("cogr_acceptance_sweep_" + std::to_string(std::random_device{}()) + ".csv");
    write_sweep_csv(rows, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    std::size_t lines = 0;
    std::size_t well_formed = 0;
    std::size_t ok = 0;
    std::size_t failed = 0;
    for (std::string line; std::getline(in, line);) {
        ++lines;
        std::vector<std::string> cells;
        std::istringstream cs(line);
        for (std::string c; std::getline(cs, c, ',');) cells.push_back(c);
        if (cells.size() != 5) continue;
        if (cells[4] == "ok") {
            try {
                std::stod(cells[2]);
                std::stod(cells[3]);
                ++well_formed;
                ++ok;
            } catch (const std::exception&) {
            }
        } else if (cells[4].rfind("failed", 0) == 0 && cells[2].empty() && cells[3].empty()) {
            ++well_formed;
            ++failed;
        }
    }
    std::filesystem::remove(path);
    const double secs = elapsed(t0);
    const bool pass = header == "n,K,Acc,Sim,status" && lines == 9 && well_formed == 9 && secs < 1800.0;
    std::string cells;
    for (const auto& r : rows) {
        cells += r.status == "ok" ? fmt(" (%zu,%zu)=%.1f/%.3f", r.n, r.k, r.acc, r.sim) : fmt(" (%zu,%zu)=failed", r.n, r.k);
    }
    return {pass, fmt("%zu rows, %zu ok, %zu marked failed, header '%s';%s", lines, ok, failed, header.c_str(),
                      cells.c_str())};
}

}  // namespace

int main() {
    report(1, "gating validity", gating_validity);
    report(2, "injection perturbation bound", injection_bound);
    report(3, "shared Top-K across options", shared_topk);
    report(4, "main-loss gradient bound", gradient_bound);
    report(5, "total-loss gradient correctness", gradient_correctness);

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<SeedRuns> runs;
    try {
        runs = train_runs();
    } catch (const std::exception& e) {
        std::printf("training runs failed: %s\n", e.what());
    }
    std::printf("(trained full, baseline and no_sa models on seeds 0-2 in %.1f s)\n", elapsed(t0));
    const bool have_runs = runs.size() == 3;
    auto with_runs = [&](auto fn) {
        return [&, fn] { return have_runs ? fn(runs) : Outcome{false, "training runs unavailable"}; };
    };
    report(6, "Sim alignment after training", with_runs(sim_alignment));
    report(7, "mechanism efficacy vs fully ablated baseline", with_runs(mechanism_efficacy));
    report(8, "cue-free inference", with_runs(cue_free_inference));
    report(9, "routing consistency vs no_sa", with_runs(routing_consistency));
    report(10, "uncertainty behavior", uncertainty_behavior);
    report(11, "sweep harness", sweep_harness);

    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
