// SPDX-License-Identifier: Apache-2.0
#include "cogr/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cogr/gradcheck.hpp"
#include "cogr/trainer.hpp"

#ifndef COGR_REVISION
#define COGR_REVISION "unknown"
#endif

namespace cogr {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::usage:
            return kExitUsage;
        case ErrorCode::divergence:
            return kExitDivergence;
        default:
            return kExitData;
    }
}

const char* build_revision() { return COGR_REVISION; }

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write " + path.string());
    out << text;
}

}  // namespace

void write_manifest(const RunManifest& m, const fs::path& path) {
    ordered_json j;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["revision"] = m.revision;
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at.empty() ? ordered_json(nullptr) : ordered_json(m.finished_at);
    j["outputs"] = m.outputs;
    write_text(path, j.dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot read " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        RunManifest m;
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.revision = j.at("revision").get<std::string>();
        m.started_at = j.at("started_at").get<std::string>();
        if (!j.at("finished_at").is_null()) m.finished_at = j.at("finished_at").get<std::string>();
        m.outputs = j.at("outputs").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse, path.string() + ": " + e.what());
    }
}

namespace {

struct CommonOptions {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string ablate;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config_path, "TrainConfig JSON file (defaults when omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Override the config seed");
    cmd->add_option("--ablate", o.ablate,
                    "Comma list of ablations: no_sa,no_sj,no_unc,no_contrast,no_distill,prompt_only,only_variance");
}

TrainConfig resolve_config(const CommonOptions& o, const CLI::App* cmd) {
    TrainConfig cfg = o.config_path.empty() ? TrainConfig{} : load_config(o.config_path);
    if (cmd->count("--seed") > 0) cfg.seed = o.seed;
    if (!o.ablate.empty()) apply_ablation_list(cfg.ablations, o.ablate);
    validate_config(cfg);
    return cfg;
}

struct Loaded {
    TrainConfig cfg;
    Checkpoint ckpt;
};

Loaded load_run(const std::string& checkpoint_path) {
    Loaded l;
    l.ckpt = load_checkpoint(checkpoint_path);
    l.cfg = config_from_json(l.ckpt.config_json);
    if (config_hash(l.cfg) != l.ckpt.config_hash) {
        fail(ErrorCode::consistency, checkpoint_path + ": config hash does not match the embedded config");
    }
    if (!(l.cfg.dims() == l.ckpt.model.dims)) {
        fail(ErrorCode::consistency, checkpoint_path + ": model dimensions disagree with the embedded config");
    }
    return l;
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

int cmd_gen_data(const TrainConfig& cfg, const fs::path& out_dir, std::ostream& out) {
    const GeneratedData data = generate_dataset(cfg, cfg.seed);
    save_dataset(data.train, out_dir, "train");
    save_dataset(data.eval, out_dir, "eval");
    write_text(out_dir / "config.json", config_to_json(cfg) + "\n");
    out << "wrote " << data.train.samples.size() << " train and " << data.eval.samples.size() << " eval samples to "
        << out_dir.string() << "\n"
        << "cue regeneration: " << data.options_regenerated << " of " << data.options_scored << " option cue sets\n";
    return kExitOk;
}

int cmd_train(const TrainConfig& cfg, const fs::path& data_dir, const fs::path& out_dir, std::ostream& out) {
    const bool need_cues = !cfg.ablations.prompt_only;
    const Dataset train_data = load_dataset(data_dir, "train", need_cues);
    const Dataset eval_data = load_dataset(data_dir, "eval", false);
    if (train_data.dim != cfg.d || eval_data.dim != cfg.d) {
        fail(ErrorCode::consistency, "dataset dimension " + std::to_string(train_data.dim) + " does not match d=" +
                                         std::to_string(cfg.d));
    }

    fs::create_directories(out_dir);
    RunManifest manifest;
    manifest.config_hash = config_hash(cfg);
    manifest.seed = cfg.seed;
    manifest.revision = build_revision();
    manifest.started_at = utc_now();
    manifest.outputs = {(out_dir / "metrics.csv").string(), (out_dir / "checkpoint.json").string()};
    write_manifest(manifest, out_dir / "manifest.json");

    std::ofstream metrics(out_dir / "metrics.csv");
    if (!metrics) fail(ErrorCode::io, "cannot write " + (out_dir / "metrics.csv").string());
    write_metrics_header(metrics);
    const TrainResult result =
        train(cfg, train_data, eval_data, [&](const MetricsRow& row) { write_metrics_row(metrics, row); });
    metrics.close();

    save_checkpoint({result.state.model, manifest.config_hash, config_to_json(cfg)}, out_dir / "checkpoint.json");
    manifest.finished_at = utc_now();
    write_manifest(manifest, out_dir / "manifest.json");

    out << "steps " << result.history.size() << " config " << manifest.config_hash << "\n"
        << "student accuracy " << fmt(result.final_student.accuracy) << " (initial "
        << fmt(result.initial_student.accuracy) << ")\n"
        << "teacher accuracy " << fmt(result.final_teacher.accuracy) << "\n"
        << "sim " << fmt(result.final_student.sim) << " (initial " << fmt(result.initial_student.sim) << ")\n";
    return kExitOk;
}

void write_eval_csv(std::ostream& os, RoutingMode mode, const std::string& split, const EvalMetrics& m) {
    os << "mode,split,count,accuracy,sim,sharpness,variance_raw,variance_x10\n"
       << routing_mode_name(mode) << ',' << split << ',' << m.count << ',' << fmt(m.accuracy) << ',' << fmt(m.sim)
       << ',' << fmt(m.diagnostics.sharpness) << ',' << fmt(m.diagnostics.variance_raw) << ','
       << fmt(m.diagnostics.variance_scaled) << '\n';
}

int cmd_eval(const std::string& checkpoint, const fs::path& data_dir, RoutingMode mode, const std::string& split,
             const std::string& csv_path, std::ostream& out) {
    const Loaded run = load_run(checkpoint);
    const Dataset data = load_dataset(data_dir, split, mode == RoutingMode::teacher);
    const EvalMetrics m = evaluate(run.ckpt.model, data, mode, run.cfg);
    write_eval_csv(out, mode, split, m);
    if (!csv_path.empty()) {
        std::ofstream f(csv_path);
        if (!f) fail(ErrorCode::io, "cannot write " + csv_path);
        write_eval_csv(f, mode, split, m);
    }
    return kExitOk;
}

int cmd_diagnose(const std::string& checkpoint, const fs::path& data_dir, RoutingMode mode, const std::string& split,
                 const fs::path& out_dir, std::ostream& out) {
    const Loaded run = load_run(checkpoint);
    const Dataset data = load_dataset(data_dir, split, mode == RoutingMode::teacher);
    const EvalMetrics m = evaluate(run.ckpt.model, data, mode, run.cfg);
    fs::create_directories(out_dir);
    write_diagnostics_csv(m.diagnostics, run.ckpt.config_hash, out_dir / "diagnostics.csv");
    write_heatmap_csv(m.diagnostics.heatmap, out_dir / "heatmap.csv");
    out << "sharpness " << fmt(m.diagnostics.sharpness) << " variance " << fmt(m.diagnostics.variance_raw) << " (x10 "
        << fmt(m.diagnostics.variance_scaled) << ") sim " << fmt(m.diagnostics.sim) << "\n"
        << "wrote " << (out_dir / "diagnostics.csv").string() << " and " << (out_dir / "heatmap.csv").string() << "\n";
    return kExitOk;
}

int cmd_sweep(const TrainConfig& cfg, const std::vector<std::size_t>& grid_n, const std::vector<std::size_t>& grid_k,
              const fs::path& out_path, std::ostream& out) {
    const auto rows = sweep(grid_n, grid_k, cfg);
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    write_sweep_csv(rows, out_path);
    std::size_t failed = 0;
    for (const auto& r : rows) {
        if (r.status != "ok") ++failed;
        out << "n=" << r.n << " K=" << r.k << " ";
        if (r.status == "ok") out << "Acc=" << fmt(r.acc) << " Sim=" << fmt(r.sim) << "\n";
        else out << r.status << "\n";
    }
    out << "wrote " << out_path.string() << " (" << rows.size() << " cells, " << failed << " failed)\n";
    return kExitOk;
}

int cmd_gradcheck(const TrainConfig& cfg, std::size_t samples, double tolerance, std::ostream& out) {
    TrainConfig small = cfg;
    small.train_size = samples;
    small.eval_size = 1;
    const GeneratedData data = generate_dataset(small, cfg.seed);
    std::vector<const Sample*> batch;
    for (const auto& s : data.train.samples) batch.push_back(&s);

    Rng rng = seeded_rng(cfg.seed);
    const Model model = init_model(cfg.dims(), rng);
    const GradCheckReport report = check_gradients(model, batch, objective_options(cfg));
    for (const auto& t : report.tensors) {
        const double worst = std::max(t.relative_error, t.max_entry_error);
        out << (worst <= tolerance ? "PASS " : "FAIL ") << t.name << " size=" << t.size << " rel=" << fmt(t.relative_error)
            << " max_entry=" << fmt(t.max_entry_error) << "\n";
    }
    const bool ok = report.passed(tolerance);
    out << (ok ? "PASS" : "FAIL") << " max relative error " << fmt(report.max_relative_error) << " (tolerance "
        << fmt(tolerance) << ")\n";
    return ok ? kExitOk : kExitGradcheck;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cue-guided mixture-of-experts routing: data, training, evaluation and diagnostics", "cogr"};
    app.require_subcommand(1);

    CommonOptions gen_opts;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic task with cue files");
    add_common(gen, gen_opts);
    gen->add_option("--out", gen_out, "Output directory")->required();

    CommonOptions train_opts;
    std::string train_data, train_out;
    auto* tr = app.add_subcommand("train", "Train a model and write checkpoint.json and metrics.csv");
    add_common(tr, train_opts);
    tr->add_option("--data", train_data, "Directory written by gen-data")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--out", train_out, "Run output directory")->required();

    const std::map<std::string, RoutingMode> modes{{"teacher", RoutingMode::teacher}, {"student", RoutingMode::student}};

    std::string eval_ckpt, eval_data, eval_split = "eval", eval_csv;
    RoutingMode eval_mode = RoutingMode::student;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; metrics go to stdout as CSV");
    ev->add_option("--checkpoint", eval_ckpt, "checkpoint.json")->required()->check(CLI::ExistingFile);
    ev->add_option("--data", eval_data, "Directory written by gen-data")->required()->check(CLI::ExistingDirectory);
    ev->add_option("--mode", eval_mode, "Routing mode: teacher (needs cues) or student")
        ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
    ev->add_option("--split", eval_split, "Dataset split");
    ev->add_option("--out", eval_csv, "Also write the CSV to this file");

    std::string diag_ckpt, diag_data, diag_split = "eval", diag_out;
    RoutingMode diag_mode = RoutingMode::student;
    auto* dg = app.add_subcommand("diagnose", "Write diagnostics.csv and heatmap.csv for a checkpoint");
    dg->add_option("--checkpoint", diag_ckpt, "checkpoint.json")->required()->check(CLI::ExistingFile);
    dg->add_option("--data", diag_data, "Directory written by gen-data")->required()->check(CLI::ExistingDirectory);
    dg->add_option("--mode", diag_mode, "Routing mode: teacher (needs cues) or student")
        ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
    dg->add_option("--split", diag_split, "Dataset split");
    dg->add_option("--out", diag_out, "Output directory")->required();

    CommonOptions sweep_opts;
    std::vector<std::size_t> grid_n{2, 4, 8}, grid_k{1, 2, 3};
    std::string sweep_out = "sweep.csv";
    auto* sw = app.add_subcommand("sweep", "Train one model per (n experts, K) cell and write sweep.csv");
    add_common(sw, sweep_opts);
    sw->add_option("--grid-n", grid_n, "Expert counts")->delimiter(',')->check(CLI::PositiveNumber);
    sw->add_option("--grid-k", grid_k, "Top-K values")->delimiter(',')->check(CLI::PositiveNumber);
    sw->add_option("--out", sweep_out, "Output CSV path");

    CommonOptions gc_opts;
    std::size_t gc_samples = 4;
    double gc_tolerance = 1e-4;
    auto* gc = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients of the total loss");
    add_common(gc, gc_opts);
    gc->add_option("--samples", gc_samples, "Batch size for the check")->check(CLI::PositiveNumber);
    gc->add_option("--tolerance", gc_tolerance, "Maximum relative error");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*gen) return cmd_gen_data(resolve_config(gen_opts, gen), gen_out, out);
        if (*tr) return cmd_train(resolve_config(train_opts, tr), train_data, train_out, out);
        if (*ev) return cmd_eval(eval_ckpt, eval_data, eval_mode, eval_split, eval_csv, out);
        if (*dg) return cmd_diagnose(diag_ckpt, diag_data, diag_mode, diag_split, diag_out, out);
        if (*sw) return cmd_sweep(resolve_config(sweep_opts, sw), grid_n, grid_k, sweep_out, out);
        if (*gc) return cmd_gradcheck(resolve_config(gc_opts, gc), gc_samples, gc_tolerance, out);
    } catch (const Error& e) {
        err << "error [" << error_code_name(e.code()) << "]: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace cogr
