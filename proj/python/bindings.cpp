// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cogr/cli.hpp"
#include "cogr/cues.hpp"
#include "cogr/moe.hpp"
#include "cogr/numerics.hpp"
#include "cogr/trainer.hpp"

namespace py = pybind11;

namespace {

py::dict metrics_dict(const cogr::EvalMetrics& m) {
    py::dict d;
    d["accuracy"] = m.accuracy;
    d["sim"] = m.sim;
    d["count"] = m.count;
    d["sharpness"] = m.diagnostics.sharpness;
    d["variance_raw"] = m.diagnostics.variance_raw;
    return d;
}

cogr::TrainConfig config_from(const std::string& json) {
    return json.empty() ? cogr::TrainConfig{} : cogr::config_from_json(json);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cue-guided mixture-of-experts routing on synthetic data";

    m.def("softmax", [](const cogr::Vector& z) { return cogr::softmax(z); }, py::arg("logits"));
    m.def("cosine", [](const cogr::Vector& a, const cogr::Vector& b) { return cogr::cosine(a, b); });
    m.def("kl_divergence", [](const cogr::Vector& p, const cogr::Vector& q) { return cogr::kl_divergence(p, q); });
    m.def("teacher_gate", &cogr::teacher_gate, py::arg("z_base"), py::arg("s_a"), py::arg("lambda_a"),
          "Returns (logits, gate).");
    m.def("student_gate", &cogr::student_gate, py::arg("z_base"));
    m.def("select_topk", &cogr::select_topk, py::arg("gate"), py::arg("k"));
    m.def("agreement", &cogr::agreement, py::arg("image"), py::arg("positive"), py::arg("negative"));
    m.def("uncertainty", &cogr::uncertainty, py::arg("agreement"), py::arg("variance"));

    m.def("default_config", [] { return cogr::config_to_json(cogr::TrainConfig{}); });
    m.def("config_hash", [](const std::string& json) { return cogr::config_hash(config_from(json)); },
          py::arg("config_json"));

    m.def(
        "train_and_evaluate",
        [](const std::string& json, std::uint64_t seed) {
            auto cfg = config_from(json);
            cfg.seed = seed;
            cogr::validate_config(cfg);
            py::gil_scoped_release release;
            auto data = cogr::generate_dataset(cfg, seed);
            auto result = cogr::train(cfg, data.train, data.eval);
            py::gil_scoped_acquire acquire;
            py::dict d;
            d["initial_student"] = metrics_dict(result.initial_student);
            d["teacher"] = metrics_dict(result.final_teacher);
            d["student"] = metrics_dict(result.final_student);
            d["steps"] = result.history.size();
            return d;
        },
        py::arg("config_json") = std::string{}, py::arg("seed") = 0);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cogr::run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs a cogr command line; returns (exit_code, stdout, stderr).");
}
