// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cogr/trainer.hpp"

namespace cogr {

using nlohmann::ordered_json;

void set_ablation(Ablations& a, const std::string& name) {
    if (name == "no_sa") a.no_sa = true;
    else if (name == "no_sj") a.no_sj = true;
    else if (name == "no_unc") a.no_unc = true;
    else if (name == "no_contrast") a.no_contrast = true;
    else if (name == "no_distill") a.no_distill = true;
    else if (name == "prompt_only") a.prompt_only = true;
    else if (name == "only_variance") a.only_variance = true;
    else fail(ErrorCode::usage, "unknown ablation '" + name + "'");
}

void apply_ablation_list(Ablations& a, const std::string& list) {
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) set_ablation(a, item);
    }
}

void validate_config(const TrainConfig& c) {
    auto bad = [](const std::string& field, const std::string& why) {
        fail(ErrorCode::usage, "config field '" + field + "': " + why);
    };
    if (c.d == 0) bad("d", "must be positive");
    if (c.E == 0) bad("E", "must be positive");
    if (c.K == 0 || c.K > c.E) bad("K", "must satisfy 1 <= K <= E");
    if (c.hidden == 0) bad("hidden", "must be positive");
    if (c.option_count < 2) bad("option_count", "must be at least 2");
    if (!(c.lambda_a >= 0.0)) bad("lambda_a", "must be >= 0");
    if (!(c.lambda_o >= 0.0)) bad("lambda_o", "must be >= 0");
    if (!(c.lambda_c >= 0.0)) bad("lambda_c", "must be >= 0");
    if (!(c.temperature > 0.0)) bad("temperature", "must be > 0");
    if (!(c.lr_min > 0.0)) bad("lr_min", "must be > 0");
    if (!(c.lr > c.lr_min)) bad("lr", "must exceed lr_min");
    if (c.total_steps == 0) bad("total_steps", "must be positive");
    if (c.warmup_steps >= c.total_steps) bad("warmup_steps", "must be below total_steps");
    if (c.batch == 0) bad("batch", "must be positive");
    if (!(c.grad_clip_norm > 0.0)) bad("grad_clip_norm", "must be > 0");
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0)) bad("beta1", "must lie in [0, 1)");
    if (!(c.beta2 >= 0.0 && c.beta2 < 1.0)) bad("beta2", "must lie in [0, 1)");
    if (!(c.adam_eps > 0.0)) bad("adam_eps", "must be > 0");
    if (!(c.weight_decay >= 0.0)) bad("weight_decay", "must be >= 0");
    if (!(c.unc_threshold > 0.0)) bad("unc_threshold", "must be > 0");
    if (c.max_regen_rounds < 1) bad("max_regen_rounds", "must be >= 1");
    if (c.concepts < 2) bad("concepts", "must be at least 2");
    if (c.train_size == 0) bad("train_size", "must be positive");
    if (c.eval_size == 0) bad("eval_size", "must be positive");
    if (c.styles == 0) bad("styles", "must be positive");
    if (!(c.style_scale >= 0.0)) bad("style_scale", "must be >= 0");
    if (!(c.input_noise >= 0.0)) bad("input_noise", "must be >= 0");
    if (!(c.text_noise >= 0.0)) bad("text_noise", "must be >= 0");
    if (!(c.cue_noise >= 0.0)) bad("cue_noise", "must be >= 0");
    if (c.variant_count < 2) bad("variant_count", "must be at least 2");
    if (c.cue_prompt != "full" && c.cue_prompt != "minimal") bad("cue_prompt", "must be 'full' or 'minimal'");
    if (c.eval_every == 0) bad("eval_every", "must be positive");
}

std::string config_to_json(const TrainConfig& c) {
    ordered_json j;
    j["d"] = c.d;
    j["E"] = c.E;
    j["K"] = c.K;
    j["hidden"] = c.hidden;
    j["option_count"] = c.option_count;
    j["lambda_a"] = c.lambda_a;
    j["lambda_o"] = c.lambda_o;
    j["lambda_c"] = c.lambda_c;
    j["temperature"] = c.temperature;
    j["ce_mode"] = ce_mode_name(c.ce_mode);
    j["lr"] = c.lr;
    j["lr_min"] = c.lr_min;
    j["warmup_steps"] = c.warmup_steps;
    j["total_steps"] = c.total_steps;
    j["batch"] = c.batch;
    j["grad_clip_norm"] = c.grad_clip_norm;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["adam_eps"] = c.adam_eps;
    j["weight_decay"] = c.weight_decay;
    j["unc_threshold"] = c.unc_threshold;
    j["max_regen_rounds"] = c.max_regen_rounds;
    j["concepts"] = c.concepts;
    j["train_size"] = c.train_size;
    j["eval_size"] = c.eval_size;
    j["styles"] = c.styles;
    j["style_scale"] = c.style_scale;
    j["input_noise"] = c.input_noise;
    j["text_noise"] = c.text_noise;
    j["cue_noise"] = c.cue_noise;
    j["variant_count"] = c.variant_count;
    j["cue_prompt"] = c.cue_prompt;
    j["eval_every"] = c.eval_every;
    j["seed"] = c.seed;
    j["no_sa"] = c.ablations.no_sa;
    j["no_sj"] = c.ablations.no_sj;
    j["no_unc"] = c.ablations.no_unc;
    j["no_contrast"] = c.ablations.no_contrast;
    j["no_distill"] = c.ablations.no_distill;
    j["prompt_only"] = c.ablations.prompt_only;
    j["only_variance"] = c.ablations.only_variance;
    return j.dump(2);
}

namespace {

template <class T>
void read_field(const ordered_json& j, const std::string& key, T& dst) {
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw std::invalid_argument("expected a boolean");
            dst = j.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!j.is_string()) throw std::invalid_argument("expected a string");
            dst = j.get<std::string>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j.is_number()) throw std::invalid_argument("expected a number");
            dst = j.get<T>();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!j.is_number_unsigned()) throw std::invalid_argument("expected a non-negative integer");
            dst = j.get<T>();
        } else {
            if (!j.is_number_integer()) throw std::invalid_argument("expected an integer");
            dst = j.get<T>();
        }
    } catch (const std::exception& e) {
        fail(ErrorCode::usage, "config field '" + key + "': " + e.what());
    }
}

}  // namespace

TrainConfig config_from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const ordered_json::parse_error& e) {
        fail(ErrorCode::usage, std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail(ErrorCode::usage, "config must be a JSON object");
    TrainConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "d") read_field(value, key, c.d);
        else if (key == "E") read_field(value, key, c.E);
        else if (key == "K") read_field(value, key, c.K);
        else if (key == "hidden") read_field(value, key, c.hidden);
        else if (key == "option_count") read_field(value, key, c.option_count);
        else if (key == "lambda_a") read_field(value, key, c.lambda_a);
        else if (key == "lambda_o") read_field(value, key, c.lambda_o);
        else if (key == "lambda_c") read_field(value, key, c.lambda_c);
        else if (key == "temperature") read_field(value, key, c.temperature);
        else if (key == "ce_mode") {
            std::string mode;
            read_field(value, key, mode);
            try {
                c.ce_mode = parse_ce_mode(mode);
            } catch (const Error& e) {
                fail(ErrorCode::usage, "config field 'ce_mode': " + std::string(e.what()));
            }
        }
        else if (key == "lr") read_field(value, key, c.lr);
        else if (key == "lr_min") read_field(value, key, c.lr_min);
        else if (key == "warmup_steps") read_field(value, key, c.warmup_steps);
        else if (key == "total_steps") read_field(value, key, c.total_steps);
        else if (key == "batch") read_field(value, key, c.batch);
        else if (key == "grad_clip_norm") read_field(value, key, c.grad_clip_norm);
        else if (key == "beta1") read_field(value, key, c.beta1);
        else if (key == "beta2") read_field(value, key, c.beta2);
        else if (key == "adam_eps") read_field(value, key, c.adam_eps);
        else if (key == "weight_decay") read_field(value, key, c.weight_decay);
        else if (key == "unc_threshold") read_field(value, key, c.unc_threshold);
        else if (key == "max_regen_rounds") read_field(value, key, c.max_regen_rounds);
        else if (key == "concepts") read_field(value, key, c.concepts);
        else if (key == "train_size") read_field(value, key, c.train_size);
        else if (key == "eval_size") read_field(value, key, c.eval_size);
        else if (key == "styles") read_field(value, key, c.styles);
        else if (key == "style_scale") read_field(value, key, c.style_scale);
        else if (key == "input_noise") read_field(value, key, c.input_noise);
        else if (key == "text_noise") read_field(value, key, c.text_noise);
        else if (key == "cue_noise") read_field(value, key, c.cue_noise);
        else if (key == "variant_count") read_field(value, key, c.variant_count);
        else if (key == "cue_prompt") read_field(value, key, c.cue_prompt);
        else if (key == "eval_every") read_field(value, key, c.eval_every);
        else if (key == "seed") read_field(value, key, c.seed);
        else if (key == "no_sa") read_field(value, key, c.ablations.no_sa);
        else if (key == "no_sj") read_field(value, key, c.ablations.no_sj);
        else if (key == "no_unc") read_field(value, key, c.ablations.no_unc);
        else if (key == "no_contrast") read_field(value, key, c.ablations.no_contrast);
        else if (key == "no_distill") read_field(value, key, c.ablations.no_distill);
        else if (key == "prompt_only") read_field(value, key, c.ablations.prompt_only);
        else if (key == "only_variance") read_field(value, key, c.ablations.only_variance);
        else fail(ErrorCode::usage, "config field '" + key + "': unknown field");
    }
    validate_config(c);
    return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::usage, "cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

std::string config_hash(const TrainConfig& cfg) {
    const std::string text = config_to_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RoutingOptions routing_options(const TrainConfig& cfg) {
    RoutingOptions r;
    r.lambda_a = cfg.lambda_a;
    r.lambda_o = cfg.lambda_o;
    r.use_answer_direction = !cfg.ablations.no_sa;
    r.use_option_direction = !cfg.ablations.no_sj;
    return r;
}

ObjectiveOptions objective_options(const TrainConfig& cfg) {
    ObjectiveOptions o;
    o.routing = routing_options(cfg);
    o.lambda_c = cfg.lambda_c;
    o.temperature = cfg.temperature;
    o.ce_mode = cfg.ce_mode;
    o.use_uncertainty = !cfg.ablations.no_unc;
    o.use_contrast = !cfg.ablations.no_contrast;
    o.use_distill = !cfg.ablations.no_distill;
    o.cue_free = cfg.ablations.prompt_only;
    return o;
}

}  // namespace cogr
