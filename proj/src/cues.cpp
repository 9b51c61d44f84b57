// SPDX-License-Identifier: Apache-2.0
#include "cogr/cues.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

namespace cogr {

using nlohmann::json;

double agreement(const Embedding& image_emb, const Embedding& positive, const Embedding& negative) {
    const double pos = cosine(image_emb, positive);
    const double neg = cosine(image_emb, negative);
    return std::max(0.0, pos - neg);
}

double cue_variance(const Embedding& image_emb, const std::vector<Embedding>& variants) {
    if (variants.size() < 2) {
        fail(ErrorCode::insufficient_variants,
             "cue_variance: need at least 2 variants, got " + std::to_string(variants.size()));
    }
    std::vector<double> sims;
    sims.reserve(variants.size());
    for (const auto& v : variants) sims.push_back(cosine(image_emb, v));
    double mean = 0.0;
    for (double s : sims) mean += s;
    mean /= static_cast<double>(sims.size());
    double ss = 0.0;
    for (double s : sims) ss += (s - mean) * (s - mean);
    return ss / static_cast<double>(sims.size() - 1);
}

double uncertainty(double agreement, double variance) {
    if (!(agreement >= 0.0) || !(variance >= 0.0)) {
        fail(ErrorCode::invalid_input, "uncertainty: agreement and variance must be non-negative");
    }
    return variance / (1.0 + agreement);
}

void score_cues(CueSet& cues, const Embedding& image_emb, bool use_agreement) {
    const double agr = use_agreement ? agreement(image_emb, cues.positive, cues.negative) : 0.0;
    const double var = cue_variance(image_emb, cues.variants);
    cues.agreement = agr;
    cues.variance = var;
    cues.uncertainty = uncertainty(agr, var);
}

RegenerationResult regenerate_if_uncertain(const CueSet& cues, const Embedding& image_emb,
                                           double threshold, const CueGenerator& generator,
                                           int max_rounds, bool use_agreement) {
    if (!(threshold > 0.0)) fail(ErrorCode::invalid_input, "regenerate_if_uncertain: threshold must be positive");
    if (max_rounds < 1) fail(ErrorCode::invalid_input, "regenerate_if_uncertain: max_rounds must be >= 1");

    CueSet best = cues;
    score_cues(best, image_emb, use_agreement);
    if (*best.uncertainty <= threshold) return {best, 0};

    int round = 1;
    for (; round <= max_rounds; ++round) {
        CueSet candidate;
        try {
            candidate = generator(round);
        } catch (const std::exception& e) {
            throw RegenerationFailed(std::string("cue generator failed in round ") +
                                         std::to_string(round) + ": " + e.what(),
                                     best);
        }
        score_cues(candidate, image_emb, use_agreement);
        if (*candidate.uncertainty <= threshold) return {candidate, round};
        if (*candidate.uncertainty < *best.uncertainty) best = std::move(candidate);
    }
    return {best, max_rounds};
}

CueSet synthesize_cues(const Embedding& concept_centroid, const Embedding& distractor_centroid,
                       double noise_scale, std::size_t variant_count, Rng& rng) {
    if (!(noise_scale >= 0.0)) fail(ErrorCode::invalid_input, "synthesize_cues: noise_scale must be >= 0");
    if (variant_count < 2) fail(ErrorCode::insufficient_variants, "synthesize_cues: need >= 2 variants");
    if (concept_centroid.size() != distractor_centroid.size()) {
        fail(ErrorCode::shape, "synthesize_cues: centroid dimension mismatch");
    }
    const std::size_t d = concept_centroid.size();
    CueSet out;
    out.positive = add(concept_centroid, rng.normal_vector(d, noise_scale));
    out.negative = add(distractor_centroid, rng.normal_vector(d, noise_scale));
    out.variants.reserve(variant_count);
    for (std::size_t k = 0; k < variant_count; ++k) {
        out.variants.push_back(add(out.positive, rng.normal_vector(d, noise_scale)));
    }
    return out;
}

const CueSet* CueTable::find(const std::string& sample_id, int option_id) const {
    auto it = entries.find({sample_id, option_id});
    return it == entries.end() ? nullptr : &it->second;
}

void save_cue_table(const CueTable& table, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::io, "cannot write cue file " + path.string());
    out << json{{"dim", table.dim}, {"version", 1}}.dump() << '\n';
    for (const auto& [key, cues] : table.entries) {
        json rec{{"sample_id", key.first},
                 {"option_id", key.second},
                 {"positive", cues.positive},
                 {"negative", cues.negative},
                 {"variants", cues.variants}};
        if (cues.agreement) rec["agreement"] = *cues.agreement;
        if (cues.variance) rec["variance"] = *cues.variance;
        if (cues.uncertainty) rec["uncertainty"] = *cues.uncertainty;
        out << rec.dump() << '\n';
    }
    if (!out) fail(ErrorCode::io, "failed writing cue file " + path.string());
}

namespace {

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
    fail(ErrorCode::parse, path.string() + ":" + std::to_string(line) + ": " + msg);
}

const json& field(const json& rec, const char* name, const std::filesystem::path& path, std::size_t line) {
    auto it = rec.find(name);
    if (it == rec.end()) parse_error(path, line, std::string("missing field \"") + name + "\"");
    return *it;
}

Embedding embedding_field(const json& value, const char* name, const std::filesystem::path& path,
                          std::size_t line) {
    if (!value.is_array()) parse_error(path, line, std::string("field \"") + name + "\" is not an array");
    Embedding out;
    out.reserve(value.size());
    for (const auto& v : value) {
        if (!v.is_number()) parse_error(path, line, std::string("field \"") + name + "\" has a non-numeric entry");
        out.push_back(v.get<double>());
    }
    return out;
}

}  // namespace

CueTable load_cue_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open cue file " + path.string());

    CueTable table;
    std::string text;
    std::size_t line = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json rec;
        try {
            rec = json::parse(text);
        } catch (const json::parse_error& e) {
            parse_error(path, line, std::string("invalid JSON: ") + e.what());
        }
        if (!rec.is_object()) parse_error(path, line, "record is not an object");
        if (!have_header) {
            const json& dim = field(rec, "dim", path, line);
            const json& version = field(rec, "version", path, line);
            if (!dim.is_number_unsigned()) parse_error(path, line, "field \"dim\" is not a non-negative integer");
            if (version != 1) parse_error(path, line, "unsupported version " + version.dump());
            table.dim = dim.get<std::size_t>();
            have_header = true;
            continue;
        }
        const json& sid = field(rec, "sample_id", path, line);
        const json& oid = field(rec, "option_id", path, line);
        if (!sid.is_string()) parse_error(path, line, "field \"sample_id\" is not a string");
        if (!oid.is_number_integer()) parse_error(path, line, "field \"option_id\" is not an integer");

        CueSet cues;
        cues.positive = embedding_field(field(rec, "positive", path, line), "positive", path, line);
        cues.negative = embedding_field(field(rec, "negative", path, line), "negative", path, line);
        const json& variants = field(rec, "variants", path, line);
        if (!variants.is_array()) parse_error(path, line, "field \"variants\" is not an array");
        for (const auto& v : variants) cues.variants.push_back(embedding_field(v, "variants", path, line));
        for (const char* opt : {"agreement", "variance", "uncertainty"}) {
            auto it = rec.find(opt);
            if (it == rec.end()) continue;
            if (!it->is_number()) parse_error(path, line, std::string("field \"") + opt + "\" is not a number");
            const double v = it->get<double>();
            if (std::string(opt) == "agreement") cues.agreement = v;
            else if (std::string(opt) == "variance") cues.variance = v;
            else cues.uncertainty = v;
        }

        auto check_dim = [&](const Embedding& e, const char* what) {
            if (e.size() != table.dim) {
                fail(ErrorCode::consistency, path.string() + ":" + std::to_string(line) + ": \"" + what +
                                                 "\" has dimension " + std::to_string(e.size()) +
                                                 ", header declares " + std::to_string(table.dim));
            }
        };
        check_dim(cues.positive, "positive");
        check_dim(cues.negative, "negative");
        for (const auto& v : cues.variants) check_dim(v, "variants");

        auto key = std::make_pair(sid.get<std::string>(), oid.get<int>());
        if (!table.entries.emplace(std::move(key), std::move(cues)).second) {
            fail(ErrorCode::consistency, path.string() + ":" + std::to_string(line) +
                                             ": duplicate entry for (" + sid.get<std::string>() + ", " +
                                             std::to_string(oid.get<int>()) + ")");
        }
    }
    if (!have_header) parse_error(path, line, "missing header record");
    return table;
}

}  // namespace cogr
