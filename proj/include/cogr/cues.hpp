// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cogr/numerics.hpp"

namespace cogr {

/// Positive/negative cue embeddings for one answer option, the paraphrase
/// variants used to probe their stability, and the derived reliability scores.
struct CueSet {
    Embedding positive;
    Embedding negative;
    std::vector<Embedding> variants;
    std::optional<double> agreement;
    std::optional<double> variance;
    std::optional<double> uncertainty;

    bool scored() const { return agreement && variance && uncertainty; }
    bool operator==(const CueSet&) const = default;
};

/// max(0, cos(image, positive) - cos(image, negative)); lies in [0, 2].
double agreement(const Embedding& image_emb, const Embedding& positive, const Embedding& negative);

/// Unbiased sample variance of cos(image, variant) over the variants.
/// Needs at least two variants.
double cue_variance(const Embedding& image_emb, const std::vector<Embedding>& variants);

/// variance / (1 + agreement).
double uncertainty(double agreement, double variance);

/// Fills agreement, variance and uncertainty. With `use_agreement` false the
/// agreement term is disabled (stored as 0) so uncertainty equals variance.
void score_cues(CueSet& cues, const Embedding& image_emb, bool use_agreement = true);

/// Raised when the cue generator throws; carries the best candidate seen.
class RegenerationFailed : public Error {
public:
    RegenerationFailed(const std::string& what, CueSet best)
        : Error(ErrorCode::regeneration_failed, what), best_(std::move(best)) {}
    const CueSet& best() const noexcept { return best_; }

private:
    CueSet best_;
};

/// Produces a fresh candidate for regeneration round `round` (1-based).
using CueGenerator = std::function<CueSet(int round)>;

struct RegenerationResult {
    CueSet cues;
    int rounds = 0;  ///< generator calls made; 0 when the input was accepted
};

/// Returns the input when its uncertainty is within `threshold`; otherwise
/// asks the generator for up to `max_rounds` replacements, returning the
/// first one within threshold or the lowest-uncertainty candidate seen
/// (input included). Every returned set carries freshly computed scores.
RegenerationResult regenerate_if_uncertain(const CueSet& cues, const Embedding& image_emb,
                                           double threshold, const CueGenerator& generator,
                                           int max_rounds, bool use_agreement = true);

/// Desk-scale stand-in for externally generated cues: the positive cue is the
/// concept centroid plus noise, the negative cue a distractor centroid plus
/// noise, and each variant the positive cue plus independent noise. Scores
/// are left unset.
CueSet synthesize_cues(const Embedding& concept_centroid, const Embedding& distractor_centroid,
                       double noise_scale, std::size_t variant_count, Rng& rng);

/// Cue cache keyed by (sample id, option index).
struct CueTable {
    std::size_t dim = 0;
    std::map<std::pair<std::string, int>, CueSet> entries;

    const CueSet* find(const std::string& sample_id, int option_id) const;
    bool operator==(const CueTable&) const = default;
};

/// JSON-lines cue file: a {"dim": d, "version": 1} header followed by one
/// record per (sample_id, option_id).
void save_cue_table(const CueTable& table, const std::filesystem::path& path);
CueTable load_cue_table(const std::filesystem::path& path);

}  // namespace cogr
