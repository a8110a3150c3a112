#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "noisedetect/classifier.hpp"
#include "noisedetect/corpus.hpp"

namespace noisedetect {

/// Weighted soft-vote ensemble over >= 2 checkpoints. Weights are strictly
/// positive and stored normalized to sum 1; when omitted for a two-member
/// ensemble they default to 0.6/0.4 (first member heavier).
struct EnsembleSpec {
    std::vector<std::filesystem::path> members;
    std::vector<double> weights;

    void validate_and_normalize();
};

/// JSON file with `members` (paths) and optional `weights` arrays. Relative
/// member paths are resolved against the spec file's directory.
EnsembleSpec load_ensemble_spec(const std::filesystem::path& path);
void save_ensemble_spec(const EnsembleSpec& spec, const std::filesystem::path& path);

struct LoadedEnsemble {
    std::vector<ModelCheckpoint> members;
    std::vector<double> weights; // normalized

    const std::vector<std::string>& class_names() const { return members.front().class_names; }
};

/// Load all members once; they must share an identical ordered class list.
LoadedEnsemble load_ensemble(const EnsembleSpec& spec);

/// Build a LoadedEnsemble from in-memory checkpoints (same validation).
LoadedEnsemble make_ensemble(std::vector<ModelCheckpoint> members, std::vector<double> weights);

/// The soft vote itself: probabilities = sum_i weights[i] * member_probs[i]
/// (weights already normalized); argmax with lowest-index tie-break.
Prediction combine_probabilities(const std::vector<double>& weights,
                                 const std::vector<std::vector<double>>& member_probs,
                                 const std::vector<std::string>& class_names);

/// probabilities = sum_i w_i * p_i; argmax with lowest-index tie-break.
Prediction ensemble_predict(const LoadedEnsemble& ensemble, std::string_view text);
std::vector<Prediction> ensemble_predict_dataset(const LoadedEnsemble& ensemble, const Dataset& dataset);

} // namespace noisedetect
