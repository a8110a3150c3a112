#include "noisedetect/ensemble.hpp"

#include <fstream>

#include <json.hpp>

#include "noisedetect/error.hpp"

namespace noisedetect {

namespace {

void check_members(const std::vector<ModelCheckpoint>& members) {
    for (std::size_t i = 1; i < members.size(); ++i) {
        if (members[i].class_names != members.front().class_names)
            fail(ErrorCode::ClassSetMismatch,
                 "member " + std::to_string(i) + " has a different class list than member 0");
    }
}

} // namespace

void EnsembleSpec::validate_and_normalize() {
    if (members.size() < 2)
        fail(ErrorCode::InvalidSpec, "an ensemble needs at least 2 members");
    if (weights.empty()) {
        if (members.size() == 2) {
            weights = {0.6, 0.4};
        } else {
            fail(ErrorCode::InvalidSpec,
                 "weights are required for ensembles with more than 2 members");
        }
    }
    if (weights.size() != members.size())
        fail(ErrorCode::InvalidSpec, "weights and members must have the same length");
    double total = 0.0;
    for (double w : weights) {
        if (!(w > 0.0)) fail(ErrorCode::InvalidSpec, "ensemble weights must be strictly positive");
        total += w;
    }
    for (double& w : weights) w /= total;
}

EnsembleSpec load_ensemble_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open ensemble spec '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, "ensemble spec '" + path.string() + "': " + e.what());
    }
    if (!j.is_object() || !j.contains("members") || !j["members"].is_array())
        fail(ErrorCode::SchemaError, "ensemble spec needs a 'members' array");

    EnsembleSpec spec;
    const auto base = path.parent_path();
    for (const auto& entry : j["members"]) {
        if (!entry.is_string())
            fail(ErrorCode::SchemaError, "ensemble members must be path strings");
        std::filesystem::path member = entry.get<std::string>();
        if (member.is_relative()) member = base / member;
        spec.members.push_back(std::move(member));
    }
    if (j.contains("weights")) {
        if (!j["weights"].is_array())
            fail(ErrorCode::SchemaError, "'weights' must be an array of numbers");
        for (const auto& w : j["weights"]) spec.weights.push_back(w.get<double>());
    }
    spec.validate_and_normalize();
    return spec;
}

void save_ensemble_spec(const EnsembleSpec& spec, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["members"] = nlohmann::ordered_json::array();
    for (const auto& member : spec.members) j["members"].push_back(member.generic_string());
    j["weights"] = spec.weights;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) fail(ErrorCode::IoError, "write failure on '" + path.string() + "'");
}

LoadedEnsemble load_ensemble(const EnsembleSpec& spec) {
    EnsembleSpec checked = spec;
    checked.validate_and_normalize();
    LoadedEnsemble ensemble;
    ensemble.weights = checked.weights;
    for (const auto& path : checked.members) {
        try {
            ensemble.members.push_back(load_checkpoint(path));
        } catch (const Error& e) {
            fail(ErrorCode::MemberLoadError,
                 "cannot load member '" + path.string() + "': " + e.what());
        }
    }
    check_members(ensemble.members);
    return ensemble;
}

LoadedEnsemble make_ensemble(std::vector<ModelCheckpoint> members, std::vector<double> weights) {
    EnsembleSpec spec;
    spec.members.resize(members.size()); // paths unused for in-memory members
    spec.weights = std::move(weights);
    spec.validate_and_normalize();
    check_members(members);
    LoadedEnsemble ensemble;
    ensemble.members = std::move(members);
    ensemble.weights = std::move(spec.weights);
    return ensemble;
}

Prediction combine_probabilities(const std::vector<double>& weights,
                                 const std::vector<std::vector<double>>& member_probs,
                                 const std::vector<std::string>& class_names) {
    const std::size_t k = class_names.size();
    std::vector<double> probs(k, 0.0);
    for (std::size_t i = 0; i < member_probs.size(); ++i) {
        for (std::size_t c = 0; c < k; ++c) {
            probs[c] += weights[i] * member_probs[i][c];
        }
    }
    Prediction p;
    p.predicted_index = 0;
    for (std::size_t c = 1; c < k; ++c) {
        if (probs[c] > probs[p.predicted_index]) p.predicted_index = c;
    }
    p.predicted_class = class_names[p.predicted_index];
    p.probabilities = std::move(probs);
    return p;
}

Prediction ensemble_predict(const LoadedEnsemble& ensemble, std::string_view text) {
    std::vector<std::vector<double>> member_probs;
    member_probs.reserve(ensemble.members.size());
    for (const auto& member : ensemble.members) {
        member_probs.push_back(predict(member, text).probabilities);
    }
    return combine_probabilities(ensemble.weights, member_probs, ensemble.class_names());
}

std::vector<Prediction> ensemble_predict_dataset(const LoadedEnsemble& ensemble,
                                                 const Dataset& dataset) {
    std::vector<Prediction> out;
    out.reserve(dataset.documents.size());
    for (const auto& doc : dataset.documents) {
        out.push_back(ensemble_predict(ensemble, doc.text));
    }
    return out;
}

} // namespace noisedetect
