#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "noisedetect/classifier.hpp"
#include "noisedetect/corpus.hpp"
#include "noisedetect/metrics.hpp"
#include "noisedetect/noising.hpp"

namespace noisedetect {

/// The four pipeline shapes: clean-only training, training on noised data,
/// sequential fine-tuning (clean then noised), and the 60:40 soft-vote
/// ensemble of the last two.
enum class Recipe { baseline, noised, double_finetune, ensemble };

const char* recipe_name(Recipe r);
std::optional<Recipe> parse_recipe(const std::string& name);

/// Overridable knobs; anything unset resolves to the per-target defaults.
struct TrainOverrides {
    std::optional<double> learning_rate;
    std::optional<int> epochs;
    std::optional<int> batch_size;
    std::optional<int> grad_accum_steps;
    std::optional<double> weight_decay;
    std::optional<int> warmup_steps;

    TrainConfig resolve(Target target, std::uint64_t seed) const;
};

struct ExperimentConfig {
    std::filesystem::path train_path;
    std::filesystem::path val_path;
    std::filesystem::path workdir;
    Recipe recipe = Recipe::baseline;
    Target target = Target::label_b;
    std::uint64_t seed = 42;
    double noise_rate = 0.10;
    int junk_len_min = 3;
    int junk_len_max = 8;
    FeatureSpec feature_spec;
    TrainOverrides train;
    bool allow_new_classes = false;
};

/// Run one recipe end to end inside the workdir, skipping stages whose
/// manifests still match their inputs. Progress goes to `log`; returns the
/// comparison table (also written to comparison.csv/.txt) covering every
/// recipe with an eval report in the workdir.
std::string run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Predictions CSV: `row,predicted_class,prob_<class>,...`, probabilities to
/// 6 decimal places, rows numbered from 1.
std::string predictions_to_csv(const std::vector<Prediction>& predictions,
                               const std::vector<std::string>& class_names);

// --- run manifests -------------------------------------------------------
//
// Every artifact-producing step records a manifest next to its outputs: the
// resolved parameters plus input and output digests, enough to reproduce the
// artifact bit-exactly and to decide whether a rerun can skip the step.

struct Manifest {
    std::string stage;
    std::map<std::string, std::string> inputs;  // basename -> file digest
    std::map<std::string, std::string> outputs; // basename -> file digest
    std::string params_json;                    // resolved parameters
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// True when the manifest at `path` exists, its parameters equal
/// `params_json`, and every recorded input and output digest still matches
/// the files on disk.
bool manifest_is_current(const std::filesystem::path& path, const std::string& stage,
                         const std::vector<std::filesystem::path>& inputs,
                         const std::vector<std::filesystem::path>& outputs,
                         const std::string& params_json);

} // namespace noisedetect
