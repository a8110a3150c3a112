#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "noisedetect/corpus.hpp"
#include "noisedetect/features.hpp"

namespace noisedetect {

enum class Target { label_a, label_b };

const char* target_name(Target t);
std::optional<Target> parse_target(const std::string& name);
LabelField target_field(Target t);

/// Training contract: mini-batch SGD on mean cross-entropy with decoupled L2
/// weight decay, gradient accumulation, and a linear warmup/decay learning
/// rate schedule. The per-task defaults (epochs, batch size) come from
/// default_train_config().
struct TrainConfig {
    double learning_rate = 5e-2;
    int epochs = 1;
    int batch_size = 6;
    int grad_accum_steps = 4;
    double weight_decay = 0.01;
    int warmup_steps = 500;
    std::uint64_t seed = 0;
    Target target = Target::label_a;

    void validate() const;
};

/// Per-task defaults: label_a -> 1 epoch, batch 6; label_b -> 5 epochs,
/// batch 24. Common: lr 5e-2, accumulation 4, weight decay 0.01, warmup 500.
TrainConfig default_train_config(Target target);

/// Dense multinomial linear model plus everything needed to rebuild its
/// inputs: the feature spec, class list, per-epoch training losses, and the
/// digests of the checkpoints it was sequentially fine-tuned from.
struct ModelCheckpoint {
    std::vector<float> weights; // num_classes x feature_spec.dim, row-major
    std::vector<float> bias;    // num_classes
    std::vector<std::string> class_names;
    FeatureSpec feature_spec;
    Target target = Target::label_a;
    std::vector<std::pair<int, double>> train_history; // (epoch, mean cross-entropy)
    std::vector<std::string> lineage;                  // prior-checkpoint digests

    std::size_t num_classes() const { return class_names.size(); }
    bool operator==(const ModelCheckpoint&) const = default;
};

struct Prediction {
    std::vector<double> probabilities; // over class_names, sums to 1
    std::size_t predicted_index = 0;   // argmax, lowest index wins ties
    std::string predicted_class;
};

/// Learning rate at optimizer step `step` (1-based) of `total_steps`:
/// linear ramp 0 -> base_lr over the first min(warmup_steps, total_steps)
/// steps, then linear decay to 0 at the final step.
double linear_schedule_lr(double base_lr, int warmup_steps, int total_steps, int step);

/// Train from zero-initialized weights. Errors: EmptyDataset,
/// UnlabeledDocument, SingleClassError.
ModelCheckpoint train(const Dataset& dataset, const FeatureSpec& fspec, const TrainConfig& cfg);

/// Same loop as train() but starting from `base`; the dataset's classes must
/// be a subset of base.class_names (ClassMismatch otherwise) and base's
/// feature spec is used as-is. Appends digest(base) to the lineage.
ModelCheckpoint finetune(const ModelCheckpoint& base, const Dataset& dataset, const TrainConfig& cfg);

Prediction predict(const ModelCheckpoint& m, std::string_view text);
Prediction predict_features(const ModelCheckpoint& m, const FeatureVector& fv);

struct LabeledExample {
    FeatureVector features;
    std::size_t class_index;
};

/// Max relative error between the analytic mean-cross-entropy gradient and
/// central finite differences on >= 20 sampled coordinates. epsilon must be
/// in (0, 1e-2].
double gradient_check(const ModelCheckpoint& m, const std::vector<LabeledExample>& batch,
                      double epsilon);

inline constexpr std::string_view kCheckpointFormat = "noisedetect-ckpt/1";

/// Hex digest of the checkpoint's serialized payload; this is what lineage
/// entries record.
std::string checkpoint_digest(const ModelCheckpoint& m);

/// Single-file container: one-line JSON header, little-endian float32
/// weight/bias blobs, and a trailing integrity digest.
void save_checkpoint(const ModelCheckpoint& m, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

} // namespace noisedetect
