#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "noisedetect/error.hpp"

namespace noisedetect {

/// One corpus row in the shared-task schema: raw text plus the binary
/// human/AI label (label_a) and the generator label (label_b). Either label
/// may be absent (prediction-only corpora).
struct LabeledDocument {
    std::string text;
    std::optional<int> label_a;          // 0 = human, 1 = AI
    std::optional<std::string> label_b;  // generator class name

    bool operator==(const LabeledDocument&) const = default;
};

struct Dataset {
    std::vector<LabeledDocument> documents;
    /// Sorted, duplicate-free list of the distinct label_b values present.
    std::vector<std::string> class_set;

    std::size_t size() const { return documents.size(); }
    bool empty() const { return documents.empty(); }
    bool operator==(const Dataset&) const = default;
};

enum class FileFormat { csv, jsonl };
enum class LabelField { label_a, label_b };

inline const char* label_field_name(LabelField f) {
    return f == LabelField::label_a ? "label_a" : "label_b";
}

/// The seven generator classes of the shared task, in canonical spelling.
const std::vector<std::string>& canonical_generator_classes();

/// Canonical spelling for a label_b value (case-insensitive match), or
/// nullopt when the value is not one of the seven shared-task classes.
std::optional<std::string> canonicalize_generator_class(const std::string& value);

struct LoadOptions {
    /// Admit label_b values outside the canonical class list (stored
    /// verbatim) instead of rejecting them.
    bool allow_new_classes = false;
};

/// Infer csv/jsonl from the file extension.
FileFormat detect_format(const std::filesystem::path& path);
const char* format_name(FileFormat format);

Dataset load_dataset(const std::filesystem::path& path, FileFormat format, const LoadOptions& options = {});
void save_dataset(const Dataset& dataset, const std::filesystem::path& path, FileFormat format);

/// Rebuild class_set from the documents. Labels are assumed validated.
Dataset dataset_from_documents(std::vector<LabeledDocument> documents);

struct SplitSpec {
    double validation_fraction = 0.2;  // in (0, 1)
    std::uint64_t seed = 0;
    LabelField stratify_on = LabelField::label_b;
};

/// Seeded stratified split. Per stratum, exactly round(fraction * size)
/// documents go to validation (round half up); both outputs preserve the
/// input's relative document order.
std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec);

/// Count documents per class of the requested label. label_a counts are
/// keyed "0"/"1".
std::map<std::string, std::size_t> class_histogram(const Dataset& dataset, LabelField on);

/// The label of one document as a class-name string ("0"/"1" for label_a),
/// or nullopt when absent.
std::optional<std::string> label_value(const LabeledDocument& doc, LabelField field);

} // namespace noisedetect
