#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace noisedetect {

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;

    bool operator==(const ClassScore&) const = default;
};

struct EvalReport {
    std::vector<std::string> class_names;
    std::vector<std::vector<std::int64_t>> confusion; // rows = true, cols = predicted
    std::vector<ClassScore> per_class;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::size_t n = 0;
    /// F1 of class_names[1] (the positive class), present when |C| = 2.
    std::optional<double> binary_f1;

    bool operator==(const EvalReport&) const = default;
};

enum class ReportFormat { text, csv, json };
std::optional<ReportFormat> parse_report_format(const std::string& name);

/// Confusion matrix, per-class precision/recall/F1 (0/0 terms are 0), macro
/// F1 averaged over all of class_names (absent classes included), accuracy.
EvalReport evaluate(const std::vector<std::string>& y_true,
                    const std::vector<std::string>& y_pred,
                    const std::vector<std::string>& class_names);

std::string report_to_table(const EvalReport& report, ReportFormat format);
EvalReport report_from_json(const std::string& json_text);

} // namespace noisedetect
