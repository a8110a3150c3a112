#include "noisedetect/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "noisedetect/error.hpp"

namespace noisedetect {

namespace {

std::string fmt(const char* pattern, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), pattern, value);
    return buf;
}

// Shortest exact decimal form, for the CSV rendering.
std::string exact(double value) { return fmt("%.17g", value); }

} // namespace

std::optional<ReportFormat> parse_report_format(const std::string& name) {
    if (name == "text") return ReportFormat::text;
    if (name == "csv") return ReportFormat::csv;
    if (name == "json") return ReportFormat::json;
    return std::nullopt;
}

EvalReport evaluate(const std::vector<std::string>& y_true,
                    const std::vector<std::string>& y_pred,
                    const std::vector<std::string>& class_names) {
    if (y_true.size() != y_pred.size())
        fail(ErrorCode::LengthMismatch,
             "y_true has " + std::to_string(y_true.size()) + " labels, y_pred has " +
                 std::to_string(y_pred.size()));
    if (y_true.empty()) fail(ErrorCode::LengthMismatch, "cannot evaluate zero examples");
    if (class_names.empty()) fail(ErrorCode::InvalidSpec, "class_names is empty");

    std::map<std::string, std::size_t> index;
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        if (!index.emplace(class_names[c], c).second)
            fail(ErrorCode::InvalidSpec, "duplicate class name '" + class_names[c] + "'");
    }
    auto lookup = [&](const std::string& label, const char* which) {
        const auto it = index.find(label);
        if (it == index.end())
            fail(ErrorCode::UnknownLabel,
                 std::string(which) + " label '" + label + "' is not in class_names");
        return it->second;
    };

    const std::size_t k = class_names.size();
    EvalReport report;
    report.class_names = class_names;
    report.n = y_true.size();
    report.confusion.assign(k, std::vector<std::int64_t>(k, 0));
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ++report.confusion[lookup(y_true[i], "true")][lookup(y_pred[i], "predicted")];
    }

    double f1_sum = 0.0;
    std::int64_t correct = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::int64_t tp = report.confusion[c][c];
        std::int64_t fp = 0, fn = 0;
        for (std::size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += report.confusion[o][c];
            fn += report.confusion[c][o];
        }
        ClassScore score;
        score.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        score.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        score.f1 = (score.precision + score.recall) > 0.0
                       ? 2.0 * score.precision * score.recall / (score.precision + score.recall)
                       : 0.0;
        report.per_class.push_back(score);
        f1_sum += score.f1;
        correct += tp;
    }
    report.macro_f1 = f1_sum / static_cast<double>(k);
    report.accuracy = static_cast<double>(correct) / static_cast<double>(report.n);
    if (k == 2) report.binary_f1 = report.per_class[1].f1;
    return report;
}

std::string report_to_table(const EvalReport& report, ReportFormat format) {
    const std::size_t k = report.class_names.size();
    std::vector<std::int64_t> support(k, 0);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t o = 0; o < k; ++o) support[c] += report.confusion[c][o];
    }

    if (format == ReportFormat::csv) {
        std::string out = "class,precision,recall,f1,support\n";
        double p_sum = 0.0, r_sum = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            const auto& s = report.per_class[c];
            out += report.class_names[c] + "," + exact(s.precision) + "," + exact(s.recall) +
                   "," + exact(s.f1) + "," + std::to_string(support[c]) + "\n";
            p_sum += s.precision;
            r_sum += s.recall;
        }
        out += "macro," + exact(p_sum / static_cast<double>(k)) + "," +
               exact(r_sum / static_cast<double>(k)) + "," + exact(report.macro_f1) + "," +
               std::to_string(report.n) + "\n";
        return out;
    }

    if (format == ReportFormat::json) {
        nlohmann::ordered_json j;
        j["class_names"] = report.class_names;
        j["confusion"] = report.confusion;
        j["per_class"] = nlohmann::ordered_json::array();
        for (const auto& s : report.per_class) {
            j["per_class"].push_back(nlohmann::ordered_json{
                {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}});
        }
        j["macro_f1"] = report.macro_f1;
        j["accuracy"] = report.accuracy;
        j["n"] = report.n;
        if (report.binary_f1) j["binary_f1"] = *report.binary_f1;
        return j.dump(2) + "\n";
    }

    // Plain text table.
    std::size_t name_width = 5; // "macro"
    for (const auto& name : report.class_names) name_width = std::max(name_width, name.size());
    std::ostringstream out;
    auto row = [&](const std::string& name, double p, double r, double f1,
                   const std::string& sup) {
        out << name << std::string(name_width - name.size() + 2, ' ') << fmt("%8.4f", p)
            << fmt("%8.4f", r) << fmt("%8.4f", f1) << "  " << sup << "\n";
    };
    out << std::string(name_width + 2, ' ') << "   prec  recall      f1  support\n";
    double p_sum = 0.0, r_sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
        const auto& s = report.per_class[c];
        row(report.class_names[c], s.precision, s.recall, s.f1, std::to_string(support[c]));
        p_sum += s.precision;
        r_sum += s.recall;
    }
    row("macro", p_sum / static_cast<double>(k), r_sum / static_cast<double>(k), report.macro_f1,
        std::to_string(report.n));
    out << "accuracy " << fmt("%.4f", report.accuracy) << "  n " << report.n << "\n";
    if (report.binary_f1) {
        out << "binary_f1(" << report.class_names[1] << ") " << fmt("%.4f", *report.binary_f1)
            << "\n";
    }
    return out.str();
}

EvalReport report_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("report JSON: ") + e.what());
    }
    EvalReport report;
    try {
        report.class_names = j.at("class_names").get<std::vector<std::string>>();
        report.confusion = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
        for (const auto& s : j.at("per_class")) {
            report.per_class.push_back(ClassScore{s.at("precision").get<double>(),
                                                  s.at("recall").get<double>(),
                                                  s.at("f1").get<double>()});
        }
        report.macro_f1 = j.at("macro_f1").get<double>();
        report.accuracy = j.at("accuracy").get<double>();
        report.n = j.at("n").get<std::size_t>();
        if (j.contains("binary_f1")) report.binary_f1 = j["binary_f1"].get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("report JSON: ") + e.what());
    }
    return report;
}

} // namespace noisedetect
