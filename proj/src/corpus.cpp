#include "noisedetect/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "noisedetect/hash.hpp"
#include "noisedetect/rng.hpp"

namespace noisedetect {

namespace {

std::string ascii_lower(std::string s) {
    for (char& c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return s;
}

bool has_token(const std::string& text) {
    for (unsigned char c : text) {
        if (!std::isspace(c)) return true;
    }
    return false;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) fail(ErrorCode::IoError, "read failure on '" + path.string() + "'");
    return std::move(buf).str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::IoError, "write failure on '" + path.string() + "'");
}

// --- CSV ---------------------------------------------------------------

// RFC-4180-style records: comma separator, double-quote quoting, "" escape,
// quoted fields may span lines. Accepts \n and \r\n row endings.
std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    bool at_field_start = true;

    auto end_field = [&] {
        record.push_back(std::move(field));
        field.clear();
        at_field_start = true;
        field_was_quoted = false;
    };
    auto end_record = [&] {
        end_field();
        records.push_back(std::move(record));
        record.clear();
    };

    const std::size_t len = content.size();
    for (std::size_t i = 0; i < len; ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < len && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (at_field_start) {
                    in_quotes = true;
                    field_was_quoted = true;
                    at_field_start = false;
                } else if (field_was_quoted) {
                    fail(ErrorCode::ParseError,
                         "unexpected character after closing quote (record " +
                             std::to_string(records.size() + 1) + ")");
                } else {
                    // Lenient: bare quote inside an unquoted field.
                    field += c;
                }
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < len && content[i + 1] == '\n') {
                    end_record();
                    ++i;
                } else {
                    field += c;
                    at_field_start = false;
                }
                break;
            case '\n':
                end_record();
                break;
            default:
                field += c;
                at_field_start = false;
                break;
        }
    }
    if (in_quotes) fail(ErrorCode::ParseError, "unterminated quoted field at end of file");
    if (!field.empty() || !record.empty() || field_was_quoted) end_record();
    return records;
}

bool csv_needs_quoting(const std::string& field) {
    return field.find_first_of(",\"\r\n") != std::string::npos;
}

void append_csv_field(std::string& out, const std::string& field) {
    if (!csv_needs_quoting(field)) {
        out += field;
        return;
    }
    out += '"';
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

// --- row validation ----------------------------------------------------

std::optional<int> parse_label_a(const std::string& raw, std::size_t row) {
    if (raw.empty()) return std::nullopt;
    if (raw == "0") return 0;
    if (raw == "1") return 1;
    // Distinguish a malformed cell from a well-formed but out-of-range label.
    const bool numeric = !raw.empty() &&
                         raw.find_first_not_of("0123456789-+") == std::string::npos;
    if (numeric)
        fail(ErrorCode::LabelError,
             "row " + std::to_string(row) + ": label_a must be 0 or 1, got '" + raw + "'");
    fail(ErrorCode::ParseError,
         "row " + std::to_string(row) + ": label_a is not an integer: '" + raw + "'");
}

std::optional<std::string> normalize_label_b(const std::string& raw, std::size_t row,
                                             const LoadOptions& options) {
    if (raw.empty()) return std::nullopt;
    if (auto canonical = canonicalize_generator_class(raw)) return canonical;
    if (options.allow_new_classes) return raw;
    fail(ErrorCode::LabelError,
         "row " + std::to_string(row) + ": unknown label_b '" + raw +
             "' (pass --allow-new-classes to admit it)");
}

LabeledDocument make_document(std::string text, std::optional<int> label_a,
                              std::optional<std::string> label_b, std::size_t row) {
    if (!has_token(text))
        fail(ErrorCode::SchemaError,
             "row " + std::to_string(row) + ": text has no tokens");
    if (label_a && label_b) {
        const bool is_human_story = *label_b == "Human_story";
        if ((*label_a == 0) != is_human_story)
            fail(ErrorCode::LabelError,
                 "row " + std::to_string(row) + ": label_a=" + std::to_string(*label_a) +
                     " inconsistent with label_b='" + *label_b + "'");
    }
    return LabeledDocument{std::move(text), label_a, std::move(label_b)};
}

Dataset load_csv(const std::filesystem::path& path, const LoadOptions& options) {
    const auto records = parse_csv(read_file(path));
    if (records.empty()) fail(ErrorCode::SchemaError, "missing header row in '" + path.string() + "'");

    int text_col = -1, label_a_col = -1, label_b_col = -1;
    const auto& header = records.front();
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string name = ascii_lower(header[i]);
        auto bind = [&](int& slot) {
            if (slot >= 0)
                fail(ErrorCode::SchemaError, "duplicate column '" + name + "' in header");
            slot = static_cast<int>(i);
        };
        if (name == "text") bind(text_col);
        else if (name == "label_a") bind(label_a_col);
        else if (name == "label_b") bind(label_b_col);
        // Unknown columns are ignored.
    }
    if (text_col < 0) fail(ErrorCode::SchemaError, "header has no 'text' column");

    std::vector<LabeledDocument> docs;
    docs.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        const std::size_t row = r; // 1-based data row number
        if (rec.size() != header.size())
            fail(ErrorCode::ParseError,
                 "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                     " fields, got " + std::to_string(rec.size()));
        auto cell = [&](int col) -> const std::string& { return rec[static_cast<std::size_t>(col)]; };
        auto label_a = label_a_col >= 0 ? parse_label_a(cell(label_a_col), row) : std::nullopt;
        auto label_b = label_b_col >= 0 ? normalize_label_b(cell(label_b_col), row, options)
                                        : std::nullopt;
        docs.push_back(make_document(cell(text_col), label_a, std::move(label_b), row));
    }
    return dataset_from_documents(std::move(docs));
}

Dataset load_jsonl(const std::filesystem::path& path, const LoadOptions& options) {
    const std::string content = read_file(path);
    std::vector<LabeledDocument> docs;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        std::size_t end = content.find('\n', pos);
        if (end == std::string::npos) end = content.size();
        std::string_view line(content.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ParseError, "row " + std::to_string(line_no) + ": " + e.what());
        }
        if (!obj.is_object())
            fail(ErrorCode::ParseError, "row " + std::to_string(line_no) + ": not a JSON object");
        if (!obj.contains("text") || !obj["text"].is_string())
            fail(ErrorCode::SchemaError,
                 "row " + std::to_string(line_no) + ": missing string field 'text'");

        std::optional<int> label_a;
        if (obj.contains("label_a") && !obj["label_a"].is_null()) {
            if (!obj["label_a"].is_number_integer())
                fail(ErrorCode::ParseError,
                     "row " + std::to_string(line_no) + ": label_a is not an integer");
            const auto v = obj["label_a"].get<std::int64_t>();
            if (v != 0 && v != 1)
                fail(ErrorCode::LabelError,
                     "row " + std::to_string(line_no) + ": label_a must be 0 or 1, got " +
                         std::to_string(v));
            label_a = static_cast<int>(v);
        }
        std::optional<std::string> label_b;
        if (obj.contains("label_b") && !obj["label_b"].is_null()) {
            if (!obj["label_b"].is_string())
                fail(ErrorCode::ParseError,
                     "row " + std::to_string(line_no) + ": label_b is not a string");
            label_b = normalize_label_b(obj["label_b"].get<std::string>(), line_no, options);
        }
        docs.push_back(make_document(obj["text"].get<std::string>(), label_a,
                                     std::move(label_b), line_no));
    }
    return dataset_from_documents(std::move(docs));
}

} // namespace

const std::vector<std::string>& canonical_generator_classes() {
    static const std::vector<std::string> classes = {
        "Human_story", "gemma-2-9b", "mistral-7B", "qwen-2-72B",
        "llama-8B",    "yi-large",   "GPT_4-o",
    };
    return classes;
}

std::optional<std::string> canonicalize_generator_class(const std::string& value) {
    const std::string lowered = ascii_lower(value);
    for (const auto& canonical : canonical_generator_classes()) {
        if (lowered == ascii_lower(canonical)) return canonical;
    }
    return std::nullopt;
}

FileFormat detect_format(const std::filesystem::path& path) {
    const std::string ext = ascii_lower(path.extension().string());
    if (ext == ".csv") return FileFormat::csv;
    if (ext == ".jsonl" || ext == ".ndjson") return FileFormat::jsonl;
    fail(ErrorCode::InvalidSpec,
         "cannot infer format from extension '" + ext + "' (expected .csv or .jsonl)");
}

const char* format_name(FileFormat format) {
    return format == FileFormat::csv ? "csv" : "jsonl";
}

Dataset dataset_from_documents(std::vector<LabeledDocument> documents) {
    std::set<std::string> classes;
    for (const auto& doc : documents) {
        if (doc.label_b) classes.insert(*doc.label_b);
    }
    Dataset d;
    d.documents = std::move(documents);
    d.class_set.assign(classes.begin(), classes.end());
    return d;
}

Dataset load_dataset(const std::filesystem::path& path, FileFormat format, const LoadOptions& options) {
    return format == FileFormat::csv ? load_csv(path, options) : load_jsonl(path, options);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, FileFormat format) {
    std::string out;
    if (format == FileFormat::csv) {
        out += "text,label_a,label_b\n";
        for (const auto& doc : dataset.documents) {
            append_csv_field(out, doc.text);
            out += ',';
            if (doc.label_a) out += std::to_string(*doc.label_a);
            out += ',';
            if (doc.label_b) append_csv_field(out, *doc.label_b);
            out += '\n';
        }
    } else {
        for (const auto& doc : dataset.documents) {
            nlohmann::ordered_json obj;
            obj["text"] = doc.text;
            if (doc.label_a) obj["label_a"] = *doc.label_a;
            if (doc.label_b) obj["label_b"] = *doc.label_b;
            out += obj.dump();
            out += '\n';
        }
    }
    write_file(path, out);
}

std::optional<std::string> label_value(const LabeledDocument& doc, LabelField field) {
    if (field == LabelField::label_a) {
        if (!doc.label_a) return std::nullopt;
        return std::string(*doc.label_a == 0 ? "0" : "1");
    }
    return doc.label_b;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& dataset, const SplitSpec& spec) {
    if (!(spec.validation_fraction > 0.0 && spec.validation_fraction < 1.0))
        fail(ErrorCode::InvalidSpec, "validation_fraction must be strictly between 0 and 1");

    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < dataset.documents.size(); ++i) {
        const auto label = label_value(dataset.documents[i], spec.stratify_on);
        if (!label)
            fail(ErrorCode::MissingLabel,
                 "document " + std::to_string(i) + " has no " +
                     label_field_name(spec.stratify_on));
        strata[*label].push_back(i);
    }

    std::vector<bool> to_validation(dataset.documents.size(), false);
    for (const auto& [label, indices] : strata) {
        if (indices.size() < 2)
            fail(ErrorCode::StratumTooSmall,
                 "class '" + label + "' has only " + std::to_string(indices.size()) +
                     " document(s); need at least 2");
        const auto take = static_cast<std::size_t>(
            std::llround(spec.validation_fraction * static_cast<double>(indices.size())));
        std::vector<std::size_t> order = indices;
        SplitMix64 rng(derive_stream_seed(spec.seed, fnv1a64(label)));
        rng.shuffle(order);
        for (std::size_t i = 0; i < take; ++i) to_validation[order[i]] = true;
    }

    std::vector<LabeledDocument> train_docs, val_docs;
    for (std::size_t i = 0; i < dataset.documents.size(); ++i) {
        (to_validation[i] ? val_docs : train_docs).push_back(dataset.documents[i]);
    }
    return {dataset_from_documents(std::move(train_docs)),
            dataset_from_documents(std::move(val_docs))};
}

std::map<std::string, std::size_t> class_histogram(const Dataset& dataset, LabelField on) {
    std::map<std::string, std::size_t> counts;
    for (std::size_t i = 0; i < dataset.documents.size(); ++i) {
        const auto label = label_value(dataset.documents[i], on);
        if (!label)
            fail(ErrorCode::MissingLabel,
                 "document " + std::to_string(i) + " has no " + label_field_name(on));
        ++counts[*label];
    }
    return counts;
}

} // namespace noisedetect
