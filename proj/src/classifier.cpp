#include "noisedetect/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "noisedetect/error.hpp"
#include "noisedetect/hash.hpp"
#include "noisedetect/rng.hpp"

namespace noisedetect {

namespace {

// --- math helpers (all double precision) --------------------------------

void softmax_inplace(std::vector<double>& logits) {
    double peak = -std::numeric_limits<double>::infinity();
    for (double z : logits) peak = std::max(peak, z);
    double denom = 0.0;
    for (double& z : logits) {
        z = std::exp(z - peak);
        denom += z;
    }
    for (double& z : logits) z /= denom;
}

std::vector<double> class_logits(const std::vector<double>& weights, const std::vector<double>& bias,
                                 std::size_t dim, const FeatureVector& fv) {
    const std::size_t k = bias.size();
    std::vector<double> logits(k);
    for (std::size_t c = 0; c < k; ++c) {
        const double* row = weights.data() + c * dim;
        double z = bias[c];
        for (std::size_t t = 0; t < fv.indices.size(); ++t) {
            z += row[fv.indices[t]] * fv.values[t];
        }
        logits[c] = z;
    }
    return logits;
}

double cross_entropy(const std::vector<double>& probs, std::size_t label) {
    return -std::log(std::max(probs[label], 1e-300));
}

struct TrainingProblem {
    std::vector<FeatureVector> features;
    std::vector<std::size_t> labels; // indices into class_names
};

std::vector<std::string> extract_labels(const Dataset& dataset, Target target) {
    const LabelField field = target_field(target);
    std::vector<std::string> labels;
    labels.reserve(dataset.documents.size());
    for (std::size_t i = 0; i < dataset.documents.size(); ++i) {
        const auto value = label_value(dataset.documents[i], field);
        if (!value)
            fail(ErrorCode::UnlabeledDocument,
                 "document " + std::to_string(i) + " has no " + label_field_name(field));
        labels.push_back(*value);
    }
    return labels;
}

/// SGD with decoupled weight decay (weights only, not bias) and linear
/// warmup/decay. Gradients are accumulated over grad_accum_steps batches per
/// optimizer step; the trailing partial batch and partial accumulation
/// window of each epoch still count.
void run_sgd(const TrainingProblem& problem, const TrainConfig& cfg, std::size_t dim,
             std::vector<double>& weights, std::vector<double>& bias,
             std::vector<std::pair<int, double>>& history) {
    const std::size_t n = problem.features.size();
    const std::size_t k = bias.size();
    const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t batches_per_epoch = (n + batch_size - 1) / batch_size;
    const auto accum = static_cast<std::size_t>(cfg.grad_accum_steps);
    const std::size_t steps_per_epoch = (batches_per_epoch + accum - 1) / accum;
    const int total_steps = cfg.epochs * static_cast<int>(steps_per_epoch);

    std::vector<double> grad_w(k * dim, 0.0);
    std::vector<double> grad_b(k, 0.0);
    std::vector<std::size_t> order(n);
    int step = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        SplitMix64 rng(derive_stream_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t window_batches = 0;

        auto optimizer_step = [&] {
            ++step;
            const double lr = linear_schedule_lr(cfg.learning_rate, cfg.warmup_steps,
                                                 total_steps, step);
            const double decay = 1.0 - lr * cfg.weight_decay;
            const double scale = lr / static_cast<double>(window_batches);
            for (std::size_t i = 0; i < weights.size(); ++i) {
                weights[i] = weights[i] * decay - scale * grad_w[i];
            }
            for (std::size_t c = 0; c < k; ++c) bias[c] -= scale * grad_b[c];
            std::fill(grad_w.begin(), grad_w.end(), 0.0);
            std::fill(grad_b.begin(), grad_b.end(), 0.0);
            window_batches = 0;
        };

        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            const double inv_count = 1.0 / static_cast<double>(count);
            for (std::size_t b = 0; b < count; ++b) {
                const std::size_t doc = order[start + b];
                const FeatureVector& fv = problem.features[doc];
                std::vector<double> probs = class_logits(weights, bias, dim, fv);
                softmax_inplace(probs);
                epoch_loss += cross_entropy(probs, problem.labels[doc]);
                for (std::size_t c = 0; c < k; ++c) {
                    const double residual =
                        (probs[c] - (c == problem.labels[doc] ? 1.0 : 0.0)) * inv_count;
                    grad_b[c] += residual;
                    double* row = grad_w.data() + c * dim;
                    for (std::size_t t = 0; t < fv.indices.size(); ++t) {
                        row[fv.indices[t]] += residual * fv.values[t];
                    }
                }
            }
            ++window_batches;
            const bool last_batch = start + batch_size >= n;
            if (window_batches == accum || last_batch) optimizer_step();
        }
        history.emplace_back(epoch, epoch_loss / static_cast<double>(n));
    }
}

ModelCheckpoint finish_checkpoint(std::vector<double> weights, std::vector<double> bias,
                                  std::vector<std::string> class_names, FeatureSpec fspec,
                                  Target target, std::vector<std::pair<int, double>> history,
                                  std::vector<std::string> lineage) {
    ModelCheckpoint m;
    m.weights.assign(weights.begin(), weights.end()); // double -> float32
    m.bias.assign(bias.begin(), bias.end());
    m.class_names = std::move(class_names);
    m.feature_spec = fspec;
    m.target = target;
    m.train_history = std::move(history);
    m.lineage = std::move(lineage);
    return m;
}

// --- serialization -------------------------------------------------------

void append_f32_le(std::string& out, float value) {
    const auto bits = std::bit_cast<std::uint32_t>(value);
    out += static_cast<char>(bits & 0xFF);
    out += static_cast<char>((bits >> 8) & 0xFF);
    out += static_cast<char>((bits >> 16) & 0xFF);
    out += static_cast<char>((bits >> 24) & 0xFF);
}

float read_f32_le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

nlohmann::ordered_json feature_spec_to_json(const FeatureSpec& spec) {
    return nlohmann::ordered_json{
        {"dim", spec.dim},
        {"word_ngram_min", spec.word_ngram_min},
        {"word_ngram_max", spec.word_ngram_max},
        {"char_ngram_min", spec.char_ngram_min},
        {"char_ngram_max", spec.char_ngram_max},
        {"max_tokens", spec.max_tokens},
        {"lowercase", spec.lowercase},
        {"weighting", weighting_name(spec.weighting)},
    };
}

FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
    FeatureSpec spec;
    spec.dim = j.at("dim").get<std::uint32_t>();
    spec.word_ngram_min = j.at("word_ngram_min").get<int>();
    spec.word_ngram_max = j.at("word_ngram_max").get<int>();
    spec.char_ngram_min = j.at("char_ngram_min").get<int>();
    spec.char_ngram_max = j.at("char_ngram_max").get<int>();
    spec.max_tokens = j.at("max_tokens").get<int>();
    spec.lowercase = j.at("lowercase").get<bool>();
    const auto weighting = parse_weighting(j.at("weighting").get<std::string>());
    if (!weighting) fail(ErrorCode::FormatVersionError, "unknown weighting in checkpoint header");
    spec.weighting = *weighting;
    return spec;
}

std::string serialize_payload(const ModelCheckpoint& m) {
    nlohmann::ordered_json header{
        {"format", std::string(kCheckpointFormat)},
        {"target", target_name(m.target)},
        {"class_names", m.class_names},
        {"feature_spec", feature_spec_to_json(m.feature_spec)},
        {"lineage", m.lineage},
        {"train_history", nlohmann::ordered_json::array()},
    };
    for (const auto& [epoch, loss] : m.train_history) {
        header["train_history"].push_back(nlohmann::ordered_json::array({epoch, loss}));
    }
    std::string payload = header.dump();
    payload += '\n';
    payload.reserve(payload.size() + 4 * (m.weights.size() + m.bias.size()));
    for (float w : m.weights) append_f32_le(payload, w);
    for (float b : m.bias) append_f32_le(payload, b);
    return payload;
}

} // namespace

const char* target_name(Target t) { return t == Target::label_a ? "label_a" : "label_b"; }

std::optional<Target> parse_target(const std::string& name) {
    if (name == "label_a") return Target::label_a;
    if (name == "label_b") return Target::label_b;
    return std::nullopt;
}

LabelField target_field(Target t) {
    return t == Target::label_a ? LabelField::label_a : LabelField::label_b;
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0)) fail(ErrorCode::InvalidSpec, "learning_rate must be >= 0");
    if (epochs < 1) fail(ErrorCode::InvalidSpec, "epochs must be positive");
    if (batch_size < 1) fail(ErrorCode::InvalidSpec, "batch_size must be positive");
    if (grad_accum_steps < 1) fail(ErrorCode::InvalidSpec, "grad_accum_steps must be positive");
    if (!(weight_decay >= 0.0)) fail(ErrorCode::InvalidSpec, "weight_decay must be >= 0");
    if (warmup_steps < 0) fail(ErrorCode::InvalidSpec, "warmup_steps must be >= 0");
}

TrainConfig default_train_config(Target target) {
    TrainConfig cfg;
    cfg.target = target;
    if (target == Target::label_a) {
        cfg.epochs = 1;
        cfg.batch_size = 6;
    } else {
        cfg.epochs = 5;
        cfg.batch_size = 24;
    }
    return cfg;
}

double linear_schedule_lr(double base_lr, int warmup_steps, int total_steps, int step) {
    if (total_steps < 1 || step < 1 || step > total_steps) return 0.0;
    const int warmup = std::min(warmup_steps, total_steps);
    if (step <= warmup) {
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
    }
    return base_lr * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup);
}

ModelCheckpoint train(const Dataset& dataset, const FeatureSpec& fspec, const TrainConfig& cfg) {
    cfg.validate();
    fspec.validate();
    if (dataset.empty()) fail(ErrorCode::EmptyDataset, "cannot train on an empty dataset");

    const std::vector<std::string> labels = extract_labels(dataset, cfg.target);
    std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2)
        fail(ErrorCode::SingleClassError,
             "training needs at least 2 classes, found " + std::to_string(distinct.size()));
    std::vector<std::string> class_names(distinct.begin(), distinct.end());

    TrainingProblem problem;
    problem.features = featurize_dataset(dataset, fspec);
    problem.labels.reserve(labels.size());
    for (const auto& label : labels) {
        problem.labels.push_back(static_cast<std::size_t>(
            std::lower_bound(class_names.begin(), class_names.end(), label) - class_names.begin()));
    }

    std::vector<double> weights(class_names.size() * fspec.dim, 0.0);
    std::vector<double> bias(class_names.size(), 0.0);
    std::vector<std::pair<int, double>> history;
    run_sgd(problem, cfg, fspec.dim, weights, bias, history);
    return finish_checkpoint(std::move(weights), std::move(bias), std::move(class_names), fspec,
                             cfg.target, std::move(history), {});
}

ModelCheckpoint finetune(const ModelCheckpoint& base, const Dataset& dataset,
                         const TrainConfig& cfg) {
    cfg.validate();
    if (dataset.empty())
        fail(ErrorCode::EmptyDataset, "cannot fine-tune on an empty dataset (zero optimizer steps)");

    const std::vector<std::string> labels = extract_labels(dataset, cfg.target);
    TrainingProblem problem;
    problem.labels.reserve(labels.size());
    for (const auto& label : labels) {
        const auto it = std::find(base.class_names.begin(), base.class_names.end(), label);
        if (it == base.class_names.end())
            fail(ErrorCode::ClassMismatch,
                 "label '" + label + "' is not a class of the base checkpoint");
        problem.labels.push_back(static_cast<std::size_t>(it - base.class_names.begin()));
    }
    problem.features = featurize_dataset(dataset, base.feature_spec);

    std::vector<double> weights(base.weights.begin(), base.weights.end());
    std::vector<double> bias(base.bias.begin(), base.bias.end());
    std::vector<std::pair<int, double>> history;
    run_sgd(problem, cfg, base.feature_spec.dim, weights, bias, history);

    std::vector<std::string> lineage = base.lineage;
    lineage.push_back(checkpoint_digest(base));
    return finish_checkpoint(std::move(weights), std::move(bias), base.class_names,
                             base.feature_spec, cfg.target, std::move(history),
                             std::move(lineage));
}

Prediction predict_features(const ModelCheckpoint& m, const FeatureVector& fv) {
    const std::vector<double> weights(m.weights.begin(), m.weights.end());
    const std::vector<double> bias(m.bias.begin(), m.bias.end());
    std::vector<double> probs = class_logits(weights, bias, m.feature_spec.dim, fv);
    softmax_inplace(probs);

    Prediction p;
    p.predicted_index = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[p.predicted_index]) p.predicted_index = c;
    }
    p.predicted_class = m.class_names[p.predicted_index];
    p.probabilities = std::move(probs);
    return p;
}

Prediction predict(const ModelCheckpoint& m, std::string_view text) {
    return predict_features(m, featurize(text, m.feature_spec));
}

double gradient_check(const ModelCheckpoint& m, const std::vector<LabeledExample>& batch,
                      double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1e-2))
        fail(ErrorCode::InvalidSpec, "epsilon must be in (0, 1e-2]");
    if (batch.empty()) fail(ErrorCode::EmptyDataset, "gradient_check needs a non-empty batch");

    const std::size_t k = m.num_classes();
    const std::size_t dim = m.feature_spec.dim;
    std::vector<double> weights(m.weights.begin(), m.weights.end());
    std::vector<double> bias(m.bias.begin(), m.bias.end());

    auto loss = [&](const std::vector<double>& w, const std::vector<double>& b) {
        double total = 0.0;
        for (const auto& ex : batch) {
            std::vector<double> probs = class_logits(w, b, dim, ex.features);
            softmax_inplace(probs);
            total += cross_entropy(probs, ex.class_index);
        }
        return total / static_cast<double>(batch.size());
    };

    // Analytic gradient of the mean cross-entropy.
    std::vector<double> grad_w(k * dim, 0.0);
    std::vector<double> grad_b(k, 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& ex : batch) {
        std::vector<double> probs = class_logits(weights, bias, dim, ex.features);
        softmax_inplace(probs);
        for (std::size_t c = 0; c < k; ++c) {
            const double residual = (probs[c] - (c == ex.class_index ? 1.0 : 0.0)) * inv_n;
            grad_b[c] += residual;
            double* row = grad_w.data() + c * dim;
            for (std::size_t t = 0; t < ex.features.indices.size(); ++t) {
                row[ex.features.indices[t]] += residual * ex.features.values[t];
            }
        }
    }

    // >= 20 coordinates across weights and bias, fixed internal stream.
    const std::size_t coord_space = k * dim + k;
    const std::size_t samples = std::min<std::size_t>(std::max<std::size_t>(20, k), coord_space);
    SplitMix64 rng(0x67726164636865ULL);
    double max_rel = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const std::size_t coord = static_cast<std::size_t>(rng.next_below(coord_space));
        const bool is_bias = coord >= k * dim;
        double* slot = is_bias ? &bias[coord - k * dim] : &weights[coord];
        const double saved = *slot;
        *slot = saved + epsilon;
        const double up = loss(weights, bias);
        *slot = saved - epsilon;
        const double down = loss(weights, bias);
        *slot = saved;

        const double numeric = (up - down) / (2.0 * epsilon);
        const double analytic = is_bias ? grad_b[coord - k * dim] : grad_w[coord];
        const double denom = std::max(std::abs(numeric), std::abs(analytic));
        if (denom < 1e-12) continue; // both zero to machine precision
        max_rel = std::max(max_rel, std::abs(numeric - analytic) / denom);
    }
    return max_rel;
}

std::string checkpoint_digest(const ModelCheckpoint& m) {
    return to_hex16(fnv1a64(serialize_payload(m)));
}

void save_checkpoint(const ModelCheckpoint& m, const std::filesystem::path& path) {
    std::string payload = serialize_payload(m);
    const std::uint64_t digest = fnv1a64(payload);
    for (int i = 0; i < 8; ++i) payload += static_cast<char>((digest >> (8 * i)) & 0xFF);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) fail(ErrorCode::IoError, "write failure on '" + path.string() + "'");
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) fail(ErrorCode::IoError, "read failure on '" + path.string() + "'");
    const std::string content = std::move(buf).str();

    const std::size_t newline = content.find('\n');
    if (newline == std::string::npos)
        fail(ErrorCode::FormatVersionError, "'" + path.string() + "' is not a checkpoint file");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(content.substr(0, newline));
    } catch (const nlohmann::json::exception&) {
        fail(ErrorCode::FormatVersionError, "'" + path.string() + "' has no valid header");
    }
    if (!header.is_object() || header.value("format", "") != kCheckpointFormat)
        fail(ErrorCode::FormatVersionError,
             "unsupported checkpoint format '" + header.value("format", "<missing>") + "'");

    ModelCheckpoint m;
    try {
        const auto target = parse_target(header.at("target").get<std::string>());
        if (!target) fail(ErrorCode::FormatVersionError, "unknown target in checkpoint header");
        m.target = *target;
        m.class_names = header.at("class_names").get<std::vector<std::string>>();
        m.feature_spec = feature_spec_from_json(header.at("feature_spec"));
        m.feature_spec.validate();
        m.lineage = header.at("lineage").get<std::vector<std::string>>();
        for (const auto& entry : header.at("train_history")) {
            m.train_history.emplace_back(entry.at(0).get<int>(), entry.at(1).get<double>());
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::FormatVersionError,
             "'" + path.string() + "' has a malformed header: " + e.what());
    }

    const std::size_t k = m.class_names.size();
    const std::size_t dim = m.feature_spec.dim;
    const std::size_t blob_size = 4 * (k * dim + k);
    const std::size_t expected = newline + 1 + blob_size + 8;
    if (content.size() != expected)
        fail(ErrorCode::IoError,
             "'" + path.string() + "' is truncated or padded (expected " +
                 std::to_string(expected) + " bytes, got " + std::to_string(content.size()) + ")");

    const std::uint64_t stored_digest = [&] {
        std::uint64_t d = 0;
        for (int i = 0; i < 8; ++i) {
            d |= static_cast<std::uint64_t>(
                     static_cast<unsigned char>(content[content.size() - 8 + i]))
                 << (8 * i);
        }
        return d;
    }();
    if (fnv1a64_bytes(content.data(), content.size() - 8) != stored_digest)
        fail(ErrorCode::DigestMismatch, "'" + path.string() + "' failed its integrity check");

    const auto* p = reinterpret_cast<const unsigned char*>(content.data() + newline + 1);
    m.weights.resize(k * dim);
    for (auto& w : m.weights) {
        w = read_f32_le(p);
        p += 4;
    }
    m.bias.resize(k);
    for (auto& b : m.bias) {
        b = read_f32_le(p);
        p += 4;
    }
    return m;
}

} // namespace noisedetect
