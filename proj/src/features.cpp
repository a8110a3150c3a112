#include "noisedetect/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "noisedetect/error.hpp"
#include "noisedetect/hash.hpp"
#include "noisedetect/noising.hpp"

namespace noisedetect {

namespace {

void ascii_lower_inplace(std::string& s) {
    for (char& c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
}

} // namespace

const char* weighting_name(Weighting w) {
    switch (w) {
        case Weighting::binary: return "binary";
        case Weighting::tf: return "tf";
        case Weighting::tf_sublinear: return "tf_sublinear";
    }
    return "unknown";
}

std::optional<Weighting> parse_weighting(const std::string& name) {
    if (name == "binary") return Weighting::binary;
    if (name == "tf") return Weighting::tf;
    if (name == "tf_sublinear") return Weighting::tf_sublinear;
    return std::nullopt;
}

void FeatureSpec::validate() const {
    if (dim < 2 || (dim & (dim - 1)) != 0)
        fail(ErrorCode::InvalidSpec, "dim must be a power of two >= 2");
    if (word_ngram_min < 1 || word_ngram_max < word_ngram_min)
        fail(ErrorCode::InvalidSpec, "word n-gram range must satisfy 1 <= min <= max");
    if (char_ngram_min < 1 || char_ngram_max < char_ngram_min)
        fail(ErrorCode::InvalidSpec, "char n-gram range must satisfy 1 <= min <= max");
    if (max_tokens < 1) fail(ErrorCode::InvalidSpec, "max_tokens must be positive");
}

FeatureVector featurize(std::string_view text, const FeatureSpec& spec) {
    spec.validate();

    TokenSequence ts = tokenize_words(text);
    const std::size_t keep = std::min<std::size_t>(ts.tokens.size(),
                                                   static_cast<std::size_t>(spec.max_tokens));

    // Truncated text = prefix of the original through the end of the last
    // kept token, so bytes past max_tokens never influence the vector.
    std::size_t prefix_len = 0;
    for (std::size_t i = 0; i < keep; ++i) {
        prefix_len += ts.whitespace[i].size() + ts.tokens[i].size();
    }
    std::string truncated(text.substr(0, prefix_len));
    ts.tokens.resize(keep);
    if (spec.lowercase) {
        ascii_lower_inplace(truncated);
        for (auto& token : ts.tokens) ascii_lower_inplace(token);
    }

    const std::uint64_t mask = spec.dim - 1;
    std::map<std::uint32_t, std::uint64_t> counts;

    for (int n = spec.word_ngram_min; n <= spec.word_ngram_max; ++n) {
        if (static_cast<std::size_t>(n) > keep) break;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= keep; ++i) {
            std::uint64_t h = fnv1a64("w:");
            for (std::size_t j = 0; j < static_cast<std::size_t>(n); ++j) {
                if (j > 0) h = fnv1a64(" ", h);
                h = fnv1a64(ts.tokens[i + j], h);
            }
            ++counts[static_cast<std::uint32_t>(h & mask)];
        }
    }
    for (int n = spec.char_ngram_min; n <= spec.char_ngram_max; ++n) {
        if (static_cast<std::size_t>(n) > truncated.size()) break;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= truncated.size(); ++i) {
            std::uint64_t h = fnv1a64("c:");
            h = fnv1a64_bytes(truncated.data() + i, static_cast<std::size_t>(n), h);
            ++counts[static_cast<std::uint32_t>(h & mask)];
        }
    }

    FeatureVector fv;
    fv.indices.reserve(counts.size());
    fv.values.reserve(counts.size());
    double norm_sq = 0.0;
    for (const auto& [bucket, count] : counts) {
        double value = 0.0;
        switch (spec.weighting) {
            case Weighting::binary: value = 1.0; break;
            case Weighting::tf: value = static_cast<double>(count); break;
            case Weighting::tf_sublinear:
                value = 1.0 + std::log(static_cast<double>(count));
                break;
        }
        fv.indices.push_back(bucket);
        fv.values.push_back(value);
        norm_sq += value * value;
    }
    if (norm_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& v : fv.values) v *= inv;
    }
    return fv;
}

std::vector<FeatureVector> featurize_dataset(const Dataset& dataset, const FeatureSpec& spec) {
    std::vector<FeatureVector> out;
    out.reserve(dataset.documents.size());
    for (const auto& doc : dataset.documents) out.push_back(featurize(doc.text, spec));
    return out;
}

} // namespace noisedetect
