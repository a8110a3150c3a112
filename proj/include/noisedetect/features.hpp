#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "noisedetect/corpus.hpp"

namespace noisedetect {

enum class Weighting { binary, tf, tf_sublinear };

const char* weighting_name(Weighting w);
std::optional<Weighting> parse_weighting(const std::string& name);

/// Stateless hashed n-gram featurization. There is no fitting step: the
/// vector of a text depends only on (text, spec), so checkpoints carry the
/// spec and rebuild identical features anywhere.
///
/// Word n-grams are hashed as "w:" + tokens joined by single spaces; char
/// n-grams as "c:" + the raw byte window. The hash is 64-bit FNV-1a over
/// UTF-8 bytes, bucketed by masking with dim-1 (dim is a power of two).
struct FeatureSpec {
    std::uint32_t dim = 1u << 18;
    int word_ngram_min = 1;
    int word_ngram_max = 2;
    int char_ngram_min = 3;
    int char_ngram_max = 5;
    int max_tokens = 768;
    bool lowercase = true;
    Weighting weighting = Weighting::tf_sublinear;

    void validate() const;
    bool operator==(const FeatureSpec&) const = default;
};

/// Sparse vector: strictly increasing indices in [0, dim), positive values,
/// L2-normalized (the zero vector for token-free text).
struct FeatureVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;
    bool l2_normalized = true;

    std::size_t nnz() const { return indices.size(); }
    bool operator==(const FeatureVector&) const = default;
};

FeatureVector featurize(std::string_view text, const FeatureSpec& spec);
std::vector<FeatureVector> featurize_dataset(const Dataset& dataset, const FeatureSpec& spec);

} // namespace noisedetect
