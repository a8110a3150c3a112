#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "noisedetect/error.hpp"
#include "noisedetect/features.hpp"
#include "noisedetect/noising.hpp"

#include "test_support.hpp"

using namespace noisedetect;

namespace {

double norm(const FeatureVector& fv) {
    double s = 0.0;
    for (double v : fv.values) s += v * v;
    return std::sqrt(s);
}

FeatureSpec small_spec() {
    FeatureSpec spec;
    spec.dim = 1u << 12;
    return spec;
}

} // namespace

TEST_CASE("empty and whitespace-only text give the zero vector") {
    const FeatureSpec spec = small_spec();
    CHECK(featurize("", spec).nnz() == 0);
    CHECK(featurize("  \t\n ", spec).nnz() == 0);
}

TEST_CASE("non-empty text gives a unit-norm vector with in-range sorted indices") {
    const FeatureSpec spec = small_spec();
    SplitMix64 rng(41);
    for (int i = 0; i < 100; ++i) {
        const std::string text = test_support::random_text(rng, 1 + rng.next_below(60));
        const FeatureVector fv = featurize(text, spec);
        REQUIRE(fv.nnz() > 0);
        REQUIRE(std::abs(norm(fv) - 1.0) < 1e-9);
        for (std::size_t t = 0; t < fv.indices.size(); ++t) {
            REQUIRE(fv.indices[t] < spec.dim);
            if (t > 0) REQUIRE(fv.indices[t] > fv.indices[t - 1]);
            REQUIRE(fv.values[t] > 0.0);
        }
    }
}

TEST_CASE("featurize is a pure function of (text, spec)") {
    const FeatureSpec spec = small_spec();
    const std::string text = "The quick brown fox jumps over the lazy dog.";
    CHECK(featurize(text, spec) == featurize(text, spec));
}

TEST_CASE("text beyond max_tokens never affects the output") {
    FeatureSpec spec = small_spec();
    spec.max_tokens = 8;
    SplitMix64 rng(5);
    const std::string head = test_support::random_text(rng, 8);
    const std::string tail_a = test_support::random_text(rng, 30);
    const std::string tail_b = test_support::random_text(rng, 15);
    CHECK(featurize(head + " " + tail_a, spec) == featurize(head + " " + tail_b, spec));
    CHECK(featurize(head + " " + tail_a, spec) == featurize(head, spec));
}

TEST_CASE("lowercase folding is controlled by the spec") {
    FeatureSpec spec = small_spec();
    CHECK(featurize("Hello World", spec) == featurize("hello world", spec));
    spec.lowercase = false;
    CHECK(featurize("Hello World", spec) != featurize("hello world", spec));
}

TEST_CASE("weighting modes differ on repeated tokens") {
    FeatureSpec spec = small_spec();
    const std::string text = "echo echo echo unique";
    spec.weighting = Weighting::binary;
    const auto binary = featurize(text, spec);
    spec.weighting = Weighting::tf;
    const auto tf = featurize(text, spec);
    spec.weighting = Weighting::tf_sublinear;
    const auto sublinear = featurize(text, spec);
    CHECK(binary != tf);
    CHECK(tf != sublinear);
    // Binary: all surviving values equal after normalization.
    for (double v : binary.values) CHECK(v == doctest::Approx(binary.values[0]));
}

TEST_CASE("a junk word landing in a fresh bucket changes the vector") {
    const FeatureSpec spec = small_spec();
    SplitMix64 rng(99);
    const std::string text = test_support::random_text(rng, 30);

    NoiseSpec noise;
    noise.kind = NoiseKind::junk_injection;
    noise.rate = 0.1;
    noise.seed = 7;
    const std::string noised = inject_junk(text, noise);
    REQUIRE(noised != text);

    const FeatureVector clean_fv = featurize(text, spec);
    const FeatureVector noised_fv = featurize(noised, spec);
    // The injected junk introduces buckets the clean vector never touched.
    bool fresh_bucket = false;
    for (std::uint32_t idx : noised_fv.indices) {
        if (!std::binary_search(clean_fv.indices.begin(), clean_fv.indices.end(), idx)) {
            fresh_bucket = true;
            break;
        }
    }
    REQUIRE(fresh_bucket);
    CHECK(clean_fv != noised_fv);
}

TEST_CASE("featurize_dataset is elementwise and order-preserving") {
    std::vector<LabeledDocument> docs = {{"one two", {}, {}}, {"three", {}, {}}, {"four five six", {}, {}}};
    const Dataset d = dataset_from_documents(std::move(docs));
    const FeatureSpec spec = small_spec();
    const auto vectors = featurize_dataset(d, spec);
    REQUIRE(vectors.size() == 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(vectors[i] == featurize(d.documents[i].text, spec));
    }

    std::vector<LabeledDocument> permuted = {d.documents[2], d.documents[0], d.documents[1]};
    const auto shuffled = featurize_dataset(dataset_from_documents(std::move(permuted)), spec);
    CHECK(shuffled[0] == vectors[2]);
    CHECK(shuffled[1] == vectors[0]);
    CHECK(shuffled[2] == vectors[1]);
}

TEST_CASE("spec validation rejects non-power-of-two dims and bad ranges") {
    FeatureSpec spec;
    spec.dim = 1000;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec.dim = 1;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = FeatureSpec{};
    spec.word_ngram_min = 2;
    spec.word_ngram_max = 1;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = FeatureSpec{};
    spec.char_ngram_min = 0;
    CHECK_THROWS_AS(spec.validate(), Error);
    spec = FeatureSpec{};
    spec.max_tokens = 0;
    CHECK_THROWS_AS(spec.validate(), Error);
}
