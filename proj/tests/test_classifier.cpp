#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "noisedetect/classifier.hpp"
#include "noisedetect/error.hpp"
#include "noisedetect/hash.hpp"

#include "test_support.hpp"

using namespace noisedetect;
using test_support::TempDir;

namespace {

FeatureSpec small_spec() {
    FeatureSpec spec;
    spec.dim = 1u << 12;
    return spec;
}

/// Two classes with disjoint vocabularies; linearly separable by construction.
Dataset separable_toy_set(std::size_t docs_per_class, std::uint64_t seed) {
    const std::vector<std::string> vocab_a = {"alpha", "bravo", "charlie", "delta", "echo"};
    const std::vector<std::string> vocab_b = {"zulu", "yankee", "xray", "whiskey", "victor"};
    SplitMix64 rng(seed);
    std::vector<LabeledDocument> docs;
    for (std::size_t i = 0; i < docs_per_class * 2; ++i) {
        const bool second = i % 2 == 1;
        const auto& vocab = second ? vocab_b : vocab_a;
        std::string text;
        const std::size_t words = 3 + rng.next_below(6);
        for (std::size_t w = 0; w < words; ++w) {
            if (w > 0) text += ' ';
            text += vocab[rng.next_below(vocab.size())];
        }
        docs.push_back({std::move(text), second ? 1 : 0, std::nullopt});
    }
    return dataset_from_documents(std::move(docs));
}

TrainConfig toy_config(int epochs) {
    TrainConfig cfg;
    cfg.target = Target::label_a;
    cfg.epochs = epochs;
    cfg.batch_size = 8;
    cfg.grad_accum_steps = 2;
    cfg.learning_rate = 0.5;
    cfg.warmup_steps = 2;
    cfg.weight_decay = 0.01;
    cfg.seed = 11;
    return cfg;
}

std::string checkpoint_bytes(const ModelCheckpoint& m, const TempDir& dir, const char* name) {
    save_checkpoint(m, dir / name);
    return test_support::slurp(dir / name);
}

ModelCheckpoint tiny_random_model(std::size_t classes, std::uint32_t dim, std::uint64_t seed) {
    ModelCheckpoint m;
    m.feature_spec = FeatureSpec{};
    m.feature_spec.dim = dim;
    for (std::size_t c = 0; c < classes; ++c) m.class_names.push_back("c" + std::to_string(c));
    SplitMix64 rng(seed);
    m.weights.resize(classes * dim);
    // Moderate magnitudes keep softmax away from saturation.
    for (auto& w : m.weights) w = static_cast<float>((rng.next_double() - 0.5) * 0.4);
    m.bias.resize(classes);
    for (auto& b : m.bias) b = static_cast<float>((rng.next_double() - 0.5) * 0.2);
    return m;
}

std::vector<LabeledExample> random_batch(const ModelCheckpoint& m, std::size_t count,
                                         std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<LabeledExample> batch;
    for (std::size_t i = 0; i < count; ++i) {
        FeatureVector fv;
        const std::size_t nnz = 1 + rng.next_below(5);
        std::set<std::uint32_t> used;
        while (used.size() < nnz) {
            used.insert(static_cast<std::uint32_t>(rng.next_below(m.feature_spec.dim)));
        }
        double norm_sq = 0.0;
        for (std::uint32_t idx : used) {
            const double v = 0.2 + rng.next_double();
            fv.indices.push_back(idx);
            fv.values.push_back(v);
            norm_sq += v * v;
        }
        for (double& v : fv.values) v /= std::sqrt(norm_sq);
        batch.push_back({std::move(fv), rng.next_below(m.num_classes())});
    }
    return batch;
}

} // namespace

TEST_CASE("training on a separable toy set reaches accuracy 1.0 with decreasing loss") {
    const Dataset d = separable_toy_set(50, 3);
    const FeatureSpec fspec = small_spec();
    const ModelCheckpoint m = train(d, fspec, toy_config(6));

    REQUIRE(m.train_history.size() == 6);
    CHECK(m.train_history.back().second < m.train_history.front().second);

    std::size_t correct = 0;
    for (const auto& doc : d.documents) {
        const Prediction p = predict(m, doc.text);
        if (p.predicted_class == (*doc.label_a == 0 ? "0" : "1")) ++correct;
    }
    CHECK(correct == d.size());
}

TEST_CASE("training twice gives byte-identical checkpoints") {
    const Dataset d = separable_toy_set(25, 9);
    const FeatureSpec fspec = small_spec();
    TempDir dir("determinism");
    const ModelCheckpoint a = train(d, fspec, toy_config(3));
    const ModelCheckpoint b = train(d, fspec, toy_config(3));
    CHECK(a == b);
    CHECK(checkpoint_bytes(a, dir, "a.ckpt") == checkpoint_bytes(b, dir, "b.ckpt"));
}

TEST_CASE("config validation and degenerate datasets") {
    TrainConfig cfg = toy_config(1);
    cfg.epochs = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = toy_config(1);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);

    const FeatureSpec fspec = small_spec();
    try {
        train(Dataset{}, fspec, toy_config(1));
        FAIL("expected EmptyDataset");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyDataset);
    }

    std::vector<LabeledDocument> one_class = {{"a b", 0, std::nullopt}, {"c d", 0, std::nullopt}};
    try {
        train(dataset_from_documents(std::move(one_class)), fspec, toy_config(1));
        FAIL("expected SingleClassError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::SingleClassError);
    }

    std::vector<LabeledDocument> unlabeled = {{"a b", std::nullopt, std::nullopt},
                                              {"c d", 1, std::nullopt}};
    try {
        train(dataset_from_documents(std::move(unlabeled)), fspec, toy_config(1));
        FAIL("expected UnlabeledDocument");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnlabeledDocument);
    }
}

TEST_CASE("per-target defaults follow the training contract") {
    const TrainConfig a = default_train_config(Target::label_a);
    CHECK(a.epochs == 1);
    CHECK(a.batch_size == 6);
    const TrainConfig b = default_train_config(Target::label_b);
    CHECK(b.epochs == 5);
    CHECK(b.batch_size == 24);
    for (const auto& cfg : {a, b}) {
        CHECK(cfg.grad_accum_steps == 4);
        CHECK(cfg.weight_decay == 0.01);
        CHECK(cfg.warmup_steps == 500);
    }
}

TEST_CASE("finetune: lineage, zero-lr identity, class mismatch, empty dataset") {
    const Dataset d = separable_toy_set(20, 4);
    const FeatureSpec fspec = small_spec();
    const ModelCheckpoint base = train(d, fspec, toy_config(2));
    REQUIRE(base.lineage.empty());

    TrainConfig cfg = toy_config(1);
    cfg.learning_rate = 0.0;
    const ModelCheckpoint same = finetune(base, d, cfg);
    CHECK(same.weights == base.weights); // bit-identical at lr 0
    CHECK(same.bias == base.bias);
    REQUIRE(same.lineage.size() == 1);
    CHECK(same.lineage[0] == checkpoint_digest(base));

    // Double-finetune pipeline shape: clean -> noised leaves lineage length 1,
    // a second stage leaves length 2.
    cfg.learning_rate = 0.1;
    const ModelCheckpoint stage2 = finetune(base, d, cfg);
    CHECK(stage2.lineage.size() == 1);
    const ModelCheckpoint stage3 = finetune(stage2, d, cfg);
    CHECK(stage3.lineage.size() == 2);
    CHECK(stage3.lineage[1] == checkpoint_digest(stage2));

    try {
        finetune(base, Dataset{}, cfg);
        FAIL("expected EmptyDataset");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyDataset);
    }

    std::vector<LabeledDocument> other = {{"a b", 1, "GPT_4-o"}};
    Dataset mismatched = dataset_from_documents(std::move(other));
    TrainConfig label_b_cfg = cfg;
    label_b_cfg.target = Target::label_b;
    try {
        finetune(base, mismatched, label_b_cfg); // base classes are "0"/"1"
        FAIL("expected ClassMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ClassMismatch);
    }

    // One document, one epoch: weights move unless the gradient is zero.
    std::vector<LabeledDocument> single = {{"alpha bravo", 0, std::nullopt}};
    cfg.target = Target::label_a;
    const ModelCheckpoint nudged = finetune(base, dataset_from_documents(std::move(single)), cfg);
    CHECK(nudged.weights != base.weights);
}

TEST_CASE("predict: uniform at zero weights, sums to one, lowest-index tie-break") {
    ModelCheckpoint zero;
    zero.feature_spec = small_spec();
    zero.class_names = {"0", "1", "2"};
    zero.weights.assign(3 * zero.feature_spec.dim, 0.0f);
    zero.bias.assign(3, 0.0f);

    const Prediction p = predict(zero, "whatever text at all");
    REQUIRE(p.probabilities.size() == 3);
    for (double prob : p.probabilities) CHECK(prob == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(p.predicted_index == 0); // exact tie -> lowest index
    CHECK(p.predicted_class == "0");

    const ModelCheckpoint random_model = tiny_random_model(4, 1u << 8, 21);
    SplitMix64 rng(31);
    for (int i = 0; i < 50; ++i) {
        const Prediction q =
            predict(random_model, test_support::random_text(rng, 1 + rng.next_below(30)));
        const double sum = std::accumulate(q.probabilities.begin(), q.probabilities.end(), 0.0);
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("gradient check: random small instances stay under 1e-4") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const ModelCheckpoint m = tiny_random_model(2 + seed % 3, 1u << 7, seed);
        const auto batch = random_batch(m, 8, seed * 7 + 1);
        CHECK(gradient_check(m, batch, 1e-5) < 1e-4);
    }
}

TEST_CASE("gradient at zero weights has the closed form (probability residual x feature)") {
    ModelCheckpoint zero;
    zero.feature_spec = small_spec();
    zero.feature_spec.dim = 4;
    zero.class_names = {"0", "1"};
    zero.weights.assign(2 * 4, 0.0f);
    zero.bias.assign(2, 0.0f);

    // Single example, single unit feature, label 0. At zero weights p = 0.5,
    // so dL/dW[0][0] = (0.5 - 1) * 1 = -0.5 and dL/dW[1][0] = +0.5. A balanced
    // two-example batch cancels to exactly zero gradient.
    FeatureVector unit;
    unit.indices = {0};
    unit.values = {1.0};

    const std::vector<LabeledExample> single = {{unit, 0}};
    const std::vector<LabeledExample> balanced = {{unit, 0}, {unit, 1}};

    // Verify through finite differences around the closed-form values.
    CHECK(gradient_check(zero, single, 1e-5) < 1e-4);
    CHECK(gradient_check(zero, balanced, 1e-5) < 1e-4);

    // And through one full-lr optimizer step on a one-bucket document: the
    // word "x" featurizes to a single unit-valued bucket, so the update is
    // exactly -lr * residual at that coordinate.
    FeatureSpec fspec;
    fspec.dim = 1u << 10;
    const FeatureVector xvec = featurize("x", fspec);
    REQUIRE(xvec.nnz() == 1);
    REQUIRE(xvec.values[0] == 1.0);

    ModelCheckpoint flat;
    flat.feature_spec = fspec;
    flat.class_names = {"0", "1"};
    flat.weights.assign(2 * fspec.dim, 0.0f);
    flat.bias.assign(2, 0.0f);

    std::vector<LabeledDocument> one_doc = {{"x", 0, std::nullopt}};
    TrainConfig step_cfg;
    step_cfg.target = Target::label_a;
    step_cfg.epochs = 1;
    step_cfg.batch_size = 1;
    step_cfg.grad_accum_steps = 1;
    step_cfg.learning_rate = 0.4;
    step_cfg.weight_decay = 0.0;
    step_cfg.warmup_steps = 1; // single step runs at full lr
    const ModelCheckpoint stepped = finetune(flat, dataset_from_documents(std::move(one_doc)),
                                             step_cfg);
    const float expected = static_cast<float>(0.4 * 0.5); // lr * |p - y|
    const std::uint32_t bucket = xvec.indices[0];
    CHECK(stepped.weights[bucket] == expected);
    CHECK(stepped.weights[fspec.dim + bucket] == -expected);
    CHECK(stepped.bias[0] == expected);
    CHECK(stepped.bias[1] == -expected);

    try {
        gradient_check(zero, single, 0.0);
        FAIL("expected InvalidSpec for epsilon = 0");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidSpec);
    }
}

TEST_CASE("learning-rate schedule: warmup ramps up, then decays to zero") {
    const double base = 0.2;
    // 10 steps, warmup 4.
    std::vector<double> lrs;
    for (int t = 1; t <= 10; ++t) lrs.push_back(linear_schedule_lr(base, 4, 10, t));
    for (int t = 1; t < 4; ++t) CHECK(lrs[t] >= lrs[t - 1]);          // non-decreasing in warmup
    for (int t = 4; t < 10; ++t) CHECK(lrs[t] <= lrs[t - 1]);         // non-increasing after
    CHECK(lrs[3] == doctest::Approx(base));                           // peak at end of warmup
    CHECK(lrs[9] == 0.0);                                             // zero at the final step
    CHECK(lrs[0] == doctest::Approx(base * 0.25));

    // Warmup longer than the run is truncated.
    CHECK(linear_schedule_lr(base, 500, 3, 3) == doctest::Approx(base));

    // Property over random shapes.
    SplitMix64 rng(77);
    for (int i = 0; i < 200; ++i) {
        const int total = 1 + static_cast<int>(rng.next_below(50));
        const int warmup = static_cast<int>(rng.next_below(60));
        double prev = 0.0;
        const int effective_warmup = std::min(warmup, total);
        for (int t = 1; t <= total; ++t) {
            const double lr = linear_schedule_lr(base, warmup, total, t);
            REQUIRE(lr >= 0.0);
            REQUIRE(lr <= base + 1e-12);
            if (t <= effective_warmup) REQUIRE(lr >= prev);
            else if (t > effective_warmup + 1) REQUIRE(lr <= prev);
            prev = lr;
        }
    }
}

TEST_CASE("weight decay: empty-feature batches shrink weights by exactly (1 - lr_t*wd)") {
    // Base model with nonzero weights.
    const Dataset d = separable_toy_set(10, 6);
    const ModelCheckpoint base = train(d, small_spec(), toy_config(2));

    // Token-free documents featurize to the zero vector, so the weight
    // gradient vanishes and each optimizer step is pure decay.
    std::vector<LabeledDocument> blank_docs;
    for (int i = 0; i < 8; ++i) blank_docs.push_back({" ", i % 2, std::nullopt});
    Dataset blanks;
    blanks.documents = std::move(blank_docs);

    TrainConfig cfg;
    cfg.target = Target::label_a;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.grad_accum_steps = 1;
    cfg.learning_rate = 0.3;
    cfg.weight_decay = 0.05;
    cfg.warmup_steps = 2;
    cfg.seed = 5;

    const ModelCheckpoint decayed = finetune(base, blanks, cfg);

    // Expected: the same per-step factors applied in sequence (8 steps total).
    const int total_steps = 8; // 8 docs / batch 2 = 4 batches = 4 steps per epoch, 2 epochs
    std::vector<double> weights(base.weights.begin(), base.weights.end());
    double norm_before = 0.0;
    for (double w : weights) norm_before += w * w;
    for (int t = 1; t <= total_steps; ++t) {
        const double lr = linear_schedule_lr(cfg.learning_rate, cfg.warmup_steps, total_steps, t);
        const double factor = 1.0 - lr * cfg.weight_decay;
        double norm_after = 0.0;
        for (double& w : weights) {
            w *= factor;
            norm_after += w * w;
        }
        if (lr > 0.0) CHECK(norm_after < norm_before);
        norm_before = norm_after;
    }
    for (std::size_t i = 0; i < weights.size(); ++i) {
        REQUIRE(decayed.weights[i] == static_cast<float>(weights[i])); // bit-exact
    }
}

TEST_CASE("checkpoint save/load round-trips exactly; tampering is detected") {
    TempDir dir("ckpt");
    const Dataset d = separable_toy_set(15, 12);
    ModelCheckpoint m = train(d, small_spec(), toy_config(2));
    m = finetune(m, d, toy_config(1)); // non-empty lineage in the file

    save_checkpoint(m, dir / "model.ckpt");
    const ModelCheckpoint reloaded = load_checkpoint(dir / "model.ckpt");
    CHECK(reloaded == m);
    CHECK(reloaded.lineage.size() == 1);

    // Flip one byte inside the weight blob.
    std::string bytes = test_support::slurp(dir / "model.ckpt");
    const std::size_t header_end = bytes.find('\n');
    bytes[header_end + 1 + bytes.size() / 3] ^= 0x01;
    test_support::spit(dir / "tampered.ckpt", bytes);
    try {
        load_checkpoint(dir / "tampered.ckpt");
        FAIL("expected DigestMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DigestMismatch);
    }

    test_support::spit(dir / "not_a.ckpt", "{\"format\":\"something-else/9\"}\n");
    try {
        load_checkpoint(dir / "not_a.ckpt");
        FAIL("expected FormatVersionError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::FormatVersionError);
    }

    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), Error);
}

TEST_CASE("random checkpoints round-trip losslessly (100 cases)") {
    TempDir dir("ckpt_rand");
    SplitMix64 rng(2024);
    for (int i = 0; i < 100; ++i) {
        ModelCheckpoint m = tiny_random_model(2 + rng.next_below(5), 1u << (3 + rng.next_below(5)),
                                              rng.next());
        m.target = rng.next_below(2) == 0 ? Target::label_a : Target::label_b;
        const std::size_t history = rng.next_below(4);
        for (std::size_t e = 1; e <= history; ++e) {
            m.train_history.emplace_back(static_cast<int>(e), rng.next_double() * 3.0);
        }
        const std::size_t lineage = rng.next_below(3);
        for (std::size_t l = 0; l < lineage; ++l) {
            m.lineage.push_back(noisedetect::to_hex16(rng.next()));
        }
        save_checkpoint(m, dir / "case.ckpt");
        REQUIRE(load_checkpoint(dir / "case.ckpt") == m);
    }
}
