// Command-line front end wiring the library into the pipeline recipes:
// noise | split | train | finetune | predict | eval | experiment.
//
// Configuration precedence: built-in defaults < NOISEDETECT_SEED env var
// (seed only) < config file (--config, INI key=value with [subcommand]
// sections) < command-line flags. Diagnostics go to stderr, data to stdout
// or the requested output files; exit status is 0 iff the command succeeded.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "noisedetect/classifier.hpp"
#include "noisedetect/corpus.hpp"
#include "noisedetect/ensemble.hpp"
#include "noisedetect/error.hpp"
#include "noisedetect/experiment.hpp"
#include "noisedetect/hash.hpp"
#include "noisedetect/metrics.hpp"
#include "noisedetect/noising.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace noisedetect;

namespace {

std::uint64_t env_default_seed() {
    if (const char* env = std::getenv("NOISEDETECT_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            std::cerr << "warning: ignoring non-numeric NOISEDETECT_SEED='" << env << "'\n";
        }
    }
    return 42;
}

FileFormat pick_format(const fs::path& path, const std::string& override_name) {
    if (override_name == "csv") return FileFormat::csv;
    if (override_name == "jsonl") return FileFormat::jsonl;
    return detect_format(path);
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
    out << content;
    if (!out) fail(ErrorCode::IoError, "write failure on '" + path.string() + "'");
}

void emit_manifest(const fs::path& out_path, const std::string& stage,
                   const std::vector<fs::path>& inputs, const ordered_json& params) {
    Manifest m;
    m.stage = stage;
    m.params_json = params.dump();
    for (const auto& in : inputs) m.inputs[in.filename().string()] = file_digest(in);
    m.outputs[out_path.filename().string()] = file_digest(out_path);
    write_manifest(out_path.string() + ".manifest.json", m);
}

// Shared flag bundles -----------------------------------------------------

struct FeatureFlags {
    FeatureSpec spec;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dim", spec.dim, "feature dimension (power of two)")
            ->capture_default_str();
        cmd->add_option("--word-ngram-min", spec.word_ngram_min)->capture_default_str();
        cmd->add_option("--word-ngram-max", spec.word_ngram_max)->capture_default_str();
        cmd->add_option("--char-ngram-min", spec.char_ngram_min)->capture_default_str();
        cmd->add_option("--char-ngram-max", spec.char_ngram_max)->capture_default_str();
        cmd->add_option("--max-tokens", spec.max_tokens, "token truncation length")
            ->capture_default_str();
        cmd->add_flag("--no-lowercase", [this](std::int64_t) { spec.lowercase = false; },
                      "keep the original letter case");
        cmd->add_option_function<std::string>(
               "--weighting",
               [this](const std::string& name) {
                   const auto w = parse_weighting(name);
                   if (!w) throw CLI::ValidationError("--weighting", "unknown weighting " + name);
                   spec.weighting = *w;
               },
               "binary | tf | tf_sublinear");
    }
};

struct TrainFlags {
    TrainOverrides overrides;
    std::string target_name = "label_b";

    void attach(CLI::App* cmd, bool with_target = true) {
        if (with_target) {
            cmd->add_option("--target", target_name, "label_a | label_b")
                ->check(CLI::IsMember({"label_a", "label_b"}))
                ->capture_default_str();
        }
        auto opt = [&](const char* name, auto& slot, const char* help) {
            using T = typename std::decay_t<decltype(slot)>::value_type;
            cmd->add_option_function<T>(
                name, [&slot](const T& v) { slot = v; }, help);
        };
        opt("--lr", overrides.learning_rate, "learning rate (default 5e-2)");
        opt("--epochs", overrides.epochs, "epochs (default: 1 for label_a, 5 for label_b)");
        opt("--batch-size", overrides.batch_size, "batch size (default: 6 / 24 per target)");
        opt("--grad-accum", overrides.grad_accum_steps, "gradient accumulation steps (default 4)");
        opt("--weight-decay", overrides.weight_decay, "decoupled weight decay (default 0.01)");
        opt("--warmup-steps", overrides.warmup_steps, "linear warmup steps (default 500)");
    }

    Target target() const { return *parse_target(target_name); }
};

ordered_json feature_params_json(const FeatureSpec& spec) {
    return ordered_json{
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

ordered_json train_params_json(const TrainConfig& cfg) {
    return ordered_json{
        {"learning_rate", cfg.learning_rate},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"grad_accum_steps", cfg.grad_accum_steps},
        {"weight_decay", cfg.weight_decay},
        {"warmup_steps", cfg.warmup_steps},
        {"seed", cfg.seed},
        {"target", target_name(cfg.target)},
    };
}

ordered_json history_json(const ModelCheckpoint& m) {
    ordered_json h = ordered_json::array();
    for (const auto& [epoch, loss] : m.train_history) h.push_back({epoch, loss});
    return h;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"noise-driven training toolkit for AI-generated-text detection"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read defaults from an INI config file");

    const std::uint64_t seed_default = env_default_seed();

    // --- noise -----------------------------------------------------------
    auto* cmd_noise = app.add_subcommand("noise", "apply a noising transform to a dataset");
    struct {
        std::string in, out, kind = "junk", format, lexicon;
        NoiseSpec spec;
        bool allow_new_classes = false;
    } noise_args;
    noise_args.spec.seed = seed_default;
    cmd_noise->add_option("--in", noise_args.in, "input dataset (.csv or .jsonl)")->required();
    cmd_noise->add_option("--out", noise_args.out, "output dataset path")->required();
    cmd_noise->add_option("--kind", noise_args.kind,
                          "junk | unigram | blank | eda_swap | eda_delete | eda_insert | eda_synonym")
        ->capture_default_str();
    cmd_noise->add_option("--rate", noise_args.spec.rate, "fraction of word positions affected")
        ->capture_default_str();
    cmd_noise->add_option("--junk-len-min", noise_args.spec.junk_len_min)->capture_default_str();
    cmd_noise->add_option("--junk-len-max", noise_args.spec.junk_len_max)->capture_default_str();
    cmd_noise->add_option("--seed", noise_args.spec.seed, "noise seed")->capture_default_str();
    cmd_noise->add_option("--lexicon", noise_args.lexicon, "synonym lexicon (word<TAB>syn1,syn2,...)");
    cmd_noise->add_option("--format", noise_args.format, "override format detection (csv | jsonl)")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    cmd_noise->add_flag("--allow-new-classes", noise_args.allow_new_classes,
                        "admit label_b values outside the shared-task classes");
    cmd_noise->callback([&] {
        const auto kind = parse_noise_kind(noise_args.kind);
        if (!kind) fail(ErrorCode::InvalidSpec, "unknown noise kind '" + noise_args.kind + "'");
        noise_args.spec.kind = *kind;
        if (!noise_args.lexicon.empty()) noise_args.spec.lexicon_path = noise_args.lexicon;

        const FileFormat format = pick_format(noise_args.in, noise_args.format);
        const Dataset input = load_dataset(noise_args.in, format,
                                           LoadOptions{noise_args.allow_new_classes});

        UnigramTable vocab;
        SynonymLexicon lexicon;
        NoiseResources resources;
        if (noise_args.spec.kind == NoiseKind::unigram) {
            vocab = build_unigram_table(input);
            resources.vocab = &vocab;
        }
        if (noise_args.spec.lexicon_path) {
            lexicon = load_synonym_lexicon(*noise_args.spec.lexicon_path);
            resources.lexicon = &lexicon;
        }

        const Dataset noised = noise_dataset(input, noise_args.spec, resources);
        save_dataset(noised, noise_args.out, format);

        std::size_t words_in = 0, words_out = 0;
        for (const auto& doc : input.documents) words_in += word_count(doc.text);
        for (const auto& doc : noised.documents) words_out += word_count(doc.text);
        const double mean_insertions =
            input.empty() ? 0.0
                          : (static_cast<double>(words_out) - static_cast<double>(words_in)) /
                                static_cast<double>(input.size());

        ordered_json params{{"kind", noise_kind_name(noise_args.spec.kind)},
                            {"rate", noise_args.spec.rate},
                            {"junk_len_min", noise_args.spec.junk_len_min},
                            {"junk_len_max", noise_args.spec.junk_len_max},
                            {"seed", noise_args.spec.seed}};
        std::vector<fs::path> inputs = {noise_args.in};
        if (noise_args.spec.lexicon_path) inputs.push_back(*noise_args.spec.lexicon_path);
        emit_manifest(noise_args.out, "noise", inputs, params);

        std::cout << "documents " << noised.size() << "\n"
                  << "words_in " << words_in << "\n"
                  << "words_out " << words_out << "\n"
                  << "mean_insertions " << mean_insertions << "\n";
    });

    // --- split -----------------------------------------------------------
    auto* cmd_split = app.add_subcommand("split", "stratified train/validation split");
    struct {
        std::string in, train_out, val_out, on = "label_b";
        SplitSpec spec;
        bool allow_new_classes = false;
    } split_args;
    split_args.spec.seed = seed_default;
    cmd_split->add_option("--in", split_args.in)->required();
    cmd_split->add_option("--train-out", split_args.train_out)->required();
    cmd_split->add_option("--val-out", split_args.val_out)->required();
    cmd_split->add_option("--fraction", split_args.spec.validation_fraction,
                          "validation fraction in (0,1)")
        ->capture_default_str();
    cmd_split->add_option("--on", split_args.on, "stratify on label_a | label_b")
        ->check(CLI::IsMember({"label_a", "label_b"}))
        ->capture_default_str();
    cmd_split->add_option("--seed", split_args.spec.seed)->capture_default_str();
    cmd_split->add_flag("--allow-new-classes", split_args.allow_new_classes, "");
    cmd_split->callback([&] {
        split_args.spec.stratify_on =
            split_args.on == "label_a" ? LabelField::label_a : LabelField::label_b;
        const FileFormat format = detect_format(split_args.in);
        const Dataset input =
            load_dataset(split_args.in, format, LoadOptions{split_args.allow_new_classes});
        const auto [train_set, val_set] = stratified_split(input, split_args.spec);
        save_dataset(train_set, split_args.train_out, format);
        save_dataset(val_set, split_args.val_out, format);

        ordered_json params{{"fraction", split_args.spec.validation_fraction},
                            {"stratify_on", split_args.on},
                            {"seed", split_args.spec.seed}};
        emit_manifest(split_args.train_out, "split", {split_args.in}, params);
        emit_manifest(split_args.val_out, "split", {split_args.in}, params);
        std::cout << "train " << train_set.size() << "\nvalidation " << val_set.size() << "\n";
    });

    // --- train / finetune --------------------------------------------------
    auto* cmd_train = app.add_subcommand("train", "train a classifier from scratch");
    struct {
        std::string in, out;
        FeatureFlags features;
        TrainFlags train;
        std::uint64_t seed;
        bool allow_new_classes = false;
    } train_args;
    train_args.seed = seed_default;
    cmd_train->add_option("--in", train_args.in)->required();
    cmd_train->add_option("--out", train_args.out, "checkpoint output path")->required();
    cmd_train->add_option("--seed", train_args.seed)->capture_default_str();
    cmd_train->add_flag("--allow-new-classes", train_args.allow_new_classes, "");
    train_args.features.attach(cmd_train);
    train_args.train.attach(cmd_train);
    cmd_train->callback([&] {
        const Dataset data = load_dataset(train_args.in, detect_format(train_args.in),
                                          LoadOptions{train_args.allow_new_classes});
        const TrainConfig cfg = train_args.train.overrides.resolve(train_args.train.target(),
                                                                   train_args.seed);
        const ModelCheckpoint m = train(data, train_args.features.spec, cfg);
        save_checkpoint(m, train_args.out);

        ordered_json params{{"train", train_params_json(cfg)},
                            {"features", feature_params_json(train_args.features.spec)},
                            {"final_losses", history_json(m)},
                            {"checkpoint_digest", checkpoint_digest(m)}};
        emit_manifest(train_args.out, "train", {train_args.in}, params);
        std::cout << "classes " << m.num_classes() << "\n"
                  << "epochs " << cfg.epochs << "\n";
        if (!m.train_history.empty())
            std::cout << "final_loss " << m.train_history.back().second << "\n";
        std::cout << "checkpoint " << train_args.out << "\n";
    });

    auto* cmd_finetune = app.add_subcommand("finetune", "continue training from a checkpoint");
    struct {
        std::string base, in, out;
        TrainFlags train;
        std::uint64_t seed;
        bool allow_new_classes = false;
        bool target_given = false;
    } ft_args;
    ft_args.seed = seed_default;
    cmd_finetune->add_option("--base", ft_args.base, "base checkpoint")->required();
    cmd_finetune->add_option("--in", ft_args.in)->required();
    cmd_finetune->add_option("--out", ft_args.out)->required();
    cmd_finetune->add_option("--seed", ft_args.seed)->capture_default_str();
    cmd_finetune->add_flag("--allow-new-classes", ft_args.allow_new_classes, "");
    auto* ft_target = cmd_finetune->add_option("--target", ft_args.train.target_name,
                                               "label_a | label_b (default: the base's target)")
                          ->check(CLI::IsMember({"label_a", "label_b"}));
    ft_args.train.attach(cmd_finetune, /*with_target=*/false);
    cmd_finetune->callback([&] {
        const ModelCheckpoint base = load_checkpoint(ft_args.base);
        const Target target = ft_target->count() > 0 ? ft_args.train.target() : base.target;
        const Dataset data = load_dataset(ft_args.in, detect_format(ft_args.in),
                                          LoadOptions{ft_args.allow_new_classes});
        const TrainConfig cfg = ft_args.train.overrides.resolve(target, ft_args.seed);
        const ModelCheckpoint m = finetune(base, data, cfg);
        save_checkpoint(m, ft_args.out);

        ordered_json params{{"train", train_params_json(cfg)},
                            {"base_digest", checkpoint_digest(base)},
                            {"final_losses", history_json(m)},
                            {"checkpoint_digest", checkpoint_digest(m)}};
        emit_manifest(ft_args.out, "finetune", {ft_args.base, ft_args.in}, params);
        std::cout << "lineage " << m.lineage.size() << "\n";
        if (!m.train_history.empty())
            std::cout << "final_loss " << m.train_history.back().second << "\n";
        std::cout << "checkpoint " << ft_args.out << "\n";
    });

    // --- predict / eval ----------------------------------------------------
    auto* cmd_predict = app.add_subcommand("predict", "write per-row predictions as CSV");
    struct {
        std::string model, ensemble, in, out;
        bool allow_new_classes = false;
    } pred_args;
    cmd_predict->add_option("--model", pred_args.model, "checkpoint path");
    cmd_predict->add_option("--ensemble", pred_args.ensemble, "ensemble spec JSON");
    cmd_predict->add_option("--in", pred_args.in)->required();
    cmd_predict->add_option("--out", pred_args.out)->required();
    cmd_predict->add_flag("--allow-new-classes", pred_args.allow_new_classes, "");
    cmd_predict->callback([&] {
        if (pred_args.model.empty() == pred_args.ensemble.empty())
            fail(ErrorCode::InvalidSpec, "pass exactly one of --model / --ensemble");
        const Dataset data = load_dataset(pred_args.in, detect_format(pred_args.in),
                                          LoadOptions{pred_args.allow_new_classes});
        std::vector<Prediction> predictions;
        std::vector<std::string> class_names;
        if (!pred_args.model.empty()) {
            const ModelCheckpoint m = load_checkpoint(pred_args.model);
            predictions.reserve(data.size());
            for (const auto& doc : data.documents) predictions.push_back(predict(m, doc.text));
            class_names = m.class_names;
        } else {
            const LoadedEnsemble ens = load_ensemble(load_ensemble_spec(pred_args.ensemble));
            predictions = ensemble_predict_dataset(ens, data);
            class_names = ens.class_names();
        }
        write_text_file(pred_args.out, predictions_to_csv(predictions, class_names));
        const fs::path model_file =
            pred_args.model.empty() ? pred_args.ensemble : pred_args.model;
        emit_manifest(pred_args.out, "predict", {model_file, pred_args.in},
                      ordered_json{{"model", model_file.filename().string()}});
        std::cout << "rows " << predictions.size() << "\n";
    });

    auto* cmd_eval = app.add_subcommand("eval", "evaluate a model or ensemble on labeled data");
    struct {
        std::string model, ensemble, in, target, format = "text";
        bool allow_new_classes = false;
    } eval_args;
    cmd_eval->add_option("--model", eval_args.model, "checkpoint path");
    cmd_eval->add_option("--ensemble", eval_args.ensemble, "ensemble spec JSON");
    cmd_eval->add_option("--in", eval_args.in)->required();
    cmd_eval->add_option("--target", eval_args.target,
                         "label_a | label_b (default: the model's target)")
        ->check(CLI::IsMember({"label_a", "label_b"}));
    cmd_eval->add_option("--format", eval_args.format, "text | csv | json")
        ->check(CLI::IsMember({"text", "csv", "json"}))
        ->capture_default_str();
    cmd_eval->add_flag("--allow-new-classes", eval_args.allow_new_classes, "");
    cmd_eval->callback([&] {
        if (eval_args.model.empty() == eval_args.ensemble.empty())
            fail(ErrorCode::InvalidSpec, "pass exactly one of --model / --ensemble");
        const Dataset data = load_dataset(eval_args.in, detect_format(eval_args.in),
                                          LoadOptions{eval_args.allow_new_classes});
        std::vector<Prediction> predictions;
        std::vector<std::string> class_names;
        Target target = Target::label_b;
        if (!eval_args.model.empty()) {
            const ModelCheckpoint m = load_checkpoint(eval_args.model);
            predictions.reserve(data.size());
            for (const auto& doc : data.documents) predictions.push_back(predict(m, doc.text));
            class_names = m.class_names;
            target = m.target;
        } else {
            const LoadedEnsemble ens = load_ensemble(load_ensemble_spec(eval_args.ensemble));
            predictions = ensemble_predict_dataset(ens, data);
            class_names = ens.class_names();
            target = ens.members.front().target;
        }
        if (!eval_args.target.empty()) target = *parse_target(eval_args.target);

        std::vector<std::string> y_true, y_pred;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto truth = label_value(data.documents[i], target_field(target));
            if (!truth)
                fail(ErrorCode::UnlabeledDocument,
                     "document " + std::to_string(i) + " has no " +
                         label_field_name(target_field(target)));
            y_true.push_back(*truth);
            y_pred.push_back(predictions[i].predicted_class);
        }
        const EvalReport report = evaluate(y_true, y_pred, class_names);
        std::cout << report_to_table(report, *parse_report_format(eval_args.format));
    });

    // --- experiment ----------------------------------------------------------
    auto* cmd_exp = app.add_subcommand("experiment", "run one full pipeline recipe");
    struct {
        std::string recipe, train_path, val_path, workdir, target = "label_b";
        double rate = 0.10;
        std::uint64_t seed;
        FeatureFlags features;
        TrainFlags train;
        bool allow_new_classes = false;
    } exp_args;
    exp_args.seed = seed_default;
    cmd_exp->add_option("--recipe", exp_args.recipe, "baseline | noised | double_finetune | ensemble")
        ->required()
        ->check(CLI::IsMember({"baseline", "noised", "double_finetune", "ensemble"}));
    cmd_exp->add_option("--train", exp_args.train_path, "training dataset")->required();
    cmd_exp->add_option("--val", exp_args.val_path, "validation dataset")->required();
    cmd_exp->add_option("--workdir", exp_args.workdir, "directory for all artifacts")->required();
    cmd_exp->add_option("--target", exp_args.target, "label_a | label_b")
        ->check(CLI::IsMember({"label_a", "label_b"}))
        ->capture_default_str();
    cmd_exp->add_option("--rate", exp_args.rate, "junk injection rate")->capture_default_str();
    cmd_exp->add_option("--seed", exp_args.seed)->capture_default_str();
    cmd_exp->add_flag("--allow-new-classes", exp_args.allow_new_classes, "");
    exp_args.features.attach(cmd_exp);
    exp_args.train.attach(cmd_exp, /*with_target=*/false);
    cmd_exp->callback([&] {
        ExperimentConfig config;
        config.recipe = *parse_recipe(exp_args.recipe);
        config.train_path = exp_args.train_path;
        config.val_path = exp_args.val_path;
        config.workdir = exp_args.workdir;
        config.target = *parse_target(exp_args.target);
        config.seed = exp_args.seed;
        config.noise_rate = exp_args.rate;
        config.feature_spec = exp_args.features.spec;
        config.train = exp_args.train.overrides;
        config.allow_new_classes = exp_args.allow_new_classes;
        std::cout << run_experiment(config, std::cerr);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
