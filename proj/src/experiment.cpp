#include "noisedetect/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "noisedetect/ensemble.hpp"
#include "noisedetect/error.hpp"
#include "noisedetect/hash.hpp"

namespace noisedetect {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    return std::move(buf).str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::IoError, "write failure on '" + path.string() + "'");
}

ordered_json feature_params(const FeatureSpec& spec) {
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

ordered_json train_params(const TrainConfig& cfg) {
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

/// Runs `body` unless the stage's manifest shows its outputs are already
/// up to date with the current inputs and parameters.
void run_stage(const fs::path& workdir, const std::string& stage,
               const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
               const ordered_json& params, std::ostream& log,
               const std::function<void()>& body) {
    const fs::path manifest_path = workdir / (stage + ".manifest.json");
    const std::string params_json = params.dump();
    if (manifest_is_current(manifest_path, stage, inputs, outputs, params_json)) {
        log << "[skip] " << stage << "\n";
        return;
    }
    log << "[run]  " << stage << "\n";
    body();
    Manifest manifest;
    manifest.stage = stage;
    manifest.params_json = params_json;
    for (const auto& p : inputs) manifest.inputs[p.filename().string()] = file_digest(p);
    for (const auto& p : outputs) manifest.outputs[p.filename().string()] = file_digest(p);
    write_manifest(manifest_path, manifest);
}

struct Paths {
    fs::path train, val;
    fs::path train_noised, val_noised;
    fs::path clean_ckpt, noised_ckpt, double_ckpt;
    fs::path ensemble_spec;

    fs::path eval_report(Recipe r, const char* ext) const {
        return workdir / (std::string("eval_") + recipe_name(r) + ext);
    }
    fs::path predictions(Recipe r) const {
        return workdir / (std::string("predictions_") + recipe_name(r) + ".csv");
    }
    fs::path workdir;
};

Dataset load_any(const fs::path& path, bool allow_new_classes) {
    LoadOptions options;
    options.allow_new_classes = allow_new_classes;
    return load_dataset(path, detect_format(path), options);
}

} // namespace

const char* recipe_name(Recipe r) {
    switch (r) {
        case Recipe::baseline: return "baseline";
        case Recipe::noised: return "noised";
        case Recipe::double_finetune: return "double_finetune";
        case Recipe::ensemble: return "ensemble";
    }
    return "unknown";
}

std::optional<Recipe> parse_recipe(const std::string& name) {
    if (name == "baseline") return Recipe::baseline;
    if (name == "noised") return Recipe::noised;
    if (name == "double_finetune") return Recipe::double_finetune;
    if (name == "ensemble") return Recipe::ensemble;
    return std::nullopt;
}

TrainConfig TrainOverrides::resolve(Target target, std::uint64_t seed) const {
    TrainConfig cfg = default_train_config(target);
    cfg.seed = seed;
    if (learning_rate) cfg.learning_rate = *learning_rate;
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (grad_accum_steps) cfg.grad_accum_steps = *grad_accum_steps;
    if (weight_decay) cfg.weight_decay = *weight_decay;
    if (warmup_steps) cfg.warmup_steps = *warmup_steps;
    cfg.validate();
    return cfg;
}

std::string predictions_to_csv(const std::vector<Prediction>& predictions,
                               const std::vector<std::string>& class_names) {
    std::string out = "row,predicted_class";
    for (const auto& name : class_names) out += ",prob_" + name;
    out += '\n';
    char buf[32];
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += predictions[i].predicted_class;
        for (double p : predictions[i].probabilities) {
            std::snprintf(buf, sizeof(buf), ",%.6f", p);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void write_manifest(const fs::path& path, const Manifest& manifest) {
    ordered_json j;
    j["stage"] = manifest.stage;
    j["params"] = nlohmann::json::parse(manifest.params_json);
    j["inputs"] = manifest.inputs;
    j["outputs"] = manifest.outputs;
    write_file(path, j.dump(2) + "\n");
}

bool manifest_is_current(const fs::path& path, const std::string& stage,
                         const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                         const std::string& params_json) {
    std::error_code ec;
    if (!fs::exists(path, ec)) return false;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (...) {
        return false;
    }
    if (!j.is_object() || j.value("stage", "") != stage) return false;
    if (!j.contains("params") || j["params"].dump() != nlohmann::json::parse(params_json).dump())
        return false;
    auto matches = [&](const char* key, const std::vector<fs::path>& files) {
        if (!j.contains(key) || !j[key].is_object()) return false;
        if (j[key].size() != files.size()) return false;
        for (const auto& file : files) {
            const std::string name = file.filename().string();
            if (!j[key].contains(name)) return false;
            if (!fs::exists(file, ec)) return false;
            if (j[key][name].get<std::string>() != file_digest(file)) return false;
        }
        return true;
    };
    return matches("inputs", inputs) && matches("outputs", outputs);
}

std::string run_experiment(const ExperimentConfig& config, std::ostream& log) {
    fs::create_directories(config.workdir);

    Paths paths;
    paths.workdir = config.workdir;
    paths.train = config.train_path;
    paths.val = config.val_path;
    paths.train_noised = config.workdir / "train_noised.csv";
    paths.val_noised = config.workdir / "val_noised.csv";
    paths.clean_ckpt = config.workdir / "clean.ckpt";
    paths.noised_ckpt = config.workdir / "noised.ckpt";
    paths.double_ckpt = config.workdir / "double.ckpt";
    paths.ensemble_spec = config.workdir / "ensemble.json";

    NoiseSpec noise;
    noise.kind = NoiseKind::junk_injection;
    noise.rate = config.noise_rate;
    noise.junk_len_min = config.junk_len_min;
    noise.junk_len_max = config.junk_len_max;

    const ordered_json noise_params_base{
        {"kind", noise_kind_name(noise.kind)},
        {"rate", noise.rate},
        {"junk_len_min", noise.junk_len_min},
        {"junk_len_max", noise.junk_len_max},
    };

    // Stage seeds are decorrelated substreams of the experiment seed.
    const std::uint64_t seed_noise_train = derive_stream_seed(config.seed, 1);
    const std::uint64_t seed_noise_val = derive_stream_seed(config.seed, 2);
    const std::uint64_t seed_train = derive_stream_seed(config.seed, 3);

    auto noise_stage = [&](const std::string& stage, const fs::path& in, const fs::path& out,
                           std::uint64_t seed) {
        ordered_json params = noise_params_base;
        params["seed"] = seed;
        run_stage(config.workdir, stage, {in}, {out}, params, log, [&] {
            NoiseSpec spec = noise;
            spec.seed = seed;
            const Dataset noised =
                noise_dataset(load_any(in, config.allow_new_classes), spec);
            save_dataset(noised, out, FileFormat::csv);
        });
    };

    auto train_stage = [&](const std::string& stage, const fs::path& data, const fs::path& out) {
        const TrainConfig cfg = config.train.resolve(config.target, seed_train);
        ordered_json params{{"train", train_params(cfg)},
                            {"features", feature_params(config.feature_spec)}};
        run_stage(config.workdir, stage, {data}, {out}, params, log, [&] {
            const ModelCheckpoint m =
                train(load_any(data, config.allow_new_classes), config.feature_spec, cfg);
            save_checkpoint(m, out);
        });
    };

    auto finetune_stage = [&](const std::string& stage, const fs::path& base_ckpt,
                              const fs::path& data, const fs::path& out) {
        const TrainConfig cfg = config.train.resolve(config.target, seed_train);
        ordered_json params{{"train", train_params(cfg)}};
        run_stage(config.workdir, stage, {base_ckpt, data}, {out}, params, log, [&] {
            const ModelCheckpoint m = finetune(load_checkpoint(base_ckpt),
                                               load_any(data, config.allow_new_classes), cfg);
            save_checkpoint(m, out);
        });
    };

    auto eval_stage = [&](Recipe recipe, const std::vector<fs::path>& model_files,
                          const fs::path& data) {
        const std::string stage = std::string("eval_") + recipe_name(recipe);
        const fs::path report_json = paths.eval_report(recipe, ".json");
        const fs::path report_txt = paths.eval_report(recipe, ".txt");
        const fs::path pred_csv = paths.predictions(recipe);
        std::vector<fs::path> inputs = model_files;
        inputs.push_back(data);
        ordered_json params{{"recipe", recipe_name(recipe)}, {"target", target_name(config.target)}};
        run_stage(config.workdir, stage, inputs, {report_json, report_txt, pred_csv}, params, log, [&] {
            const Dataset val = load_any(data, config.allow_new_classes);
            std::vector<Prediction> predictions;
            std::vector<std::string> class_names;
            if (recipe == Recipe::ensemble) {
                const LoadedEnsemble ens = load_ensemble(load_ensemble_spec(model_files[0]));
                predictions = ensemble_predict_dataset(ens, val);
                class_names = ens.class_names();
            } else {
                const ModelCheckpoint m = load_checkpoint(model_files[0]);
                predictions.reserve(val.size());
                for (const auto& doc : val.documents) predictions.push_back(predict(m, doc.text));
                class_names = m.class_names;
            }
            std::vector<std::string> y_true, y_pred;
            y_true.reserve(val.size());
            y_pred.reserve(val.size());
            for (std::size_t i = 0; i < val.size(); ++i) {
                const auto truth = label_value(val.documents[i], target_field(config.target));
                if (!truth)
                    fail(ErrorCode::UnlabeledDocument,
                         "document " + std::to_string(i) + " has no " +
                             label_field_name(target_field(config.target)));
                y_true.push_back(*truth);
                y_pred.push_back(predictions[i].predicted_class);
            }
            const EvalReport report = evaluate(y_true, y_pred, class_names);
            write_file(report_json, report_to_table(report, ReportFormat::json));
            write_file(report_txt, report_to_table(report, ReportFormat::text));
            write_file(pred_csv, predictions_to_csv(predictions, class_names));
        });
    };

    switch (config.recipe) {
        case Recipe::baseline:
            train_stage("train_clean", paths.train, paths.clean_ckpt);
            eval_stage(Recipe::baseline, {paths.clean_ckpt}, paths.val);
            break;
        case Recipe::noised:
            noise_stage("noise_train", paths.train, paths.train_noised, seed_noise_train);
            noise_stage("noise_val", paths.val, paths.val_noised, seed_noise_val);
            train_stage("train_noised", paths.train_noised, paths.noised_ckpt);
            eval_stage(Recipe::noised, {paths.noised_ckpt}, paths.val_noised);
            break;
        case Recipe::double_finetune:
            noise_stage("noise_train", paths.train, paths.train_noised, seed_noise_train);
            noise_stage("noise_val", paths.val, paths.val_noised, seed_noise_val);
            train_stage("train_clean", paths.train, paths.clean_ckpt);
            finetune_stage("finetune_double", paths.clean_ckpt, paths.train_noised,
                           paths.double_ckpt);
            eval_stage(Recipe::double_finetune, {paths.double_ckpt}, paths.val_noised);
            break;
        case Recipe::ensemble: {
            noise_stage("noise_train", paths.train, paths.train_noised, seed_noise_train);
            noise_stage("noise_val", paths.val, paths.val_noised, seed_noise_val);
            train_stage("train_clean", paths.train, paths.clean_ckpt);
            train_stage("train_noised", paths.train_noised, paths.noised_ckpt);
            finetune_stage("finetune_double", paths.clean_ckpt, paths.train_noised,
                           paths.double_ckpt);
            // 0.6 goes to the directly-noised member, 0.4 to the double-finetuned one.
            run_stage(config.workdir, "ensemble_spec", {paths.noised_ckpt, paths.double_ckpt},
                      {paths.ensemble_spec}, ordered_json{{"weights", {0.6, 0.4}}}, log, [&] {
                          EnsembleSpec spec;
                          spec.members = {paths.noised_ckpt.filename(),
                                          paths.double_ckpt.filename()};
                          spec.weights = {0.6, 0.4};
                          save_ensemble_spec(spec, paths.ensemble_spec);
                      });
            eval_stage(Recipe::ensemble, {paths.ensemble_spec, paths.noised_ckpt, paths.double_ckpt},
                       paths.val_noised);
            break;
        }
    }

    // Comparison table over every recipe evaluated so far in this workdir.
    std::string csv = "recipe,target,n,accuracy,macro_f1\n";
    std::ostringstream txt;
    txt << "recipe           target   n      accuracy  macro_f1\n";
    for (Recipe r : {Recipe::baseline, Recipe::noised, Recipe::double_finetune, Recipe::ensemble}) {
        const fs::path report_path = paths.eval_report(r, ".json");
        std::error_code ec;
        if (!fs::exists(report_path, ec)) continue;
        const EvalReport report = report_from_json(read_file(report_path));
        char line[160];
        std::snprintf(line, sizeof(line), "%s,%s,%zu,%.6f,%.6f\n", recipe_name(r),
                      target_name(config.target), report.n, report.accuracy, report.macro_f1);
        csv += line;
        std::snprintf(line, sizeof(line), "%-16s %-8s %-6zu %.6f  %.6f\n", recipe_name(r),
                      target_name(config.target), report.n, report.accuracy, report.macro_f1);
        txt << line;
    }
    write_file(config.workdir / "comparison.csv", csv);
    write_file(config.workdir / "comparison.txt", txt.str());
    return txt.str();
}

} // namespace noisedetect
