// colormod command line: dataset preparation, training, evaluation, single
// predictions and report export.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "colormod/data.hpp"
#include "colormod/embeddings.hpp"
#include "colormod/errors.hpp"
#include "colormod/evaluation.hpp"
#include "colormod/models.hpp"
#include "colormod/rng.hpp"
#include "colormod/training.hpp"

namespace fs = std::filesystem;
using namespace colormod;

namespace {

SplitFractions parse_fractions(const std::string& text) {
    SplitFractions f;
    double vals[3];
    std::istringstream in(text);
    std::string field;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(in, field, ',')) {
            throw ConfigError("--fractions expects three comma-separated values");
        }
        try {
            vals[i] = std::stod(field);
        } catch (const std::exception&) {
            throw ConfigError("--fractions: bad value '" + field + "'");
        }
    }
    if (std::getline(in, field, ',')) {
        throw ConfigError("--fractions expects exactly three values");
    }
    f.modifiers = vals[0];
    f.refs = vals[1];
    f.pairs = vals[2];
    return f;
}

RgbColor parse_ref(const std::string& text) {
    double vals[3];
    std::istringstream in(text);
    std::string field;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(in, field, ',')) {
            throw ConfigError("--ref expects \"R,G,B\"");
        }
        try {
            vals[i] = std::stod(field);
        } catch (const std::exception&) {
            throw ConfigError("--ref: bad channel '" + field + "'");
        }
        if (vals[i] < 0.0 || vals[i] > 255.0) {
            throw DomainError("--ref: channel " + field + " outside [0, 255]");
        }
    }
    return {vals[0], vals[1], vals[2]};
}

std::string resolve_embeddings(std::string flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("COLORMOD_EMBEDDINGS")) return env;
    throw ConfigError("no embedding file: pass --embeddings or set COLORMOD_EMBEDDINGS");
}

void require_file(const std::string& path, const char* what) {
    if (!fs::exists(path)) {
        throw ConfigError(std::string(what) + " not found: " + path);
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_loss_curve(const std::string& checkpoint_path, const std::vector<double>& losses) {
    fs::path p(checkpoint_path);
    p.replace_extension(".loss.csv");
    std::ostringstream out;
    out << "epoch,loss\n";
    char buf[40];
    for (std::size_t i = 0; i < losses.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, losses[i]);
        out << buf;
    }
    write_text(p.string(), out.str());
}

// Loads restricted to the dataset vocabulary plus the tokens of any extra
// modifier strings; keeps the multi-gigabyte public files workable.
EmbeddingTable load_table(const std::string& path, const std::vector<ColorTriple>& triples,
                          const std::vector<std::string>& extra_modifiers = {}) {
    std::set<std::string> vocab;
    for (const auto& tok : modifier_vocabulary(triples)) vocab.insert(tok);
    for (const auto& m : extra_modifiers) {
        for (const auto& tok : tokenize_modifier(m)) vocab.insert(tok);
    }
    return EmbeddingTable::load(path, &vocab);
}

// ---- subcommands --------------------------------------------------------

struct PrepareArgs {
    std::string input;
    std::uint64_t seed = 1;
    std::string fractions = "0.1,0.1,0.1";
    std::string out_manifest;
};

int cmd_prepare_data(const PrepareArgs& args) {
    require_file(args.input, "dataset");
    const auto triples = load_triples(args.input);
    const auto splits = make_splits(triples, args.seed, parse_fractions(args.fractions));
    write_text(args.out_manifest, manifest_to_json(splits, args.input, triples.size()).dump(2) + "\n");

    std::printf("train: %zu\n", splits.train.size());
    for (SplitCondition c : kAllConditions) {
        if (c == SplitCondition::SeenPairings) continue;
        auto it = splits.test.find(c);
        std::printf("%s: %zu\n", to_string(c), it == splits.test.end() ? 0 : it->second.size());
    }
    std::printf("manifest: %s\n", args.out_manifest.c_str());
    return 0;
}

struct TrainArgs {
    std::string model = "rgb_affine";
    std::string manifest;
    std::string data_override;
    std::string embeddings;
    std::uint64_t seed = 1;
    int epochs = kDefaultEpochs;
    int gate_epochs = kDefaultGateEpochs;
    int batch = kDefaultBatchSize;
    double lr = kDefaultLearningRate;
    double sv_weight = 1.0;
    bool oov_fallback = false;
    std::string out;
};

int cmd_train(const TrainArgs& args) {
    require_file(args.manifest, "manifest");
    const auto manifest = nlohmann::json::parse(read_text(args.manifest));
    const std::string data_path =
        args.data_override.empty() ? manifest_dataset_path(manifest) : args.data_override;
    require_file(data_path, "dataset");
    const auto triples = load_triples(data_path);
    const auto splits = splits_from_manifest(manifest, triples);

    const std::string emb_path = resolve_embeddings(args.embeddings);
    require_file(emb_path, "embedding file");
    const auto table = load_table(emb_path, triples);
    const OovPolicy policy = args.oov_fallback ? OovPolicy::HashedFallback : OovPolicy::Error;

    if (args.model == "ensemble") {
        TrainConfig member;
        member.epochs = args.epochs;
        member.batch_size = args.batch;
        member.learning_rate = args.lr;
        member.seed = args.seed;
        member.hsv.sv_weight = args.sv_weight;

        member.kind = ModelKind::RgbAffine;
        auto rgb = train_model(member, splits.train, table, policy);
        member.kind = ModelKind::Hsv;
        auto hsv = train_model(member, splits.train, table, policy);
        const auto labels =
            label_ensemble_instances(rgb.params, hsv.params, splits.train, table, policy);

        TrainConfig gate_cfg;
        gate_cfg.kind = ModelKind::Gate;
        gate_cfg.epochs = args.gate_epochs;
        gate_cfg.batch_size = args.batch;
        gate_cfg.learning_rate = args.lr;
        gate_cfg.seed = args.seed;
        auto gate = train_ensemble_gate(gate_cfg, labels, splits.train, table, policy);

        save_checkpoint(args.out,
                        EnsembleModel{rgb.params, hsv.params, std::move(gate.params)});
        write_loss_curve(args.out, gate.epoch_loss);
        std::printf("ensemble checkpoint: %s (gate final loss %.6g)\n", args.out.c_str(),
                    gate.epoch_loss.back());
        return 0;
    }

    TrainConfig cfg;
    cfg.kind = model_kind_from_string(args.model);
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch;
    cfg.learning_rate = args.lr;
    cfg.seed = args.seed;
    cfg.hsv.sv_weight = args.sv_weight;
    auto result = train_model(cfg, splits.train, table, policy);
    save_checkpoint(args.out, result.params);
    write_loss_curve(args.out, result.epoch_loss);
    std::printf("%s checkpoint: %s (final loss %.6g)\n", args.model.c_str(), args.out.c_str(),
                result.epoch_loss.back());
    return 0;
}

struct PredictArgs {
    std::string model_file;
    std::string ref;
    std::string modifier;
    std::string embeddings;
    bool oov_fallback = false;
};

int cmd_predict(const PredictArgs& args) {
    require_file(args.model_file, "checkpoint");
    const RgbColor ref = parse_ref(args.ref);
    const Checkpoint checkpoint = load_checkpoint(args.model_file);

    const std::string emb_path = resolve_embeddings(args.embeddings);
    require_file(emb_path, "embedding file");
    std::set<std::string> vocab;
    for (const auto& tok : tokenize_modifier(args.modifier)) vocab.insert(tok);
    const auto table = EmbeddingTable::load(emb_path, &vocab);
    const OovPolicy policy = args.oov_fallback ? OovPolicy::HashedFallback : OovPolicy::Error;
    const ModifierVector m = embed_modifier(args.modifier, table, policy);

    if (std::holds_alternative<EnsembleModel>(checkpoint)) {
        const auto pred = predict_ensemble(std::get<EnsembleModel>(checkpoint), m, ref);
        std::printf("%.3f,%.3f,%.3f,%.6f\n", pred.color.r, pred.color.g, pred.color.b,
                    pred.p_rgb);
    } else {
        const auto& params = std::get<ColorModelParams>(checkpoint);
        const RgbColor pred = predict(params, m, ref);
        std::printf("%.3f,%.3f,%.3f\n", pred.r, pred.g, pred.b);
    }
    return 0;
}

struct EvaluateArgs {
    std::string input;
    std::string manifest;
    std::vector<std::string> checkpoints;
    std::string embeddings;
    std::string models = "wm18,rgb_affine,dc,hsv,ensemble";
    std::uint64_t seed = 1;
    int runs = 5;
    std::string fractions = "0.1,0.1,0.1";
    int epochs = kDefaultEpochs;
    int gate_epochs = kDefaultGateEpochs;
    int batch = kDefaultBatchSize;
    double lr = kDefaultLearningRate;
    double sv_weight = 1.0;
    int jobs = 1;
    bool oov_fallback = false;
    std::string format = "text-table";
    std::string out_dir;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string field;
    while (std::getline(in, field, ',')) {
        if (!field.empty()) out.push_back(field);
    }
    return out;
}

// Full protocol: re-draw splits and retrain per seed, then aggregate.
int evaluate_protocol(const EvaluateArgs& args) {
    require_file(args.input, "dataset");
    const auto triples = load_triples(args.input);
    const std::string emb_path = resolve_embeddings(args.embeddings);
    require_file(emb_path, "embedding file");
    const auto table = load_table(emb_path, triples);

    ProtocolConfig cfg;
    cfg.fractions = parse_fractions(args.fractions);
    cfg.base_seed = args.seed;
    cfg.runs = args.runs;
    cfg.epochs = args.epochs;
    cfg.gate_epochs = args.gate_epochs;
    cfg.batch_size = args.batch;
    cfg.learning_rate = args.lr;
    cfg.sv_weight = args.sv_weight;
    cfg.models = split_list(args.models);
    cfg.jobs = args.jobs;
    cfg.oov = args.oov_fallback ? OovPolicy::HashedFallback : OovPolicy::Error;
    cfg.dataset_path = args.input;

    const ProtocolResult result = run_protocol(cfg, triples, table);

    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        const fs::path dir(args.out_dir);
        write_text((dir / "report.json").string(),
                   render_report(result.report, ReportFormat::Json));
        for (const auto& run : result.runs) {
            const std::string tag = "run" + std::to_string(run.seed);
            write_text((dir / (tag + "_manifest.json")).string(), run.manifest.dump(2) + "\n");
            for (const auto& [model, checkpoint] : run.checkpoints) {
                save_checkpoint((dir / (tag + "_" + model + ".json")).string(), checkpoint);
            }
            for (const auto& [model, losses] : run.loss_curves) {
                write_loss_curve((dir / (tag + "_" + model + ".json")).string(), losses);
            }
        }
    }
    std::fputs(render_report(result.report, report_format_from_string(args.format)).c_str(),
               stdout);
    return 0;
}

// Scoring mode: evaluate existing checkpoints on a pinned manifest.
int evaluate_checkpoints(const EvaluateArgs& args) {
    require_file(args.manifest, "manifest");
    const auto manifest = nlohmann::json::parse(read_text(args.manifest));
    const std::string data_path = manifest_dataset_path(manifest);
    require_file(data_path, "dataset");
    const auto triples = load_triples(data_path);
    const auto splits = splits_from_manifest(manifest, triples);

    const std::string emb_path = resolve_embeddings(args.embeddings);
    require_file(emb_path, "embedding file");
    const auto table = load_table(emb_path, triples);
    const OovPolicy policy = args.oov_fallback ? OovPolicy::HashedFallback : OovPolicy::Error;

    std::vector<ModelRunResults> run;
    std::string digest_src = manifest.dump();
    for (const auto& path : args.checkpoints) {
        require_file(path, "checkpoint");
        const Checkpoint checkpoint = load_checkpoint(path);
        std::string name = checkpoint_kind(checkpoint);
        for (const auto& existing : run) {
            if (existing.model == name) name += "#" + std::to_string(run.size());
        }
        digest_src += path + ":" + name + ";";

        ModelRunResults results;
        results.model = name;
        auto score_bucket = [&](SplitCondition condition,
                                const std::vector<ColorTriple>& bucket) {
            for (const auto& t : bucket) {
                const ModifierVector m = embed_modifier(t.modifier, table, policy);
                if (std::holds_alternative<EnsembleModel>(checkpoint)) {
                    const auto pred =
                        predict_ensemble(std::get<EnsembleModel>(checkpoint), m, t.ref_color);
                    auto r = score_instance(t, pred.color, condition);
                    r.gate_p = pred.p_rgb;
                    results.instances.push_back(std::move(r));
                } else {
                    results.instances.push_back(score_instance(
                        t, predict(std::get<ColorModelParams>(checkpoint), m, t.ref_color),
                        condition));
                }
            }
        };
        score_bucket(SplitCondition::SeenPairings, splits.train);
        for (const auto& [condition, bucket] : splits.test) {
            score_bucket(condition, bucket);
        }
        run.push_back(std::move(results));
    }

    char digest[24];
    std::snprintf(digest, sizeof digest, "%016llx",
                  static_cast<unsigned long long>(fnv1a(digest_src.data(), digest_src.size())));
    const EvalReport report = aggregate({run}, digest);
    const std::string rendered = render_report(report, report_format_from_string(args.format));
    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        write_text((fs::path(args.out_dir) / "report.json").string(),
                   render_report(report, ReportFormat::Json));
    }
    std::fputs(rendered.c_str(), stdout);
    return 0;
}

int cmd_evaluate(const EvaluateArgs& args) {
    report_format_from_string(args.format); // validate early
    const bool protocol_mode = !args.input.empty();
    const bool scoring_mode = !args.manifest.empty() || !args.checkpoints.empty();
    if (protocol_mode == scoring_mode) {
        throw ConfigError(
            "evaluate needs either --input (full protocol) or --manifest with --checkpoint");
    }
    if (scoring_mode && (args.manifest.empty() || args.checkpoints.empty())) {
        throw ConfigError("scoring mode needs both --manifest and at least one --checkpoint");
    }
    return protocol_mode ? evaluate_protocol(args) : evaluate_checkpoints(args);
}

struct ReportArgs {
    std::string report;
    std::string format = "text-table";
    std::string out;
};

int cmd_report(const ReportArgs& args) {
    require_file(args.report, "report");
    const EvalReport report = report_from_json_text(read_text(args.report));
    const std::string rendered = render_report(report, report_format_from_string(args.format));
    if (args.out.empty()) {
        std::fputs(rendered.c_str(), stdout);
    } else {
        write_text(args.out, rendered);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"grounded color modifier models: data prep, training, evaluation"};
    app.require_subcommand(1);

    PrepareArgs prepare;
    auto* prep_cmd = app.add_subcommand("prepare-data", "draw a train/test split manifest");
    prep_cmd->add_option("--input", prepare.input, "dataset CSV")->required();
    prep_cmd->add_option("--seed", prepare.seed, "split seed");
    prep_cmd->add_option("--fractions", prepare.fractions,
                         "held-out modifier,ref,pair fractions");
    prep_cmd->add_option("--out-manifest", prepare.out_manifest, "manifest path")->required();

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "train one model on a manifest's train split");
    train_cmd->add_option("--model", train.model,
                          "wm18|rgb_affine|dc|hsv|ensemble (default rgb_affine)");
    train_cmd->add_option("--manifest", train.manifest, "split manifest")->required();
    train_cmd->add_option("--data", train.data_override, "dataset CSV (overrides manifest path)");
    train_cmd->add_option("--embeddings", train.embeddings,
                          "embedding file (or COLORMOD_EMBEDDINGS)");
    train_cmd->add_option("--seed", train.seed, "training seed");
    train_cmd->add_option("--epochs", train.epochs, "epochs (single models / ensemble members)");
    train_cmd->add_option("--gate-epochs", train.gate_epochs, "gate epochs (ensemble)");
    train_cmd->add_option("--batch", train.batch, "batch size");
    train_cmd->add_option("--lr", train.lr, "learning rate");
    train_cmd->add_option("--sv-weight", train.sv_weight, "hsv (s,v) loss weight");
    train_cmd->add_flag("--oov-fallback", train.oov_fallback,
                        "hashed vectors for unknown tokens");
    train_cmd->add_option("--out", train.out, "checkpoint path")->required();

    PredictArgs predict;
    auto* pred_cmd = app.add_subcommand("predict", "predict one target color");
    pred_cmd->add_option("--model-file", predict.model_file, "checkpoint")->required();
    pred_cmd->add_option("--ref", predict.ref, "reference color \"R,G,B\"")->required();
    pred_cmd->add_option("--modifier", predict.modifier, "modifier string")->required();
    pred_cmd->add_option("--embeddings", predict.embeddings,
                         "embedding file (or COLORMOD_EMBEDDINGS)");
    pred_cmd->add_flag("--oov-fallback", predict.oov_fallback,
                       "hashed vectors for unknown tokens");

    EvaluateArgs evaluate;
    auto* eval_cmd = app.add_subcommand(
        "evaluate", "full multi-seed protocol (--input) or checkpoint scoring (--manifest)");
    eval_cmd->add_option("--input", evaluate.input, "dataset CSV (protocol mode)");
    eval_cmd->add_option("--manifest", evaluate.manifest, "split manifest (scoring mode)");
    eval_cmd->add_option("--checkpoint", evaluate.checkpoints, "checkpoint file (repeatable)");
    eval_cmd->add_option("--embeddings", evaluate.embeddings,
                         "embedding file (or COLORMOD_EMBEDDINGS)");
    eval_cmd->add_option("--models", evaluate.models, "comma list of models (protocol mode)");
    eval_cmd->add_option("--seed", evaluate.seed, "base seed; run r uses seed+r");
    eval_cmd->add_option("--runs", evaluate.runs, "number of seeded runs");
    eval_cmd->add_option("--fractions", evaluate.fractions, "split fractions");
    eval_cmd->add_option("--epochs", evaluate.epochs, "single-model epochs");
    eval_cmd->add_option("--gate-epochs", evaluate.gate_epochs, "gate epochs");
    eval_cmd->add_option("--batch", evaluate.batch, "batch size");
    eval_cmd->add_option("--lr", evaluate.lr, "learning rate");
    eval_cmd->add_option("--sv-weight", evaluate.sv_weight, "hsv (s,v) loss weight");
    eval_cmd->add_option("--jobs", evaluate.jobs, "parallel runs");
    eval_cmd->add_flag("--oov-fallback", evaluate.oov_fallback,
                       "hashed vectors for unknown tokens");
    eval_cmd->add_option("--format", evaluate.format, "text-table|csv|json|svg-swatches");
    eval_cmd->add_option("--out-dir", evaluate.out_dir,
                         "directory for report.json, manifests and checkpoints");

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "re-render a saved report.json");
    report_cmd->add_option("--report", report.report, "report.json path")->required();
    report_cmd->add_option("--format", report.format, "text-table|csv|json|svg-swatches");
    report_cmd->add_option("--out", report.out, "output path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (prep_cmd->parsed()) return cmd_prepare_data(prepare);
        if (train_cmd->parsed()) return cmd_train(train);
        if (pred_cmd->parsed()) return cmd_predict(predict);
        if (eval_cmd->parsed()) return cmd_evaluate(evaluate);
        if (report_cmd->parsed()) return cmd_report(report);
        return 2;
    } catch (const DivergenceError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const OovError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
