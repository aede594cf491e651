#include "colormod/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "colormod/errors.hpp"
#include "colormod/rng.hpp"

namespace colormod {

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw ConfigError("learning rate must be positive");
    }
    if (cfg.kind == ModelKind::Hsv &&
        (!(cfg.hsv.sv_weight > 0.0) || !(cfg.hsv.k > 0.0))) {
        throw ConfigError("hsv loss weights must be positive");
    }
}

std::vector<TrainingInstance> embed_dataset(const std::vector<ColorTriple>& triples,
                                            const EmbeddingTable& table, OovPolicy policy) {
    std::vector<TrainingInstance> out;
    out.reserve(triples.size());
    for (const auto& t : triples) {
        out.push_back({embed_modifier(t.modifier, table, policy), t.ref_color, t.target_color});
    }
    return out;
}

namespace {

// One SGD pass shared by the color models and the gate. loss_fn must have
// the batch_loss signature: (params, instances, batch_indices, grads).
template <typename Instance, typename LossFn>
TrainResult run_sgd(ColorModelParams params, const std::vector<Instance>& instances,
                    int epochs, int batch_size, double lr, std::uint64_t seed,
                    LossFn&& loss_fn) {
    if (instances.empty()) throw ConfigError("training set is empty");

    TrainResult result;
    result.epoch_loss.reserve(static_cast<std::size_t>(epochs));

    GradientBuffer grads = make_gradient_buffer(params.trunk, params.head);
    std::vector<std::size_t> order(instances.size());
    std::iota(order.begin(), order.end(), 0);
    // Shuffle stream derived from, but not equal to, the init stream.
    std::mt19937_64 shuffle_rng(splitmix64(splitmix64(seed) ^ 0x73687566666c65ULL));

    const std::size_t n = instances.size();
    std::vector<std::size_t> batch;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        shuffle(order, shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
            batch.assign(order.begin() + static_cast<long>(start),
                         order.begin() + static_cast<long>(stop));
            grads.zero();
            const double loss = loss_fn(params, instances, batch, &grads);
            if (!std::isfinite(loss)) {
                throw DivergenceError("training diverged (non-finite loss) at epoch " +
                                          std::to_string(epoch),
                                      epoch);
            }
            sgd_step(params.trunk, params.head, grads, lr);
            loss_sum += loss * static_cast<double>(batch.size());
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(n));
    }
    result.params = std::move(params);
    return result;
}

} // namespace

TrainResult train_model(const TrainConfig& cfg, const std::vector<ColorTriple>& train,
                        const EmbeddingTable& table, OovPolicy policy) {
    validate(cfg);
    if (cfg.kind == ModelKind::Gate) {
        throw ConfigError("train_model: the gate head is trained from ensemble labels");
    }
    const auto instances = embed_dataset(train, table, policy);
    ColorModelParams params = init_model(cfg.kind, cfg.seed);
    params.hsv_cfg = cfg.hsv;
    return run_sgd(std::move(params), instances, cfg.epochs, cfg.batch_size,
                   cfg.learning_rate, cfg.seed,
                   [](const ColorModelParams& p, const std::vector<TrainingInstance>& inst,
                      const std::vector<std::size_t>& idx, GradientBuffer* g) {
                       return batch_loss(p, inst, idx, g);
                   });
}

std::vector<EnsembleLabel> label_ensemble_instances(const ColorModelParams& rgb,
                                                    const ColorModelParams& hsv,
                                                    const std::vector<ColorTriple>& train,
                                                    const EmbeddingTable& table,
                                                    OovPolicy policy) {
    std::vector<EnsembleLabel> labels;
    labels.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto& t = train[i];
        const ModifierVector m = embed_modifier(t.modifier, table, policy);
        EnsembleLabel label;
        label.index = i;
        label.rgb_delta_e = delta_e_2000(predict_rgb_affine(rgb, m, t.ref_color), t.target_color);
        label.hsv_delta_e = delta_e_2000(predict_hsv(hsv, m, t.ref_color), t.target_color);
        label.chose_rgb = label.rgb_delta_e <= label.hsv_delta_e;
        labels.push_back(label);
    }
    return labels;
}

TrainResult train_ensemble_gate(const TrainConfig& cfg, const std::vector<EnsembleLabel>& labels,
                                const std::vector<ColorTriple>& train,
                                const EmbeddingTable& table, OovPolicy policy) {
    validate(cfg);
    if (cfg.kind != ModelKind::Gate) {
        throw ConfigError("train_ensemble_gate: config kind must be gate");
    }
    if (labels.size() != train.size()) {
        throw StructuralError("train_ensemble_gate: one label per training instance required");
    }
    std::vector<GateInstance> instances;
    instances.reserve(train.size());
    for (const auto& label : labels) {
        const auto& t = train[label.index];
        instances.push_back({embed_modifier(t.modifier, table, policy), t.ref_color,
                             label.chose_rgb ? 1.0 : 0.0});
    }
    return run_sgd(init_model(ModelKind::Gate, cfg.seed), instances, cfg.epochs,
                   cfg.batch_size, cfg.learning_rate, cfg.seed,
                   [](const ColorModelParams& p, const std::vector<GateInstance>& inst,
                      const std::vector<std::size_t>& idx, GradientBuffer* g) {
                       return gate_batch_loss(p, inst, idx, g);
                   });
}

// ---- evaluation protocol ------------------------------------------------

namespace {

const std::vector<std::string> kSingleModelNames{"wm18", "rgb_affine", "dc", "hsv"};

void validate_protocol(const ProtocolConfig& cfg) {
    if (cfg.runs < 1) throw ConfigError("runs must be >= 1");
    if (cfg.models.empty()) throw ConfigError("no models requested");
    for (const auto& name : cfg.models) {
        if (name != "ensemble" &&
            std::find(kSingleModelNames.begin(), kSingleModelNames.end(), name) ==
                kSingleModelNames.end()) {
            throw ConfigError("unknown model: " + name);
        }
    }
    TrainConfig probe;
    probe.epochs = cfg.epochs;
    probe.batch_size = cfg.batch_size;
    probe.learning_rate = cfg.learning_rate;
    validate(probe);
    if (cfg.gate_epochs < 1) throw ConfigError("gate epochs must be >= 1");
}

struct RunOutput {
    RunArtifacts artifacts;
    std::vector<ModelRunResults> results;
    std::vector<SwatchEntry> swatches;
};

// Evaluation buckets for one split: Seen Pairings is the training set, the
// other four conditions are the held-out buckets.
std::vector<std::pair<SplitCondition, const std::vector<ColorTriple>*>> eval_buckets(
    const DatasetSplits& splits) {
    std::vector<std::pair<SplitCondition, const std::vector<ColorTriple>*>> buckets;
    buckets.emplace_back(SplitCondition::SeenPairings, &splits.train);
    for (SplitCondition c : kAllConditions) {
        if (c == SplitCondition::SeenPairings) continue;
        auto it = splits.test.find(c);
        if (it != splits.test.end() && !it->second.empty()) {
            buckets.emplace_back(c, &it->second);
        }
    }
    return buckets;
}

RunOutput execute_run(const ProtocolConfig& cfg, const std::vector<ColorTriple>& dataset,
                      const EmbeddingTable& table, int run_index) {
    const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(run_index);
    RunOutput out;
    out.artifacts.seed = seed;

    const DatasetSplits splits = make_splits(dataset, seed, cfg.fractions);
    out.artifacts.manifest = manifest_to_json(splits, cfg.dataset_path, dataset.size());

    // Which single models must be trained (the ensemble needs its members
    // even when they were not requested on their own).
    std::set<std::string> single_names;
    for (const auto& name : cfg.models) {
        if (name == "ensemble") {
            single_names.insert("rgb_affine");
            single_names.insert("hsv");
        } else {
            single_names.insert(name);
        }
    }

    std::map<std::string, TrainResult> singles;
    for (const auto& name : single_names) {
        TrainConfig tc;
        tc.kind = model_kind_from_string(name);
        tc.epochs = cfg.epochs;
        tc.batch_size = cfg.batch_size;
        tc.learning_rate = cfg.learning_rate;
        tc.seed = seed;
        tc.hsv.sv_weight = cfg.sv_weight;
        singles.emplace(name, train_model(tc, splits.train, table, cfg.oov));
    }

    EnsembleModel ensemble;
    const bool want_ensemble =
        std::find(cfg.models.begin(), cfg.models.end(), "ensemble") != cfg.models.end();
    if (want_ensemble) {
        const auto labels = label_ensemble_instances(singles.at("rgb_affine").params,
                                                     singles.at("hsv").params, splits.train,
                                                     table, cfg.oov);
        TrainConfig gc;
        gc.kind = ModelKind::Gate;
        gc.epochs = cfg.gate_epochs;
        gc.batch_size = cfg.batch_size;
        gc.learning_rate = cfg.learning_rate;
        gc.seed = seed;
        auto gate = train_ensemble_gate(gc, labels, splits.train, table, cfg.oov);
        ensemble = {singles.at("rgb_affine").params, singles.at("hsv").params,
                    std::move(gate.params)};
        out.artifacts.loss_curves["ensemble"] = std::move(gate.epoch_loss);
    }

    const auto buckets = eval_buckets(splits);

    for (const auto& name : cfg.models) {
        ModelRunResults results;
        results.model = name;
        for (const auto& [condition, triples] : buckets) {
            for (const auto& t : *triples) {
                const ModifierVector m = embed_modifier(t.modifier, table, cfg.oov);
                InstanceResult r;
                if (name == "ensemble") {
                    const EnsemblePrediction pred = predict_ensemble(ensemble, m, t.ref_color);
                    r = score_instance(t, pred.color, condition);
                    r.gate_p = pred.p_rgb;
                } else {
                    r = score_instance(t, predict(singles.at(name).params, m, t.ref_color),
                                       condition);
                }
                results.instances.push_back(std::move(r));
            }
        }
        out.results.push_back(std::move(results));

        if (name == "ensemble") {
            out.artifacts.checkpoints.emplace(name, ensemble);
        } else {
            out.artifacts.checkpoints.emplace(name, singles.at(name).params);
            out.artifacts.loss_curves[name] = singles.at(name).epoch_loss;
        }
    }

    // Swatch sample: round-robin over the held-out buckets (then Seen
    // Pairings) so the sheet shows a spread of conditions.
    std::vector<std::pair<SplitCondition, const std::vector<ColorTriple>*>> swatch_buckets;
    for (const auto& b : buckets) {
        if (b.first != SplitCondition::SeenPairings) swatch_buckets.push_back(b);
    }
    swatch_buckets.emplace_back(SplitCondition::SeenPairings, &splits.train);
    std::size_t depth = 0;
    while (out.swatches.size() < cfg.swatch_samples) {
        bool any = false;
        for (const auto& [condition, triples] : swatch_buckets) {
            if (depth >= triples->size() || out.swatches.size() >= cfg.swatch_samples) continue;
            any = true;
            const ColorTriple& t = (*triples)[depth];
            SwatchEntry entry;
            entry.triple = t;
            entry.condition = to_string(condition);
            const ModifierVector m = embed_modifier(t.modifier, table, cfg.oov);
            for (const auto& name : cfg.models) {
                if (name == "ensemble") {
                    const auto pred = predict_ensemble(ensemble, m, t.ref_color);
                    entry.predictions.emplace_back(name, pred.color);
                    entry.gate_p = pred.p_rgb;
                } else {
                    entry.predictions.emplace_back(name,
                                                   predict(singles.at(name).params, m,
                                                           t.ref_color));
                }
            }
            out.swatches.push_back(std::move(entry));
        }
        if (!any) break;
        ++depth;
    }
    return out;
}

} // namespace

std::string protocol_digest(const ProtocolConfig& cfg,
                            const std::vector<ColorTriple>& dataset) {
    std::ostringstream canon;
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        canon << buf << '|';
    };
    for (const auto& t : dataset) {
        canon << t.ref_label << '|';
        put(t.ref_color.r); put(t.ref_color.g); put(t.ref_color.b);
        canon << t.modifier << '|' << t.target_label << '|';
        put(t.target_color.r); put(t.target_color.g); put(t.target_color.b);
        canon << ';';
    }
    canon << "seed=" << cfg.base_seed << "|runs=" << cfg.runs << "|epochs=" << cfg.epochs
          << "|gate_epochs=" << cfg.gate_epochs << "|batch=" << cfg.batch_size;
    put(cfg.learning_rate);
    put(cfg.sv_weight);
    put(cfg.fractions.modifiers);
    put(cfg.fractions.refs);
    put(cfg.fractions.pairs);
    for (const auto& m : cfg.models) canon << m << ',';

    const std::string s = canon.str();
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
    return buf;
}

ProtocolResult run_protocol(const ProtocolConfig& cfg, const std::vector<ColorTriple>& dataset,
                            const EmbeddingTable& table) {
    validate_protocol(cfg);
    if (dataset.empty()) throw ConfigError("dataset is empty");

    const int runs = cfg.runs;
    std::vector<RunOutput> outputs(static_cast<std::size_t>(runs));
    const int jobs = std::max(1, std::min(cfg.jobs, runs));

    if (jobs == 1) {
        for (int r = 0; r < runs; ++r) {
            outputs[static_cast<std::size_t>(r)] = execute_run(cfg, dataset, table, r);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
        std::vector<std::thread> workers;
        workers.reserve(static_cast<std::size_t>(jobs));
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w] {
                try {
                    for (int r = next.fetch_add(1); r < runs; r = next.fetch_add(1)) {
                        outputs[static_cast<std::size_t>(r)] =
                            execute_run(cfg, dataset, table, r);
                    }
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& t : workers) t.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    ProtocolResult result;
    std::vector<std::vector<ModelRunResults>> per_run;
    per_run.reserve(outputs.size());
    for (auto& out : outputs) {
        per_run.push_back(std::move(out.results));
        result.runs.push_back(std::move(out.artifacts));
    }
    result.report = aggregate(per_run, protocol_digest(cfg, dataset));
    result.report.swatches = std::move(outputs.back().swatches);
    return result;
}

} // namespace colormod
