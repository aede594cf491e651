#pragma once

// Deterministic minibatch SGD for the four single models, the two-stage
// ensemble labeling + gate training, and the full multi-seed evaluation
// protocol.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "colormod/data.hpp"
#include "colormod/embeddings.hpp"
#include "colormod/evaluation.hpp"
#include "colormod/models.hpp"

namespace colormod {

// Single models default to 2000 epochs, the ensemble gate to 600; both use
// batch size 32 and learning rate 0.1.
inline constexpr int kDefaultEpochs = 2000;
inline constexpr int kDefaultGateEpochs = 600;
inline constexpr int kDefaultBatchSize = 32;
inline constexpr double kDefaultLearningRate = 0.1;

struct TrainConfig {
    ModelKind kind = ModelKind::RgbAffine;
    int epochs = kDefaultEpochs;
    int batch_size = kDefaultBatchSize;
    double learning_rate = kDefaultLearningRate;
    std::uint64_t seed = 1;
    HsvLossConfig hsv; // consumed by the hsv kind only
};

void validate(const TrainConfig& cfg);

struct TrainResult {
    ColorModelParams params;
    std::vector<double> epoch_loss; // mean per-instance loss, one entry per epoch
};

// Embeds every modifier up front; throws OovError listing the first
// missing token unless the policy substitutes hashed fallbacks.
std::vector<TrainingInstance> embed_dataset(const std::vector<ColorTriple>& triples,
                                            const EmbeddingTable& table,
                                            OovPolicy policy = OovPolicy::Error);

// Seeded SGD; aborts with DivergenceError naming the epoch if the loss
// goes non-finite. Identical (cfg, train, table) inputs give bit-identical
// parameters.
TrainResult train_model(const TrainConfig& cfg, const std::vector<ColorTriple>& train,
                        const EmbeddingTable& table, OovPolicy policy = OovPolicy::Error);

// Which member of the (RGB, HSV) pair wins each training instance, by
// Delta-E against the instance target; ties go to RGB.
struct EnsembleLabel {
    std::size_t index = 0;
    bool chose_rgb = true;
    double rgb_delta_e = 0.0;
    double hsv_delta_e = 0.0;
};

std::vector<EnsembleLabel> label_ensemble_instances(const ColorModelParams& rgb,
                                                    const ColorModelParams& hsv,
                                                    const std::vector<ColorTriple>& train,
                                                    const EmbeddingTable& table,
                                                    OovPolicy policy = OovPolicy::Error);

// Binary cross-entropy training of the scalar-logit gate head against the
// labels; cfg.kind must be ModelKind::Gate.
TrainResult train_ensemble_gate(const TrainConfig& cfg,
                                const std::vector<EnsembleLabel>& labels,
                                const std::vector<ColorTriple>& train,
                                const EmbeddingTable& table,
                                OovPolicy policy = OovPolicy::Error);

// ---- evaluation protocol ------------------------------------------------

struct ProtocolConfig {
    SplitFractions fractions;
    std::uint64_t base_seed = 1;
    int runs = 5;
    int epochs = kDefaultEpochs;
    int gate_epochs = kDefaultGateEpochs;
    int batch_size = kDefaultBatchSize;
    double learning_rate = kDefaultLearningRate;
    double sv_weight = 1.0;
    std::vector<std::string> models{"wm18", "rgb_affine", "dc", "hsv", "ensemble"};
    int jobs = 1; // worker threads across runs; does not affect results
    std::size_t swatch_samples = 12;
    OovPolicy oov = OovPolicy::Error;
    std::string dataset_path; // informational, recorded in manifests
};

struct RunArtifacts {
    std::uint64_t seed = 0;
    nlohmann::json manifest;
    std::map<std::string, Checkpoint> checkpoints;
    std::map<std::string, std::vector<double>> loss_curves;
};

struct ProtocolResult {
    EvalReport report;
    std::vector<RunArtifacts> runs;
};

// Digest over the dataset content and every config field that affects the
// outcome; embedded in reports so runs are attributable.
std::string protocol_digest(const ProtocolConfig& cfg,
                            const std::vector<ColorTriple>& dataset);

// Per run r: draw splits with seed base_seed + r, train the requested
// models (Seen Pairings is evaluated on the training triples themselves),
// score all five conditions, then aggregate mean +- SD across runs.
ProtocolResult run_protocol(const ProtocolConfig& cfg,
                            const std::vector<ColorTriple>& dataset,
                            const EmbeddingTable& table);

} // namespace colormod
