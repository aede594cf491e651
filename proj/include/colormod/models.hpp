#pragma once

// The predictive heads on the shared trunk and their losses:
//   wm18        t = r + m                 (additive baseline, RGB)
//   rgb_affine  t = M r + beta            (modifier-conditioned affine map)
//   dc          t = r + a (m - r)         (interpolation toward a point,
//                                          a and m depend on the modifier only)
//   hsv         t = r + (dh, ds, dv)      (additive in HSV, circular hue)
// plus the gate head for the hard two-model ensemble, p = sigma(f(m, r)).
//
// Predictions are clamped into the valid color cube; training losses are
// computed on unclamped outputs so boundary gradients survive.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "colormod/colorspace.hpp"
#include "colormod/embeddings.hpp"
#include "colormod/nnet.hpp"

#include "json.hpp"

namespace colormod {

enum class ModelKind { Wm18, RgbAffine, Dc, Hsv, Gate };

const char* to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

// Hue concentration k enters only the density (the constant-k loss drops
// the normalizer); sv_weight balances the (s, v) squared error against the
// circular hue term.
struct HsvLossConfig {
    double k = 1.0;
    double sv_weight = 1.0;
};

struct ColorModelParams {
    ModelKind kind = ModelKind::Wm18;
    TrunkParams trunk;
    DenseLayer head; // linear on h1
    HsvLossConfig hsv_cfg;
};

std::size_t head_dim(ModelKind kind);

// Seeded initialization; fully determined by (kind, seed).
ColorModelParams init_model(ModelKind kind, std::uint64_t seed);

// The 3-vector the trunk sees as "reference": normalized RGB for wm18 /
// rgb_affine / gate, (h/2pi, s, v) for hsv, zeros for dc (its head may
// depend on the modifier only).
std::vector<double> trunk_reference_input(ModelKind kind, const RgbColor& ref);

// ---- prediction -------------------------------------------------------

RgbColor predict_wm18(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r);
RgbColor predict_rgb_affine(const ColorModelParams& p, const ModifierVector& m,
                            const RgbColor& r);
RgbColor predict_dc(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r);
RgbColor predict_hsv(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r);

// Dispatch on p.kind (Gate is not a color predictor).
RgbColor predict(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r);

// Canonical-scale prediction before any clamping. Defined for the three
// RGB-space kinds; used by invariant checks.
Vec3 predict_raw(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r);

// Head outputs unpacked for inspection.
struct AffineOutputs {
    double M[3][3];
    Vec3 beta; // normalized scale
};
AffineOutputs affine_outputs(const ColorModelParams& p, const ModifierVector& m,
                             const RgbColor& r);

struct DcOutputs {
    Vec3 point; // normalized scale, unclamped
    double alpha;
};
DcOutputs dc_outputs(const ColorModelParams& p, const ModifierVector& m);

struct HsvOffsets {
    double dh, ds, dv;
};
HsvOffsets hsv_offsets(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r);

// The affine specialization that reproduces wm18 exactly: M = I, beta = the
// wm18 head's output. Shares the trunk parameters of `wm18`.
ColorModelParams affine_from_wm18(const ColorModelParams& wm18);

double gate_probability(const ColorModelParams& gate, const ModifierVector& m,
                        const RgbColor& r);

struct EnsembleModel {
    ColorModelParams rgb;  // rgb_affine member
    ColorModelParams hsv;  // hsv member
    ColorModelParams gate; // scalar-logit gate
};

struct EnsemblePrediction {
    RgbColor color;
    double p_rgb;    // probability of selecting the RGB member
    bool chose_rgb;  // p_rgb >= 0.5
};

EnsemblePrediction predict_ensemble(const EnsembleModel& e, const ModifierVector& m,
                                    const RgbColor& r);

// ---- losses -----------------------------------------------------------

// Mean squared L2 distance, (1/n) sum (t - t_hat)'(t - t_hat). Inputs on
// the normalized scale.
double loss_gaussian(const std::vector<Vec3>& targets, const std::vector<Vec3>& predictions);

// Circular hue term 1 - (1/n) sum cos(h - h_hat), plus sv_weight times the
// mean summed squared error over (s, v).
double loss_hsv(const std::vector<HsvColor>& targets, const std::vector<HsvColor>& predictions,
                const HsvLossConfig& cfg);

// Modified Bessel function of order 0 by power series, relative error
// below 1e-10 over the supported k range.
double bessel_i0(double x);

// von Mises density exp(k cos(h - h_hat)) / (2 pi I0(k)); k > 0.
double von_mises_pdf(double h, double h_hat, double k);

// ---- training support --------------------------------------------------

struct TrainingInstance {
    ModifierVector modifier;
    RgbColor reference;
    RgbColor target;
};

// Mean loss over the batch; when grads is non-null, accumulates
// d(mean loss)/d(params) into it (buffer must be zeroed by the caller).
double batch_loss(const ColorModelParams& p, const std::vector<TrainingInstance>& instances,
                  const std::vector<std::size_t>& batch_indices, GradientBuffer* grads);

struct GateInstance {
    ModifierVector modifier;
    RgbColor reference;
    double label; // 1 = RGB member preferred, 0 = HSV member
};

// Binary cross-entropy of the gate over the batch, gradients as above.
double gate_batch_loss(const ColorModelParams& gate, const std::vector<GateInstance>& instances,
                       const std::vector<std::size_t>& batch_indices, GradientBuffer* grads);

// ---- serialization ----------------------------------------------------

nlohmann::json params_to_json(const ColorModelParams& p);
ColorModelParams params_from_json(const nlohmann::json& j);
nlohmann::json ensemble_to_json(const EnsembleModel& e);
EnsembleModel ensemble_from_json(const nlohmann::json& j);

using Checkpoint = std::variant<ColorModelParams, EnsembleModel>;

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

// Kind string of a checkpoint ("wm18", ..., "ensemble").
std::string checkpoint_kind(const Checkpoint& c);

} // namespace colormod
