#include "colormod/models.hpp"

#include <cmath>
#include <fstream>

#include "colormod/errors.hpp"
#include "colormod/rng.hpp"

namespace colormod {

const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Wm18: return "wm18";
        case ModelKind::RgbAffine: return "rgb_affine";
        case ModelKind::Dc: return "dc";
        case ModelKind::Hsv: return "hsv";
        case ModelKind::Gate: return "gate";
    }
    return "wm18";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "wm18") return ModelKind::Wm18;
    if (s == "rgb_affine") return ModelKind::RgbAffine;
    if (s == "dc") return ModelKind::Dc;
    if (s == "hsv") return ModelKind::Hsv;
    if (s == "gate") return ModelKind::Gate;
    throw ConfigError("unknown model kind: " + s);
}

std::size_t head_dim(ModelKind kind) {
    switch (kind) {
        case ModelKind::Wm18: return 3;
        case ModelKind::RgbAffine: return 12; // 3x3 matrix rows then offset
        case ModelKind::Dc: return 4;         // interpolation point then alpha logit
        case ModelKind::Hsv: return 3;        // (dh, ds, dv)
        case ModelKind::Gate: return 1;
    }
    return 3;
}

ColorModelParams init_model(ModelKind kind, std::uint64_t seed) {
    ColorModelParams p;
    p.kind = kind;
    std::mt19937_64 rng(splitmix64(seed));
    p.trunk = make_trunk(kEmbeddingDim, Activation::Relu, rng);
    p.head = make_dense(head_dim(kind), kFc2Out, Activation::Identity, rng);
    return p;
}

std::vector<double> trunk_reference_input(ModelKind kind, const RgbColor& ref) {
    switch (kind) {
        case ModelKind::Wm18:
        case ModelKind::RgbAffine:
        case ModelKind::Gate: {
            const Vec3 u = rgb_to_unit(ref);
            return {u.x, u.y, u.z};
        }
        case ModelKind::Dc:
            // Both the interpolation point and alpha depend on the modifier
            // only; the trunk still has reference slots, fed with zeros.
            return {0.0, 0.0, 0.0};
        case ModelKind::Hsv: {
            const HsvColor h = rgb_to_hsv(ref);
            return {h.h / kTwoPi, h.s, h.v};
        }
    }
    return {0.0, 0.0, 0.0};
}

namespace {

double sigmoid(double z) {
    return 1.0 / (1.0 + std::exp(-z));
}

std::vector<double> head_output(const ColorModelParams& p, const ModifierVector& m,
                                const RgbColor& r, ForwardCache* cache = nullptr) {
    if (m.values.size() != kEmbeddingDim) {
        throw StructuralError("modifier vector has wrong dimension");
    }
    return network_forward(p.trunk, p.head, m.values, trunk_reference_input(p.kind, r),
                           cache);
}

} // namespace

Vec3 predict_raw(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r) {
    const Vec3 ru = rgb_to_unit(r);
    switch (p.kind) {
        case ModelKind::Wm18: {
            const auto o = head_output(p, m, r);
            return Vec3{ru.x + o[0], ru.y + o[1], ru.z + o[2]} * 255.0;
        }
        case ModelKind::RgbAffine: {
            const auto o = head_output(p, m, r);
            Vec3 t;
            t.x = o[0] * ru.x + o[1] * ru.y + o[2] * ru.z + o[9];
            t.y = o[3] * ru.x + o[4] * ru.y + o[5] * ru.z + o[10];
            t.z = o[6] * ru.x + o[7] * ru.y + o[8] * ru.z + o[11];
            return t * 255.0;
        }
        case ModelKind::Dc: {
            const auto o = head_output(p, m, r);
            const double alpha = sigmoid(o[3]);
            return Vec3{ru.x + alpha * (o[0] - ru.x), ru.y + alpha * (o[1] - ru.y),
                        ru.z + alpha * (o[2] - ru.z)} *
                   255.0;
        }
        default:
            throw StructuralError("predict_raw: only defined for RGB-space kinds");
    }
}

RgbColor predict_wm18(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r) {
    if (p.kind != ModelKind::Wm18) throw StructuralError("predict_wm18: wrong kind");
    const Vec3 t = predict_raw(p, m, r);
    return clamp_rgb({t.x, t.y, t.z});
}

RgbColor predict_rgb_affine(const ColorModelParams& p, const ModifierVector& m,
                            const RgbColor& r) {
    if (p.kind != ModelKind::RgbAffine) throw StructuralError("predict_rgb_affine: wrong kind");
    const Vec3 t = predict_raw(p, m, r);
    return clamp_rgb({t.x, t.y, t.z});
}

RgbColor predict_dc(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r) {
    if (p.kind != ModelKind::Dc) throw StructuralError("predict_dc: wrong kind");
    // The interpolation point is clamped into the cube first, so the
    // prediction stays on a segment between two valid colors.
    const auto o = head_output(p, m, r);
    const double alpha = sigmoid(o[3]);
    const Vec3 ru = rgb_to_unit(r);
    const Vec3 point{clamp01(o[0]), clamp01(o[1]), clamp01(o[2])};
    const Vec3 t{ru.x + alpha * (point.x - ru.x), ru.y + alpha * (point.y - ru.y),
                 ru.z + alpha * (point.z - ru.z)};
    return clamp_rgb(rgb_from_unit(t));
}

RgbColor predict_hsv(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r) {
    if (p.kind != ModelKind::Hsv) throw StructuralError("predict_hsv: wrong kind");
    const auto o = head_output(p, m, r);
    const HsvColor rh = rgb_to_hsv(r);
    HsvColor t;
    t.h = wrap_hue(rh.h + o[0]);
    t.s = clamp01(rh.s + o[1]);
    t.v = clamp01(rh.v + o[2]);
    return hsv_to_rgb(t);
}

RgbColor predict(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r) {
    switch (p.kind) {
        case ModelKind::Wm18: return predict_wm18(p, m, r);
        case ModelKind::RgbAffine: return predict_rgb_affine(p, m, r);
        case ModelKind::Dc: return predict_dc(p, m, r);
        case ModelKind::Hsv: return predict_hsv(p, m, r);
        case ModelKind::Gate: break;
    }
    throw StructuralError("predict: gate head is not a color predictor");
}

AffineOutputs affine_outputs(const ColorModelParams& p, const ModifierVector& m,
                             const RgbColor& r) {
    if (p.kind != ModelKind::RgbAffine) throw StructuralError("affine_outputs: wrong kind");
    const auto o = head_output(p, m, r);
    AffineOutputs out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out.M[i][j] = o[static_cast<std::size_t>(3 * i + j)];
    out.beta = {o[9], o[10], o[11]};
    return out;
}

DcOutputs dc_outputs(const ColorModelParams& p, const ModifierVector& m) {
    if (p.kind != ModelKind::Dc) throw StructuralError("dc_outputs: wrong kind");
    const auto o = head_output(p, m, RgbColor{0, 0, 0});
    return {{o[0], o[1], o[2]}, sigmoid(o[3])};
}

HsvOffsets hsv_offsets(const ColorModelParams& p, const ModifierVector& m, const RgbColor& r) {
    if (p.kind != ModelKind::Hsv) throw StructuralError("hsv_offsets: wrong kind");
    const auto o = head_output(p, m, r);
    return {o[0], o[1], o[2]};
}

ColorModelParams affine_from_wm18(const ColorModelParams& wm18) {
    if (wm18.kind != ModelKind::Wm18) throw StructuralError("affine_from_wm18: wrong kind");
    ColorModelParams p;
    p.kind = ModelKind::RgbAffine;
    p.trunk = wm18.trunk;
    p.head.activation = Activation::Identity;
    p.head.weights = Matrix(12, kFc2Out);
    p.head.bias.assign(12, 0.0);
    // Rows 0..8 emit the constant identity matrix.
    p.head.bias[0] = p.head.bias[4] = p.head.bias[8] = 1.0;
    // Rows 9..11 replicate the wm18 offset head.
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < kFc2Out; ++j) {
            p.head.weights.at(9 + i, j) = wm18.head.weights.at(i, j);
        }
        p.head.bias[9 + i] = wm18.head.bias[i];
    }
    return p;
}

double gate_probability(const ColorModelParams& gate, const ModifierVector& m,
                        const RgbColor& r) {
    if (gate.kind != ModelKind::Gate) throw StructuralError("gate_probability: wrong kind");
    return sigmoid(head_output(gate, m, r)[0]);
}

EnsemblePrediction predict_ensemble(const EnsembleModel& e, const ModifierVector& m,
                                    const RgbColor& r) {
    EnsemblePrediction out;
    out.p_rgb = gate_probability(e.gate, m, r);
    out.chose_rgb = out.p_rgb >= 0.5;
    out.color = out.chose_rgb ? predict_rgb_affine(e.rgb, m, r) : predict_hsv(e.hsv, m, r);
    return out;
}

double loss_gaussian(const std::vector<Vec3>& targets, const std::vector<Vec3>& predictions) {
    if (targets.size() != predictions.size() || targets.empty()) {
        throw StructuralError("loss_gaussian: length mismatch or empty");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const Vec3 d = targets[i] - predictions[i];
        total += dot(d, d);
    }
    return total / static_cast<double>(targets.size());
}

double loss_hsv(const std::vector<HsvColor>& targets, const std::vector<HsvColor>& predictions,
                const HsvLossConfig& cfg) {
    if (targets.size() != predictions.size() || targets.empty()) {
        throw StructuralError("loss_hsv: length mismatch or empty");
    }
    double hue = 0.0;
    double sv = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        hue += std::cos(targets[i].h - predictions[i].h);
        const double ds = targets[i].s - predictions[i].s;
        const double dv = targets[i].v - predictions[i].v;
        sv += ds * ds + dv * dv;
    }
    const double n = static_cast<double>(targets.size());
    return (1.0 - hue / n) + cfg.sv_weight * (sv / n);
}

double bessel_i0(double x) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int m = 1; m < 1000; ++m) {
        term *= q / (static_cast<double>(m) * static_cast<double>(m));
        sum += term;
        if (term < sum * 1e-17) break;
    }
    return sum;
}

double von_mises_pdf(double h, double h_hat, double k) {
    if (!(k > 0.0)) {
        throw DomainError("von_mises_pdf: concentration k must be positive");
    }
    return std::exp(k * std::cos(h - h_hat)) / (kTwoPi * bessel_i0(k));
}

// ---- batch loss + gradients --------------------------------------------

double batch_loss(const ColorModelParams& p, const std::vector<TrainingInstance>& instances,
                  const std::vector<std::size_t>& batch_indices, GradientBuffer* grads) {
    if (batch_indices.empty()) {
        throw StructuralError("batch_loss: empty batch");
    }
    const double n = static_cast<double>(batch_indices.size());
    double total = 0.0;
    ForwardCache cache;
    std::vector<double> g_out(head_dim(p.kind), 0.0);

    for (std::size_t idx : batch_indices) {
        const TrainingInstance& inst = instances[idx];
        const auto out = network_forward(p.trunk, p.head, inst.modifier.values,
                                         trunk_reference_input(p.kind, inst.reference),
                                         grads ? &cache : nullptr);
        std::fill(g_out.begin(), g_out.end(), 0.0);

        switch (p.kind) {
            case ModelKind::Wm18: {
                const Vec3 ru = rgb_to_unit(inst.reference);
                const Vec3 tu = rgb_to_unit(inst.target);
                const Vec3 pred{ru.x + out[0], ru.y + out[1], ru.z + out[2]};
                const Vec3 d = pred - tu;
                total += dot(d, d);
                g_out[0] = 2.0 * d.x / n;
                g_out[1] = 2.0 * d.y / n;
                g_out[2] = 2.0 * d.z / n;
                break;
            }
            case ModelKind::RgbAffine: {
                const Vec3 ru = rgb_to_unit(inst.reference);
                const Vec3 tu = rgb_to_unit(inst.target);
                const double rv[3] = {ru.x, ru.y, ru.z};
                double pred[3];
                for (int i = 0; i < 3; ++i) {
                    pred[i] = out[static_cast<std::size_t>(3 * i)] * rv[0] +
                              out[static_cast<std::size_t>(3 * i + 1)] * rv[1] +
                              out[static_cast<std::size_t>(3 * i + 2)] * rv[2] +
                              out[static_cast<std::size_t>(9 + i)];
                }
                const double tv[3] = {tu.x, tu.y, tu.z};
                for (int i = 0; i < 3; ++i) {
                    const double d = pred[i] - tv[i];
                    total += d * d;
                    for (int j = 0; j < 3; ++j) {
                        g_out[static_cast<std::size_t>(3 * i + j)] = 2.0 * d * rv[j] / n;
                    }
                    g_out[static_cast<std::size_t>(9 + i)] = 2.0 * d / n;
                }
                break;
            }
            case ModelKind::Dc: {
                const Vec3 ru = rgb_to_unit(inst.reference);
                const Vec3 tu = rgb_to_unit(inst.target);
                const double alpha = sigmoid(out[3]);
                const double point[3] = {out[0], out[1], out[2]};
                const double rv[3] = {ru.x, ru.y, ru.z};
                const double tv[3] = {tu.x, tu.y, tu.z};
                double dalpha = 0.0;
                for (int i = 0; i < 3; ++i) {
                    const double pred = rv[i] + alpha * (point[i] - rv[i]);
                    const double d = pred - tv[i];
                    total += d * d;
                    g_out[static_cast<std::size_t>(i)] = 2.0 * d * alpha / n;
                    dalpha += 2.0 * d * (point[i] - rv[i]);
                }
                g_out[3] = dalpha * alpha * (1.0 - alpha) / n;
                break;
            }
            case ModelKind::Hsv: {
                const HsvColor rh = rgb_to_hsv(inst.reference);
                const HsvColor th = rgb_to_hsv(inst.target);
                const double h_hat = rh.h + out[0];
                const double s_hat = rh.s + out[1];
                const double v_hat = rh.v + out[2];
                const double w = p.hsv_cfg.sv_weight;
                const double ds = s_hat - th.s;
                const double dv = v_hat - th.v;
                total += (1.0 - std::cos(th.h - h_hat)) + w * (ds * ds + dv * dv);
                g_out[0] = -std::sin(th.h - h_hat) / n;
                g_out[1] = 2.0 * w * ds / n;
                g_out[2] = 2.0 * w * dv / n;
                break;
            }
            case ModelKind::Gate:
                throw StructuralError("batch_loss: use gate_batch_loss for the gate head");
        }

        if (grads) {
            backward(p.trunk, p.head, cache, g_out, *grads);
        }
    }
    return total / n;
}

double gate_batch_loss(const ColorModelParams& gate, const std::vector<GateInstance>& instances,
                       const std::vector<std::size_t>& batch_indices, GradientBuffer* grads) {
    if (gate.kind != ModelKind::Gate) throw StructuralError("gate_batch_loss: wrong kind");
    if (batch_indices.empty()) throw StructuralError("gate_batch_loss: empty batch");
    const double n = static_cast<double>(batch_indices.size());
    double total = 0.0;
    ForwardCache cache;

    for (std::size_t idx : batch_indices) {
        const GateInstance& inst = instances[idx];
        const auto out = network_forward(gate.trunk, gate.head, inst.modifier.values,
                                         trunk_reference_input(ModelKind::Gate, inst.reference),
                                         grads ? &cache : nullptr);
        const double z = out[0];
        const double y = inst.label;
        // Stable binary cross-entropy: max(z,0) - z*y + log(1 + exp(-|z|)).
        total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
        if (grads) {
            const std::vector<double> g_out{(sigmoid(z) - y) / n};
            backward(gate.trunk, gate.head, cache, g_out, *grads);
        }
    }
    return total / n;
}

// ---- serialization ------------------------------------------------------

namespace {

nlohmann::json layer_to_json(const DenseLayer& layer) {
    return {{"rows", layer.weights.rows},
            {"cols", layer.weights.cols},
            {"activation", to_string(layer.activation)},
            {"weights", layer.weights.data},
            {"bias", layer.bias}};
}

DenseLayer layer_from_json(const nlohmann::json& j) {
    DenseLayer layer;
    layer.weights = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    layer.weights.data = j.at("weights").get<std::vector<double>>();
    layer.bias = j.at("bias").get<std::vector<double>>();
    layer.activation = activation_from_string(j.at("activation").get<std::string>());
    if (layer.weights.data.size() != layer.weights.rows * layer.weights.cols ||
        layer.bias.size() != layer.weights.rows) {
        throw ParseError("checkpoint layer shape mismatch");
    }
    return layer;
}

constexpr const char* kCheckpointFormat = "colormod-checkpoint";
constexpr int kCheckpointVersion = 1;

} // namespace

nlohmann::json params_to_json(const ColorModelParams& p) {
    nlohmann::json j{{"format", kCheckpointFormat},
                     {"version", kCheckpointVersion},
                     {"kind", to_string(p.kind)},
                     {"fc1", layer_to_json(p.trunk.fc1)},
                     {"fc2", layer_to_json(p.trunk.fc2)},
                     {"head", layer_to_json(p.head)}};
    if (p.kind == ModelKind::Hsv) {
        j["hsv_loss"] = {{"k", p.hsv_cfg.k}, {"sv_weight", p.hsv_cfg.sv_weight}};
    }
    return j;
}

ColorModelParams params_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != kCheckpointFormat) {
        throw ParseError("not a model checkpoint");
    }
    if (j.value("version", 0) != kCheckpointVersion) {
        throw ParseError("unsupported checkpoint version");
    }
    ColorModelParams p;
    p.kind = model_kind_from_string(j.at("kind").get<std::string>());
    p.trunk.fc1 = layer_from_json(j.at("fc1"));
    p.trunk.fc2 = layer_from_json(j.at("fc2"));
    p.head = layer_from_json(j.at("head"));
    if (j.contains("hsv_loss")) {
        p.hsv_cfg.k = j["hsv_loss"].value("k", 1.0);
        p.hsv_cfg.sv_weight = j["hsv_loss"].value("sv_weight", 1.0);
    }
    if (p.head.out_dim() != head_dim(p.kind)) {
        throw ParseError("checkpoint head dimension does not match kind");
    }
    return p;
}

nlohmann::json ensemble_to_json(const EnsembleModel& e) {
    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"kind", "ensemble"},
            {"rgb", params_to_json(e.rgb)},
            {"hsv", params_to_json(e.hsv)},
            {"gate", params_to_json(e.gate)}};
}

EnsembleModel ensemble_from_json(const nlohmann::json& j) {
    if (j.value("kind", "") != "ensemble") {
        throw ParseError("not an ensemble checkpoint");
    }
    EnsembleModel e{params_from_json(j.at("rgb")), params_from_json(j.at("hsv")),
                    params_from_json(j.at("gate"))};
    if (e.rgb.kind != ModelKind::RgbAffine || e.hsv.kind != ModelKind::Hsv ||
        e.gate.kind != ModelKind::Gate) {
        throw ParseError("ensemble checkpoint has wrong member kinds");
    }
    return e;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    nlohmann::json j = std::holds_alternative<EnsembleModel>(c)
                           ? ensemble_to_json(std::get<EnsembleModel>(c))
                           : params_to_json(std::get<ColorModelParams>(c));
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write checkpoint: " + path);
    out << j.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid checkpoint JSON in " + path + ": " + e.what());
    }
    if (j.value("kind", "") == "ensemble") {
        return ensemble_from_json(j);
    }
    return params_from_json(j);
}

std::string checkpoint_kind(const Checkpoint& c) {
    if (std::holds_alternative<EnsembleModel>(c)) return "ensemble";
    return to_string(std::get<ColorModelParams>(c).kind);
}

} // namespace colormod
