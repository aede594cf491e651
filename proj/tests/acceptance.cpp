// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Criterion 7 needs the survey dataset and public
// embeddings; without them it reports SKIP and criteria 1-6 (plus 8 and 9)
// are the acceptance floor.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "colormod/colorspace.hpp"
#include "colormod/data.hpp"
#include "colormod/embeddings.hpp"
#include "colormod/errors.hpp"
#include "colormod/evaluation.hpp"
#include "colormod/models.hpp"
#include "colormod/rng.hpp"
#include "colormod/training.hpp"

#include "ciede2000_pairs.hpp"

using namespace colormod;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    if (!pass) ++failures;
}

void report_skip(int criterion, const std::string& detail) {
    std::printf("[SKIP] criterion %d: %s\n", criterion, detail.c_str());
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

ModifierVector random_modifier(std::mt19937_64& rng) {
    ModifierVector m;
    m.values.resize(kEmbeddingDim);
    for (auto& x : m.values) x = next_uniform(rng, -0.5, 0.5);
    return m;
}

RgbColor random_color(std::mt19937_64& rng) {
    return {next_uniform(rng, 0, 255), next_uniform(rng, 0, 255), next_uniform(rng, 0, 255)};
}

double mean_delta_e(const ColorModelParams& p, const std::vector<ColorTriple>& set,
                    const EmbeddingTable& table) {
    double sum = 0.0;
    for (const auto& t : set) {
        sum += delta_e_2000(predict(p, embed_modifier(t.modifier, table), t.ref_color),
                            t.target_color);
    }
    return sum / static_cast<double>(set.size());
}

// ---- criterion 1: CIEDE2000 against the published pairs ------------------

void criterion_1() {
    Timer timer;
    double worst = 0.0;
    for (const auto& p : kCiede2000Pairs) {
        const double got =
            delta_e_2000(LabColor{p.L1, p.a1, p.b1}, LabColor{p.L2, p.a2, p.b2});
        worst = std::max(worst, std::fabs(got - p.expected));
    }
    const double secs = timer.seconds();
    report(1, worst < 1e-4 && secs < 1.0,
           fmt("CIEDE2000 kernel vs %d published pairs: max error %.2e (%.3fs)",
               kCiede2000PairCount, worst, secs));
}

// ---- criterion 2: HSV round trip on the 18^3 grid ------------------------

void criterion_2() {
    Timer timer;
    double worst = 0.0;
    for (int r = 0; r < 18; ++r) {
        for (int g = 0; g < 18; ++g) {
            for (int b = 0; b < 18; ++b) {
                const RgbColor c{r * 15.0, g * 15.0, b * 15.0};
                const RgbColor back = hsv_to_rgb(rgb_to_hsv(c));
                worst = std::max({worst, std::fabs(back.r - c.r) / 255.0,
                                  std::fabs(back.g - c.g) / 255.0,
                                  std::fabs(back.b - c.b) / 255.0});
            }
        }
    }
    const double secs = timer.seconds();
    report(2, worst < 1e-9 && secs < 1.0,
           fmt("hsv round trip over 18^3 grid: max normalized error %.2e (%.3fs)", worst,
               secs));
}

// ---- criterion 3: analytic gradients vs central finite differences -------

double fd_gradient(const ColorModelParams& base, double* param,
                   const std::function<double(const ColorModelParams&)>& loss) {
    const double h = 1e-5;
    const double saved = *param;
    *param = saved + h;
    const double up = loss(base);
    *param = saved - h;
    const double down = loss(base);
    *param = saved;
    return (up - down) / (2.0 * h);
}

void criterion_3() {
    Timer timer;
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    const ModelKind kinds[] = {ModelKind::Wm18, ModelKind::RgbAffine, ModelKind::Dc,
                               ModelKind::Hsv, ModelKind::Gate};

    for (ModelKind kind : kinds) {
        ColorModelParams params = init_model(kind, 7 + static_cast<std::uint64_t>(kind));
        for (int input = 0; input < 20; ++input) {
            std::vector<TrainingInstance> color_batch;
            std::vector<GateInstance> gate_batch;
            const std::vector<std::size_t> indices{0};
            if (kind == ModelKind::Gate) {
                gate_batch.push_back(
                    {random_modifier(rng), random_color(rng), input % 2 ? 1.0 : 0.0});
            } else {
                color_batch.push_back(
                    {random_modifier(rng), random_color(rng), random_color(rng)});
            }

            auto loss = [&](const ColorModelParams& p) {
                return kind == ModelKind::Gate
                           ? gate_batch_loss(p, gate_batch, indices, nullptr)
                           : batch_loss(p, color_batch, indices, nullptr);
            };

            GradientBuffer grads = make_gradient_buffer(params.trunk, params.head);
            if (kind == ModelKind::Gate) {
                gate_batch_loss(params, gate_batch, indices, &grads);
            } else {
                batch_loss(params, color_batch, indices, &grads);
            }

            auto check = [&](double* param, double analytic) {
                const double fd = fd_gradient(params, param, loss);
                const double rel = std::fabs(analytic - fd) /
                                   std::max({std::fabs(analytic), std::fabs(fd), 1e-6});
                worst = std::max(worst, rel);
            };
            for (std::size_t i = 0; i < params.trunk.fc1.weights.data.size(); ++i) {
                check(&params.trunk.fc1.weights.data[i], grads.fc1.weights.data[i]);
            }
            for (std::size_t i = 0; i < params.trunk.fc1.bias.size(); ++i) {
                check(&params.trunk.fc1.bias[i], grads.fc1.bias[i]);
            }
            for (std::size_t i = 0; i < params.trunk.fc2.weights.data.size(); ++i) {
                check(&params.trunk.fc2.weights.data[i], grads.fc2.weights.data[i]);
            }
            for (std::size_t i = 0; i < params.trunk.fc2.bias.size(); ++i) {
                check(&params.trunk.fc2.bias[i], grads.fc2.bias[i]);
            }
            for (std::size_t i = 0; i < params.head.weights.data.size(); ++i) {
                check(&params.head.weights.data[i], grads.head.weights.data[i]);
            }
            for (std::size_t i = 0; i < params.head.bias.size(); ++i) {
                check(&params.head.bias[i], grads.head.bias[i]);
            }
        }
    }
    const double secs = timer.seconds();
    report(3, worst < 1e-4,
           fmt("gradient check, 5 heads x 20 inputs, all parameters: max rel err %.2e (%.1fs)",
               worst, secs));
}

// ---- criterion 4: affine specialization reproduces wm18 ------------------

void criterion_4() {
    std::mt19937_64 rng(404);
    const ColorModelParams wm18 = init_model(ModelKind::Wm18, 17);
    const ColorModelParams affine = affine_from_wm18(wm18);
    bool exact = true;
    for (int i = 0; i < 1000; ++i) {
        const ModifierVector m = random_modifier(rng);
        const RgbColor r = random_color(rng);
        const Vec3 a = predict_raw(wm18, m, r);
        const Vec3 b = predict_raw(affine, m, r);
        exact = exact && a.x == b.x && a.y == b.y && a.z == b.z;
    }
    report(4, exact,
           "affine head forced to (M = I, beta = m) equals wm18 pre-clamp on 1000 inputs");
}

// ---- criterion 5: synthetic oracle recovery ------------------------------

void criterion_5() {
    Timer timer;

    // Exact interpolations toward fixed points: the dc model must recover
    // them on held-out pairings.
    const std::vector<SyntheticModifier> interp{
        SyntheticModifier::interpolation("blackish", {0, 0, 0}, 0.45),
        SyntheticModifier::interpolation("whitish", {255, 255, 255}, 0.40),
        SyntheticModifier::interpolation("reddish", {255, 0, 0}, 0.50),
        SyntheticModifier::interpolation("bluish", {0, 0, 255}, 0.35),
        SyntheticModifier::interpolation("very dark", {0, 0, 0}, 0.65),
        SyntheticModifier::interpolation("muted", {128, 128, 128}, 0.30),
    };
    const auto interp_data = generate_synthetic(40, interp, 11);
    const auto interp_table = EmbeddingTable::fixture(modifier_vocabulary(interp_data), 5);
    const auto interp_splits = make_splits(interp_data, 3, {0.0, 0.0, 0.15});

    TrainConfig cfg; // paper defaults: 2000 epochs, batch 32, lr 0.1
    cfg.kind = ModelKind::Dc;
    cfg.seed = 1;
    const auto dc = train_model(cfg, interp_splits.train, interp_table);
    const double dc_de = mean_delta_e(
        dc.params, interp_splits.test.at(SplitCondition::UnseenPairings), interp_table);

    // Exact hue rotations: the hsv model recovers them, the additive RGB
    // baseline cannot.
    const std::vector<SyntheticModifier> rotations{
        SyntheticModifier::hsv_offset("flipped", kPi, 0, 0),
        SyntheticModifier::hsv_offset("rotated", kPi / 2, 0, 0),
        SyntheticModifier::hsv_offset("cooler", 2 * kPi / 3, 0, 0),
        SyntheticModifier::hsv_offset("warmer", -kPi / 3, 0, 0),
    };
    const auto rot_data = generate_synthetic(40, rotations, 12);
    const auto rot_table = EmbeddingTable::fixture(modifier_vocabulary(rot_data), 5);
    const auto rot_splits = make_splits(rot_data, 3, {0.0, 0.0, 0.15});
    const auto& rot_test = rot_splits.test.at(SplitCondition::UnseenPairings);

    cfg.kind = ModelKind::Hsv;
    const auto hsv = train_model(cfg, rot_splits.train, rot_table);
    const double hsv_de = mean_delta_e(hsv.params, rot_test, rot_table);

    cfg.kind = ModelKind::Wm18;
    const auto wm18 = train_model(cfg, rot_splits.train, rot_table);
    const double wm18_de = mean_delta_e(wm18.params, rot_test, rot_table);

    const bool pass = dc_de < 1.0 && hsv_de < 2.0 && wm18_de > 2.0;
    report(5, pass,
           fmt("synthetic recovery: dc on interpolations dE=%.3f (<1), hsv on rotations "
               "dE=%.3f (<2), wm18 on rotations dE=%.3f (>2) (%.0fs)",
               dc_de, hsv_de, wm18_de, timer.seconds()));
}

// ---- criterion 6: ensemble oracle bound ----------------------------------

void criterion_6() {
    const auto dataset = generate_synthetic(30, default_synthetic_modifiers(), 21);
    const auto table = EmbeddingTable::fixture(modifier_vocabulary(dataset), 5);
    const auto splits = make_splits(dataset, 5, {0.1, 0.1, 0.1});

    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.seed = 2;
    cfg.kind = ModelKind::RgbAffine;
    const auto rgb = train_model(cfg, splits.train, table);
    cfg.kind = ModelKind::Hsv;
    const auto hsv = train_model(cfg, splits.train, table);

    bool pass = true;
    std::string detail = "oracle per-instance selection beats both single models:";
    auto check_set = [&](const char* name, const std::vector<ColorTriple>& set) {
        if (set.empty()) return;
        double rgb_sum = 0, hsv_sum = 0, oracle_sum = 0;
        for (const auto& t : set) {
            const auto m = embed_modifier(t.modifier, table);
            const double de_rgb =
                delta_e_2000(predict_rgb_affine(rgb.params, m, t.ref_color), t.target_color);
            const double de_hsv =
                delta_e_2000(predict_hsv(hsv.params, m, t.ref_color), t.target_color);
            rgb_sum += de_rgb;
            hsv_sum += de_hsv;
            oracle_sum += std::min(de_rgb, de_hsv);
        }
        const bool ok = oracle_sum <= rgb_sum && oracle_sum <= hsv_sum;
        pass = pass && ok;
        detail += fmt(" %s(%s)", name, ok ? "ok" : "VIOLATED");
    };
    check_set("train", splits.train);
    for (SplitCondition c : kAllConditions) {
        auto it = splits.test.find(c);
        if (it != splits.test.end()) check_set(to_string(c), it->second);
    }
    report(6, pass, detail);
}

// ---- criterion 7: survey-data reproduction (conditional) -----------------

const char* real_dataset_path() {
    if (const char* p = std::getenv("COLORMOD_REAL_DATASET")) return p;
    static const std::string fallback = std::string(COLORMOD_DATA_DIR) + "/real_triples.csv";
    return fs::exists(fallback) ? fallback.c_str() : nullptr;
}

const char* real_embeddings_path() {
    if (const char* p = std::getenv("COLORMOD_REAL_EMBEDDINGS")) return p;
    static const std::string fallback =
        std::string(COLORMOD_DATA_DIR) + "/real_embeddings.txt";
    return fs::exists(fallback) ? fallback.c_str() : nullptr;
}

void criterion_7() {
    const char* data_path = real_dataset_path();
    const char* emb_path = real_embeddings_path();
    if (!data_path || !emb_path || !fs::exists(data_path) || !fs::exists(emb_path)) {
        report_skip(7,
                    "survey dataset / public embeddings not present "
                    "(set COLORMOD_REAL_DATASET and COLORMOD_REAL_EMBEDDINGS)");
        return;
    }

    Timer timer;
    const auto triples = load_triples(data_path);
    std::set<std::string> vocab;
    for (const auto& tok : modifier_vocabulary(triples)) vocab.insert(tok);
    const auto table = EmbeddingTable::load(emb_path, &vocab);

    // Five single-seed protocol runs; the aggregate mean is the mean of the
    // per-run means, and the per-run overall rows give the seed-level
    // comparison.
    double rgb_cos = 0, rgb_de = 0, wm_cos = 0, wm_de = 0;
    int rgb_wins = 0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        ProtocolConfig cfg;
        cfg.runs = 1;
        cfg.base_seed = 1 + static_cast<std::uint64_t>(s);
        cfg.models = {"wm18", "rgb_affine"};
        const auto result = run_protocol(cfg, triples, table);
        double run_rgb_de = 0, run_wm_de = 0;
        for (const auto& row : result.report.rows) {
            if (row.condition != kOverallName) continue;
            if (row.model == "rgb_affine") {
                rgb_cos += row.agg.cosine_mean / seeds;
                rgb_de += row.agg.deltae_mean / seeds;
                run_rgb_de = row.agg.deltae_mean;
            } else if (row.model == "wm18") {
                wm_cos += row.agg.cosine_mean / seeds;
                wm_de += row.agg.deltae_mean / seeds;
                run_wm_de = row.agg.deltae_mean;
            }
        }
        if (run_rgb_de <= run_wm_de) ++rgb_wins;
    }

    const bool pass = std::fabs(rgb_cos - 0.858) <= 0.05 && std::fabs(rgb_de - 5.412) <= 1.5 &&
                      std::fabs(wm_cos - 0.856) <= 0.05 && std::fabs(wm_de - 5.595) <= 1.5 &&
                      rgb_wins >= 4;
    report(7, pass,
           fmt("survey-data reproduction: rgb cos %.3f / dE %.2f, wm18 cos %.3f / dE %.2f, "
               "rgb<=wm18 in %d/5 seeds (%.0fs)",
               rgb_cos, rgb_de, wm_cos, wm_de, rgb_wins, timer.seconds()));
}

// ---- criterion 8: seen vs fully-unseen ordering ---------------------------

void criterion_8() {
    Timer timer;
    const auto dataset = load_triples(std::string(COLORMOD_DATA_DIR) + "/synthetic_triples.csv");
    const auto table =
        EmbeddingTable::load(std::string(COLORMOD_DATA_DIR) + "/fixture_embeddings.txt");

    bool pass = true;
    std::string detail = "seen dE < fully-unseen dE per model/seed:";
    for (std::uint64_t seed : {1ULL, 2ULL}) {
        ProtocolConfig cfg;
        cfg.runs = 1;
        cfg.base_seed = seed;
        const auto result = run_protocol(cfg, dataset, table);
        for (const auto& model : cfg.models) {
            double seen = -1, unseen = -1;
            for (const auto& row : result.report.rows) {
                if (row.model != model) continue;
                if (row.condition == to_string(SplitCondition::SeenPairings)) {
                    seen = row.agg.deltae_mean;
                }
                if (row.condition == to_string(SplitCondition::FullyUnseen)) {
                    unseen = row.agg.deltae_mean;
                }
            }
            const bool ok = seen >= 0 && unseen >= 0 && seen < unseen;
            pass = pass && ok;
            detail += fmt(" %s@%llu(%.2f<%.2f)", model.c_str(),
                          static_cast<unsigned long long>(seed), seen, unseen);
        }
    }
    detail += fmt(" (%.0fs)", timer.seconds());
    report(8, pass, detail);
}

// ---- criterion 9: byte-identical determinism ------------------------------

void criterion_9() {
    Timer timer;
    const auto dataset = generate_synthetic(8, default_synthetic_modifiers(), 77);
    const auto table = EmbeddingTable::fixture(modifier_vocabulary(dataset), 5);

    ProtocolConfig cfg;
    cfg.runs = 2;
    cfg.epochs = 150;
    cfg.gate_epochs = 100;
    cfg.models = {"wm18", "hsv", "ensemble"};
    cfg.base_seed = 3;

    const fs::path dir =
        fs::temp_directory_path() / ("colormod-acceptance-" + std::to_string(::getpid()));
    fs::create_directories(dir);

    auto write_all = [&](const ProtocolResult& result, const std::string& tag) {
        std::vector<fs::path> written;
        const fs::path report_path = dir / (tag + "-report.json");
        std::ofstream(report_path) << render_report(result.report, ReportFormat::Json);
        written.push_back(report_path);
        for (const auto& run : result.runs) {
            for (const auto& [name, checkpoint] : run.checkpoints) {
                const fs::path p =
                    dir / (tag + "-run" + std::to_string(run.seed) + "-" + name + ".json");
                save_checkpoint(p.string(), checkpoint);
                written.push_back(p);
            }
        }
        return written;
    };
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    };

    const auto first = write_all(run_protocol(cfg, dataset, table), "a");
    const auto second = write_all(run_protocol(cfg, dataset, table), "b");

    bool pass = first.size() == second.size();
    for (std::size_t i = 0; pass && i < first.size(); ++i) {
        pass = slurp(first[i]) == slurp(second[i]);
    }
    fs::remove_all(dir);
    report(9, pass,
           fmt("two identical protocol invocations: %zu report/checkpoint files byte-identical "
               "(%.0fs)",
               first.size(), timer.seconds()));
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();

    if (failures) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed (criterion 7 may be skipped)\n");
    return 0;
}
