#include "colormod/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "colormod/errors.hpp"
#include "colormod/rng.hpp"

namespace colormod {

const char* to_string(SplitCondition c) {
    switch (c) {
        case SplitCondition::SeenPairings: return "seen_pairings";
        case SplitCondition::UnseenPairings: return "unseen_pairings";
        case SplitCondition::UnseenRefColor: return "unseen_ref_color";
        case SplitCondition::UnseenModifiers: return "unseen_modifiers";
        case SplitCondition::FullyUnseen: return "fully_unseen";
    }
    return "seen_pairings";
}

const char* display_name(SplitCondition c) {
    switch (c) {
        case SplitCondition::SeenPairings: return "Seen Pairings";
        case SplitCondition::UnseenPairings: return "Unseen Pairings";
        case SplitCondition::UnseenRefColor: return "Unseen Ref. Color";
        case SplitCondition::UnseenModifiers: return "Unseen Modifiers";
        case SplitCondition::FullyUnseen: return "Fully Unseen";
    }
    return "Seen Pairings";
}

SplitCondition condition_from_string(const std::string& s) {
    for (SplitCondition c : kAllConditions) {
        if (s == to_string(c)) return c;
    }
    throw ConfigError("unknown split condition: " + s);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(trim(field));
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

bool try_parse_real(const std::string& s, double& out) {
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last && std::isfinite(out);
}

double parse_channel(const std::string& s, std::size_t row) {
    double v{};
    if (!try_parse_real(s, v)) {
        throw ParseError("dataset row " + std::to_string(row) + ": bad channel value '" + s +
                         "'");
    }
    if (v < 0.0 || v > 255.0) {
        throw DomainError("dataset row " + std::to_string(row) + ": channel " +
                          std::to_string(v) + " outside [0, 255]");
    }
    return v;
}

} // namespace

std::vector<ColorTriple> load_triples(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open dataset file: " + path);
    }
    std::vector<ColorTriple> triples;
    std::string line;
    std::size_t row = 0;
    bool first_data_row = true;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        auto fields = split_csv_row(line);
        if (fields.size() != 9) {
            throw ParseError("dataset row " + std::to_string(row) + ": expected 9 fields, got " +
                             std::to_string(fields.size()));
        }
        if (first_data_row) {
            first_data_row = false;
            double probe;
            if (!try_parse_real(fields[1], probe)) continue; // header row
        }
        ColorTriple t;
        t.ref_label = fields[0];
        t.ref_color = {parse_channel(fields[1], row), parse_channel(fields[2], row),
                       parse_channel(fields[3], row)};
        t.modifier = fields[4];
        t.target_label = fields[5];
        t.target_color = {parse_channel(fields[6], row), parse_channel(fields[7], row),
                          parse_channel(fields[8], row)};
        if (t.ref_label.empty() || t.modifier.empty() || t.target_label.empty()) {
            throw ParseError("dataset row " + std::to_string(row) + ": empty label");
        }
        triples.push_back(std::move(t));
    }
    return triples;
}

void save_triples(const std::vector<ColorTriple>& triples, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot write dataset file: " + path);
    }
    out << "ref_label,ref_r,ref_g,ref_b,modifier,target_label,target_r,target_g,target_b\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (const auto& t : triples) {
        out << t.ref_label << ',';
        put(t.ref_color.r); out << ','; put(t.ref_color.g); out << ','; put(t.ref_color.b);
        out << ',' << t.modifier << ',' << t.target_label << ',';
        put(t.target_color.r); out << ','; put(t.target_color.g); out << ',';
        put(t.target_color.b);
        out << '\n';
    }
}

SplitCondition classify_condition(const ColorTriple& t,
                                  const std::vector<ColorTriple>& train) {
    bool ref_seen = false, mod_seen = false, pair_seen = false;
    for (const auto& tr : train) {
        const bool same_ref = tr.ref_label == t.ref_label;
        const bool same_mod = tr.modifier == t.modifier;
        ref_seen |= same_ref;
        mod_seen |= same_mod;
        pair_seen |= same_ref && same_mod;
        if (pair_seen) break;
    }
    if (pair_seen) return SplitCondition::SeenPairings;
    if (ref_seen && mod_seen) return SplitCondition::UnseenPairings;
    if (!ref_seen && mod_seen) return SplitCondition::UnseenRefColor;
    if (ref_seen && !mod_seen) return SplitCondition::UnseenModifiers;
    return SplitCondition::FullyUnseen;
}

namespace {

std::size_t held_count(double fraction, std::size_t n, const char* what) {
    if (fraction < 0.0 || fraction > 1.0 || !std::isfinite(fraction)) {
        throw ConfigError(std::string("split fraction for ") + what + " outside [0, 1]");
    }
    if (fraction == 0.0 || n == 0) return 0;
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    const std::size_t held = std::max<std::size_t>(1, k);
    if (held >= n) {
        throw ConfigError(std::string("split would hold out every ") + what);
    }
    return held;
}

template <typename T>
std::set<T> pick_held(std::vector<T> pool, std::size_t count, std::mt19937_64& rng) {
    shuffle(pool, rng);
    return std::set<T>(pool.begin(), pool.begin() + static_cast<long>(count));
}

} // namespace

DatasetSplits make_splits(const std::vector<ColorTriple>& triples, std::uint64_t seed,
                          const SplitFractions& fractions) {
    if (fractions.modifiers + fractions.refs + fractions.pairs > 1.0) {
        throw ConfigError("split fractions sum to more than 1");
    }
    DatasetSplits splits;
    splits.seed = seed;
    splits.fractions = fractions;

    std::set<std::string> mod_set, ref_set;
    for (const auto& t : triples) {
        mod_set.insert(t.modifier);
        ref_set.insert(t.ref_label);
    }
    std::vector<std::string> mods(mod_set.begin(), mod_set.end());
    std::vector<std::string> refs(ref_set.begin(), ref_set.end());

    std::mt19937_64 rng(splitmix64(seed));
    const auto held_mods =
        pick_held(mods, held_count(fractions.modifiers, mods.size(), "modifier"), rng);
    const auto held_refs =
        pick_held(refs, held_count(fractions.refs, refs.size(), "reference label"), rng);

    // Distinct (ref, modifier) pairs among triples not already excluded.
    std::set<std::pair<std::string, std::string>> pair_set;
    for (const auto& t : triples) {
        if (held_mods.count(t.modifier) || held_refs.count(t.ref_label)) continue;
        pair_set.insert({t.ref_label, t.modifier});
    }
    std::vector<std::pair<std::string, std::string>> pairs(pair_set.begin(), pair_set.end());
    const auto held_pairs =
        pick_held(pairs, held_count(fractions.pairs, pairs.size(), "pairing"), rng);

    std::vector<std::size_t> held_out;
    for (std::size_t i = 0; i < triples.size(); ++i) {
        const auto& t = triples[i];
        const bool excluded = held_mods.count(t.modifier) || held_refs.count(t.ref_label) ||
                              held_pairs.count({t.ref_label, t.modifier});
        if (excluded) {
            held_out.push_back(i);
        } else {
            splits.train.push_back(t);
            splits.train_indices.push_back(i);
        }
    }
    if (splits.train.empty()) {
        throw ConfigError("split left no training triples");
    }
    for (std::size_t i : held_out) {
        const SplitCondition c = classify_condition(triples[i], splits.train);
        splits.test[c].push_back(triples[i]);
        splits.test_indices[c].push_back(i);
    }
    return splits;
}

// ---- synthetic data -----------------------------------------------------

SyntheticModifier SyntheticModifier::interpolation(std::string name, RgbColor point,
                                                   double alpha) {
    SyntheticModifier m;
    m.name = std::move(name);
    m.kind = Kind::RgbInterpolation;
    m.point = point;
    m.alpha = alpha;
    return m;
}

SyntheticModifier SyntheticModifier::hsv_offset(std::string name, double dh, double ds,
                                                double dv) {
    SyntheticModifier m;
    m.name = std::move(name);
    m.kind = Kind::HsvOffset;
    m.dh = dh;
    m.ds = ds;
    m.dv = dv;
    return m;
}

RgbColor apply_synthetic(const SyntheticModifier& m, const RgbColor& ref) {
    switch (m.kind) {
        case SyntheticModifier::Kind::RgbInterpolation:
            return {ref.r + m.alpha * (m.point.r - ref.r),
                    ref.g + m.alpha * (m.point.g - ref.g),
                    ref.b + m.alpha * (m.point.b - ref.b)};
        case SyntheticModifier::Kind::HsvOffset: {
            HsvColor h = rgb_to_hsv(ref);
            h.h = wrap_hue(h.h + m.dh);
            h.s = clamp01(h.s + m.ds);
            h.v = clamp01(h.v + m.dv);
            return hsv_to_rgb(h);
        }
    }
    return ref;
}

std::vector<ColorTriple> generate_synthetic(std::size_t n_refs,
                                            const std::vector<SyntheticModifier>& modifiers,
                                            std::uint64_t seed) {
    std::vector<ColorTriple> triples;
    if (n_refs == 0 || modifiers.empty()) return triples;

    std::mt19937_64 rng(splitmix64(seed));
    std::vector<std::pair<std::string, RgbColor>> refs;
    refs.reserve(n_refs);
    for (std::size_t i = 0; i < n_refs; ++i) {
        // Saturated, reasonably bright references keep hue well-defined.
        HsvColor h;
        h.h = next_uniform(rng, 0.0, kTwoPi);
        h.s = next_uniform(rng, 0.35, 0.95);
        h.v = next_uniform(rng, 0.35, 0.95);
        char label[24];
        std::snprintf(label, sizeof label, "c%03llu", static_cast<unsigned long long>(i));
        refs.emplace_back(label, hsv_to_rgb(h));
    }

    triples.reserve(n_refs * modifiers.size());
    for (const auto& [label, color] : refs) {
        for (const auto& m : modifiers) {
            ColorTriple t;
            t.ref_label = label;
            t.ref_color = color;
            t.modifier = m.name;
            t.target_label = m.name + " " + label;
            t.target_color = apply_synthetic(m, color);
            triples.push_back(std::move(t));
        }
    }
    return triples;
}

std::vector<SyntheticModifier> default_synthetic_modifiers() {
    return {
        SyntheticModifier::interpolation("blackish", {0, 0, 0}, 0.45),
        SyntheticModifier::interpolation("whitish", {255, 255, 255}, 0.40),
        SyntheticModifier::interpolation("reddish", {255, 0, 0}, 0.50),
        SyntheticModifier::interpolation("very dark", {0, 0, 0}, 0.65),
        SyntheticModifier::hsv_offset("rotated", kPi / 2.0, 0.0, 0.0),
        SyntheticModifier::hsv_offset("warmer", -kPi / 6.0, 0.0, 0.0),
        SyntheticModifier::hsv_offset("paler", 0.0, -0.30, 0.15),
        SyntheticModifier::hsv_offset("deeper", 0.0, 0.25, -0.20),
    };
}

std::vector<std::string> modifier_vocabulary(const std::vector<ColorTriple>& triples) {
    std::set<std::string> vocab;
    for (const auto& t : triples) {
        std::istringstream in(t.modifier);
        std::string tok;
        while (in >> tok) {
            std::transform(tok.begin(), tok.end(), tok.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            vocab.insert(tok);
        }
    }
    return {vocab.begin(), vocab.end()};
}

// ---- split manifests ----------------------------------------------------

namespace {
constexpr const char* kManifestFormat = "colormod-split-manifest";
constexpr int kManifestVersion = 1;
} // namespace

nlohmann::json manifest_to_json(const DatasetSplits& splits, const std::string& dataset_path,
                                std::size_t dataset_rows) {
    nlohmann::json test = nlohmann::json::object();
    for (SplitCondition c : kAllConditions) {
        auto it = splits.test_indices.find(c);
        test[to_string(c)] =
            it == splits.test_indices.end() ? std::vector<std::size_t>{} : it->second;
    }
    return {{"format", kManifestFormat},
            {"version", kManifestVersion},
            {"dataset", {{"path", dataset_path}, {"rows", dataset_rows}}},
            {"seed", splits.seed},
            {"fractions",
             {{"modifiers", splits.fractions.modifiers},
              {"refs", splits.fractions.refs},
              {"pairs", splits.fractions.pairs}}},
            {"train", splits.train_indices},
            {"test", test}};
}

DatasetSplits splits_from_manifest(const nlohmann::json& manifest,
                                   const std::vector<ColorTriple>& triples) {
    if (manifest.value("format", "") != kManifestFormat) {
        throw ParseError("not a split manifest");
    }
    if (manifest.value("version", 0) != kManifestVersion) {
        throw ParseError("unsupported manifest version");
    }
    const auto rows = manifest.at("dataset").at("rows").get<std::size_t>();
    if (rows != triples.size()) {
        throw ConfigError("manifest was built for " + std::to_string(rows) +
                          " rows, dataset has " + std::to_string(triples.size()));
    }
    DatasetSplits splits;
    splits.seed = manifest.at("seed").get<std::uint64_t>();
    splits.fractions.modifiers = manifest.at("fractions").at("modifiers").get<double>();
    splits.fractions.refs = manifest.at("fractions").at("refs").get<double>();
    splits.fractions.pairs = manifest.at("fractions").at("pairs").get<double>();

    auto fetch = [&](std::size_t i) {
        if (i >= triples.size()) {
            throw ConfigError("manifest index " + std::to_string(i) + " out of range");
        }
        return triples[i];
    };
    for (auto i : manifest.at("train").get<std::vector<std::size_t>>()) {
        splits.train.push_back(fetch(i));
        splits.train_indices.push_back(i);
    }
    for (const auto& [name, indices] : manifest.at("test").items()) {
        const SplitCondition c = condition_from_string(name);
        for (auto i : indices.get<std::vector<std::size_t>>()) {
            splits.test[c].push_back(fetch(i));
            splits.test_indices[c].push_back(i);
        }
    }
    return splits;
}

std::string manifest_dataset_path(const nlohmann::json& manifest) {
    return manifest.at("dataset").at("path").get<std::string>();
}

} // namespace colormod
