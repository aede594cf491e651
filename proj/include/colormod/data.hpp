#pragma once

// Dataset ingestion, the five-way generalization split, and a synthetic
// generator whose targets are computed analytically (so the full pipeline
// can run and be verified without the survey data or a public embedding
// file).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "colormod/colorspace.hpp"

#include "json.hpp"

namespace colormod {

struct ColorTriple {
    std::string ref_label;
    RgbColor ref_color;
    std::string modifier;
    std::string target_label;
    RgbColor target_color;
};

// How a test instance relates to the training set, decided over label
// strings: the exact (reference label, modifier) pair seen; both seen but
// never paired; modifier seen with a new reference; reference seen with a
// new modifier; neither seen.
enum class SplitCondition {
    SeenPairings,
    UnseenPairings,
    UnseenRefColor,
    UnseenModifiers,
    FullyUnseen,
};

inline constexpr SplitCondition kAllConditions[] = {
    SplitCondition::SeenPairings,   SplitCondition::UnseenPairings,
    SplitCondition::UnseenRefColor, SplitCondition::UnseenModifiers,
    SplitCondition::FullyUnseen,
};

const char* to_string(SplitCondition c);
const char* display_name(SplitCondition c);
SplitCondition condition_from_string(const std::string& s);

// Fractions of modifiers, reference labels and remaining (ref, modifier)
// pairs to hold out of training. Nonzero fractions hold out at least one
// item each.
struct SplitFractions {
    double modifiers = 0.1;
    double refs = 0.1;
    double pairs = 0.1;
};

struct DatasetSplits {
    std::vector<ColorTriple> train;
    std::map<SplitCondition, std::vector<ColorTriple>> test;
    std::vector<std::size_t> train_indices; // into the source triple list
    std::map<SplitCondition, std::vector<std::size_t>> test_indices;
    std::uint64_t seed = 0;
    SplitFractions fractions;
};

// Comma-separated rows: ref_label, R, G, B, modifier, target_label, R, G, B.
// A header row is detected and skipped. Channels must parse as reals in
// [0, 255].
std::vector<ColorTriple> load_triples(const std::string& path);
void save_triples(const std::vector<ColorTriple>& triples, const std::string& path);

SplitCondition classify_condition(const ColorTriple& t,
                                  const std::vector<ColorTriple>& train);

// Seeded partition. Held-out triples land in the test bucket named by
// classify_condition against the resulting training set; the SeenPairings
// bucket stays empty here (that condition is evaluated on the training
// triples themselves).
DatasetSplits make_splits(const std::vector<ColorTriple>& triples, std::uint64_t seed,
                          const SplitFractions& fractions);

// ---- synthetic data -----------------------------------------------------

// A synthetic modifier is either an exact interpolation toward a fixed RGB
// point or an exact offset in HSV (hue wrapped, s/v clamped).
struct SyntheticModifier {
    enum class Kind { RgbInterpolation, HsvOffset };

    std::string name;
    Kind kind = Kind::RgbInterpolation;
    RgbColor point{};   // interpolation target, canonical scale
    double alpha = 0.5; // interpolation strength in [0, 1]
    double dh = 0.0, ds = 0.0, dv = 0.0;

    static SyntheticModifier interpolation(std::string name, RgbColor point, double alpha);
    static SyntheticModifier hsv_offset(std::string name, double dh, double ds, double dv);
};

// Target of one synthetic modifier applied to one reference color.
RgbColor apply_synthetic(const SyntheticModifier& m, const RgbColor& ref);

// Full cross product of n_refs seeded reference colors with the given
// modifiers. References are drawn in HSV away from the degenerate
// achromatic axis.
std::vector<ColorTriple> generate_synthetic(std::size_t n_refs,
                                            const std::vector<SyntheticModifier>& modifiers,
                                            std::uint64_t seed);

// The bundled mixed modifier set: four interpolations (one multi-word) and
// four HSV offsets.
std::vector<SyntheticModifier> default_synthetic_modifiers();

// Every distinct token appearing in the modifiers of a triple list.
std::vector<std::string> modifier_vocabulary(const std::vector<ColorTriple>& triples);

// ---- split manifests ----------------------------------------------------

nlohmann::json manifest_to_json(const DatasetSplits& splits, const std::string& dataset_path,
                                std::size_t dataset_rows);
DatasetSplits splits_from_manifest(const nlohmann::json& manifest,
                                   const std::vector<ColorTriple>& triples);
std::string manifest_dataset_path(const nlohmann::json& manifest);

} // namespace colormod
