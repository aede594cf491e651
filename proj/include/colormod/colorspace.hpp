#pragma once

// Exact, deterministic color geometry: RGB<->HSV, sRGB->CIELAB (D65/2deg),
// CIEDE2000, cosine similarity and circular hue arithmetic. All functions
// are pure; safe to call from any thread.

namespace colormod {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Channels on the canonical [0, 255] scale. Internal math uses the
// normalized [0, 1] scale; conversion between the two is always explicit.
struct RgbColor {
    double r{};
    double g{};
    double b{};
};

// h in radians, reduced to [0, 2pi); s, v in [0, 1].
struct HsvColor {
    double h{};
    double s{};
    double v{};
};

// CIELAB, D65/2deg reference white.
struct LabColor {
    double L{};
    double a{};
    double b{};
};

// Generic 3-vector for direction math and normalized color values.
struct Vec3 {
    double x{};
    double y{};
    double z{};

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

double dot(const Vec3& u, const Vec3& v);
double norm(const Vec3& u);

// Explicit scale changes between canonical [0,255] and normalized [0,1].
Vec3 rgb_to_unit(const RgbColor& c);
RgbColor rgb_from_unit(const Vec3& v);

// Explicit clamping; nothing in this module clamps silently.
RgbColor clamp_rgb(const RgbColor& c);
double clamp01(double x);

// Reduce an angle to [0, 2pi).
double wrap_hue(double h);

// Signed shortest angular difference h1 - h2, in (-pi, pi].
double hue_delta(double h1, double h2);

// Hexcone conversions. rgb_to_hsv maps achromatic inputs to h = 0, s = 0.
// Throws DomainError on out-of-range channels.
HsvColor rgb_to_hsv(const RgbColor& c);
RgbColor hsv_to_rgb(const HsvColor& c);

// sRGB (IEC 61966-2-1 companding) -> linear RGB -> XYZ (D65) -> CIELAB.
// The reference white is the XYZ image of RGB(255,255,255), so white maps
// to exactly (100, 0, 0).
LabColor rgb_to_lab(const RgbColor& c);

// CIEDE2000 (Luo, Cui, Rigg 2001) with kL = kC = kH = 1. The Lab-level
// kernel is exported so it can be checked against the published
// verification pairs directly.
double delta_e_2000(const LabColor& x, const LabColor& y);
double delta_e_2000(const RgbColor& x, const RgbColor& y);

// u.v / (|u||v|), clamped to [-1, 1]. A zero-length argument yields
// value 0 with the degenerate flag set instead of an error, so evaluation
// never aborts on a pathological prediction.
struct Cosine {
    double value{};
    bool degenerate{};
};
Cosine cosine_similarity(const Vec3& u, const Vec3& v);

} // namespace colormod
