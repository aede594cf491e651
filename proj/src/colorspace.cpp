#include "colormod/colorspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "colormod/errors.hpp"

namespace colormod {

namespace {

void require_rgb_range(const RgbColor& c, const char* where) {
    const double chans[3] = {c.r, c.g, c.b};
    for (double x : chans) {
        if (!std::isfinite(x) || x < 0.0 || x > 255.0) {
            throw DomainError(std::string(where) + ": channel " + std::to_string(x) +
                              " outside [0, 255]");
        }
    }
}

} // namespace

double dot(const Vec3& u, const Vec3& v) {
    return u.x * v.x + u.y * v.y + u.z * v.z;
}

double norm(const Vec3& u) {
    return std::sqrt(dot(u, u));
}

Vec3 rgb_to_unit(const RgbColor& c) {
    return {c.r / 255.0, c.g / 255.0, c.b / 255.0};
}

RgbColor rgb_from_unit(const Vec3& v) {
    return {v.x * 255.0, v.y * 255.0, v.z * 255.0};
}

RgbColor clamp_rgb(const RgbColor& c) {
    return {std::clamp(c.r, 0.0, 255.0), std::clamp(c.g, 0.0, 255.0),
            std::clamp(c.b, 0.0, 255.0)};
}

double clamp01(double x) {
    return std::clamp(x, 0.0, 1.0);
}

double wrap_hue(double h) {
    double r = std::fmod(h, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    // fmod can land exactly on 2pi after the correction when h is a tiny
    // negative number.
    if (r >= kTwoPi) r = 0.0;
    return r;
}

double hue_delta(double h1, double h2) {
    double d = std::fmod(h1 - h2, kTwoPi);
    if (d <= -kPi) d += kTwoPi;
    if (d > kPi) d -= kTwoPi;
    return d;
}

HsvColor rgb_to_hsv(const RgbColor& c) {
    require_rgb_range(c, "rgb_to_hsv");
    const double r = c.r / 255.0, g = c.g / 255.0, b = c.b / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;

    HsvColor out;
    out.v = mx;
    if (delta == 0.0) {
        // Achromatic: hue is fixed at 0 so round trips stay deterministic.
        out.h = 0.0;
        out.s = 0.0;
        return out;
    }
    out.s = delta / mx;

    double sector;
    if (mx == r) {
        sector = (g - b) / delta;
        if (sector < 0.0) sector += 6.0;
    } else if (mx == g) {
        sector = (b - r) / delta + 2.0;
    } else {
        sector = (r - g) / delta + 4.0;
    }
    out.h = wrap_hue(sector * (kPi / 3.0));
    return out;
}

RgbColor hsv_to_rgb(const HsvColor& c) {
    if (!std::isfinite(c.h)) {
        throw DomainError("hsv_to_rgb: non-finite hue");
    }
    if (!std::isfinite(c.s) || c.s < 0.0 || c.s > 1.0 ||
        !std::isfinite(c.v) || c.v < 0.0 || c.v > 1.0) {
        throw DomainError("hsv_to_rgb: s or v outside [0, 1]");
    }

    const double h = wrap_hue(c.h) / (kPi / 3.0); // [0, 6)
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = c.v * (1.0 - c.s);
    const double q = c.v * (1.0 - c.s * f);
    const double t = c.v * (1.0 - c.s * (1.0 - f));

    double r, g, b;
    switch (sector) {
        case 0: r = c.v; g = t; b = p; break;
        case 1: r = q; g = c.v; b = p; break;
        case 2: r = p; g = c.v; b = t; break;
        case 3: r = p; g = q; b = c.v; break;
        case 4: r = t; g = p; b = c.v; break;
        default: r = c.v; g = p; b = q; break;
    }
    return {r * 255.0, g * 255.0, b * 255.0};
}

namespace {

double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

// sRGB primaries under D65 (IEC 61966-2-1).
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

// Reference white as the image of RGB(1,1,1) under the matrix above.
constexpr double kWhiteX = kRgbToXyz[0][0] + kRgbToXyz[0][1] + kRgbToXyz[0][2];
constexpr double kWhiteY = kRgbToXyz[1][0] + kRgbToXyz[1][1] + kRgbToXyz[1][2];
constexpr double kWhiteZ = kRgbToXyz[2][0] + kRgbToXyz[2][1] + kRgbToXyz[2][2];

double lab_f(double t) {
    constexpr double eps = 216.0 / 24389.0; // (6/29)^3
    constexpr double kappa = 24389.0 / 27.0;
    return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
}

} // namespace

LabColor rgb_to_lab(const RgbColor& c) {
    require_rgb_range(c, "rgb_to_lab");
    const double lin[3] = {srgb_to_linear(c.r / 255.0), srgb_to_linear(c.g / 255.0),
                           srgb_to_linear(c.b / 255.0)};
    double xyz[3];
    for (int i = 0; i < 3; ++i) {
        xyz[i] = kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] +
                 kRgbToXyz[i][2] * lin[2];
    }
    const double fx = lab_f(xyz[0] / kWhiteX);
    const double fy = lab_f(xyz[1] / kWhiteY);
    const double fz = lab_f(xyz[2] / kWhiteZ);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

// CIEDE2000 after the implementation notes of Sharma, Wu and Dalal (2005).
// Angles in radians; equation numbers refer to that article.
double delta_e_2000(const LabColor& x, const LabColor& y) {
    const double deg2rad = kPi / 180.0;

    // Eq. 2-3: chromas and their mean.
    const double c1 = std::hypot(x.a, x.b);
    const double c2 = std::hypot(y.a, y.b);
    const double c_bar = 0.5 * (c1 + c2);

    // Eq. 4-5: G compensation on a.
    const double c_bar7 = std::pow(c_bar, 7.0);
    const double g = 0.5 * (1.0 - std::sqrt(c_bar7 / (c_bar7 + std::pow(25.0, 7.0))));
    const double a1p = (1.0 + g) * x.a;
    const double a2p = (1.0 + g) * y.a;

    // Eq. 6-7: adjusted chroma and hue.
    const double c1p = std::hypot(a1p, x.b);
    const double c2p = std::hypot(a2p, y.b);
    auto hue_of = [](double bb, double ap) {
        if (bb == 0.0 && ap == 0.0) return 0.0;
        double h = std::atan2(bb, ap);
        if (h < 0.0) h += kTwoPi;
        return h;
    };
    const double h1p = hue_of(x.b, a1p);
    const double h2p = hue_of(y.b, a2p);

    // Eq. 8-11: differences.
    const double dLp = y.L - x.L;
    const double dCp = c2p - c1p;
    double dhp = 0.0;
    if (c1p * c2p != 0.0) {
        dhp = h2p - h1p;
        if (dhp > kPi) dhp -= kTwoPi;
        else if (dhp < -kPi) dhp += kTwoPi;
    }
    const double dHp = 2.0 * std::sqrt(c1p * c2p) * std::sin(dhp / 2.0);

    // Eq. 12-14: means.
    const double L_bar = 0.5 * (x.L + y.L);
    const double Cp_bar = 0.5 * (c1p + c2p);
    double hp_bar = h1p + h2p;
    if (c1p * c2p != 0.0) {
        if (std::fabs(h1p - h2p) <= kPi) {
            hp_bar = 0.5 * (h1p + h2p);
        } else if (h1p + h2p < kTwoPi) {
            hp_bar = 0.5 * (h1p + h2p + kTwoPi);
        } else {
            hp_bar = 0.5 * (h1p + h2p - kTwoPi);
        }
    }

    // Eq. 15-22: weighting functions.
    const double t = 1.0 - 0.17 * std::cos(hp_bar - 30.0 * deg2rad) +
                     0.24 * std::cos(2.0 * hp_bar) +
                     0.32 * std::cos(3.0 * hp_bar + 6.0 * deg2rad) -
                     0.20 * std::cos(4.0 * hp_bar - 63.0 * deg2rad);
    const double dtheta =
        30.0 * deg2rad *
        std::exp(-std::pow((hp_bar - 275.0 * deg2rad) / (25.0 * deg2rad), 2.0));
    const double Cp_bar7 = std::pow(Cp_bar, 7.0);
    const double rc = 2.0 * std::sqrt(Cp_bar7 / (Cp_bar7 + std::pow(25.0, 7.0)));
    const double L50 = (L_bar - 50.0) * (L_bar - 50.0);
    const double sl = 1.0 + 0.015 * L50 / std::sqrt(20.0 + L50);
    const double sc = 1.0 + 0.045 * Cp_bar;
    const double sh = 1.0 + 0.015 * Cp_bar * t;
    const double rt = -std::sin(2.0 * dtheta) * rc;

    const double termL = dLp / sl;
    const double termC = dCp / sc;
    const double termH = dHp / sh;
    return std::sqrt(termL * termL + termC * termC + termH * termH +
                     rt * termC * termH);
}

double delta_e_2000(const RgbColor& x, const RgbColor& y) {
    return delta_e_2000(rgb_to_lab(x), rgb_to_lab(y));
}

Cosine cosine_similarity(const Vec3& u, const Vec3& v) {
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) {
        return {0.0, true};
    }
    // Normalize the arguments first so very small or very large scales do
    // not overflow the denominator product.
    const Vec3 a{u.x / nu, u.y / nu, u.z / nu};
    const Vec3 b{v.x / nv, v.y / nv, v.z / nv};
    return {std::clamp(dot(a, b), -1.0, 1.0), false};
}

} // namespace colormod
