#pragma once

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcs {

/// A square zero-sum differential stencil with its anchor at the center.
/// Side length is always odd (2 * radius + 1).
struct Kernel {
    int radius = 0;
    std::vector<double> taps;  // row-major, (2r+1)^2 entries

    int side() const { return 2 * radius + 1; }

    /// Tap at offset (dx, dy), each in [-radius, radius].
    double at(int dx, int dy) const {
        return taps[static_cast<std::size_t>(dy + radius) * side() + (dx + radius)];
    }

    double& at(int dx, int dy) {
        return taps[static_cast<std::size_t>(dy + radius) * side() + (dx + radius)];
    }

    double tap_sum() const {
        double s = 0;
        for (double t : taps) s += t;
        return s;
    }
};

/// The 3x3 Laplacian stencil: center 4, edge neighbors -1, corners 0.
inline Kernel laplacian_f1() {
    Kernel k;
    k.radius = 1;
    k.taps = {0, -1, 0,
              -1, 4, -1,
              0, -1, 0};
    return k;
}

/// The 7x7 cross stencil: center 40, arm taps -15, 6, -1 at axial
/// distances 1, 2, 3. Equivalent to a sixth finite difference applied
/// along each axis, which is why it suppresses smooth shading so hard.
inline Kernel cross_f2() {
    Kernel k;
    k.radius = 3;
    k.taps.assign(49, 0.0);
    const double arm[3] = {-15, 6, -1};
    k.at(0, 0) = 40;
    for (int d = 1; d <= 3; ++d) {
        k.at(d, 0) = arm[d - 1];
        k.at(-d, 0) = arm[d - 1];
        k.at(0, d) = arm[d - 1];
        k.at(0, -d) = arm[d - 1];
    }
    return k;
}

struct SecondDerivativeKernels {
    Kernel xx, yy, xy;
};

/// Discretizes the second-order derivative operators
///   f_xx = (1 - x^2/s^2) exp(-x^2 / 2s^2)
///   f_yy = (1 - y^2/s^2) exp(-y^2 / 2s^2)
///   f_xy = x y exp(-(x^2 + y^2) / 2s^2)
/// on a square grid of half-width ceil(3*sigma). Multiplicative constants are
/// dropped (they cancel in chromaticities). After sampling, taps are
/// re-centered by subtracting the mean tap so each kernel sums to exactly
/// zero; raw truncation leaves a small residue that would leak constant image
/// content into the response.
///
/// Convolution here is cross-correlation; f_xy's sign convention follows the
/// sampled expression directly. The same kernel is applied to every channel,
/// so a global sign flip never changes a derivative-color chromaticity.
inline SecondDerivativeKernels gaussian_second_kernels(double sigma) {
    if (!(sigma > 0))
        throw std::invalid_argument("gaussian_second_kernels: sigma must be positive");
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    const double s2 = sigma * sigma;

    SecondDerivativeKernels out;
    for (Kernel* k : {&out.xx, &out.yy, &out.xy}) {
        k->radius = r;
        k->taps.assign(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1), 0.0);
    }
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const double x = dx, y = dy;
            out.xx.at(dx, dy) = (1.0 - x * x / s2) * std::exp(-x * x / (2.0 * s2));
            out.yy.at(dx, dy) = (1.0 - y * y / s2) * std::exp(-y * y / (2.0 * s2));
            out.xy.at(dx, dy) = x * y * std::exp(-(x * x + y * y) / (2.0 * s2));
        }
    }
    for (Kernel* k : {&out.xx, &out.yy, &out.xy}) {
        const double mean = k->tap_sum() / static_cast<double>(k->taps.size());
        for (double& t : k->taps) t -= mean;
    }
    return out;
}

/// Plain-text matrix rendering, for debugging.
inline std::string to_string(const Kernel& k) {
    std::string out;
    char buf[48];
    for (int dy = -k.radius; dy <= k.radius; ++dy) {
        for (int dx = -k.radius; dx <= k.radius; ++dx) {
            std::snprintf(buf, sizeof(buf), "%10.5f", k.at(dx, dy));
            out += buf;
            if (dx < k.radius) out += ' ';
        }
        out += '\n';
    }
    return out;
}

}  // namespace dcs
