#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcs/convolve.hpp"
#include "dcs/image.hpp"

namespace dcs {

/// Minkowski-framework estimator parameters. derivative_order 0 with a
/// positive sigma means pre-smoothing only; an infinite norm means the
/// per-channel maximum.
struct MinkowskiParams {
    int derivative_order = 0;       // n in {0, 1, 2}
    double minkowski_norm = 1.0;    // p >= 1, or infinity
    double smoothing_sigma = 0.0;   // sigma >= 0

    void validate() const {
        if (derivative_order < 0 || derivative_order > 2)
            throw std::invalid_argument("minkowski: derivative order must be 0, 1 or 2");
        if (!(minkowski_norm >= 1.0))
            throw std::invalid_argument("minkowski: norm must be >= 1");
        if (smoothing_sigma < 0)
            throw std::invalid_argument("minkowski: sigma must be non-negative");
    }
};

/// Named presets of the gray family. SoG/GG/GE1/GE2 leave p (and sigma) to
/// the caller; gw and wp are fully determined.
inline MinkowskiParams minkowski_preset(const std::string& name, double p = -1,
                                        double sigma = -1) {
    const double inf = std::numeric_limits<double>::infinity();
    MinkowskiParams out;
    auto need = [&](const char* what) -> double {
        throw std::invalid_argument("baseline preset '" + name + "' requires an explicit " + what);
    };
    if (name == "gw") {
        out = {0, 1.0, 0.0};
    } else if (name == "wp") {
        out = {0, inf, 0.0};
    } else if (name == "sog") {
        out = {0, p > 0 ? p : need("p"), 0.0};
    } else if (name == "gg") {
        out = {0, p > 0 ? p : need("p"), sigma >= 0 ? sigma : need("sigma")};
    } else if (name == "ge1") {
        out = {1, p > 0 ? p : need("p"), sigma >= 0 ? sigma : need("sigma")};
    } else if (name == "ge2") {
        out = {2, p > 0 ? p : need("p"), sigma >= 0 ? sigma : need("sigma")};
    } else {
        throw std::invalid_argument("unknown baseline preset: " + name);
    }
    return out;
}

namespace detail {

inline Kernel gaussian_kernel_2d(double sigma, int ddx, int ddy) {
    // Derivative-of-Gaussian kernels up to second order, with the true
    // normalization so mixed orders combine on a common scale.
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    Kernel k;
    k.radius = r;
    k.taps.assign(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1), 0.0);
    const double s2 = sigma * sigma;
    const double norm = 1.0 / (2.0 * kPi * s2);
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const double x = dx, y = dy;
            const double g = norm * std::exp(-(x * x + y * y) / (2.0 * s2));
            double f = 1.0;
            if (ddx == 1) f *= -x / s2;
            if (ddx == 2) f *= (x * x / s2 - 1.0) / s2;
            if (ddy == 1) f *= -y / s2;
            if (ddy == 2) f *= (y * y / s2 - 1.0) / s2;
            k.at(dx, dy) = f * g;
        }
    }
    const double sum = k.tap_sum();
    if (ddx + ddy == 0) {
        for (double& t : k.taps) t /= sum;  // smoothing kernel passes constants through
    } else {
        // truncation leaves the symmetric derivative kernels slightly off
        // zero sum, which would leak constant content into the response
        const double mean = sum / static_cast<double>(k.taps.size());
        for (double& t : k.taps) t -= mean;
    }
    return k;
}

inline Kernel finite_difference_kernel(int ddx, int ddy) {
    Kernel k;
    k.radius = 1;
    k.taps.assign(9, 0.0);
    if (ddx == 1 && ddy == 0) {
        k.at(-1, 0) = -0.5;
        k.at(1, 0) = 0.5;
    } else if (ddx == 0 && ddy == 1) {
        k.at(0, -1) = -0.5;
        k.at(0, 1) = 0.5;
    } else if (ddx == 2 && ddy == 0) {
        k.at(-1, 0) = 1;
        k.at(0, 0) = -2;
        k.at(1, 0) = 1;
    } else if (ddx == 0 && ddy == 2) {
        k.at(0, -1) = 1;
        k.at(0, 0) = -2;
        k.at(0, 1) = 1;
    } else {  // mixed
        k.at(-1, -1) = 0.25;
        k.at(1, 1) = 0.25;
        k.at(-1, 1) = -0.25;
        k.at(1, -1) = -0.25;
    }
    return k;
}

inline Kernel derivative_kernel(double sigma, int ddx, int ddy) {
    return sigma > 0 ? gaussian_kernel_2d(sigma, ddx, ddy) : finite_difference_kernel(ddx, ddy);
}

struct MagnitudeField {
    std::vector<double> values;
    std::vector<std::uint8_t> valid;
    double noise_floor = 0;  // responses at or below this are convolution noise
};

inline double l1_norm(const Kernel& k) {
    double s = 0;
    for (double t : k.taps) s += std::abs(t);
    return s;
}

/// |d^n I_sigma,k| per pixel for one channel, with convolution validity.
inline MagnitudeField channel_magnitude(const LinearImage& image, int c,
                                        const MinkowskiParams& p, const BinaryMask* exclusion) {
    const int w = image.width(), h = image.height();
    std::vector<double> plane(image.plane(c), image.plane(c) + image.pixel_count());
    double input_peak = 0;
    for (double v : plane) input_peak = std::max(input_peak, v);

    MagnitudeField out;
    if (p.derivative_order == 0) {
        if (p.smoothing_sigma > 0) {
            FilteredField f = convolve_field(plane, w, h,
                                             gaussian_kernel_2d(p.smoothing_sigma, 0, 0),
                                             exclusion);
            out.values = std::move(f.values);
            out.valid = std::move(f.valid);
        } else {
            out.values = std::move(plane);
            out.valid.assign(out.values.size(), 1);
            if (exclusion)
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        if (exclusion->at(x, y))
                            out.valid[static_cast<std::size_t>(y) * w + x] = 0;
        }
        for (double& v : out.values) v = std::abs(v);
        return out;
    }

    // Zero-sum derivative kernels cancel a constant input only up to rounding;
    // responses below eps * (kernel L1 mass) * peak are plain noise.
    const double s = p.smoothing_sigma;
    if (p.derivative_order == 1) {
        const Kernel kx = derivative_kernel(s, 1, 0), ky = derivative_kernel(s, 0, 1);
        FilteredField fx = convolve_field(plane, w, h, kx, exclusion);
        FilteredField fy = convolve_field(plane, w, h, ky, exclusion);
        out.valid = fx.valid;
        out.values.resize(fx.values.size());
        for (std::size_t i = 0; i < out.values.size(); ++i)
            out.values[i] = std::hypot(fx.values[i], fy.values[i]);
        out.noise_floor = 1e-12 * input_peak * std::max(l1_norm(kx), l1_norm(ky));
        return out;
    }

    const Kernel kxx = derivative_kernel(s, 2, 0), kyy = derivative_kernel(s, 0, 2),
                 kxy = derivative_kernel(s, 1, 1);
    FilteredField fxx = convolve_field(plane, w, h, kxx, exclusion);
    FilteredField fyy = convolve_field(plane, w, h, kyy, exclusion);
    FilteredField fxy = convolve_field(plane, w, h, kxy, exclusion);
    out.valid = fxx.valid;
    out.values.resize(fxx.values.size());
    for (std::size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = std::sqrt(fxx.values[i] * fxx.values[i] +
                                  2.0 * fxy.values[i] * fxy.values[i] +
                                  fyy.values[i] * fyy.values[i]);
    out.noise_floor =
        1e-12 * input_peak * std::max({l1_norm(kxx), l1_norm(kyy), l1_norm(kxy)});
    return out;
}

}  // namespace detail

/// Per-channel Minkowski statistic ( sum |d^n I_sigma,k|^p )^(1/p) over the
/// non-excluded valid pixels, normalized to unit sum. Covers gray-world,
/// white-patch, shades-of-gray, general gray-world and both gray-edge orders
/// through the presets.
inline Illuminant minkowski_estimate(const LinearImage& image, const MinkowskiParams& params,
                                     const BinaryMask* exclusion = nullptr) {
    params.validate();
    if (exclusion && !exclusion->data().empty() &&
        (exclusion->width() != image.width() || exclusion->height() != image.height()))
        throw std::invalid_argument("exclusion mask dimensions do not match the image");

    std::array<double, 3> stat{0, 0, 0};
    for (int c = 0; c < 3; ++c) {
        detail::MagnitudeField f = detail::channel_magnitude(image, c, params, exclusion);
        double peak = 0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            if (!f.valid[i]) continue;
            peak = std::max(peak, f.values[i]);
            ++count;
        }
        if (count == 0)
            throw DegenerateInputError("minkowski_estimate: no valid pixels");
        if (peak <= f.noise_floor) {
            stat[c] = 0;
            continue;
        }
        if (std::isinf(params.minkowski_norm)) {
            stat[c] = peak;
            continue;
        }
        // Scale by the peak so large p cannot overflow; the factor cancels.
        double acc = 0;
        for (std::size_t i = 0; i < f.values.size(); ++i)
            if (f.valid[i]) acc += std::pow(f.values[i] / peak, params.minkowski_norm);
        stat[c] = peak * std::pow(acc / static_cast<double>(count), 1.0 / params.minkowski_norm);
    }

    if (!(stat[0] + stat[1] + stat[2] > 0))
        throw DegenerateInputError("minkowski_estimate: zero statistic (no edges or all-dark input)");
    return normalize_illuminant(stat[0], stat[1], stat[2]);
}

}  // namespace dcs
