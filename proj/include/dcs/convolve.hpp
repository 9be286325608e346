#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dcs/image.hpp"
#include "dcs/kernels.hpp"
#include "dcs/parallel.hpp"

namespace dcs {

/// Response of one kernel over one scalar plane. Values at invalid pixels are
/// zero; valid is false wherever the kernel footprint overhangs the image
/// border or touches an excluded input pixel.
struct FilteredField {
    int width = 0;
    int height = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    bool valid_at(int x, int y) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
};

/// Per-channel filter response J = I (*) f with a shared validity mask.
struct DerivativeStructure {
    int width = 0;
    int height = 0;
    std::array<std::vector<double>, 3> values;
    std::vector<std::uint8_t> valid;

    Rgb at(int x, int y) const {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        return {values[0][i], values[1][i], values[2][i]};
    }
    bool valid_at(int x, int y) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
};

namespace detail {

struct Tap {
    int dx, dy;
    double w;
};

inline std::vector<Tap> nonzero_taps(const Kernel& k) {
    std::vector<Tap> taps;
    taps.reserve(k.taps.size());
    for (int dy = -k.radius; dy <= k.radius; ++dy)
        for (int dx = -k.radius; dx <= k.radius; ++dx)
            if (k.at(dx, dy) != 0.0) taps.push_back({dx, dy, k.at(dx, dy)});
    return taps;
}

/// valid[x,y] = footprint of half-width r centered at (x,y) stays inside the
/// image and contains no excluded pixel. Uses a summed-area table of the
/// exclusion mask so each query is O(1).
inline std::vector<std::uint8_t> footprint_validity(int w, int h, int r,
                                                    const BinaryMask* exclusion) {
    std::vector<std::uint8_t> valid(static_cast<std::size_t>(w) * h, 0);
    if (2 * r + 1 > w || 2 * r + 1 > h) return valid;  // kernel does not fit anywhere

    if (exclusion && exclusion->data().empty()) exclusion = nullptr;
    std::vector<std::uint32_t> sat;
    if (exclusion) {
        if (exclusion->width() != w || exclusion->height() != h)
            throw std::invalid_argument("exclusion mask dimensions do not match the image");
        sat.assign(static_cast<std::size_t>(w + 1) * (h + 1), 0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                sat[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] =
                    sat[static_cast<std::size_t>(y) * (w + 1) + (x + 1)] +
                    sat[static_cast<std::size_t>(y + 1) * (w + 1) + x] -
                    sat[static_cast<std::size_t>(y) * (w + 1) + x] +
                    (exclusion->at(x, y) ? 1u : 0u);
    }
    auto excluded_in_box = [&](int x0, int y0, int x1, int y1) {  // inclusive box
        const std::uint32_t s = sat[static_cast<std::size_t>(y1 + 1) * (w + 1) + (x1 + 1)] -
                                sat[static_cast<std::size_t>(y0) * (w + 1) + (x1 + 1)] -
                                sat[static_cast<std::size_t>(y1 + 1) * (w + 1) + x0] +
                                sat[static_cast<std::size_t>(y0) * (w + 1) + x0];
        return s != 0;
    };

    for (int y = r; y < h - r; ++y) {
        for (int x = r; x < w - r; ++x) {
            if (exclusion && excluded_in_box(x - r, y - r, x + r, y + r)) continue;
            valid[static_cast<std::size_t>(y) * w + x] = 1;
        }
    }
    return valid;
}

inline void convolve_plane(const double* src, int w, int h, const std::vector<Tap>& taps,
                           const std::vector<std::uint8_t>& valid, double* dst) {
    parallel_for(0, h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (!valid[i]) {
                dst[i] = 0.0;
                continue;
            }
            double acc = 0.0;
            for (const Tap& t : taps)
                acc += t.w * src[static_cast<std::size_t>(y + t.dy) * w + (x + t.dx)];
            dst[i] = acc;
        }
    });
}

}  // namespace detail

/// Filters one scalar plane. Border pixels (and any pixel whose footprint
/// touches an excluded pixel) come back invalid rather than padded; padding
/// would fabricate derivative values at the edges.
inline FilteredField convolve_field(const std::vector<double>& plane, int w, int h,
                                    const Kernel& kernel,
                                    const BinaryMask* exclusion = nullptr) {
    if (kernel.side() > w || kernel.side() > h)
        throw std::invalid_argument("kernel larger than image");
    FilteredField out;
    out.width = w;
    out.height = h;
    out.valid = detail::footprint_validity(w, h, kernel.radius, exclusion);
    out.values.assign(plane.size(), 0.0);
    const auto taps = detail::nonzero_taps(kernel);
    detail::convolve_plane(plane.data(), w, h, taps, out.valid, out.values.data());
    return out;
}

/// Filters all three channels of an image with a shared validity mask.
inline DerivativeStructure convolve(const LinearImage& image, const Kernel& kernel,
                                    const BinaryMask* exclusion = nullptr) {
    const int w = image.width(), h = image.height();
    if (kernel.side() > w || kernel.side() > h)
        throw std::invalid_argument("kernel larger than image");
    DerivativeStructure out;
    out.width = w;
    out.height = h;
    out.valid = detail::footprint_validity(w, h, kernel.radius, exclusion);
    const auto taps = detail::nonzero_taps(kernel);
    for (int c = 0; c < 3; ++c) {
        out.values[c].assign(image.pixel_count(), 0.0);
        detail::convolve_plane(image.plane(c), w, h, taps, out.valid, out.values[c].data());
    }
    return out;
}

}  // namespace dcs
