#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "dcs/convolve.hpp"
#include "dcs/image.hpp"
#include "dcs/kernels.hpp"
#include "dcs/parallel.hpp"

namespace dcs {

/// Tuning parameters of the derivative-color estimator.
struct DcsParams {
    double tau = 5.0;   // percent of bright pixels initially selected
    double eta = 2.0;   // percent retained after erosion
    std::vector<double> sigmas{1.0, 2.0};
    double bandwidth = 0.03;
    double saturation_level = std::numeric_limits<double>::infinity();

    void validate() const {
        if (!(eta > 0) || !(eta <= tau) || !(tau <= 100))
            throw std::invalid_argument("params: require 0 < eta <= tau <= 100");
        if (!(bandwidth > 0))
            throw std::invalid_argument("params: bandwidth must be positive");
        if (sigmas.empty())
            throw std::invalid_argument("params: at least one scale is required");
        for (double s : sigmas)
            if (!(s > 0)) throw std::invalid_argument("params: scales must be positive");
        if (!(saturation_level > 0))
            throw std::invalid_argument("params: saturation level must be positive");
    }
};

/// Usable-pixel mask: true where every channel is strictly below `level`.
/// A channel exactly at the level counts as clipped.
inline BinaryMask clip_saturated(const LinearImage& image, double level) {
    if (!(level > 0))
        throw std::invalid_argument("clip_saturated: level must be positive");
    BinaryMask mask(image.width(), image.height());
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            mask.set(x, y, image.at(0, x, y) < level && image.at(1, x, y) < level &&
                               image.at(2, x, y) < level);
    return mask;
}

struct BrightSelection {
    BinaryMask mask;
    bool degraded = false;  // erosion emptied the mask before reaching eta%
    int erosion_steps = 0;
};

namespace detail {

/// One erosion step with the 3x3 all-true structuring element; pixels outside
/// the image count as false, so the mask always shrinks at its boundary.
inline BinaryMask erode3x3(const BinaryMask& m) {
    BinaryMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.at(x, y)) continue;
            bool keep = true;
            for (int dy = -1; dy <= 1 && keep; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height() ||
                        !m.at(nx, ny)) {
                        keep = false;
                        break;
                    }
                }
            }
            if (keep) out.set(x, y, true);
        }
    }
    return out;
}

}  // namespace detail

/// Bright-region selection: ranks usable pixels by channel-sum intensity,
/// keeps the top tau percent, then erodes whole steps until no more than
/// eta percent of all pixels survive. Ties at the intensity threshold are
/// admitted in row-major order, which makes the selection deterministic on
/// flat inputs.
inline BrightSelection select_bright_regions(const LinearImage& image, const DcsParams& params,
                                             const BinaryMask& usable) {
    params.validate();
    if (!usable.data().empty() &&
        (usable.width() != image.width() || usable.height() != image.height()))
        throw std::invalid_argument("usable mask dimensions do not match the image");

    const std::size_t total = image.pixel_count();
    const std::size_t eta_cap =
        static_cast<std::size_t>(std::ceil(params.eta / 100.0 * static_cast<double>(total)));

    std::vector<double> intensities;
    intensities.reserve(total);
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            if (usable.at(x, y))
                intensities.push_back(image.at(0, x, y) + image.at(1, x, y) + image.at(2, x, y));

    const std::size_t usable_count = intensities.size();
    if (usable_count < eta_cap)
        throw UnrecoverableInputError("too few usable pixels for bright-region selection");

    std::size_t take = static_cast<std::size_t>(
        std::ceil(params.tau / 100.0 * static_cast<double>(usable_count)));
    take = std::max<std::size_t>(1, std::min(take, usable_count));

    std::nth_element(intensities.begin(), intensities.begin() + (take - 1), intensities.end(),
                     std::greater<double>());
    const double threshold = intensities[take - 1];

    std::size_t strictly_above = 0;
    for (double v : intensities)
        if (v > threshold) ++strictly_above;

    BrightSelection sel;
    sel.mask = BinaryMask(image.width(), image.height());
    std::size_t admitted_equal = 0;
    const std::size_t equal_budget = take - strictly_above;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!usable.at(x, y)) continue;
            const double v = image.at(0, x, y) + image.at(1, x, y) + image.at(2, x, y);
            if (v > threshold) {
                sel.mask.set(x, y, true);
            } else if (v == threshold && admitted_equal < equal_budget) {
                sel.mask.set(x, y, true);
                ++admitted_equal;
            }
        }
    }

    std::size_t current = sel.mask.count();
    while (current > eta_cap) {
        BinaryMask next = detail::erode3x3(sel.mask);
        const std::size_t next_count = next.count();
        if (next_count == 0) {
            sel.degraded = true;  // keep the last non-empty mask
            break;
        }
        sel.mask = std::move(next);
        current = next_count;
        ++sel.erosion_steps;
    }
    return sel;
}

// ---------------------------------------------------------------------------
// Derivative colors
// ---------------------------------------------------------------------------

enum class DerivOp : std::uint8_t { XX, YY, XY };

inline const char* to_string(DerivOp op) {
    switch (op) {
        case DerivOp::XX: return "xx";
        case DerivOp::YY: return "yy";
        default: return "xy";
    }
}

/// A filter response whose three channel chromaticities all lie in (0, 1),
/// with provenance: source pixel, operator and scale.
struct DerivativeColor {
    Rgb j;
    double cr, cg, cb;
    int x, y;
    DerivOp op;
    double sigma;
};

using DerivativeColorSet = std::vector<DerivativeColor>;

/// Extracts derivative colors over every (operator, scale) pair of the
/// parameter set. Each structure is computed on the full image and masked
/// afterwards; a location survives when it lies in the region, the kernel
/// footprint is valid there, and all three chromaticities fall inside (0, 1).
/// Responses with |sum J| below 1e-12 times the mean bright intensity are
/// dropped before the chromaticity division.
inline DerivativeColorSet extract_derivative_colors(const LinearImage& image,
                                                    const BinaryMask& region,
                                                    const DcsParams& params,
                                                    const BinaryMask* exclusion = nullptr) {
    params.validate();
    if (region.count() == 0)
        throw std::invalid_argument("extract_derivative_colors: empty region");

    double bright_sum = 0;
    std::size_t bright_n = 0;
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            if (!region.at(x, y)) continue;
            bright_sum += image.at(0, x, y) + image.at(1, x, y) + image.at(2, x, y);
            ++bright_n;
        }
    }
    const double tiny = 1e-12 * (bright_sum / static_cast<double>(bright_n));

    DerivativeColorSet out;
    for (double sigma : params.sigmas) {
        const SecondDerivativeKernels ks = gaussian_second_kernels(sigma);
        const std::pair<DerivOp, const Kernel*> ops[3] = {
            {DerivOp::XX, &ks.xx}, {DerivOp::YY, &ks.yy}, {DerivOp::XY, &ks.xy}};
        for (const auto& [op, kernel] : ops) {
            const DerivativeStructure j = convolve(image, *kernel, exclusion);
            for (int y = 0; y < image.height(); ++y) {
                for (int x = 0; x < image.width(); ++x) {
                    if (!region.at(x, y) || !j.valid_at(x, y)) continue;
                    const Rgb v = j.at(x, y);
                    const double sum = v.sum();
                    if (std::abs(sum) <= tiny) continue;
                    const double cr = v.r / sum, cg = v.g / sum, cb = v.b / sum;
                    if (cr > 0 && cr < 1 && cg > 0 && cg < 1 && cb > 0 && cb < 1)
                        out.push_back({v, cr, cg, cb, x, y, op, sigma});
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Kernel density estimation in the rg chromaticity plane
// ---------------------------------------------------------------------------

struct ChromaticityPoint {
    double cr = 0, cg = 0;
};

namespace detail {

inline bool lex_less(const ChromaticityPoint& a, const ChromaticityPoint& b) {
    return a.cr < b.cr || (a.cr == b.cr && a.cg < b.cg);
}

/// Reference density at points[i]: fixed-order full sum, the semantics every
/// other evaluation path must reproduce.
inline double kde_density_at(std::span<const ChromaticityPoint> points, std::size_t i,
                             double inv_2h2) {
    double acc = 0.0;
    const ChromaticityPoint zi = points[i];
    for (const ChromaticityPoint& zj : points) {
        const double dr = zi.cr - zj.cr;
        const double dg = zi.cg - zj.cg;
        acc += std::exp(-(dr * dr + dg * dg) * inv_2h2);
    }
    return acc;
}

/// Exhaustive O(n^2) argmax with the deterministic tie rule: larger density
/// wins, exact density ties resolve to the lexicographically smaller point.
inline std::size_t kde_argmax_reference(std::span<const ChromaticityPoint> points,
                                        double inv_2h2) {
    const std::size_t n = points.size();
    std::vector<double> density(n, 0.0);
    parallel_for(0, static_cast<int>(n), [&](int i) {
        density[static_cast<std::size_t>(i)] =
            kde_density_at(points, static_cast<std::size_t>(i), inv_2h2);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (density[i] > density[best] ||
            (density[i] == density[best] && lex_less(points[i], points[best])))
            best = i;
    }
    return best;
}

/// Bound-and-prune argmax for large point sets. Points are bucketed into
/// grid cells; per-cell aggregates give every point a cheap upper bound on
/// its density. Points are then examined in descending bound order, each
/// candidate re-evaluated with the reference full sum, until the remaining
/// bounds (plus a safety margin for rounding) cannot beat the best exact
/// density found. The winner is therefore identical to the reference path.
inline std::size_t kde_argmax_pruned(std::span<const ChromaticityPoint> points,
                                     double h, double inv_2h2) {
    const std::size_t n = points.size();
    const double cell = h;

    double min_r = points[0].cr, min_g = points[0].cg;
    for (const auto& p : points) {
        min_r = std::min(min_r, p.cr);
        min_g = std::min(min_g, p.cg);
    }
    auto cell_of = [&](const ChromaticityPoint& p) {
        return std::pair<int, int>{static_cast<int>((p.cr - min_r) / cell),
                                   static_cast<int>((p.cg - min_g) / cell)};
    };

    // Cell aggregates as a sorted vector keyed by packed (cx, cy).
    std::vector<std::pair<std::int64_t, double>> cells;
    cells.reserve(n / 4);
    {
        std::vector<std::int64_t> keys(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto [cx, cy] = cell_of(points[i]);
            keys[i] = (static_cast<std::int64_t>(cx) << 32) | static_cast<std::uint32_t>(cy);
        }
        std::vector<std::int64_t> sorted = keys;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j < n && sorted[j] == sorted[i]) ++j;
            cells.push_back({sorted[i], static_cast<double>(j - i)});
            i = j;
        }
    }

    // Upper bound per point: for each cell, the closest possible distance
    // from the point to that cell, slightly deflated to stay conservative
    // under rounding.
    std::vector<double> ub(n, 0.0);
    parallel_for(0, static_cast<int>(n), [&](int ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const ChromaticityPoint p = points[i];
        double acc = 0.0;
        for (const auto& [key, cnt] : cells) {
            const int cx = static_cast<int>(key >> 32);
            const int cy = static_cast<int>(static_cast<std::uint32_t>(key & 0xffffffff));
            const double x0 = min_r + cx * cell, x1 = x0 + cell;
            const double y0 = min_g + cy * cell, y1 = y0 + cell;
            const double dx = p.cr < x0 ? x0 - p.cr : (p.cr > x1 ? p.cr - x1 : 0.0);
            const double dy = p.cg < y0 ? y0 - p.cg : (p.cg > y1 ? p.cg - y1 : 0.0);
            const double d2 = (dx * dx + dy * dy) * 0.999999;  // conservative slack
            acc += cnt * std::exp(-d2 * inv_2h2);
        }
        ub[i] = acc * (1.0 + 1e-9) + 1e-9;
    });

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ub[a] != ub[b]) return ub[a] > ub[b];
        return a < b;
    });

    const double margin = static_cast<double>(n) * 1e-12;
    bool have_best = false;
    double best_density = 0.0;
    std::size_t best = 0;

    std::size_t k = 0;
    const std::size_t batch = 256;
    std::vector<double> exact(batch);
    while (k < order.size()) {
        if (have_best && ub[order[k]] < best_density - margin) break;
        const std::size_t hi = std::min(order.size(), k + batch);
        parallel_for(static_cast<int>(k), static_cast<int>(hi), [&](int t) {
            exact[static_cast<std::size_t>(t) - k] =
                kde_density_at(points, order[static_cast<std::size_t>(t)], inv_2h2);
        });
        for (std::size_t t = k; t < hi; ++t) {
            if (have_best && ub[order[t]] < best_density - margin) continue;
            const double d = exact[t - k];
            const std::size_t i = order[t];
            // Mirrors the ascending reference scan: higher density wins, then
            // the lexicographically smaller point, then the smaller index.
            const bool better =
                !have_best || d > best_density ||
                (d == best_density &&
                 (lex_less(points[i], points[best]) ||
                  (!lex_less(points[best], points[i]) && i < best)));
            if (better) {
                best = i;
                best_density = d;
                have_best = true;
            }
        }
        k = hi;
    }
    return best;
}

}  // namespace detail

/// Sample point of maximal Parzen density
///   p(z_i) = (1/n) sum_j exp(-||z_i - z_j||^2 / (2 h^2)),
/// evaluated at every sample. Exact density ties resolve to the
/// lexicographically smallest (c_r, c_g). Large inputs take a pruned path
/// that provably returns the same sample as the exhaustive evaluation.
inline ChromaticityPoint kde_argmax(std::span<const ChromaticityPoint> points, double h) {
    if (points.empty())
        throw std::invalid_argument("kde_argmax: empty point set");
    if (!(h > 0))
        throw std::invalid_argument("kde_argmax: bandwidth must be positive");
    const double inv_2h2 = 1.0 / (2.0 * h * h);
    constexpr std::size_t kPruneThreshold = 4096;
    const std::size_t best = points.size() <= kPruneThreshold
                                 ? detail::kde_argmax_reference(points, inv_2h2)
                                 : detail::kde_argmax_pruned(points, h, inv_2h2);
    return points[best];
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

enum EstimateFlags : unsigned {
    kFlagDegradedSelection = 1u << 0,  // erosion hit an empty mask
    kFlagGrayWorldFallback = 1u << 1,  // no derivative colors; bright-region mean used
};

struct EstimateResult {
    Illuminant illuminant;
    unsigned flags = 0;
    std::size_t sample_count = 0;  // derivative colors feeding the KDE
};

/// Runs the full estimator: saturation clipping, bright-region selection with
/// erosion, derivative-color extraction at every configured operator/scale,
/// rg projection, density argmax and illuminant reconstruction. Exclusion
/// pixels are removed from both the selection and convolution validity.
inline EstimateResult estimate(const LinearImage& image, const DcsParams& params,
                               const BinaryMask* exclusion = nullptr) {
    params.validate();

    BinaryMask usable = clip_saturated(image, params.saturation_level);
    if (exclusion) {
        if (exclusion->width() != image.width() || exclusion->height() != image.height())
            throw std::invalid_argument("exclusion mask dimensions do not match the image");
        for (int y = 0; y < image.height(); ++y)
            for (int x = 0; x < image.width(); ++x)
                if (exclusion->at(x, y)) usable.set(x, y, false);
    }

    EstimateResult result;
    BrightSelection sel = select_bright_regions(image, params, usable);
    if (sel.degraded) result.flags |= kFlagDegradedSelection;

    const DerivativeColorSet colors =
        extract_derivative_colors(image, sel.mask, params, exclusion);
    result.sample_count = colors.size();

    if (colors.empty()) {
        // Fall back to the gray-world mean over the bright region, flagged.
        double r = 0, g = 0, b = 0;
        for (int y = 0; y < image.height(); ++y) {
            for (int x = 0; x < image.width(); ++x) {
                if (!sel.mask.at(x, y)) continue;
                r += image.at(0, x, y);
                g += image.at(1, x, y);
                b += image.at(2, x, y);
            }
        }
        if (!(r + g + b > 0))
            throw UnrecoverableInputError("no derivative colors and a zero bright region");
        result.flags |= kFlagGrayWorldFallback;
        result.illuminant = normalize_illuminant(r, g, b);
        return result;
    }

    std::vector<ChromaticityPoint> zs;
    zs.reserve(colors.size());
    for (const DerivativeColor& c : colors) zs.push_back({c.cr, c.cg});

    const ChromaticityPoint z = kde_argmax(zs, params.bandwidth);
    result.illuminant = {z.cr, z.cg, 1.0 - z.cr - z.cg};
    return result;
}

}  // namespace dcs
