#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dcs/convolve.hpp"
#include "dcs/image.hpp"
#include "dcs/kernels.hpp"
#include "dcs/stats.hpp"

namespace dcs {

struct SphereGeometry {
    double center_x = 0;
    double center_y = 0;
    double radius = 0;
};

/// Configuration of a synthetic dichromatic scene: a shaded sphere on a black
/// background, lit by a single distant light, viewed orthographically.
/// Optional patch colors split the sphere into equal angular sectors around
/// its center, each with its own intrinsic color.
struct SceneConfig {
    int width = 0;
    int height = 0;
    Rgb object_color;        // D, unit-sum
    Illuminant illuminant;   // S, unit-sum
    double diffuse_albedo = 1.0;     // k_d
    double light_intensity = 1.0;    // L
    double surface_roughness = 0.2;  // phi
    double fresnel = 1.0;            // F
    double geometric_attenuation = 1.0;  // G
    SphereGeometry sphere;
    Vec3 light_direction{0, 0, 1};  // unit, surface -> light
    Vec3 view_direction{0, 0, 1};   // unit, surface -> camera
    std::vector<Rgb> patch_colors;  // empty = uniform object_color
};

struct DichromaticRender {
    int width = 0;
    int height = 0;
    LinearImage composite;
    LinearImage diffuse_component;
    LinearImage specular_component;
    std::vector<double> m_d;  // per-pixel diffuse magnitude
    std::vector<double> m_s;  // per-pixel specular magnitude
};

/// Lambertian diffuse magnitude k_d * L * max(cos psi, 0); zero for
/// back-facing normals.
inline double lambert_magnitude(double k_d, double light, double psi) {
    if (k_d < 0)
        throw std::invalid_argument("lambert_magnitude: diffuse albedo must be non-negative");
    if (!(light > 0))
        throw std::invalid_argument("lambert_magnitude: light intensity must be positive");
    return k_d * light * std::max(std::cos(psi), 0.0);
}

/// Torrance-Sparrow specular magnitude (F*G / cos theta) * exp(-alpha^2 / 2 phi^2).
/// The proportionality constant is taken as 1.
inline double torrance_sparrow_magnitude(double fresnel, double attenuation, double theta,
                                         double alpha, double phi) {
    if (!(phi > 0))
        throw std::invalid_argument("torrance_sparrow_magnitude: roughness must be positive");
    if (fresnel < 0 || attenuation < 0)
        throw std::invalid_argument("torrance_sparrow_magnitude: F and G must be non-negative");
    if (!(theta >= 0) || theta >= kPi / 2)
        throw std::domain_error("torrance_sparrow_magnitude: theta must lie in [0, pi/2)");
    return (fresnel * attenuation / std::cos(theta)) * std::exp(-(alpha * alpha) / (2.0 * phi * phi));
}

namespace detail {

inline void check_unit_sum(double sum, const char* what) {
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(what) + " must have unit component sum");
}

inline void check_unit_direction(const Vec3& v, const char* what) {
    if (std::abs(v.norm() - 1.0) > 1e-9)
        throw std::invalid_argument(std::string(what) + " must be a unit vector");
}

inline double clamp_unit(double v) { return std::min(1.0, std::max(-1.0, v)); }

}  // namespace detail

inline void validate_scene(const SceneConfig& c) {
    if (c.width <= 0 || c.height <= 0)
        throw std::invalid_argument("scene dimensions must be positive");
    detail::check_unit_sum(c.object_color.sum(), "object color");
    detail::check_unit_sum(c.illuminant.sum(), "illuminant");
    for (const Rgb& p : c.patch_colors) detail::check_unit_sum(p.sum(), "patch color");
    if (c.diffuse_albedo < 0 || !(c.light_intensity > 0))
        throw std::invalid_argument("invalid diffuse albedo or light intensity");
    if (!(c.surface_roughness > 0))
        throw std::invalid_argument("surface roughness must be positive");
    if (!(c.sphere.radius > 0))
        throw std::invalid_argument("sphere radius must be positive");
    if (c.sphere.center_x - c.sphere.radius < 0 || c.sphere.center_x + c.sphere.radius > c.width - 1 ||
        c.sphere.center_y - c.sphere.radius < 0 || c.sphere.center_y + c.sphere.radius > c.height - 1)
        throw std::invalid_argument("sphere does not fit inside the image");
    detail::check_unit_direction(c.light_direction, "light direction");
    detail::check_unit_direction(c.view_direction, "view direction");
}

/// Intrinsic color at a sphere pixel: sector lookup when patches are present.
inline Rgb object_color_at(const SceneConfig& c, double dx, double dy) {
    if (c.patch_colors.empty()) return c.object_color;
    const std::size_t n = c.patch_colors.size();
    double a = std::atan2(dy, dx);  // [-pi, pi]
    double t = (a + kPi) / (2.0 * kPi);
    if (t >= 1.0) t = 0.0;
    std::size_t idx = static_cast<std::size_t>(t * static_cast<double>(n));
    if (idx >= n) idx = n - 1;
    return c.patch_colors[idx];
}

/// Renders the scene. Per pixel: psi from normal vs light, alpha from normal
/// vs the half vector, theta from normal vs view. Background pixels are zero.
/// Pixels grazing the rim (cos theta ~ 0) get zero specular magnitude; the
/// exponential falloff has already driven the lobe to zero there.
inline DichromaticRender render(const SceneConfig& c) {
    validate_scene(c);
    DichromaticRender out;
    out.width = c.width;
    out.height = c.height;
    out.composite = LinearImage(c.width, c.height);
    out.diffuse_component = LinearImage(c.width, c.height);
    out.specular_component = LinearImage(c.width, c.height);
    out.m_d.assign(static_cast<std::size_t>(c.width) * c.height, 0.0);
    out.m_s.assign(static_cast<std::size_t>(c.width) * c.height, 0.0);

    const Vec3 l = c.light_direction;
    const Vec3 v = c.view_direction;
    const Vec3 half = (l + v).normalized();
    const double r = c.sphere.radius;

    for (int y = 0; y < c.height; ++y) {
        for (int x = 0; x < c.width; ++x) {
            const double dx = x - c.sphere.center_x;
            const double dy = y - c.sphere.center_y;
            const double rho2 = dx * dx + dy * dy;
            if (rho2 > r * r) continue;
            const double z = std::sqrt(r * r - rho2);
            const Vec3 n{dx / r, dy / r, z / r};

            const double psi = std::acos(detail::clamp_unit(n.dot(l)));
            const double md = lambert_magnitude(c.diffuse_albedo, c.light_intensity, psi);

            const double cos_theta = n.dot(v);
            double ms = 0.0;
            if (cos_theta > 1e-9) {
                const double theta = std::acos(detail::clamp_unit(cos_theta));
                const double alpha = std::acos(detail::clamp_unit(n.dot(half)));
                ms = torrance_sparrow_magnitude(c.fresnel, c.geometric_attenuation, theta,
                                                alpha, c.surface_roughness);
            }

            const Rgb d = object_color_at(c, dx, dy);
            const std::size_t i = static_cast<std::size_t>(y) * c.width + x;
            out.m_d[i] = md;
            out.m_s[i] = ms;
            const Rgb diff = d * md;
            const Rgb spec = Rgb{c.illuminant.r, c.illuminant.g, c.illuminant.b} * ms;
            out.diffuse_component.set_rgb(x, y, diff);
            out.specular_component.set_rgb(x, y, spec);
            out.composite.set_rgb(x, y, diff + spec);
        }
    }
    return out;
}

/// The frozen default glossy sphere: uniform chromatic object color, strong
/// diffuse shading and a smooth off-axis specular lobe. Tuned so the 3x3
/// Laplacian keeps every finite |dm_s|/|dm_d| ratio below 10 while the 7x7
/// cross drives the maximum above 500.
inline SceneConfig default_scene() {
    SceneConfig c;
    c.width = 192;
    c.height = 192;
    c.object_color = {0.50, 0.32, 0.18};
    c.illuminant = {0.40, 0.35, 0.25};
    c.diffuse_albedo = 1.0;
    c.light_intensity = 6.0;
    c.surface_roughness = 0.16;
    c.sphere = {95.5, 95.5, 80.0};
    c.light_direction = Vec3{0.25, -0.2, 1.0}.normalized();
    c.view_direction = {0, 0, 1};
    return c;
}

// ---------------------------------------------------------------------------
// Ratio analysis
// ---------------------------------------------------------------------------

enum class RatioClass : std::uint8_t {
    Finite,
    Infinite,   // |dm_d| = 0 with |dm_s| != 0
    Undefined,  // both responses zero, or pixel outside convolution validity
};

struct RatioMap {
    int width = 0;
    int height = 0;
    std::vector<double> value;      // meaningful only where cls == Finite
    std::vector<RatioClass> cls;

    RatioClass class_at(int x, int y) const { return cls[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return value[static_cast<std::size_t>(y) * width + x]; }
};

/// |dm_s| / |dm_d| from the separated magnitude fields, per pixel. Division
/// by zero never happens: zero denominators become tagged sentinels.
inline RatioMap ratio_map(const DichromaticRender& rd, const Kernel& kernel) {
    const FilteredField fd = convolve_field(rd.m_d, rd.width, rd.height, kernel);
    const FilteredField fs = convolve_field(rd.m_s, rd.width, rd.height, kernel);
    RatioMap out;
    out.width = rd.width;
    out.height = rd.height;
    out.value.assign(fd.values.size(), 0.0);
    out.cls.assign(fd.values.size(), RatioClass::Undefined);
    for (std::size_t i = 0; i < fd.values.size(); ++i) {
        if (!fd.valid[i]) continue;
        const double dd = std::abs(fd.values[i]);
        const double ds = std::abs(fs.values[i]);
        if (dd == 0.0 && ds == 0.0) continue;
        if (dd == 0.0) {
            out.cls[i] = RatioClass::Infinite;
        } else {
            out.cls[i] = RatioClass::Finite;
            out.value[i] = ds / dd;
        }
    }
    return out;
}

/// Ratio analysis that accounts for intrinsic object color, for renders whose
/// D field varies. The specular response is the filtered m_s magnitude; the
/// effective diffuse magnitude is the L1 size of the filtered diffuse
/// component, which reduces to |dm_d| * sum(D_k) = |dm_d| on uniform regions
/// but grows sharply at intrinsic color edges. Pixels whose local D is
/// collinear with S carry no intrinsic evidence at all: their response reads
/// entirely as illuminant and is tagged Infinite.
inline RatioMap component_ratio_map(const DichromaticRender& rd, const Illuminant& s,
                                    const Kernel& kernel) {
    const FilteredField fs = convolve_field(rd.m_s, rd.width, rd.height, kernel);
    const DerivativeStructure fd = convolve(rd.diffuse_component, kernel);
    RatioMap out;
    out.width = rd.width;
    out.height = rd.height;
    const std::size_t n = static_cast<std::size_t>(rd.width) * rd.height;
    out.value.assign(n, 0.0);
    out.cls.assign(n, RatioClass::Undefined);
    const Vec3 sv{s.r, s.g, s.b};
    for (int y = 0; y < rd.height; ++y) {
        for (int x = 0; x < rd.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * rd.width + x;
            if (!fs.valid[i]) continue;
            const double md = rd.m_d[i];
            if (md <= 0.0) continue;  // background or unlit: no local D
            const Rgb diff = rd.diffuse_component.rgb(x, y);
            const Vec3 dv{diff.r / md, diff.g / md, diff.b / md};
            const double dd = dv.dot(dv), ss = sv.dot(sv), dsp = dv.dot(sv);
            const double det = dd * ss - dsp * dsp;
            const double ds = std::abs(fs.values[i]);
            const Rgb dresp = fd.at(x, y);
            const double dm_d =
                std::abs(dresp.r) + std::abs(dresp.g) + std::abs(dresp.b);
            if (det <= 1e-12 * dd * ss) {  // D parallel to S: pure illuminant evidence
                if (ds != 0.0 || dm_d != 0.0) out.cls[i] = RatioClass::Infinite;
                continue;
            }
            if (dm_d == 0.0 && ds == 0.0) continue;
            if (dm_d == 0.0) {
                out.cls[i] = RatioClass::Infinite;
            } else {
                out.cls[i] = RatioClass::Finite;
                out.value[i] = ds / dm_d;
            }
        }
    }
    return out;
}

/// One row of the error-vs-ratio analysis: a composite filter response that
/// qualifies as a derivative color, taken as an illuminant estimate, paired
/// with the true field ratio at its pixel.
struct RatioErrorSample {
    double ratio;      // finite |dm_s|/|dm_d| at the pixel
    double error_deg;  // angular error of the derivative color against S
};

/// Evaluates every derivative color of the composite under `kernel` against
/// the configured illuminant, keyed by the true per-pixel ratio.
inline std::vector<RatioErrorSample> error_vs_ratio(const DichromaticRender& rd,
                                                    const Illuminant& truth,
                                                    const Kernel& kernel) {
    const DerivativeStructure j = convolve(rd.composite, kernel);
    const RatioMap ratios = ratio_map(rd, kernel);
    std::vector<RatioErrorSample> out;
    for (int y = 0; y < rd.height; ++y) {
        for (int x = 0; x < rd.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * rd.width + x;
            if (!j.valid[i] || ratios.cls[i] != RatioClass::Finite) continue;
            const Rgb v = j.at(x, y);
            const double sum = v.sum();
            if (sum == 0.0) continue;
            const double cr = v.r / sum, cg = v.g / sum, cb = v.b / sum;
            if (!(cr > 0 && cr < 1 && cg > 0 && cg < 1 && cb > 0 && cb < 1)) continue;
            const Illuminant est{cr, cg, cb};
            out.push_back({ratios.value[i], angular_error(truth, est)});
        }
    }
    return out;
}

}  // namespace dcs
