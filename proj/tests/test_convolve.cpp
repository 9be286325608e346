#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dcs/convolve.hpp"
#include "dcs/synth.hpp"

using namespace dcs;

namespace {

LinearImage random_image(int w, int h, unsigned seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    LinearImage img(w, h);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) img.at(c, x, y) = dist(rng);
    return img;
}

// independent correlation used as the oracle for the fast path
double direct_response(const LinearImage& img, int c, int x, int y, const Kernel& k) {
    double acc = 0;
    for (int dy = -k.radius; dy <= k.radius; ++dy)
        for (int dx = -k.radius; dx <= k.radius; ++dx)
            acc += k.at(dx, dy) * img.at(c, x + dx, y + dy);
    return acc;
}

}  // namespace

TEST_CASE("zero-sum kernels kill constant images") {
    LinearImage img(32, 32);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x) img.at(c, x, y) = 0.7 + 0.1 * c;
    for (const Kernel& k : {laplacian_f1(), cross_f2(), gaussian_second_kernels(1.5).xx}) {
        const DerivativeStructure j = convolve(img, k);
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (j.valid_at(x, y))
                    for (int c = 0; c < 3; ++c)
                        CHECK(std::abs(j.values[c][static_cast<std::size_t>(y) * 32 + x]) < 1e-9);
    }
}

TEST_CASE("second derivative of a linear ramp is zero on the valid interior") {
    LinearImage img(40, 24);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 40; ++x) img.at(c, x, y) = 3.0 * x + 0.5;
    const Kernel k = gaussian_second_kernels(1.0).xx;
    const DerivativeStructure j = convolve(img, k);
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 40; ++x) {
            if (!j.valid_at(x, y)) continue;
            CHECK(std::abs(j.values[0][static_cast<std::size_t>(y) * 40 + x]) < 1e-9 * 120.0);
            CHECK(j.values[0][static_cast<std::size_t>(y) * 40 + x] ==
                  Catch::Approx(direct_response(img, 0, x, y, k)).margin(1e-12));
        }
    }
}

TEST_CASE("achromatic render responses stay parallel to the illuminant") {
    SceneConfig c = default_scene();
    c.width = 96;
    c.height = 96;
    c.sphere = {47.5, 47.5, 40.0};
    c.object_color = {c.illuminant.r, c.illuminant.g, c.illuminant.b};
    const DichromaticRender rd = render(c);
    const DerivativeStructure j = convolve(rd.composite, laplacian_f1());
    const Vec3 s{c.illuminant.r, c.illuminant.g, c.illuminant.b};
    for (int y = 0; y < 96; ++y) {
        for (int x = 0; x < 96; ++x) {
            if (!j.valid_at(x, y)) continue;
            const Rgb v = j.at(x, y);
            // cross product with S must vanish relative to the magnitude
            const double cx = v.g * s.z - v.b * s.y;
            const double cy = v.b * s.x - v.r * s.z;
            const double cz = v.r * s.y - v.g * s.x;
            const double mag = std::abs(v.r) + std::abs(v.g) + std::abs(v.b);
            CHECK(std::sqrt(cx * cx + cy * cy + cz * cz) <= 1e-9 * std::max(mag, 1e-30));
        }
    }
}

TEST_CASE("convolution is linear on valid pixels") {
    const LinearImage i1 = random_image(48, 36, 101);
    const LinearImage i2 = random_image(48, 36, 202);
    const double a = 1.7, b = -0.4;
    LinearImage mix(48, 36);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 36; ++y)
            for (int x = 0; x < 48; ++x)
                mix.at(c, x, y) = a * i1.at(c, x, y) + b * i2.at(c, x, y);
    const Kernel k = gaussian_second_kernels(1.0).xy;
    const DerivativeStructure j1 = convolve(i1, k);
    const DerivativeStructure j2 = convolve(i2, k);
    const DerivativeStructure jm = convolve(mix, k);
    for (int y = 0; y < 36; ++y) {
        for (int x = 0; x < 48; ++x) {
            if (!jm.valid_at(x, y)) continue;
            for (int c = 0; c < 3; ++c) {
                const std::size_t i = static_cast<std::size_t>(y) * 48 + x;
                const double want = a * j1.values[c][i] + b * j2.values[c][i];
                CHECK(jm.values[c][i] ==
                      Catch::Approx(want).margin(1e-9 * std::max(1.0, std::abs(want))));
            }
        }
    }
}

TEST_CASE("separated-component identity holds for uniform renders") {
    const SceneConfig c = default_scene();
    const DichromaticRender rd = render(c);
    const Kernel k = cross_f2();
    const DerivativeStructure j = convolve(rd.composite, k);
    const FilteredField fd = convolve_field(rd.m_d, rd.width, rd.height, k);
    const FilteredField fs = convolve_field(rd.m_s, rd.width, rd.height, k);
    const double dvec[3] = {c.object_color.r, c.object_color.g, c.object_color.b};
    const double svec[3] = {c.illuminant.r, c.illuminant.g, c.illuminant.b};
    // 1e-9 relative to the magnitude flowing through the filter sums; the
    // responses themselves cancel to near zero on smooth shading.
    double peak = 0;
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t i = 0; i < rd.composite.pixel_count(); ++i)
            peak = std::max(peak, rd.composite.plane(ch)[i]);
    double l1 = 0;
    for (double t : k.taps) l1 += std::abs(t);
    const double bound = 1e-9 * l1 * peak;
    for (int y = 0; y < rd.height; ++y) {
        for (int x = 0; x < rd.width; ++x) {
            if (!j.valid_at(x, y)) continue;
            const std::size_t i = static_cast<std::size_t>(y) * rd.width + x;
            for (int ch = 0; ch < 3; ++ch) {
                const double want = fd.values[i] * dvec[ch] + fs.values[i] * svec[ch];
                const double got = j.values[ch][i];
                CHECK(std::abs(got - want) <= std::max(bound, 1e-9 * std::abs(want)));
            }
        }
    }
}

TEST_CASE("validity masking") {
    const LinearImage img = random_image(20, 20, 7);

    SECTION("border band is invalid, interior valid") {
        const DerivativeStructure j = convolve(img, cross_f2());
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 20; ++x)
                CHECK(j.valid_at(x, y) == (x >= 3 && x < 17 && y >= 3 && y < 17));
    }

    SECTION("excluded pixels poison every footprint that touches them") {
        BinaryMask excl(20, 20);
        excl.set(10, 10, true);
        const DerivativeStructure j = convolve(img, laplacian_f1(), &excl);
        for (int y = 1; y < 19; ++y)
            for (int x = 1; x < 19; ++x)
                CHECK(j.valid_at(x, y) == (std::abs(x - 10) > 1 || std::abs(y - 10) > 1));
    }

    SECTION("kernel larger than the image is rejected") {
        const LinearImage tiny = random_image(5, 5, 1);
        CHECK_THROWS_AS(convolve(tiny, cross_f2()), std::invalid_argument);
    }
}
