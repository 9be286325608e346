#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "dcs/synth.hpp"

using namespace dcs;

TEST_CASE("lambert magnitude") {
    CHECK(lambert_magnitude(1, 1, 0) == 1.0);
    CHECK(lambert_magnitude(0.5, 2, kPi / 3) == Catch::Approx(0.5).margin(1e-12));
    CHECK(lambert_magnitude(1, 1, 2 * kPi / 3) == 0.0);  // back-facing clamp
    CHECK_THROWS_AS(lambert_magnitude(-0.1, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(lambert_magnitude(1, 0, 0), std::invalid_argument);
}

TEST_CASE("torrance-sparrow magnitude") {
    CHECK(torrance_sparrow_magnitude(1, 1, 0, 0, 0.1) == 1.0);
    CHECK(torrance_sparrow_magnitude(1, 1, 0, 0.1, 0.1) ==
          Catch::Approx(std::exp(-0.5)).epsilon(1e-12));
    CHECK(torrance_sparrow_magnitude(0, 1, 0.3, 0, 0.2) == 0.0);
    CHECK_THROWS_AS(torrance_sparrow_magnitude(1, 1, kPi / 2, 0, 0.1), std::domain_error);
    CHECK_THROWS_AS(torrance_sparrow_magnitude(1, 1, 0, 0, 0), std::invalid_argument);

    SECTION("strictly decreasing in |alpha|") {
        double prev = torrance_sparrow_magnitude(1, 1, 0.2, 0, 0.15);
        for (double alpha = 0.02; alpha < 0.8; alpha += 0.02) {
            const double v = torrance_sparrow_magnitude(1, 1, 0.2, alpha, 0.15);
            CHECK(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("render invariants") {
    const SceneConfig c = default_scene();
    const DichromaticRender rd = render(c);

    SECTION("recomposition, non-negativity, zero background") {
        for (int y = 0; y < rd.height; ++y) {
            for (int x = 0; x < rd.width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * rd.width + x;
                CHECK(rd.m_d[i] >= 0);
                CHECK(rd.m_s[i] >= 0);
                const Rgb comp = rd.composite.rgb(x, y);
                const Rgb want = c.object_color * rd.m_d[i] +
                                 Rgb{c.illuminant.r, c.illuminant.g, c.illuminant.b} * rd.m_s[i];
                for (auto [got, w] : {std::pair{comp.r, want.r}, {comp.g, want.g}, {comp.b, want.b}})
                    CHECK(std::abs(got - w) <= 1e-9 * std::max(1e-12, std::abs(w)));
                const double dx = x - c.sphere.center_x, dy = y - c.sphere.center_y;
                if (dx * dx + dy * dy > c.sphere.radius * c.sphere.radius)
                    CHECK(comp.r + comp.g + comp.b == 0.0);
            }
        }
    }

    SECTION("a bright lobe sits where alpha is small") {
        // brightest composite pixel must carry a dominant specular magnitude
        std::size_t argmax = 0;
        double best = -1;
        for (int y = 0; y < rd.height; ++y)
            for (int x = 0; x < rd.width; ++x) {
                const Rgb v = rd.composite.rgb(x, y);
                if (v.sum() > best) {
                    best = v.sum();
                    argmax = static_cast<std::size_t>(y) * rd.width + x;
                }
            }
        CHECK(rd.m_s[argmax] > 0.5 * *std::max_element(rd.m_s.begin(), rd.m_s.end()));
    }
}

TEST_CASE("zero fresnel gives a purely diffuse composite") {
    SceneConfig c = default_scene();
    c.fresnel = 0.0;
    const DichromaticRender rd = render(c);
    for (int y = 0; y < rd.height; ++y)
        for (int x = 0; x < rd.width; ++x) {
            const Rgb a = rd.composite.rgb(x, y), b = rd.diffuse_component.rgb(x, y);
            CHECK(a.r == b.r);
            CHECK(a.g == b.g);
            CHECK(a.b == b.b);
        }
}

TEST_CASE("albedo patches partition the sphere into sectors") {
    SceneConfig c = default_scene();
    c.patch_colors = {{0.6, 0.2, 0.2}, {0.2, 0.6, 0.2}, {0.2, 0.2, 0.6}, {0.4, 0.4, 0.2}};
    const DichromaticRender rd = render(c);
    // pick interior pixels well inside each sector and check the recovered D
    for (std::size_t p = 0; p < 4; ++p) {
        const double angle = -kPi + (p + 0.5) * (2 * kPi / 4);
        const int x = static_cast<int>(c.sphere.center_x + 0.5 * c.sphere.radius * std::cos(angle));
        const int y = static_cast<int>(c.sphere.center_y + 0.5 * c.sphere.radius * std::sin(angle));
        const std::size_t i = static_cast<std::size_t>(y) * rd.width + x;
        REQUIRE(rd.m_d[i] > 0);
        const Rgb diff = rd.diffuse_component.rgb(x, y);
        CHECK(diff.r / rd.m_d[i] == Catch::Approx(c.patch_colors[p].r).margin(1e-12));
        CHECK(diff.g / rd.m_d[i] == Catch::Approx(c.patch_colors[p].g).margin(1e-12));
    }
}

TEST_CASE("scene validation") {
    SceneConfig c = default_scene();
    c.sphere.radius = 200.0;  // overflows the frame
    CHECK_THROWS_AS(render(c), std::invalid_argument);

    c = default_scene();
    c.object_color = {0.5, 0.4, 0.4};  // sums to 1.3
    CHECK_THROWS_AS(render(c), std::invalid_argument);

    c = default_scene();
    c.light_direction = {0, 0, 2};
    CHECK_THROWS_AS(render(c), std::invalid_argument);
}

TEST_CASE("ratio maps on the default sphere") {
    const SceneConfig c = default_scene();
    const DichromaticRender rd = render(c);

    SECTION("laplacian keeps every finite ratio below 10") {
        const RatioMap rm = ratio_map(rd, laplacian_f1());
        double mx = 0;
        for (std::size_t i = 0; i < rm.cls.size(); ++i)
            if (rm.cls[i] == RatioClass::Finite) mx = std::max(mx, rm.value[i]);
        CHECK(mx < 10.0);
        CHECK(mx > 0.0);
    }

    SECTION("cross stencil reaches ratios beyond 500") {
        const RatioMap rm = ratio_map(rd, cross_f2());
        double mx = 0;
        for (std::size_t i = 0; i < rm.cls.size(); ++i)
            if (rm.cls[i] == RatioClass::Finite) mx = std::max(mx, rm.value[i]);
        CHECK(mx > 500.0);
    }

    SECTION("higher specular magnitude ranks with larger ratios") {
        const RatioMap rm = ratio_map(rd, cross_f2());
        std::vector<double> ms, ratio;
        for (std::size_t i = 0; i < rm.cls.size(); ++i) {
            if (rm.cls[i] != RatioClass::Finite || rd.m_s[i] <= 0) continue;
            ms.push_back(rd.m_s[i]);
            ratio.push_back(rm.value[i]);
        }
        auto ranks = [](const std::vector<double>& v) {
            std::vector<std::size_t> idx(v.size());
            std::iota(idx.begin(), idx.end(), 0);
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
            std::vector<double> r(v.size());
            for (std::size_t i = 0; i < idx.size(); ++i) r[idx[i]] = static_cast<double>(i);
            return r;
        };
        const std::vector<double> ra = ranks(ms), rb = ranks(ratio);
        const double mean = (ra.size() - 1) / 2.0;
        double num = 0, da = 0, db = 0;
        for (std::size_t i = 0; i < ra.size(); ++i) {
            num += (ra[i] - mean) * (rb[i] - mean);
            da += (ra[i] - mean) * (ra[i] - mean);
            db += (rb[i] - mean) * (rb[i] - mean);
        }
        CHECK(num / std::sqrt(da * db) > 0.0);
    }

    SECTION("background is undefined, not divided") {
        const RatioMap rm = ratio_map(rd, laplacian_f1());
        CHECK(rm.class_at(2, 2) == RatioClass::Undefined);
    }
}

TEST_CASE("component ratio map") {
    const SceneConfig uni = default_scene();
    SceneConfig multi = default_scene();
    multi.patch_colors = {{0.5, 0.3, 0.2}, {0.2, 0.5, 0.3}, {0.3, 0.2, 0.5}, {0.4, 0.4, 0.2}};

    SECTION("agrees with the field ratio for uniform intrinsic color") {
        const DichromaticRender rd = render(uni);
        const RatioMap a = component_ratio_map(rd, uni.illuminant, cross_f2());
        const RatioMap b = ratio_map(rd, cross_f2());
        for (std::size_t i = 0; i < a.cls.size(); ++i) {
            if (a.cls[i] != RatioClass::Finite || b.cls[i] != RatioClass::Finite) continue;
            CHECK(std::abs(a.value[i] - b.value[i]) <= 1e-3 * std::max(b.value[i], 1e-12));
        }
    }

    SECTION("intrinsic color edges pull the median finite ratio down") {
        auto median_ratio = [](const RatioMap& rm) {
            std::vector<double> f;
            for (std::size_t i = 0; i < rm.cls.size(); ++i)
                if (rm.cls[i] == RatioClass::Finite) f.push_back(rm.value[i]);
            REQUIRE_FALSE(f.empty());
            std::nth_element(f.begin(), f.begin() + f.size() / 2, f.end());
            return f[f.size() / 2];
        };
        const double mu = median_ratio(component_ratio_map(render(uni), uni.illuminant, cross_f2()));
        const double mm = median_ratio(component_ratio_map(render(multi), uni.illuminant, cross_f2()));
        CHECK(mm < mu);
    }

    SECTION("achromatic surfaces read as infinite ratio") {
        SceneConfig achro = default_scene();
        achro.object_color = {achro.illuminant.r, achro.illuminant.g, achro.illuminant.b};
        const DichromaticRender rd = render(achro);
        const RatioMap rm = component_ratio_map(rd, achro.illuminant, cross_f2());
        std::size_t infinite = 0, finite = 0;
        for (RatioClass cls : rm.cls) {
            infinite += cls == RatioClass::Infinite;
            finite += cls == RatioClass::Finite;
        }
        CHECK(finite == 0);
        CHECK(infinite > 0);
    }
}

TEST_CASE("error shrinks as the ratio grows") {
    const SceneConfig c = default_scene();
    const auto samples = error_vs_ratio(render(c), c.illuminant, cross_f2());
    REQUIRE(samples.size() > 1000);
    double lo_sum = 0, hi_sum = 0;
    std::size_t lo_n = 0, hi_n = 0;
    for (const auto& s : samples) {
        if (s.ratio > 100) {
            hi_sum += s.error_deg;
            ++hi_n;
        } else if (s.ratio > 1 && s.ratio < 10) {
            lo_sum += s.error_deg;
            ++lo_n;
        }
    }
    REQUIRE(lo_n > 0);
    REQUIRE(hi_n > 0);
    CHECK(hi_sum / hi_n < lo_sum / lo_n);
}
