#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "dcs/estimator.hpp"
#include "dcs/image_io.hpp"
#include "dcs/synth.hpp"

using namespace dcs;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("dcs_io_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const char* name) const { return (path / name).string(); }
};

LinearImage integer_noise(int w, int h, unsigned seed, int maxval) {
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> dist(0, maxval);
    LinearImage img(w, h, maxval > 255 ? 16 : 8);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.set_rgb(x, y, {static_cast<double>(dist(rng)), static_cast<double>(dist(rng)),
                               static_cast<double>(dist(rng))});
    return img;
}

bool images_equal(const LinearImage& a, const LinearImage& b) {
    if (!a.same_dims(b.width(), b.height())) return false;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < a.pixel_count(); ++i)
            if (a.plane(c)[i] != b.plane(c)[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("16-bit rasters round-trip bit-exactly") {
    TempDir tmp;
    const LinearImage img = integer_noise(31, 17, 42, 65535);

    SECTION("png") {
        save_image(tmp.file("t.png"), img, 65535.0);
        CHECK(images_equal(img, load_image(tmp.file("t.png"))));
    }
    SECTION("ppm") {
        save_image(tmp.file("t.ppm"), img, 65535.0);
        CHECK(images_equal(img, load_image(tmp.file("t.ppm"))));
    }
    SECTION("tiff") {
        save_image(tmp.file("t.tif"), img, 65535.0);
        CHECK(images_equal(img, load_image(tmp.file("t.tif"))));
    }
}

TEST_CASE("pfm floats round-trip") {
    TempDir tmp;
    const SceneConfig c = default_scene();
    const LinearImage img = render(c).composite;
    save_image(tmp.file("t.pfm"), img);
    const LinearImage back = load_image(tmp.file("t.pfm"));
    REQUIRE(back.same_dims(img.width(), img.height()));
    CHECK(back.bit_depth() == 0);
    double max_err = 0;
    for (int ch = 0; ch < 3; ++ch)
        for (std::size_t i = 0; i < img.pixel_count(); ++i)
            max_err = std::max(max_err, std::abs(back.plane(ch)[i] - img.plane(ch)[i]));
    CHECK(max_err < 1e-4);  // float storage
}

TEST_CASE("missing or undecodable files raise IoError") {
    CHECK_THROWS_AS(load_image("/nonexistent/nowhere.png"), IoError);
    TempDir tmp;
    std::ofstream(tmp.file("junk.png")) << "this is not a png";
    CHECK_THROWS_AS(load_image(tmp.file("junk.png")), IoError);
    CHECK_THROWS_AS(load_image(tmp.file("t.xyz")), IoError);
}

TEST_CASE("black level subtraction clamps at zero") {
    TempDir tmp;
    LinearImage ramp(64, 1, 16);
    for (int x = 0; x < 64; ++x) ramp.set_rgb(x, 0, {x * 100.0, x * 100.0, x * 100.0});
    save_image(tmp.file("ramp.png"), ramp, 65535.0);

    ManifestEntry entry;
    entry.black_level = 128;
    entry.saturation_level = 4095;
    const LinearImage img = load_image(tmp.file("ramp.png"), entry);
    CHECK(img.at(0, 0, 0) == 0.0);  // 0 - 128 clamps
    CHECK(img.at(0, 1, 0) == 0.0);  // 100 - 128 clamps
    CHECK(img.at(0, 2, 0) == 72.0);

    SECTION("saturation uses the effective ceiling after subtraction") {
        CHECK(entry.effective_saturation() == 4095.0 - 128.0);
        const BinaryMask usable = clip_saturated(img, entry.effective_saturation());
        for (int x = 0; x < 64; ++x) {
            const bool expect = std::max(0.0, x * 100.0 - 128.0) < 4095.0 - 128.0;
            CHECK(usable.at(x, 0) == expect);
        }
    }

    SECTION("zero black level is a pass-through") {
        ManifestEntry plain;
        const LinearImage same = load_image(tmp.file("ramp.png"), plain);
        CHECK(images_equal(same, ramp));
    }
}

TEST_CASE("manifest parsing") {
    TempDir tmp;

    SECTION("empty file gives an empty list") {
        std::ofstream(tmp.file("m.tsv")) << "# just a comment\n\n";
        CHECK(load_manifest(tmp.file("m.tsv")).empty());
    }

    SECTION("verbatim ground truth with optional rectangle") {
        std::ofstream(tmp.file("m.tsv"))
            << "img1.png\t0.4\t0.3\t0.3\t0\tinf\n"
            << "img2.png\t0.4\t0.3\t0.3\t128\t4095\t10 20 30 40\n"
            << "img3.png\t0.4\t0.3\t0.3\t128\t4095\t10\t20\t30\t40\n";
        const auto entries = load_manifest(tmp.file("m.tsv"));
        REQUIRE(entries.size() == 3);
        CHECK(entries[0].ground_truth.r == 0.4);
        CHECK(std::isinf(entries[0].saturation_level));
        REQUIRE(entries[1].exclusion_rect.has_value());
        CHECK((*entries[1].exclusion_rect)[3] == 40);
        CHECK(entries[2].exclusion_rect == entries[1].exclusion_rect);
    }

    SECTION("slightly off ground truth is normalized with a warning") {
        std::ofstream(tmp.file("m.tsv")) << "a.png\t0.4002\t0.3001\t0.3002\t0\tinf\n";
        std::vector<std::string> warnings;
        const auto entries = load_manifest(tmp.file("m.tsv"), &warnings);
        CHECK(std::abs(entries[0].ground_truth.sum() - 1.0) < 1e-12);
        CHECK(warnings.size() == 1);
    }

    SECTION("badly non-unit ground truth is rejected with the line number") {
        std::ofstream(tmp.file("m.tsv")) << "# header\na.png\t0.5\t0.4\t0.3\t0\tinf\n";
        try {
            load_manifest(tmp.file("m.tsv"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }

    SECTION("negative black level is rejected") {
        std::ofstream(tmp.file("m.tsv")) << "a.png\t0.4\t0.3\t0.3\t-1\tinf\n";
        CHECK_THROWS_AS(load_manifest(tmp.file("m.tsv")), ParseError);
    }
}

TEST_CASE("exclusion mask building") {
    ManifestEntry entry;

    SECTION("no rectangle gives an all-false mask") {
        CHECK(build_exclusion_mask(entry, 64, 64, 7).count() == 0);
    }

    SECTION("rectangle grows by the kernel radius") {
        entry.exclusion_rect = {{10, 10, 50, 50}};
        const BinaryMask m = build_exclusion_mask(entry, 100, 100, 7);
        for (int y = 0; y < 100; ++y)
            for (int x = 0; x < 100; ++x)
                CHECK(m.at(x, y) == (x >= 3 && x <= 57 && y >= 3 && y <= 57));
    }

    SECTION("out-of-bounds rectangles are rejected") {
        entry.exclusion_rect = {{10, 10, 200, 50}};
        CHECK_THROWS_AS(build_exclusion_mask(entry, 100, 100, 0), std::invalid_argument);
    }

    SECTION("masking the whole frame is unrecoverable downstream") {
        entry.exclusion_rect = {{0, 0, 63, 63}};
        const BinaryMask m = build_exclusion_mask(entry, 64, 64, 0);
        const LinearImage img = render(default_scene()).composite;
        LinearImage crop(64, 64);
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x) crop.at(c, x, y) = img.at(c, x + 60, y + 60);
        CHECK_THROWS_AS(estimate(crop, DcsParams{}, &m), UnrecoverableInputError);
    }
}

TEST_CASE("white balance") {
    SECTION("neutral estimate is the identity") {
        const LinearImage img = integer_noise(8, 8, 5, 255);
        const LinearImage out = white_balance(img, {1.0 / 3, 1.0 / 3, 1.0 / 3});
        CHECK(images_equal(img, out));
    }
    SECTION("the illuminant maps to gray") {
        LinearImage img(8, 8);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) img.set_rgb(x, y, {0.5 * 0.8, 0.3 * 0.8, 0.2 * 0.8});
        const LinearImage out = white_balance(img, {0.5, 0.3, 0.2});
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                const Rgb v = out.rgb(x, y);
                CHECK(v.r == Catch::Approx(v.g).margin(1e-12));
                CHECK(v.g == Catch::Approx(v.b).margin(1e-12));
            }
    }
    SECTION("zero components are rejected") {
        const LinearImage img = integer_noise(4, 4, 6, 255);
        CHECK_THROWS_AS(white_balance(img, {1, 0, 0}), std::invalid_argument);
    }
    SECTION("correcting a render neutralizes its bright region") {
        SceneConfig c = default_scene();
        c.object_color = {c.illuminant.r, c.illuminant.g, c.illuminant.b};
        const LinearImage img = render(c).composite;
        const EstimateResult est = estimate(img, DcsParams{});
        const LinearImage out = white_balance(img, est.illuminant);
        const BinaryMask bright =
            select_bright_regions(out, DcsParams{}, clip_saturated(out, 1e30)).mask;
        double r = 0, g = 0, b = 0;
        for (int y = 0; y < out.height(); ++y)
            for (int x = 0; x < out.width(); ++x) {
                if (!bright.at(x, y)) continue;
                const Rgb v = out.rgb(x, y);
                r += v.r;
                g += v.g;
                b += v.b;
            }
        const double sum = r + g + b;
        CHECK(std::abs(r / sum - 1.0 / 3) < 0.01);
        CHECK(std::abs(g / sum - 1.0 / 3) < 0.01);
    }
}

TEST_CASE("error csv round trip") {
    TempDir tmp;
    const std::vector<std::pair<std::string, double>> rows{
        {"img_a", 1.25}, {"img_b", 0.017}, {"img_c", 12.5}};
    write_error_csv(tmp.file("e.csv"), rows);
    const auto back = read_error_csv(tmp.file("e.csv"));
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].first == rows[i].first);
        CHECK(back[i].second == rows[i].second);
    }
}
