#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <png.h>
#include <tiffio.h>

#include "dcs/image.hpp"

namespace dcs {

// ---------------------------------------------------------------------------
// Number formatting (shortest round-trip, for unrounded CSV output)
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
    std::array<char, 64> buf;
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// One benchmark record: image path, ground truth, per-camera black offset,
/// saturation level in source counts, optional excluded rectangle (the color
/// checker), all inclusive pixel coordinates.
struct ManifestEntry {
    std::string image_path;
    Illuminant ground_truth;
    double black_level = 0;
    double saturation_level = std::numeric_limits<double>::infinity();
    std::optional<std::array<int, 4>> exclusion_rect;  // x0 y0 x1 y1

    /// Ceiling to test against after black subtraction.
    double effective_saturation() const { return saturation_level - black_level; }
};

namespace detail {

inline double parse_number(const std::string& tok, int line_no, const char* what) {
    if (tok == "inf" || tok == "Inf" || tok == "INF")
        return std::numeric_limits<double>::infinity();
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("manifest line " + std::to_string(line_no) + ": bad " + what +
                         " value '" + tok + "'");
    }
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace detail

/// Parses the line-oriented benchmark manifest. One record per line,
/// tab-separated: path, s_r, s_g, s_b, black_level, sat_level, and an
/// optional checker rectangle x0 y0 x1 y1 (either four more fields or one
/// space-separated field). '#' starts a comment. Ground truths whose sum is
/// within 1e-3 of 1 are normalized with a warning; anything further off is
/// rejected.
inline std::vector<ManifestEntry> load_manifest(const std::string& path,
                                                std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);

    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
        if (blank) continue;

        std::vector<std::string> f = detail::split_tabs(line);
        while (!f.empty() && f.back().empty()) f.pop_back();
        if (f.size() != 6 && f.size() != 7 && f.size() != 10)
            throw ParseError("manifest line " + std::to_string(line_no) +
                             ": expected 6 fields plus an optional rectangle, got " +
                             std::to_string(f.size()));

        ManifestEntry e;
        e.image_path = f[0];
        const double r = detail::parse_number(f[1], line_no, "s_r");
        const double g = detail::parse_number(f[2], line_no, "s_g");
        const double b = detail::parse_number(f[3], line_no, "s_b");
        const double sum = r + g + b;
        if (!(sum > 0) || std::abs(sum - 1.0) > 1e-3)
            throw ParseError("manifest line " + std::to_string(line_no) +
                             ": ground truth does not sum to 1");
        if (std::abs(sum - 1.0) > 1e-9) {
            if (warnings)
                warnings->push_back("manifest line " + std::to_string(line_no) +
                                    ": ground truth sum " + format_double(sum) +
                                    " normalized to 1");
        }
        e.ground_truth = normalize_illuminant(r, g, b);
        e.black_level = detail::parse_number(f[4], line_no, "black_level");
        if (e.black_level < 0)
            throw ParseError("manifest line " + std::to_string(line_no) +
                             ": black level must be non-negative");
        e.saturation_level = detail::parse_number(f[5], line_no, "sat_level");

        if (f.size() == 10) {
            e.exclusion_rect = {{static_cast<int>(detail::parse_number(f[6], line_no, "x0")),
                                 static_cast<int>(detail::parse_number(f[7], line_no, "y0")),
                                 static_cast<int>(detail::parse_number(f[8], line_no, "x1")),
                                 static_cast<int>(detail::parse_number(f[9], line_no, "y1"))}};
        } else if (f.size() == 7) {
            std::istringstream rs(f[6]);
            std::array<int, 4> rect{};
            if (!(rs >> rect[0] >> rect[1] >> rect[2] >> rect[3]))
                throw ParseError("manifest line " + std::to_string(line_no) +
                                 ": bad rectangle field '" + f[6] + "'");
            e.exclusion_rect = rect;
        }
        entries.push_back(std::move(e));
    }
    return entries;
}

/// Rasterizes the entry's excluded rectangle (true = excluded), grown by
/// `dilate_radius` pixels on every side so convolution footprints of that
/// radius can never reach a checker pixel from a valid center.
inline BinaryMask build_exclusion_mask(const ManifestEntry& entry, int width, int height,
                                       int dilate_radius = 0) {
    BinaryMask mask(width, height);
    if (!entry.exclusion_rect) return mask;
    const auto& r = *entry.exclusion_rect;
    if (r[0] > r[2] || r[1] > r[3] || r[0] < 0 || r[1] < 0 || r[2] >= width || r[3] >= height)
        throw std::invalid_argument("exclusion rectangle out of image bounds");
    const int x0 = std::max(0, r[0] - dilate_radius);
    const int y0 = std::max(0, r[1] - dilate_radius);
    const int x1 = std::min(width - 1, r[2] + dilate_radius);
    const int y1 = std::min(height - 1, r[3] + dilate_radius);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) mask.set(x, y, true);
    return mask;
}

// ---------------------------------------------------------------------------
// Image decode / encode
// ---------------------------------------------------------------------------

namespace detail {

inline bool has_suffix(const std::string& s, const char* suffix) {
    const std::size_t n = std::strlen(suffix);
    if (s.size() < n) return false;
    for (std::size_t i = 0; i < n; ++i) {
        const char a = static_cast<char>(std::tolower(static_cast<unsigned char>(s[s.size() - n + i])));
        if (a != suffix[i]) return false;
    }
    return true;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

inline void png_quiet_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
inline void png_quiet_warning(png_structp, png_const_charp) {}

inline LinearImage load_png(const std::string& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open image: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error,
                                             png_quiet_warning);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("png decode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_read_png(png, info,
                 PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_SWAP_ENDIAN,
                 nullptr);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    png_bytepp rows = png_get_rows(png, info);

    LinearImage img(w, h, depth >= 16 ? 16 : 8);
    for (int y = 0; y < h; ++y) {
        if (depth == 16) {
            const std::uint16_t* row = reinterpret_cast<const std::uint16_t*>(rows[y]);
            for (int x = 0; x < w; ++x) {
                const std::uint16_t* px = row + static_cast<std::size_t>(x) * channels;
                const double r = px[0];
                const double g = channels >= 3 ? px[1] : px[0];
                const double b = channels >= 3 ? px[2] : px[0];
                img.set_rgb(x, y, {r, g, b});
            }
        } else {
            const std::uint8_t* row = rows[y];
            for (int x = 0; x < w; ++x) {
                const std::uint8_t* px = row + static_cast<std::size_t>(x) * channels;
                const double r = px[0];
                const double g = channels >= 3 ? px[1] : px[0];
                const double b = channels >= 3 ? px[2] : px[0];
                img.set_rgb(x, y, {r, g, b});
            }
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void save_png16(const std::string& path, const LinearImage& img, double max_value) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot write image: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png encode failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width(), img.height(), 16, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);  // we supply native little-endian samples

    const double scale = 65535.0 / max_value;
    std::vector<std::uint16_t> row(static_cast<std::size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(img.at(c, x, y) * scale, 0.0, 65535.0);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<std::uint16_t>(std::lround(v));
            }
        }
        png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline LinearImage load_tiff(const std::string& path) {
    TIFF* tif = TIFFOpen(path.c_str(), "r");
    if (!tif) throw IoError("cannot open image: " + path);

    std::uint32_t w = 0, h = 0;
    std::uint16_t bits = 8, samples = 1, fmt = SAMPLEFORMAT_UINT, planar = PLANARCONFIG_CONTIG;
    TIFFGetField(tif, TIFFTAG_IMAGEWIDTH, &w);
    TIFFGetField(tif, TIFFTAG_IMAGELENGTH, &h);
    TIFFGetFieldDefaulted(tif, TIFFTAG_BITSPERSAMPLE, &bits);
    TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLESPERPIXEL, &samples);
    TIFFGetFieldDefaulted(tif, TIFFTAG_SAMPLEFORMAT, &fmt);
    TIFFGetFieldDefaulted(tif, TIFFTAG_PLANARCONFIG, &planar);

    const bool ok = w > 0 && h > 0 && planar == PLANARCONFIG_CONTIG &&
                    ((fmt == SAMPLEFORMAT_UINT && (bits == 8 || bits == 16)) ||
                     (fmt == SAMPLEFORMAT_IEEEFP && bits == 32));
    if (!ok) {
        TIFFClose(tif);
        throw IoError("unsupported tiff layout: " + path);
    }

    LinearImage img(static_cast<int>(w), static_cast<int>(h),
                    fmt == SAMPLEFORMAT_IEEEFP ? 0 : bits);
    std::vector<std::uint8_t> scanline(TIFFScanlineSize(tif));
    for (std::uint32_t y = 0; y < h; ++y) {
        if (TIFFReadScanline(tif, scanline.data(), y) < 0) {
            TIFFClose(tif);
            throw IoError("tiff decode failed: " + path);
        }
        for (std::uint32_t x = 0; x < w; ++x) {
            double r, g, b;
            if (fmt == SAMPLEFORMAT_IEEEFP) {
                const float* px = reinterpret_cast<const float*>(scanline.data()) +
                                  static_cast<std::size_t>(x) * samples;
                r = px[0];
                g = samples >= 3 ? px[1] : px[0];
                b = samples >= 3 ? px[2] : px[0];
            } else if (bits == 16) {
                const std::uint16_t* px = reinterpret_cast<const std::uint16_t*>(scanline.data()) +
                                          static_cast<std::size_t>(x) * samples;
                r = px[0];
                g = samples >= 3 ? px[1] : px[0];
                b = samples >= 3 ? px[2] : px[0];
            } else {
                const std::uint8_t* px = scanline.data() + static_cast<std::size_t>(x) * samples;
                r = px[0];
                g = samples >= 3 ? px[1] : px[0];
                b = samples >= 3 ? px[2] : px[0];
            }
            img.set_rgb(static_cast<int>(x), static_cast<int>(y), {r, g, b});
        }
    }
    TIFFClose(tif);
    return img;
}

inline void save_tiff16(const std::string& path, const LinearImage& img, double max_value) {
    TIFF* tif = TIFFOpen(path.c_str(), "w");
    if (!tif) throw IoError("cannot write image: " + path);
    TIFFSetField(tif, TIFFTAG_IMAGEWIDTH, static_cast<std::uint32_t>(img.width()));
    TIFFSetField(tif, TIFFTAG_IMAGELENGTH, static_cast<std::uint32_t>(img.height()));
    TIFFSetField(tif, TIFFTAG_SAMPLESPERPIXEL, 3);
    TIFFSetField(tif, TIFFTAG_BITSPERSAMPLE, 16);
    TIFFSetField(tif, TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
    TIFFSetField(tif, TIFFTAG_ORIENTATION, ORIENTATION_TOPLEFT);
    TIFFSetField(tif, TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
    TIFFSetField(tif, TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_RGB);
    TIFFSetField(tif, TIFFTAG_COMPRESSION, COMPRESSION_NONE);

    const double scale = 65535.0 / max_value;
    std::vector<std::uint16_t> row(static_cast<std::size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(img.at(c, x, y) * scale, 0.0, 65535.0);
                row[static_cast<std::size_t>(x) * 3 + c] =
                    static_cast<std::uint16_t>(std::lround(v));
            }
        if (TIFFWriteScanline(tif, row.data(), static_cast<std::uint32_t>(y)) < 0) {
            TIFFClose(tif);
            throw IoError("tiff encode failed: " + path);
        }
    }
    TIFFClose(tif);
}

// --- PPM / PGM -------------------------------------------------------------

inline int ppm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
        } else if (!std::isspace(c)) {
            break;
        }
    }
    if (c == EOF) return -1;
    tok.push_back(static_cast<char>(c));
    while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(c));
    return 0;
}

inline LinearImage load_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path);
    std::string magic, tok;
    if (ppm_next_token(in, magic) < 0) throw IoError("truncated ppm header: " + path);
    const bool ascii = magic == "P2" || magic == "P3";
    const bool gray = magic == "P2" || magic == "P5";
    if (magic != "P2" && magic != "P3" && magic != "P5" && magic != "P6")
        throw IoError("not a ppm/pgm file: " + path);

    auto next_int = [&](const char* what) {
        if (ppm_next_token(in, tok) < 0) throw IoError(std::string("truncated ppm ") + what);
        return std::stol(tok);
    };
    const long w = next_int("width"), h = next_int("height"), maxval = next_int("maxval");
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw IoError("bad ppm dimensions: " + path);

    LinearImage img(static_cast<int>(w), static_cast<int>(h), maxval > 255 ? 16 : 8);
    const int nchan = gray ? 1 : 3;
    if (ascii) {
        for (long y = 0; y < h; ++y) {
            for (long x = 0; x < w; ++x) {
                double v[3];
                for (int c = 0; c < nchan; ++c) v[c] = static_cast<double>(next_int("sample"));
                img.set_rgb(static_cast<int>(x), static_cast<int>(y),
                            gray ? Rgb{v[0], v[0], v[0]} : Rgb{v[0], v[1], v[2]});
            }
        }
        return img;
    }
    // binary: one whitespace byte after maxval, then samples (big-endian when 2 bytes)
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * nchan * bytes);
    for (long y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw IoError("truncated ppm data: " + path);
        for (long x = 0; x < w; ++x) {
            double v[3];
            for (int c = 0; c < nchan; ++c) {
                const std::size_t o = (static_cast<std::size_t>(x) * nchan + c) * bytes;
                v[c] = bytes == 2 ? static_cast<double>((row[o] << 8) | row[o + 1])
                                  : static_cast<double>(row[o]);
            }
            img.set_rgb(static_cast<int>(x), static_cast<int>(y),
                        gray ? Rgb{v[0], v[0], v[0]} : Rgb{v[0], v[1], v[2]});
        }
    }
    return img;
}

inline void save_ppm16(const std::string& path, const LinearImage& img, double max_value) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image: " + path);
    out << "P6\n" << img.width() << ' ' << img.height() << "\n65535\n";
    const double scale = 65535.0 / max_value;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()) * 6);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(img.at(c, x, y) * scale, 0.0, 65535.0);
                const std::uint16_t q = static_cast<std::uint16_t>(std::lround(v));
                row[static_cast<std::size_t>(x) * 6 + c * 2] = static_cast<std::uint8_t>(q >> 8);
                row[static_cast<std::size_t>(x) * 6 + c * 2 + 1] = static_cast<std::uint8_t>(q & 0xff);
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw IoError("write failed: " + path);
}

// --- PFM (float) -----------------------------------------------------------

inline LinearImage load_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path);
    std::string magic, tok;
    if (ppm_next_token(in, magic) < 0 || (magic != "PF" && magic != "Pf"))
        throw IoError("not a pfm file: " + path);
    const bool color = magic == "PF";
    if (ppm_next_token(in, tok) < 0) throw IoError("truncated pfm header: " + path);
    const long w = std::stol(tok);
    if (ppm_next_token(in, tok) < 0) throw IoError("truncated pfm header: " + path);
    const long h = std::stol(tok);
    if (ppm_next_token(in, tok) < 0) throw IoError("truncated pfm header: " + path);
    const double scale = std::stod(tok);
    const bool little_endian = scale < 0;
    if (w <= 0 || h <= 0) throw IoError("bad pfm dimensions: " + path);

    LinearImage img(static_cast<int>(w), static_cast<int>(h), 0);
    const int nchan = color ? 3 : 1;
    std::vector<float> row(static_cast<std::size_t>(w) * nchan);
    for (long yy = h - 1; yy >= 0; --yy) {  // pfm scanlines run bottom-up
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
        if (!in) throw IoError("truncated pfm data: " + path);
        if (!little_endian) {
            for (float& f : row) {
                std::uint32_t u;
                std::memcpy(&u, &f, 4);
                u = __builtin_bswap32(u);
                std::memcpy(&f, &u, 4);
            }
        }
        for (long x = 0; x < w; ++x) {
            const float* px = row.data() + static_cast<std::size_t>(x) * nchan;
            img.set_rgb(static_cast<int>(x), static_cast<int>(yy),
                        color ? Rgb{px[0], px[1], px[2]} : Rgb{px[0], px[0], px[0]});
        }
    }
    return img;
}

inline void save_pfm(const std::string& path, const LinearImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image: " + path);
    out << "PF\n" << img.width() << ' ' << img.height() << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(img.width()) * 3);
    for (int y = img.height() - 1; y >= 0; --y) {
        for (int x = 0; x < img.width(); ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<std::size_t>(x) * 3 + c] = static_cast<float>(img.at(c, x, y));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("write failed: " + path);
}

/// Single-channel float raster ("Pf"), used for ratio maps.
inline void save_pfm_gray(const std::string& path, const std::vector<double>& plane, int w,
                          int h) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image: " + path);
    out << "Pf\n" << w << ' ' << h << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(w));
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x)
            row[static_cast<std::size_t>(x)] =
                static_cast<float>(plane[static_cast<std::size_t>(y) * w + x]);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

/// Decodes a raster by extension: PNG and TIFF (8/16-bit integer, float32
/// TIFF), PPM/PGM (8/16-bit, ASCII or binary), PFM (float). The recorded
/// bit_depth reflects the container (0 = float).
inline LinearImage load_image(const std::string& path) {
    if (detail::has_suffix(path, ".png")) return detail::load_png(path);
    if (detail::has_suffix(path, ".tif") || detail::has_suffix(path, ".tiff"))
        return detail::load_tiff(path);
    if (detail::has_suffix(path, ".ppm") || detail::has_suffix(path, ".pgm"))
        return detail::load_ppm(path);
    if (detail::has_suffix(path, ".pfm")) return detail::load_pfm(path);
    throw IoError("unsupported image extension: " + path);
}

/// Decode plus manifest preprocessing: subtracts the black level and clamps
/// at zero. Saturation handling stays with the caller via
/// entry.effective_saturation().
inline LinearImage load_image(const std::string& path, const ManifestEntry& entry) {
    LinearImage img = load_image(path);
    if (entry.black_level > 0) {
        for (int c = 0; c < 3; ++c) {
            double* p = img.plane(c);
            for (std::size_t i = 0; i < img.pixel_count(); ++i)
                p[i] = std::max(0.0, p[i] - entry.black_level);
        }
    }
    if (entry.exclusion_rect) {
        const auto& r = *entry.exclusion_rect;
        if (r[2] >= img.width() || r[3] >= img.height())
            throw IoError("exclusion rectangle exceeds image dimensions: " + path);
    }
    return img;
}

/// Writes by extension: .png / .ppm scale [0, max_value] into 16 bits,
/// .pfm stores floats unscaled.
inline void save_image(const std::string& path, const LinearImage& img,
                       double max_value = 0.0) {
    if (max_value <= 0) {
        max_value = img.container_max();
        if (std::isinf(max_value)) {
            max_value = 0.0;
            for (int c = 0; c < 3; ++c)
                for (std::size_t i = 0; i < img.pixel_count(); ++i)
                    max_value = std::max(max_value, img.plane(c)[i]);
            if (max_value <= 0) max_value = 1.0;
        }
    }
    if (detail::has_suffix(path, ".png")) return detail::save_png16(path, img, max_value);
    if (detail::has_suffix(path, ".tif") || detail::has_suffix(path, ".tiff"))
        return detail::save_tiff16(path, img, max_value);
    if (detail::has_suffix(path, ".ppm")) return detail::save_ppm16(path, img, max_value);
    if (detail::has_suffix(path, ".pfm")) return detail::save_pfm(path, img);
    throw IoError("unsupported output extension: " + path);
}

/// Von Kries diagonal correction: divides each channel by 3 * s_k, so a
/// correct estimate maps the illuminant to neutral.
inline LinearImage white_balance(const LinearImage& image, const Illuminant& estimate) {
    if (!(estimate.r > 0) || !(estimate.g > 0) || !(estimate.b > 0))
        throw std::invalid_argument("white_balance: estimate components must be positive");
    LinearImage out(image.width(), image.height(), image.bit_depth());
    const double k[3] = {1.0 / (3.0 * estimate.r), 1.0 / (3.0 * estimate.g),
                         1.0 / (3.0 * estimate.b)};
    for (int c = 0; c < 3; ++c) {
        const double* src = image.plane(c);
        double* dst = out.plane(c);
        for (std::size_t i = 0; i < image.pixel_count(); ++i) dst[i] = src[i] * k[c];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Per-image error CSV (import/export of benchmark error lists)
// ---------------------------------------------------------------------------

/// Reads "image_id,error_degrees" rows; a header line is skipped if present.
inline std::vector<std::pair<std::string, double>> read_error_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open error csv: " + path);
    std::vector<std::pair<std::string, double>> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("error csv line " + std::to_string(line_no) + ": missing comma");
        const std::string id = line.substr(0, comma);
        const std::string val = line.substr(comma + 1);
        try {
            out.emplace_back(id, std::stod(val));
        } catch (const std::exception&) {
            if (line_no == 1) continue;  // header
            throw ParseError("error csv line " + std::to_string(line_no) + ": bad number '" +
                             val + "'");
        }
    }
    return out;
}

inline void write_error_csv(const std::string& path,
                            const std::vector<std::pair<std::string, double>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write error csv: " + path);
    out << "image_id,error_degrees\n";
    for (const auto& [id, err] : rows) out << id << ',' << format_double(err) << '\n';
}

}  // namespace dcs
