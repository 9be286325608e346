#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcs {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// File could not be decoded or written.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input is structurally valid but carries no usable signal for the requested
/// statistic (e.g. a constant image fed to an edge-based estimator).
struct DegenerateInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// No estimate can be produced at all (e.g. every pixel saturated or masked).
struct UnrecoverableInputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Manifest or report parse failure; the message carries the line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Small vector types
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0, y = 0, z = 0;

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }

    Vec3 normalized() const {
        const double n = norm();
        if (n <= 0)
            throw std::invalid_argument("cannot normalize a zero vector");
        return {x / n, y / n, z / n};
    }
};

/// Plain RGB triple; used for object colors and per-pixel values.
struct Rgb {
    double r = 0, g = 0, b = 0;

    double sum() const { return r + g + b; }
    Rgb operator*(double s) const { return {r * s, g * s, b * s}; }
    Rgb operator+(const Rgb& o) const { return {r + o.r, g + o.g, b + o.b}; }
};

/// Unit-sum RGB description of a light source. Producers in this library
/// always emit components summing to 1 (within rounding).
struct Illuminant {
    double r = 0, g = 0, b = 0;

    double sum() const { return r + g + b; }
};

/// Normalizes an arbitrary non-negative triple to unit sum.
inline Illuminant normalize_illuminant(double r, double g, double b) {
    const double s = r + g + b;
    if (!(s > 0))
        throw std::invalid_argument("illuminant must have a positive component sum");
    return {r / s, g / s, b / s};
}

inline Illuminant normalize_illuminant(const Rgb& c) {
    return normalize_illuminant(c.r, c.g, c.b);
}

// ---------------------------------------------------------------------------
// LinearImage
// ---------------------------------------------------------------------------

/// A width x height x 3 raster of non-negative linear radiance values,
/// stored as doubles in plane-major order. bit_depth records the source
/// container depth (8, 12 or 16; 0 means float data).
class LinearImage {
public:
    LinearImage() = default;

    LinearImage(int width, int height, int bit_depth = 0)
        : width_(width), height_(height), bit_depth_(bit_depth) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("image dimensions must be positive");
        data_.assign(static_cast<std::size_t>(width) * height * 3, 0.0);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int bit_depth() const { return bit_depth_; }
    void set_bit_depth(int d) { bit_depth_ = d; }

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width_) * height_;
    }

    double at(int c, int x, int y) const { return data_[index(c, x, y)]; }
    double& at(int c, int x, int y) { return data_[index(c, x, y)]; }

    Rgb rgb(int x, int y) const { return {at(0, x, y), at(1, x, y), at(2, x, y)}; }

    void set_rgb(int x, int y, const Rgb& v) {
        at(0, x, y) = v.r;
        at(1, x, y) = v.g;
        at(2, x, y) = v.b;
    }

    const double* plane(int c) const { return data_.data() + static_cast<std::size_t>(c) * pixel_count(); }
    double* plane(int c) { return data_.data() + static_cast<std::size_t>(c) * pixel_count(); }

    /// Largest representable value of the source container, or +inf for float.
    double container_max() const {
        if (bit_depth_ <= 0)
            return std::numeric_limits<double>::infinity();
        return std::ldexp(1.0, bit_depth_) - 1.0;
    }

    bool same_dims(int w, int h) const { return width_ == w && height_ == h; }

private:
    std::size_t index(int c, int x, int y) const {
        return static_cast<std::size_t>(c) * pixel_count() +
               static_cast<std::size_t>(y) * width_ + x;
    }

    int width_ = 0;
    int height_ = 0;
    int bit_depth_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// BinaryMask
// ---------------------------------------------------------------------------

class BinaryMask {
public:
    BinaryMask() = default;

    BinaryMask(int width, int height, bool value = false)
        : width_(width), height_(height),
          bits_(static_cast<std::size_t>(width) * height, value ? 1 : 0) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("mask dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }

    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

    std::size_t size() const { return bits_.size(); }

    std::size_t count() const {
        std::size_t n = 0;
        for (std::uint8_t b : bits_) n += b;
        return n;
    }

    const std::vector<std::uint8_t>& data() const { return bits_; }
    std::vector<std::uint8_t>& data() { return bits_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

inline constexpr double kPi = 3.14159265358979323846;

inline double degrees(double radians) { return radians * (180.0 / kPi); }
inline double radians(double deg) { return deg * (kPi / 180.0); }

}  // namespace dcs
