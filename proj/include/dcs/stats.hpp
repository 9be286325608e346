#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dcs/image.hpp"

namespace dcs {

/// Angle between two illuminant vectors, in degrees. The cosine is clamped to
/// [-1, 1] before acos to absorb rounding on near-identical inputs.
inline double angular_error(const Illuminant& truth, const Illuminant& estimate) {
    const double nt = std::sqrt(truth.r * truth.r + truth.g * truth.g + truth.b * truth.b);
    const double ne = std::sqrt(estimate.r * estimate.r + estimate.g * estimate.g +
                                estimate.b * estimate.b);
    if (!(nt > 0) || !(ne > 0))
        throw std::invalid_argument("angular_error: vectors must be nonzero");
    const double dot = truth.r * estimate.r + truth.g * estimate.g + truth.b * estimate.b;
    const double c = std::min(1.0, std::max(-1.0, dot / (nt * ne)));
    return degrees(std::acos(c));
}

struct ErrorSummary {
    double median = 0;
    double mean = 0;
    double trimean = 0;
    double best25 = 0;
    double worst25 = 0;
};

namespace detail {

/// Median of sorted[lo, hi) (half-open), midpoint rule for even counts.
inline double median_of(const std::vector<double>& sorted, std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    const std::size_t mid = lo + n / 2;
    if (n % 2 == 1) return sorted[mid];
    return 0.5 * (sorted[mid - 1] + sorted[mid]);
}

}  // namespace detail

/// Order statistics over a set of angular errors: median, mean,
/// trimean (Q1 + 2*median + Q3)/4 with Tukey-hinge quartiles, and the means
/// of the ceil(n/4) smallest / largest values.
inline ErrorSummary summarize(std::span<const double> errors) {
    if (errors.empty())
        throw std::invalid_argument("summarize: empty error list");
    std::vector<double> s(errors.begin(), errors.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();

    ErrorSummary out;
    out.median = detail::median_of(s, 0, n);

    double total = 0;
    for (double v : s) total += v;
    out.mean = total / static_cast<double>(n);

    // Tukey hinges: each half includes the middle element when n is odd.
    const std::size_t half = n / 2;
    const double q1 = detail::median_of(s, 0, n % 2 == 1 ? half + 1 : half);
    const double q3 = detail::median_of(s, n % 2 == 1 ? half : half, n);
    out.trimean = (q1 + 2.0 * out.median + q3) / 4.0;

    const std::size_t q = (n + 3) / 4;  // ceil(n/4)
    double lo = 0, hi = 0;
    for (std::size_t i = 0; i < q; ++i) {
        lo += s[i];
        hi += s[n - 1 - i];
    }
    out.best25 = lo / static_cast<double>(q);
    out.worst25 = hi / static_cast<double>(q);
    return out;
}

struct SignTestResult {
    int verdict = 0;           // +1: a significantly lower, -1: higher, 0: no evidence
    double confidence = 0.95;
};

namespace detail {

/// log C(n, k) via lgamma.
inline double log_choose(unsigned n, unsigned k) {
    return std::lgamma(static_cast<double>(n) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

/// P(X <= k) for X ~ Binomial(n, 1/2), exact summation in log space.
inline double binomial_cdf_half(unsigned k, unsigned n) {
    const double log_half = -static_cast<double>(n) * std::log(2.0);
    double p = 0.0;
    for (unsigned i = 0; i <= k; ++i)
        p += std::exp(log_choose(n, i) + log_half);
    return std::min(p, 1.0);
}

}  // namespace detail

/// Paired two-sided exact binomial sign test on sign(a_i - b_i); ties are
/// dropped. Verdict +1 means a's errors are significantly lower than b's at
/// the given confidence.
inline SignTestResult sign_test(std::span<const double> a, std::span<const double> b,
                                double confidence = 0.95) {
    if (a.size() != b.size())
        throw std::invalid_argument("sign_test: paired lists must have equal length");
    if (a.size() < 6)
        throw std::invalid_argument("sign_test: need at least 6 paired samples");
    if (!(confidence > 0 && confidence < 1))
        throw std::invalid_argument("sign_test: confidence must lie in (0, 1)");

    unsigned wins_a = 0, wins_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < b[i])
            ++wins_a;
        else if (b[i] < a[i])
            ++wins_b;
    }
    const unsigned m = wins_a + wins_b;
    SignTestResult out;
    out.confidence = confidence;
    if (m == 0) return out;

    const unsigned tail = std::min(wins_a, wins_b);
    const double p = std::min(1.0, 2.0 * detail::binomial_cdf_half(tail, m));
    if (p < 1.0 - confidence)
        out.verdict = wins_a > wins_b ? +1 : -1;
    return out;
}

/// Pairwise sign-test verdicts for a set of methods with paired per-image
/// errors, plus the per-method score (count of +1 entries in its row).
struct WstResult {
    std::vector<std::string> methods;
    std::vector<int> verdicts;  // row-major, methods.size()^2
    std::vector<int> scores;

    int at(std::size_t i, std::size_t j) const { return verdicts[i * methods.size() + j]; }
};

inline WstResult wst_matrix(
    const std::vector<std::pair<std::string, std::vector<double>>>& method_errors,
    double confidence = 0.95) {
    WstResult out;
    const std::size_t k = method_errors.size();
    out.methods.reserve(k);
    for (const auto& [name, errs] : method_errors) {
        out.methods.push_back(name);
        if (errs.size() != method_errors.front().second.size())
            throw std::invalid_argument("wst_matrix: error lists must be paired per image");
    }
    out.verdicts.assign(k * k, 0);
    out.scores.assign(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const int v = sign_test(method_errors[i].second, method_errors[j].second,
                                    confidence).verdict;
            out.verdicts[i * k + j] = v;
            out.verdicts[j * k + i] = -v;
        }
    }
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            if (out.verdicts[i * k + j] > 0) ++out.scores[i];
    return out;
}

}  // namespace dcs
