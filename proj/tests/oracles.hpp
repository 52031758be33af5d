#pragma once

// Test-only reference implementations. Nothing here calls into the library
// code path it is used to check.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace ghmcw::oracle {

/// Softmax cross-entropy evaluated naively in extended precision.
inline double softmax_ce(std::span<const double> z, std::size_t label) {
    long double top = z[0];
    for (double v : z) top = std::max<long double>(top, v);
    long double sum = 0.0L;
    for (double v : z) sum += std::exp(static_cast<long double>(v) - top);
    return static_cast<double>(std::log(sum) + top - static_cast<long double>(z[label]));
}

/// Central differences of f at z with the given step.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::span<const double> z, double step) {
    std::vector<double> grad(z.size());
    std::vector<double> probe(z.begin(), z.end());
    for (std::size_t i = 0; i < z.size(); ++i) {
        probe[i] = z[i] + step;
        const double up = f(probe);
        probe[i] = z[i] - step;
        const double down = f(probe);
        probe[i] = z[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

/// max_i |a_i - b_i| / max(max_i |b_i|, floor)
inline double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-300) {
    double diff = 0.0, scale = floor;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / scale;
}

/// Region index by walking cumulative widths; the last region is closed.
inline std::size_t linear_scan_region(std::span<const double> widths, double g) {
    double upper = 0.0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        upper += widths[i];
        if (g < upper) return i;
    }
    return widths.size() - 1;
}

/// Random positive widths normalized to one.
inline std::vector<double> random_widths(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> w(n);
    double total = 0.0;
    for (double& v : w) total += (v = u(rng));
    for (double& v : w) v /= total;
    return w;
}

/// Random logits z ~ N(0, 3^2) and margins <= 0 with zero at the label.
struct LossCase {
    std::vector<double> logits;
    std::vector<double> margins;
    std::size_t label = 0;
    double weight = 1.0;
};

inline LossCase random_case(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> classes(2, 10);
    std::normal_distribution<double> normal(0.0, 3.0);
    std::uniform_real_distribution<double> margin(-3.0, 0.0);
    std::uniform_real_distribution<double> weight(0.1, 20.0);
    LossCase c;
    const std::size_t n = classes(rng);
    c.logits.resize(n);
    c.margins.resize(n);
    for (auto& v : c.logits) v = normal(rng);
    for (auto& v : c.margins) v = margin(rng);
    c.label = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    c.margins[c.label] = 0.0;
    c.weight = weight(rng);
    return c;
}

}  // namespace ghmcw::oracle
