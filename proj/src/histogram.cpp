#include "ghmcw/histogram.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace ghmcw {

namespace {

constexpr double kWidthSumTolerance = 1e-9;

void check_norm(double g) {
    if (!(g >= 0.0 && g <= 1.0)) {
        throw std::invalid_argument("gradient norm outside [0, 1]: " + std::to_string(g));
    }
}

}  // namespace

AdaptiveHistogram::AdaptiveHistogram(std::size_t region_count) {
    if (region_count < 2) {
        throw std::invalid_argument("histogram needs at least 2 regions, got " +
                                    std::to_string(region_count));
    }
    init_geometry(std::vector<double>(region_count, 1.0 / static_cast<double>(region_count)));
}

AdaptiveHistogram AdaptiveHistogram::from_widths(std::vector<double> widths) {
    AdaptiveHistogram h;
    h.init_geometry(std::move(widths));
    return h;
}

AdaptiveHistogram AdaptiveHistogram::from_parts(std::vector<double> widths,
                                                std::span<const double> values) {
    AdaptiveHistogram h = from_widths(std::move(widths));
    if (values.size() != h.region_count()) {
        throw std::invalid_argument("histogram values/widths size mismatch");
    }
    const double n = static_cast<double>(h.region_count());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]) || values[i] < 0.0) {
            throw std::invalid_argument("histogram values must be finite and non-negative");
        }
        h.values_[i] = values[i];
        h.mass_[i] = h.uniform_ ? values[i] : values[i] * n * h.widths_[i];
    }
    return h;
}

void AdaptiveHistogram::init_geometry(std::vector<double> widths) {
    const std::size_t n = widths.size();
    if (n < 2) {
        throw std::invalid_argument("histogram needs at least 2 regions");
    }
    double sum = 0.0;
    for (double d : widths) {
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw std::invalid_argument("histogram widths must be positive and finite");
        }
        sum += d;
    }
    if (std::abs(sum - 1.0) > kWidthSumTolerance) {
        throw std::invalid_argument("histogram widths must sum to 1, got " + std::to_string(sum));
    }

    widths_ = std::move(widths);
    uniform_ = std::all_of(widths_.begin(), widths_.end(),
                           [&](double d) { return d == widths_.front(); });
    const double nd = static_cast<double>(n);

    boundaries_.resize(n + 1);
    boundaries_[0] = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        // i/N is exact at representable boundaries such as 0.5; a running sum of 1/N is not.
        boundaries_[i] = uniform_ ? static_cast<double>(i) / nd : boundaries_[i - 1] + widths_[i - 1];
        if (!(boundaries_[i] > boundaries_[i - 1]) || boundaries_[i] >= 1.0) {
            throw std::invalid_argument("histogram boundaries are not strictly increasing");
        }
    }
    boundaries_[n] = 1.0;

    increment_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        increment_[i] = uniform_ ? 1.0 : 1.0 / (nd * widths_[i]);
    }
    mass_.assign(n, 0.0);
    values_.assign(n, 0.0);
}

std::size_t AdaptiveHistogram::locate_region(double g) const {
    check_norm(g);
    // Search the interior boundaries b_1 .. b_{N-1}.
    const auto first = boundaries_.begin() + 1;
    const auto last = boundaries_.end() - 1;
    return static_cast<std::size_t>(std::upper_bound(first, last, g) - first);
}

void AdaptiveHistogram::accumulate(double g) {
    const std::size_t i = locate_region(g);
    mass_[i] += 1.0;
    refresh_value(i);
}

double AdaptiveHistogram::density_at(double g) const {
    return values_[locate_region(g)];
}

double AdaptiveHistogram::mass() const noexcept {
    return std::accumulate(mass_.begin(), mass_.end(), 0.0);
}

double AdaptiveHistogram::min_positive_value() const noexcept {
    double best = 0.0;
    for (double v : values_) {
        if (v > 0.0 && (best == 0.0 || v < best)) best = v;
    }
    return best;
}

AdaptiveHistogram AdaptiveHistogram::reassigned(double shift) const {
    if (!(shift > 1.0) || !std::isfinite(shift)) {
        throw std::invalid_argument("width shift must be finite and > 1");
    }
    const std::size_t n = region_count();
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) {
        raw[i] = 1.0 / std::log(shift + values_[i]);
    }
    if (std::all_of(raw.begin(), raw.end(), [&](double w) { return w == raw.front(); })) {
        return AdaptiveHistogram(n);
    }
    const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
    for (double& w : raw) w /= total;
    return from_widths(std::move(raw));
}

AdaptiveHistogram AdaptiveHistogram::reset() const {
    AdaptiveHistogram h = *this;
    std::fill(h.mass_.begin(), h.mass_.end(), 0.0);
    std::fill(h.values_.begin(), h.values_.end(), 0.0);
    return h;
}

AdaptiveHistogram merge(const AdaptiveHistogram& a, const AdaptiveHistogram& b) {
    if (a.widths_ != b.widths_) {
        throw std::invalid_argument("cannot merge histograms with different widths");
    }
    AdaptiveHistogram out = a;
    for (std::size_t i = 0; i < out.region_count(); ++i) {
        out.mass_[i] += b.mass_[i];
        out.refresh_value(i);
    }
    return out;
}

void to_json(nlohmann::json& j, const AdaptiveHistogram& h) {
    j = nlohmann::json{{"region_count", h.region_count()},
                       {"widths", std::vector<double>(h.widths().begin(), h.widths().end())},
                       {"values", std::vector<double>(h.values().begin(), h.values().end())}};
}

AdaptiveHistogram histogram_from_json(const nlohmann::json& j) {
    auto widths = j.at("widths").get<std::vector<double>>();
    const auto values = j.at("values").get<std::vector<double>>();
    if (j.at("region_count").get<std::size_t>() != widths.size()) {
        throw std::invalid_argument("histogram region_count does not match widths");
    }
    return AdaptiveHistogram::from_parts(std::move(widths), values);
}

}  // namespace ghmcw
