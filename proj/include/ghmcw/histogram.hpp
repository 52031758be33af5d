#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ghmcw {

/// Gradient-norm density estimate over [0, 1] built from N unit regions.
///
/// Each region i has a width d_i (the widths sum to 1) and a value v_i. An
/// observation g adds 1 / (N * d_i) to the value of the region containing
/// it, so v_i is a density-normalized count: with uniform widths it is the
/// plain number of observations in the region.
///
/// Regions are half-open [b_i, b_{i+1}) except the last one, which is
/// closed so that g = 1 is representable.
///
/// Internally the histogram keeps per-region mass m_i = v_i * N * d_i (the
/// number of observations for live histograms) and derives v_i from it in a
/// single multiplication. This keeps merge() and sequential accumulation
/// bit-identical for arbitrary widths.
class AdaptiveHistogram {
public:
    /// Uniform widths 1/N, all values zero. Throws std::invalid_argument for N < 2.
    explicit AdaptiveHistogram(std::size_t region_count);

    /// Histogram with the given widths and zero values. Widths must be
    /// positive and sum to 1 within 1e-9.
    static AdaptiveHistogram from_widths(std::vector<double> widths);

    /// Histogram with explicit widths and values (snapshots, fixtures,
    /// deserialization). Values must be finite and non-negative.
    static AdaptiveHistogram from_parts(std::vector<double> widths,
                                        std::span<const double> values);

    std::size_t region_count() const noexcept { return widths_.size(); }
    std::span<const double> widths() const noexcept { return widths_; }
    std::span<const double> values() const noexcept { return values_; }
    std::span<const double> boundaries() const noexcept { return boundaries_; }
    bool uniform() const noexcept { return uniform_; }

    /// Index i with b_i <= g < b_{i+1}; g == 1 maps to the last region.
    std::size_t locate_region(double g) const;

    /// v_i += 1 / (N * d_i) for the region containing g.
    void accumulate(double g);

    /// v_i of the region containing g.
    double density_at(double g) const;

    /// Sum of v_i * N * d_i. Equals the number of accumulated observations.
    double mass() const noexcept;

    /// Smallest strictly positive value, or 0 when the histogram is empty.
    double min_positive_value() const noexcept;

    /// Adaptive width update run at epoch end. Raw widths are
    /// 1 / log(shift + v_i), normalized to sum to one; values are reset.
    /// Regions with high density become narrow. `this` is left untouched
    /// and serves as the snapshot for the next epoch's weight lookups.
    AdaptiveHistogram reassigned(double shift = std::numbers::e) const;

    /// Same widths, values reset to zero (fixed-width mode).
    AdaptiveHistogram reset() const;

    /// Element-wise value sum. Throws std::invalid_argument if widths differ.
    friend AdaptiveHistogram merge(const AdaptiveHistogram& a, const AdaptiveHistogram& b);

    friend bool operator==(const AdaptiveHistogram& a, const AdaptiveHistogram& b) {
        return a.widths_ == b.widths_ && a.values_ == b.values_;
    }

private:
    AdaptiveHistogram() = default;
    void init_geometry(std::vector<double> widths);
    void refresh_value(std::size_t i) { values_[i] = mass_[i] * increment_[i]; }

    std::vector<double> widths_;
    std::vector<double> boundaries_;
    std::vector<double> increment_;  // 1 / (N * d_i)
    std::vector<double> mass_;
    std::vector<double> values_;
    bool uniform_ = false;
};

/// {"region_count": N, "widths": [...], "values": [...]}
void to_json(nlohmann::json& j, const AdaptiveHistogram& h);
AdaptiveHistogram histogram_from_json(const nlohmann::json& j);

}  // namespace ghmcw
