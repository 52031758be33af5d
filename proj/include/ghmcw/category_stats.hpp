#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ghmcw/histogram.hpp"

namespace ghmcw {

/// Sum of v_i^alpha over the regions of a snapshot, with 0^alpha = 0.
/// Throws std::invalid_argument unless 0 < alpha <= 1.
double effective_size(const AdaptiveHistogram& snapshot, double alpha);

/// Per-category statistics derived from one epoch's histogram snapshots.
/// Immutable once built.
class CategoryStats {
public:
    CategoryStats(std::vector<AdaptiveHistogram> snapshots, double alpha);

    std::size_t category_count() const noexcept { return snapshots_.size(); }
    double alpha() const noexcept { return alpha_; }
    std::span<const double> effective_sizes() const noexcept { return effective_sizes_; }
    const AdaptiveHistogram& snapshot(std::size_t category) const { return snapshots_.at(category); }

    /// Intra-category weight S_c / max(v, v_floor)^alpha for an example of
    /// `category` whose gradient norm is g. v is looked up in the category's
    /// snapshot; v_floor is the smallest positive value in that snapshot
    /// (1 when the snapshot is empty). Returns 1 when S_c == 0.
    double example_weight(std::size_t category, double g) const;

private:
    std::vector<AdaptiveHistogram> snapshots_;
    std::vector<double> effective_sizes_;
    std::vector<double> floors_;
    double alpha_;
};

/// C x C logit margins, M[m][n] = gamma * log(min(1, S_n / S_m)).
///
/// Row m is used for examples whose true class is m. Entries are never
/// positive and the diagonal is zero. When S_m or S_n is zero the margin is
/// zero (no statistics for that pair).
class MarginMatrix {
public:
    /// All-zero matrix (cold start, inter-category balance off).
    explicit MarginMatrix(std::size_t category_count);

    std::size_t category_count() const noexcept { return size_; }
    double gamma() const noexcept { return gamma_; }
    double operator()(std::size_t m, std::size_t n) const { return entries_[m * size_ + n]; }
    std::span<const double> row(std::size_t m) const {
        return std::span<const double>(entries_).subspan(m * size_, size_);
    }

    friend MarginMatrix margin_matrix(std::span<const double> effective_sizes, double gamma);

private:
    std::size_t size_;
    double gamma_ = 0.0;
    std::vector<double> entries_;
};

MarginMatrix margin_matrix(std::span<const double> effective_sizes, double gamma);
MarginMatrix margin_matrix(const CategoryStats& stats, double gamma);

/// {"epoch", "effective_sizes", "margin_matrix"} record for experiment logs.
nlohmann::json stats_record(int epoch, const CategoryStats& stats, const MarginMatrix& margins);

}  // namespace ghmcw
