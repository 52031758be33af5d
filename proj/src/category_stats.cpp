#include "ghmcw/category_stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace ghmcw {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("alpha must lie in (0, 1], got " + std::to_string(alpha));
    }
}

}  // namespace

double effective_size(const AdaptiveHistogram& snapshot, double alpha) {
    check_alpha(alpha);
    double total = 0.0;
    for (double v : snapshot.values()) {
        if (v > 0.0) total += alpha == 1.0 ? v : std::pow(v, alpha);
    }
    return total;
}

CategoryStats::CategoryStats(std::vector<AdaptiveHistogram> snapshots, double alpha)
    : snapshots_(std::move(snapshots)), alpha_(alpha) {
    check_alpha(alpha);
    if (snapshots_.empty()) {
        throw std::invalid_argument("category stats need at least one category");
    }
    effective_sizes_.reserve(snapshots_.size());
    floors_.reserve(snapshots_.size());
    for (const auto& s : snapshots_) {
        effective_sizes_.push_back(effective_size(s, alpha_));
        const double floor = s.min_positive_value();
        floors_.push_back(floor > 0.0 ? floor : 1.0);
    }
}

double CategoryStats::example_weight(std::size_t category, double g) const {
    if (category >= snapshots_.size()) {
        throw std::out_of_range("category index out of range");
    }
    const double s = effective_sizes_[category];
    const double v = snapshots_[category].density_at(g);
    if (s == 0.0) return 1.0;
    const double clamped = std::max(v, floors_[category]);
    return s / (alpha_ == 1.0 ? clamped : std::pow(clamped, alpha_));
}

MarginMatrix::MarginMatrix(std::size_t category_count)
    : size_(category_count), entries_(category_count * category_count, 0.0) {}

MarginMatrix margin_matrix(std::span<const double> effective_sizes, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw std::invalid_argument("gamma must be positive, got " + std::to_string(gamma));
    }
    const std::size_t c = effective_sizes.size();
    MarginMatrix out(c);
    out.gamma_ = gamma;
    for (std::size_t m = 0; m < c; ++m) {
        const double sm = effective_sizes[m];
        if (!(sm >= 0.0)) throw std::invalid_argument("effective sizes must be non-negative");
        for (std::size_t n = 0; n < c; ++n) {
            const double sn = effective_sizes[n];
            if (m == n || sm == 0.0 || sn == 0.0 || sn >= sm) continue;
            out.entries_[m * c + n] = gamma * std::log(sn / sm);
        }
    }
    return out;
}

MarginMatrix margin_matrix(const CategoryStats& stats, double gamma) {
    return margin_matrix(stats.effective_sizes(), gamma);
}

nlohmann::json stats_record(int epoch, const CategoryStats& stats, const MarginMatrix& margins) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t m = 0; m < margins.category_count(); ++m) {
        const auto r = margins.row(m);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    const auto s = stats.effective_sizes();
    return {{"epoch", epoch},
            {"effective_sizes", std::vector<double>(s.begin(), s.end())},
            {"margin_matrix", std::move(rows)}};
}

}  // namespace ghmcw
