#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ghmcw {

enum class Group { many, medium, few, rare };

std::string_view group_name(Group g);

struct DatasetSpec {
    std::size_t class_count = 2;
    std::size_t max_class_size = 1000;
    double imbalance_factor = 100.0;
    std::size_t feature_dim = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

void to_json(nlohmann::json& j, const DatasetSpec& s);
void from_json(const nlohmann::json& j, DatasetSpec& s);

/// Row-major feature matrix with class labels. Class sizes and groups are
/// derived from the labels when the dataset is built.
class LabeledDataset {
public:
    LabeledDataset() = default;
    LabeledDataset(std::size_t feature_dim, std::size_t class_count, std::vector<double> features,
                   std::vector<std::size_t> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t feature_dim() const noexcept { return feature_dim_; }
    std::size_t class_count() const noexcept { return class_count_; }
    std::span<const double> features() const noexcept { return features_; }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(features_).subspan(i * feature_dim_, feature_dim_);
    }
    std::span<const std::size_t> labels() const noexcept { return labels_; }
    std::size_t label(std::size_t i) const { return labels_.at(i); }
    std::span<const std::size_t> class_sizes() const noexcept { return class_sizes_; }
    std::span<const Group> groups() const noexcept { return groups_; }

    friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

private:
    std::size_t feature_dim_ = 0;
    std::size_t class_count_ = 0;
    std::vector<double> features_;
    std::vector<std::size_t> labels_;
    std::vector<std::size_t> class_sizes_;
    std::vector<Group> groups_;
};

/// n_c = round(n_max * IF^(-c / (C - 1))), clamped to >= 1.
std::vector<std::size_t> longtailed_sizes(std::size_t class_count, std::size_t max_class_size,
                                          double imbalance_factor);

/// Classes ranked by descending size (ties by index) and cut into contiguous
/// rank quartiles. With fewer than four classes the ranks are spread over
/// the four groups so the largest is Many and the smallest Rare.
std::vector<Group> assign_groups(std::span<const std::size_t> class_sizes);

/// Gaussian mixture with long-tailed class sizes. `covariances` holds one
/// row-major d x d matrix per class; an empty vector means identity.
LabeledDataset synth_gaussian(const DatasetSpec& spec, std::span<const std::vector<double>> means,
                              std::span<const std::vector<double>> covariances = {});

/// Default class means: evenly spaced on a circle of the given radius in
/// the first two coordinates, starting at (-radius, 0).
std::vector<std::vector<double>> circle_means(std::size_t class_count, std::size_t feature_dim,
                                              double radius = 2.0);

/// Randomly drops examples so class c keeps longtailed_sizes(C, n_max, IF)[c]
/// examples, where n_max is the largest source class. Retained examples keep
/// their source order.
LabeledDataset subsample_longtailed(const LabeledDataset& source, double imbalance_factor,
                                    std::uint64_t seed);

/// CSV with header f0..f{d-1},label. Values are written in shortest
/// round-trip form.
void write_csv(const std::filesystem::path& path, const LabeledDataset& ds);

/// `class_count` = 0 infers it from the largest label.
LabeledDataset read_csv(const std::filesystem::path& path, std::size_t class_count = 0);

/// {"class_sizes": [...], "groups": [...]}
nlohmann::json sizes_record(const LabeledDataset& ds);

}  // namespace ghmcw
