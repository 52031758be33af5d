#include "ghmcw/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ghmcw/errors.hpp"

namespace ghmcw {

std::string_view group_name(Group g) {
    switch (g) {
        case Group::many: return "Many";
        case Group::medium: return "Medium";
        case Group::few: return "Few";
        case Group::rare: return "Rare";
    }
    return "?";
}

void DatasetSpec::validate() const {
    if (class_count < 2) throw std::invalid_argument("class_count must be >= 2");
    if (max_class_size < 1) throw std::invalid_argument("max_class_size must be >= 1");
    if (!(imbalance_factor >= 1.0) || !std::isfinite(imbalance_factor)) {
        throw std::invalid_argument("imbalance_factor must be >= 1");
    }
    if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
}

void to_json(nlohmann::json& j, const DatasetSpec& s) {
    j = nlohmann::json{{"class_count", s.class_count},
                       {"max_class_size", s.max_class_size},
                       {"imbalance_factor", s.imbalance_factor},
                       {"feature_dim", s.feature_dim},
                       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, DatasetSpec& s) {
    s.class_count = j.value("class_count", s.class_count);
    s.max_class_size = j.value("max_class_size", s.max_class_size);
    s.imbalance_factor = j.value("imbalance_factor", s.imbalance_factor);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.seed = j.value("seed", s.seed);
}

LabeledDataset::LabeledDataset(std::size_t feature_dim, std::size_t class_count,
                               std::vector<double> features, std::vector<std::size_t> labels)
    : feature_dim_(feature_dim), class_count_(class_count), features_(std::move(features)),
      labels_(std::move(labels)), class_sizes_(class_count, 0) {
    if (feature_dim_ == 0) throw std::invalid_argument("feature_dim must be >= 1");
    if (class_count_ == 0) throw std::invalid_argument("class_count must be >= 1");
    if (features_.size() != labels_.size() * feature_dim_) {
        throw std::invalid_argument("feature buffer does not match label count x feature_dim");
    }
    for (std::size_t y : labels_) {
        if (y >= class_count_) throw std::invalid_argument("label " + std::to_string(y) + " >= class_count");
        ++class_sizes_[y];
    }
    groups_ = assign_groups(class_sizes_);
}

std::vector<std::size_t> longtailed_sizes(std::size_t class_count, std::size_t max_class_size,
                                          double imbalance_factor) {
    if (class_count < 2) throw std::invalid_argument("class_count must be >= 2");
    if (max_class_size < 1) throw std::invalid_argument("max_class_size must be >= 1");
    if (!(imbalance_factor >= 1.0) || !std::isfinite(imbalance_factor)) {
        throw std::invalid_argument("imbalance_factor must be >= 1");
    }
    std::vector<std::size_t> sizes(class_count);
    const double last = static_cast<double>(class_count - 1);
    for (std::size_t c = 0; c < class_count; ++c) {
        const double n = static_cast<double>(max_class_size) *
                         std::pow(imbalance_factor, -static_cast<double>(c) / last);
        sizes[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n)));
    }
    return sizes;
}

std::vector<Group> assign_groups(std::span<const std::size_t> class_sizes) {
    const std::size_t c = class_sizes.size();
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return class_sizes[a] > class_sizes[b]; });
    std::vector<Group> groups(c, Group::many);
    for (std::size_t rank = 0; rank < c; ++rank) {
        std::size_t g = 0;
        if (c >= 4) {
            g = rank * 4 / c;
        } else if (c > 1) {
            g = static_cast<std::size_t>(std::llround(static_cast<double>(rank) * 3.0 /
                                                      static_cast<double>(c - 1)));
        }
        groups[order[rank]] = static_cast<Group>(g);
    }
    return groups;
}

std::vector<std::vector<double>> circle_means(std::size_t class_count, std::size_t feature_dim,
                                              double radius) {
    std::vector<std::vector<double>> means(class_count, std::vector<double>(feature_dim, 0.0));
    for (std::size_t c = 0; c < class_count; ++c) {
        const double angle = std::numbers::pi +
                             2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(class_count);
        means[c][0] = radius * std::cos(angle);
        if (feature_dim > 1) means[c][1] = radius * std::sin(angle);
    }
    return means;
}

LabeledDataset synth_gaussian(const DatasetSpec& spec, std::span<const std::vector<double>> means,
                              std::span<const std::vector<double>> covariances) {
    spec.validate();
    const std::size_t d = spec.feature_dim;
    if (means.size() != spec.class_count) throw std::invalid_argument("need one mean per class");
    if (!covariances.empty() && covariances.size() != spec.class_count) {
        throw std::invalid_argument("need one covariance per class");
    }

    std::vector<Eigen::MatrixXd> factors;
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        if (means[c].size() != d) throw std::invalid_argument("class mean has wrong dimension");
        if (covariances.empty()) {
            factors.push_back(Eigen::MatrixXd::Identity(d, d));
            continue;
        }
        if (covariances[c].size() != d * d) throw std::invalid_argument("covariance has wrong size");
        const Eigen::MatrixXd cov =
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                covariances[c].data(), d, d);
        if (!cov.isApprox(cov.transpose())) {
            throw std::invalid_argument("covariance of class " + std::to_string(c) + " is not symmetric");
        }
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() != Eigen::Success) {
            throw std::invalid_argument("covariance of class " + std::to_string(c) +
                                        " is not positive definite");
        }
        factors.push_back(llt.matrixL());
    }

    const auto sizes = longtailed_sizes(spec.class_count, spec.max_class_size, spec.imbalance_factor);
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<double> features;
    features.reserve(total * d);
    std::vector<std::size_t> labels;
    labels.reserve(total);

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(d);
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        const Eigen::Map<const Eigen::VectorXd> mean(means[c].data(), d);
        for (std::size_t i = 0; i < sizes[c]; ++i) {
            for (std::size_t k = 0; k < d; ++k) z[k] = normal(rng);
            const Eigen::VectorXd x = mean + factors[c] * z;
            features.insert(features.end(), x.data(), x.data() + d);
            labels.push_back(c);
        }
    }
    return LabeledDataset(d, spec.class_count, std::move(features), std::move(labels));
}

LabeledDataset subsample_longtailed(const LabeledDataset& source, double imbalance_factor,
                                    std::uint64_t seed) {
    const auto src_sizes = source.class_sizes();
    const std::size_t n_max = *std::max_element(src_sizes.begin(), src_sizes.end());
    const auto target = longtailed_sizes(source.class_count(), n_max, imbalance_factor);

    std::vector<std::vector<std::size_t>> members(source.class_count());
    for (std::size_t i = 0; i < source.size(); ++i) members[source.label(i)].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<bool> keep(source.size(), false);
    for (std::size_t c = 0; c < source.class_count(); ++c) {
        if (members[c].size() < target[c]) {
            throw std::invalid_argument("class " + std::to_string(c) + " has " +
                                        std::to_string(members[c].size()) + " examples, needs " +
                                        std::to_string(target[c]));
        }
        std::shuffle(members[c].begin(), members[c].end(), rng);
        for (std::size_t k = 0; k < target[c]; ++k) keep[members[c][k]] = true;
    }

    std::vector<double> features;
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (!keep[i]) continue;
        const auto r = source.row(i);
        features.insert(features.end(), r.begin(), r.end());
        labels.push_back(source.label(i));
    }
    return LabeledDataset(source.feature_dim(), source.class_count(), std::move(features),
                          std::move(labels));
}

namespace {

void append_number(std::string& out, double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

double parse_double(std::string_view s, const std::filesystem::path& path, std::size_t line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw std::invalid_argument(path.string() + ":" + std::to_string(line) + ": bad number '" +
                                    std::string(s) + "'");
    }
    return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const LabeledDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    std::string text;
    for (std::size_t k = 0; k < ds.feature_dim(); ++k) text += "f" + std::to_string(k) + ",";
    text += "label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (double v : ds.row(i)) {
            append_number(text, v);
            text += ',';
        }
        text += std::to_string(ds.label(i));
        text += '\n';
    }
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

LabeledDataset read_csv(const std::filesystem::path& path, std::size_t class_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_commas(line);
    if (header.size() < 2 || header.back() != "label") {
        throw std::invalid_argument(path.string() + ": header must be f0,...,f{d-1},label");
    }
    const std::size_t d = header.size() - 1;
    for (std::size_t k = 0; k < d; ++k) {
        if (header[k] != "f" + std::to_string(k)) {
            throw std::invalid_argument(path.string() + ": unexpected column '" + std::string(header[k]) + "'");
        }
    }

    std::vector<double> features;
    std::vector<std::size_t> labels;
    std::size_t line_no = 1;
    std::size_t max_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != d + 1) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                        ": expected " + std::to_string(d + 1) + " columns");
        }
        for (std::size_t k = 0; k < d; ++k) features.push_back(parse_double(cells[k], path, line_no));
        std::size_t y = 0;
        const auto lab = cells[d];
        const auto res = std::from_chars(lab.data(), lab.data() + lab.size(), y);
        if (res.ec != std::errc{} || res.ptr != lab.data() + lab.size()) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) + ": bad label");
        }
        labels.push_back(y);
        max_label = std::max(max_label, y);
    }
    if (labels.empty()) throw std::invalid_argument(path.string() + ": no data rows");
    if (class_count == 0) class_count = max_label + 1;
    return LabeledDataset(d, class_count, std::move(features), std::move(labels));
}

nlohmann::json sizes_record(const LabeledDataset& ds) {
    nlohmann::json groups = nlohmann::json::array();
    for (Group g : ds.groups()) groups.push_back(group_name(g));
    const auto sizes = ds.class_sizes();
    return {{"class_sizes", std::vector<std::size_t>(sizes.begin(), sizes.end())},
            {"groups", std::move(groups)},
            {"grouping", "rank quartiles of descending class size, ties by class index"}};
}

}  // namespace ghmcw
