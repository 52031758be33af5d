#include "ghmcw/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace ghmcw {

std::string_view architecture_name(Architecture a) {
    return a == Architecture::linear ? "linear" : "mlp";
}

Architecture parse_architecture(std::string_view name) {
    if (name == "linear") return Architecture::linear;
    if (name == "mlp") return Architecture::mlp;
    throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = normal(rng);
    }
    return layer;
}

}  // namespace

Model::Model(Architecture arch, std::size_t feature_dim, std::size_t class_count,
             std::size_t hidden_dim, std::uint64_t seed)
    : arch_(arch), feature_dim_(feature_dim), class_count_(class_count),
      hidden_dim_(arch == Architecture::mlp ? hidden_dim : 0) {
    if (feature_dim == 0) throw std::invalid_argument("feature_dim must be >= 1");
    if (class_count < 2) throw std::invalid_argument("class_count must be >= 2");
    if (arch == Architecture::mlp && hidden_dim == 0) {
        throw std::invalid_argument("mlp needs hidden_dim >= 1");
    }
    std::mt19937_64 rng(seed);
    if (arch_ == Architecture::linear) {
        layers_.push_back(make_layer(feature_dim, class_count, rng));
    } else {
        layers_.push_back(make_layer(feature_dim, hidden_dim_, rng));
        layers_.push_back(make_layer(hidden_dim_, class_count, rng));
    }
}

Model::Trace Model::forward(const RowMatrix& input) const {
    if (static_cast<std::size_t>(input.cols()) != feature_dim_) {
        throw std::invalid_argument("input has wrong feature dimension");
    }
    Trace t;
    t.input = input;
    if (arch_ == Architecture::linear) {
        t.logits = (input * layers_[0].weight.transpose()).rowwise() + layers_[0].bias.transpose();
        return t;
    }
    t.hidden = ((input * layers_[0].weight.transpose()).rowwise() + layers_[0].bias.transpose())
                   .cwiseMax(0.0);
    t.logits = (t.hidden * layers_[1].weight.transpose()).rowwise() + layers_[1].bias.transpose();
    return t;
}

std::vector<DenseLayer> Model::backward(const Trace& trace, const RowMatrix& logit_grad) const {
    std::vector<DenseLayer> grads(layers_.size());
    if (arch_ == Architecture::linear) {
        grads[0].weight = logit_grad.transpose() * trace.input;
        grads[0].bias = logit_grad.colwise().sum().transpose();
        return grads;
    }
    grads[1].weight = logit_grad.transpose() * trace.hidden;
    grads[1].bias = logit_grad.colwise().sum().transpose();
    RowMatrix hidden_grad = logit_grad * layers_[1].weight;
    hidden_grad = hidden_grad.cwiseProduct((trace.hidden.array() > 0.0).cast<double>().matrix());
    grads[0].weight = hidden_grad.transpose() * trace.input;
    grads[0].bias = hidden_grad.colwise().sum().transpose();
    return grads;
}

std::size_t Model::predict(std::span<const double> x) const {
    if (x.size() != feature_dim_) throw std::invalid_argument("input has wrong feature dimension");
    RowMatrix in(1, static_cast<Eigen::Index>(feature_dim_));
    for (std::size_t k = 0; k < feature_dim_; ++k) in(0, static_cast<Eigen::Index>(k)) = x[k];
    const auto t = forward(in);
    Eigen::Index best = 0;
    t.logits.row(0).maxCoeff(&best);
    return static_cast<std::size_t>(best);
}

bool operator==(const Model& a, const Model& b) {
    if (a.arch_ != b.arch_ || a.feature_dim_ != b.feature_dim_ || a.class_count_ != b.class_count_ ||
        a.hidden_dim_ != b.hidden_dim_ || a.layers_.size() != b.layers_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        if (a.layers_[i].weight != b.layers_[i].weight || a.layers_[i].bias != b.layers_[i].bias) return false;
    }
    return true;
}

void to_json(nlohmann::json& j, const Model& m) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : m.layers()) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(l.weight.cols()));
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) row[static_cast<std::size_t>(c)] = l.weight(r, c);
            rows.push_back(std::move(row));
        }
        layers.push_back({{"weight", std::move(rows)},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    }
    j = nlohmann::json{{"architecture", architecture_name(m.architecture())},
                       {"feature_dim", m.feature_dim()},
                       {"class_count", m.class_count()},
                       {"hidden_dim", m.hidden_dim()},
                       {"layers", std::move(layers)}};
}

Model model_from_json(const nlohmann::json& j) {
    Model m(parse_architecture(j.at("architecture").get<std::string>()), j.at("feature_dim").get<std::size_t>(),
            j.at("class_count").get<std::size_t>(), j.value("hidden_dim", std::size_t{0}));
    const auto& layers = j.at("layers");
    if (layers.size() != m.layers().size()) throw std::invalid_argument("checkpoint has wrong layer count");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& dst = m.layers()[i];
        const auto rows = layers[i].at("weight").get<std::vector<std::vector<double>>>();
        const auto bias = layers[i].at("bias").get<std::vector<double>>();
        if (rows.size() != static_cast<std::size_t>(dst.weight.rows()) ||
            bias.size() != static_cast<std::size_t>(dst.bias.size())) {
            throw std::invalid_argument("checkpoint layer " + std::to_string(i) + " has wrong shape");
        }
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != static_cast<std::size_t>(dst.weight.cols())) {
                throw std::invalid_argument("checkpoint layer " + std::to_string(i) + " has wrong shape");
            }
            for (std::size_t c = 0; c < rows[r].size(); ++c) {
                dst.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
            }
        }
        for (std::size_t k = 0; k < bias.size(); ++k) dst.bias[static_cast<Eigen::Index>(k)] = bias[k];
    }
    return m;
}

}  // namespace ghmcw
