#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace ghmcw {

enum class Architecture { linear, mlp };

std::string_view architecture_name(Architecture a);
Architecture parse_architecture(std::string_view name);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// Linear classifier or one-hidden-layer ReLU network.
class Model {
public:
    /// Weights drawn from N(0, 1/fan_in) with the given seed, biases zero.
    Model(Architecture arch, std::size_t feature_dim, std::size_t class_count,
          std::size_t hidden_dim = 0, std::uint64_t seed = 0);

    Architecture architecture() const noexcept { return arch_; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }
    std::size_t class_count() const noexcept { return class_count_; }
    std::size_t hidden_dim() const noexcept { return hidden_dim_; }
    std::span<const DenseLayer> layers() const noexcept { return layers_; }
    std::span<DenseLayer> layers() noexcept { return layers_; }

    /// Activations kept by forward() for backward().
    struct Trace {
        RowMatrix input;
        RowMatrix hidden;  // post-ReLU, empty for linear models
        RowMatrix logits;
    };

    /// Logits for a batch of row-major inputs (B x feature_dim).
    Trace forward(const RowMatrix& input) const;

    /// Gradients of every layer given dLoss/dLogits (B x C).
    std::vector<DenseLayer> backward(const Trace& trace, const RowMatrix& logit_grad) const;

    /// Predicted class of a single feature vector.
    std::size_t predict(std::span<const double> x) const;

    friend bool operator==(const Model& a, const Model& b);

private:
    Architecture arch_;
    std::size_t feature_dim_;
    std::size_t class_count_;
    std::size_t hidden_dim_;
    std::vector<DenseLayer> layers_;
};

void to_json(nlohmann::json& j, const Model& m);
Model model_from_json(const nlohmann::json& j);

}  // namespace ghmcw
