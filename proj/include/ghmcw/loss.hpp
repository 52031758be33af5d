#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "ghmcw/category_stats.hpp"

namespace ghmcw {

/// Hyperparameters of the category-wise harmonized loss. Defaults are the
/// cross-validated values alpha = 0.9, N = 30, gamma = 0.8.
struct LossConfig {
    double alpha = 0.9;
    double gamma = 0.8;
    std::size_t region_count = 30;
    bool intra_balance = true;    // per-example density weights
    bool inter_balance = true;    // asymmetric logit margins
    bool adaptive_widths = true;  // adaptive region widths; false keeps them uniform
    bool normalize_batch_weights = false;
    double width_shift = std::numbers::e;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// log(sum_n exp(x_n)), max-shifted.
double log_sum_exp(std::span<const double> x);

/// p_n = exp(z_n + margin_n) / sum_k exp(z_k + margin_k).
std::vector<double> margin_softmax(std::span<const double> logits, std::span<const double> margin_row);

/// -weight * log(exp(z_m) / sum_n exp(z_n + M_n)). The true-class margin is
/// zero by construction of MarginMatrix, so the bare numerator is exact.
double margin_loss_forward(std::span<const double> logits, std::size_t label, double weight,
                           std::span<const double> margin_row);

/// d(loss)/dz_n = weight * (p_n - [n == label]). Weight and margins are constants.
std::vector<double> margin_loss_backward(std::span<const double> logits, std::size_t label,
                                         double weight, std::span<const double> margin_row);

/// Difficulty signal 1 - p_label of the margin-adjusted softmax, in [0, 1].
/// Computed as the sum of the non-target probabilities so small values keep
/// their precision.
double gradient_norm(std::span<const double> logits, std::size_t label,
                     std::span<const double> margin_row);

struct BatchResult {
    double loss = 0.0;
    std::vector<double> gradients;       // B x C row-major, gradient of the mean loss
    std::vector<double> gradient_norms;  // one per example
    std::vector<double> weights;         // one per example, after optional normalization
};

/// Mean margin-adjusted, density-weighted loss over a batch of logits
/// (B x C row-major). `stats` and `margins` may be null (cold start); the
/// config flags switch weights and margins off independently.
BatchResult batch_loss(std::span<const double> logits, std::size_t class_count,
                       std::span<const std::size_t> labels, const CategoryStats* stats,
                       const MarginMatrix* margins, const LossConfig& config);

}  // namespace ghmcw
