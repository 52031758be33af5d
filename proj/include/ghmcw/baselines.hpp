#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ghmcw {

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient;
};

/// Plain softmax cross-entropy, optionally scaled by a per-class weight.
LossAndGradient softmax_cross_entropy(std::span<const double> logits, std::size_t label,
                                      double weight = 1.0);

struct FocalConfig {
    double focusing = 2.0;
};

/// -(1 - p_label)^focusing * log p_label and its closed-form gradient.
LossAndGradient focal_forward_backward(std::span<const double> logits, std::size_t label,
                                       const FocalConfig& cfg);

struct EffectiveNumberConfig {
    double beta = 0.999;
};

/// Class weights proportional to (1 - beta) / (1 - beta^n_c), rescaled to
/// mean 1. Counts must all be >= 1 and 0 <= beta < 1.
std::vector<double> effective_number_weights(std::span<const std::size_t> class_counts,
                                             const EffectiveNumberConfig& cfg);

}  // namespace ghmcw
