#include "ghmcw/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "ghmcw/loss.hpp"

namespace ghmcw {

LossAndGradient softmax_cross_entropy(std::span<const double> logits, std::size_t label, double weight) {
    const std::vector<double> zero(logits.size(), 0.0);
    return {margin_loss_forward(logits, label, weight, zero),
            margin_loss_backward(logits, label, weight, zero)};
}

LossAndGradient focal_forward_backward(std::span<const double> logits, std::size_t label,
                                       const FocalConfig& cfg) {
    if (!(cfg.focusing >= 0.0) || !std::isfinite(cfg.focusing)) {
        throw std::invalid_argument("focal focusing parameter must be >= 0");
    }
    const std::vector<double> zero(logits.size(), 0.0);
    const auto p = margin_softmax(logits, zero);  // validates logits
    if (label >= logits.size()) throw std::invalid_argument("label out of range");

    const double gamma = cfg.focusing;
    const double log_p = logits[label] - log_sum_exp(logits);
    double q = 0.0;  // 1 - p_label without cancellation
    for (std::size_t n = 0; n < p.size(); ++n) {
        if (n != label) q += p[n];
    }
    const double modulator = gamma == 0.0 ? 1.0 : std::pow(q, gamma);

    LossAndGradient out;
    out.loss = -modulator * log_p;

    // dL/dz_n = (gamma q^(gamma-1) p log p - q^gamma) ([n == label] - p_n)
    double focus_term = 0.0;
    if (gamma != 0.0 && q > 0.0) {
        focus_term = gamma * std::pow(q, gamma - 1.0) * p[label] * log_p;
    }
    const double scale = focus_term - modulator;
    out.gradient.resize(p.size());
    for (std::size_t n = 0; n < p.size(); ++n) {
        out.gradient[n] = scale * ((n == label ? 1.0 : 0.0) - p[n]);
    }
    return out;
}

std::vector<double> effective_number_weights(std::span<const std::size_t> class_counts,
                                             const EffectiveNumberConfig& cfg) {
    if (class_counts.empty()) throw std::invalid_argument("no class counts given");
    if (!(cfg.beta >= 0.0 && cfg.beta < 1.0)) {
        throw std::invalid_argument("effective-number beta must lie in [0, 1)");
    }
    std::vector<double> w(class_counts.size());
    double total = 0.0;
    for (std::size_t c = 0; c < class_counts.size(); ++c) {
        if (class_counts[c] == 0) throw std::invalid_argument("class counts must be >= 1");
        if (cfg.beta == 0.0) {
            w[c] = 1.0;
        } else {
            const double n = static_cast<double>(class_counts[c]);
            // 1 - beta^n, accurate for beta close to 1
            const double effective = -std::expm1(n * std::log(cfg.beta));
            w[c] = (1.0 - cfg.beta) / effective;
        }
        total += w[c];
    }
    const double mean = total / static_cast<double>(w.size());
    for (double& v : w) v /= mean;
    return w;
}

}  // namespace ghmcw
