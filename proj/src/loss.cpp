#include "ghmcw/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ghmcw {

namespace {

void check_inputs(std::span<const double> logits, std::size_t label, std::span<const double> margin_row) {
    if (logits.empty()) throw std::invalid_argument("empty logit vector");
    if (margin_row.size() != logits.size()) {
        throw std::invalid_argument("margin row size does not match logit count");
    }
    if (label >= logits.size()) {
        throw std::invalid_argument("label " + std::to_string(label) + " out of range");
    }
    for (std::size_t n = 0; n < logits.size(); ++n) {
        if (!std::isfinite(logits[n])) throw std::invalid_argument("non-finite logit");
        if (!std::isfinite(margin_row[n])) throw std::invalid_argument("non-finite margin");
    }
}

void check_weight(double weight) {
    if (!(weight > 0.0) || !std::isfinite(weight)) {
        throw std::invalid_argument("example weight must be positive and finite");
    }
}

std::vector<double> shifted(std::span<const double> logits, std::span<const double> margin_row) {
    std::vector<double> out(logits.size());
    for (std::size_t n = 0; n < logits.size(); ++n) out[n] = logits[n] + margin_row[n];
    return out;
}

}  // namespace

void LossConfig::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("loss.alpha must lie in (0, 1]");
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("loss.gamma must be positive");
    if (region_count < 2) throw std::invalid_argument("loss.region_count must be >= 2");
    if (!(width_shift > 1.0) || !std::isfinite(width_shift)) {
        throw std::invalid_argument("loss.width_shift must be > 1");
    }
}

double log_sum_exp(std::span<const double> x) {
    const double top = *std::max_element(x.begin(), x.end());
    double sum = 0.0;
    for (double v : x) sum += std::exp(v - top);
    return top + std::log(sum);
}

std::vector<double> margin_softmax(std::span<const double> logits, std::span<const double> margin_row) {
    check_inputs(logits, 0, margin_row);
    auto p = shifted(logits, margin_row);
    const double top = *std::max_element(p.begin(), p.end());
    double sum = 0.0;
    for (double& v : p) {
        v = std::exp(v - top);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return p;
}

double margin_loss_forward(std::span<const double> logits, std::size_t label, double weight,
                           std::span<const double> margin_row) {
    check_inputs(logits, label, margin_row);
    check_weight(weight);
    const auto adjusted = shifted(logits, margin_row);
    return weight * (log_sum_exp(adjusted) - logits[label]);
}

std::vector<double> margin_loss_backward(std::span<const double> logits, std::size_t label,
                                         double weight, std::span<const double> margin_row) {
    check_weight(weight);
    auto grad = margin_softmax(logits, margin_row);
    check_inputs(logits, label, margin_row);
    grad[label] -= 1.0;
    for (double& v : grad) v *= weight;
    return grad;
}

double gradient_norm(std::span<const double> logits, std::size_t label,
                     std::span<const double> margin_row) {
    check_inputs(logits, label, margin_row);
    const auto p = margin_softmax(logits, margin_row);
    double rest = 0.0;
    for (std::size_t n = 0; n < p.size(); ++n) {
        if (n != label) rest += p[n];
    }
    return std::clamp(rest, 0.0, 1.0);
}

BatchResult batch_loss(std::span<const double> logits, std::size_t class_count,
                       std::span<const std::size_t> labels, const CategoryStats* stats,
                       const MarginMatrix* margins, const LossConfig& config) {
    const std::size_t batch = labels.size();
    if (batch == 0) throw std::invalid_argument("empty batch");
    if (class_count == 0 || logits.size() != batch * class_count) {
        throw std::invalid_argument("logit buffer does not match batch size x class count");
    }
    const bool use_margins = config.inter_balance && margins != nullptr;
    const bool use_weights = config.intra_balance && stats != nullptr;
    if (use_margins && margins->category_count() != class_count) {
        throw std::invalid_argument("margin matrix size does not match class count");
    }
    if (use_weights && stats->category_count() != class_count) {
        throw std::invalid_argument("category stats size does not match class count");
    }

    const std::vector<double> zero_row(class_count, 0.0);
    BatchResult out;
    out.gradients.resize(batch * class_count);
    out.gradient_norms.resize(batch);
    out.weights.assign(batch, 1.0);

    for (std::size_t b = 0; b < batch; ++b) {
        const auto z = logits.subspan(b * class_count, class_count);
        const auto row = use_margins ? margins->row(labels[b]) : std::span<const double>(zero_row);
        out.gradient_norms[b] = gradient_norm(z, labels[b], row);
        if (use_weights) out.weights[b] = stats->example_weight(labels[b], out.gradient_norms[b]);
    }
    if (use_weights && config.normalize_batch_weights) {
        double mean = 0.0;
        for (double w : out.weights) mean += w;
        mean /= static_cast<double>(batch);
        for (double& w : out.weights) w /= mean;
    }

    const double inv_batch = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        const auto z = logits.subspan(b * class_count, class_count);
        const auto row = use_margins ? margins->row(labels[b]) : std::span<const double>(zero_row);
        total += margin_loss_forward(z, labels[b], out.weights[b], row);
        const auto g = margin_loss_backward(z, labels[b], out.weights[b], row);
        for (std::size_t n = 0; n < class_count; ++n) {
            out.gradients[b * class_count + n] = g[n] * inv_batch;
        }
    }
    out.loss = total * inv_batch;
    return out;
}

}  // namespace ghmcw
