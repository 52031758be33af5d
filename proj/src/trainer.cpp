#include "ghmcw/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "ghmcw/errors.hpp"

namespace ghmcw {

std::string_view loss_kind_name(LossKind k) {
    switch (k) {
        case LossKind::softmax: return "softmax";
        case LossKind::focal: return "focal";
        case LossKind::effective_number: return "effective_number";
        case LossKind::ghm_cwap: return "ghm_cwap";
    }
    return "?";
}

LossKind parse_loss_kind(std::string_view name) {
    for (LossKind k : {LossKind::softmax, LossKind::focal, LossKind::effective_number, LossKind::ghm_cwap}) {
        if (name == loss_kind_name(k)) return k;
    }
    throw std::invalid_argument("unknown loss kind '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (epochs == 0) throw std::invalid_argument("train.epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("train.batch_size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("train.learning_rate must be positive");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train.momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("train.weight_decay must be >= 0");
    if (!(lr_decay_factor > 0.0)) throw std::invalid_argument("train.lr_decay_factor must be positive");
    if (eval_every == 0) throw std::invalid_argument("train.eval_every must be >= 1");
    if (threads == 0) throw std::invalid_argument("train.threads must be >= 1");
    objective.ghm.validate();
    if (!(objective.focal.focusing >= 0.0)) throw std::invalid_argument("loss.focusing must be >= 0");
    if (!(objective.effective_number.beta >= 0.0 && objective.effective_number.beta < 1.0)) {
        throw std::invalid_argument("loss.beta must lie in [0, 1)");
    }
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
    double lr = learning_rate;
    for (std::size_t e : lr_decay_epochs) {
        if (epoch >= e) lr *= lr_decay_factor;
    }
    return lr;
}

EvalMetrics evaluate(const Model& model, const LabeledDataset& dataset, std::span<const Group> groups) {
    if (dataset.empty()) throw std::invalid_argument("cannot evaluate on an empty dataset");
    if (dataset.feature_dim() != model.feature_dim() || dataset.class_count() != model.class_count()) {
        throw std::invalid_argument("dataset and model dimensions differ");
    }
    if (groups.empty()) groups = dataset.groups();
    if (groups.size() != dataset.class_count()) throw std::invalid_argument("group map has wrong size");

    const std::size_t c = dataset.class_count();
    std::vector<std::size_t> correct(c, 0), seen(c, 0);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const std::size_t y = dataset.label(i);
        ++seen[y];
        if (model.predict(dataset.row(i)) == y) ++correct[y];
    }

    EvalMetrics m;
    m.class_groups.assign(groups.begin(), groups.end());
    m.per_class.resize(c);
    m.per_group.assign(4, std::nullopt);
    m.group_examples.assign(4, 0);
    m.group_classes.assign(4, 0);
    std::vector<std::size_t> group_correct(4, 0);
    std::size_t total_correct = 0;
    for (std::size_t k = 0; k < c; ++k) {
        m.per_class[k] = seen[k] ? static_cast<double>(correct[k]) / static_cast<double>(seen[k])
                                 : std::numeric_limits<double>::quiet_NaN();
        const auto g = static_cast<std::size_t>(groups[k]);
        m.group_examples[g] += seen[k];
        m.group_classes[g] += 1;
        group_correct[g] += correct[k];
        total_correct += correct[k];
    }
    for (std::size_t g = 0; g < 4; ++g) {
        if (m.group_examples[g] > 0) {
            m.per_group[g] = static_cast<double>(group_correct[g]) / static_cast<double>(m.group_examples[g]);
        }
    }
    m.overall = static_cast<double>(total_correct) / static_cast<double>(dataset.size());
    return m;
}

nlohmann::json to_json(const EvalMetrics& m) {
    nlohmann::json per_class = nlohmann::json::array();
    for (double v : m.per_class) per_class.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
    nlohmann::json per_group = nlohmann::json::object();
    for (std::size_t g = 0; g < 4; ++g) {
        if (m.per_group[g]) per_group[std::string(group_name(static_cast<Group>(g)))] = *m.per_group[g];
    }
    return {{"overall", m.overall}, {"per_class", std::move(per_class)}, {"per_group", std::move(per_group)}};
}

nlohmann::json to_json(const EpochRecord& r) {
    nlohmann::json j{{"epoch", r.epoch},
                     {"learning_rate", r.learning_rate},
                     {"train_loss", r.train_loss},
                     {"mean_weight", r.mean_weight},
                     {"effective_sizes", r.effective_sizes},
                     {"margin_matrix", r.margin_matrix},
                     {"widths", r.widths},
                     {"gradient_norm_digest", r.gradient_norm_digest}};
    j["consumed_stats_digest"] = r.consumed_stats_digest ? nlohmann::json(*r.consumed_stats_digest) : nlohmann::json();
    if (r.eval) j["eval"] = to_json(*r.eval);
    return j;
}

namespace {

class Fnv1a {
public:
    void add(std::uint64_t word) {
        for (int i = 0; i < 8; ++i) {
            state_ ^= (word >> (8 * i)) & 0xffu;
            state_ *= 0x100000001b3ull;
        }
    }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

std::vector<DenseLayer> zeros_like(std::span<const DenseLayer> layers) {
    std::vector<DenseLayer> out;
    for (const auto& l : layers) {
        out.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    return out;
}

/// Accumulates gradient norms into per-class histograms. With several
/// threads each shard fills its own copies which are then merged in shard
/// order; merge is exact so the result matches sequential accumulation.
void accumulate_norms(std::vector<AdaptiveHistogram>& live, std::span<const std::size_t> labels,
                      std::span<const double> norms, std::size_t threads) {
    const std::size_t n = labels.size();
    if (threads <= 1 || n < 2 * threads) {
        for (std::size_t i = 0; i < n; ++i) live[labels[i]].accumulate(norms[i]);
        return;
    }
    std::vector<std::vector<AdaptiveHistogram>> shards(threads);
    for (auto& s : shards) {
        s.reserve(live.size());
        for (const auto& h : live) s.push_back(h.reset());
    }
    {
        std::vector<std::jthread> workers;
        const std::size_t chunk = (n + threads - 1) / threads;
        for (std::size_t t = 0; t < threads; ++t) {
            workers.emplace_back([&, t] {
                const std::size_t lo = t * chunk;
                const std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i) shards[t][labels[i]].accumulate(norms[i]);
            });
        }
    }
    for (const auto& s : shards) {
        for (std::size_t c = 0; c < live.size(); ++c) live[c] = merge(live[c], s[c]);
    }
}

struct StepOutput {
    double loss = 0.0;
    std::vector<double> gradients;  // of the batch mean loss
    std::vector<double> norms;
    std::vector<double> weights;
};

StepOutput objective_step(const Objective& obj, std::span<const double> logits, std::size_t class_count,
                          std::span<const std::size_t> labels, const CategoryStats* stats,
                          const MarginMatrix* margins, std::span<const double> class_weights) {
    if (obj.kind == LossKind::ghm_cwap || obj.kind == LossKind::softmax) {
        LossConfig cfg = obj.ghm;
        if (obj.kind == LossKind::softmax) {
            cfg.intra_balance = false;
            cfg.inter_balance = false;
        }
        auto r = batch_loss(logits, class_count, labels, stats, margins, cfg);
        return {r.loss, std::move(r.gradients), std::move(r.gradient_norms), std::move(r.weights)};
    }

    const std::size_t batch = labels.size();
    const std::vector<double> zero(class_count, 0.0);
    const double inv = 1.0 / static_cast<double>(batch);
    StepOutput out;
    out.gradients.resize(batch * class_count);
    out.norms.resize(batch);
    out.weights.assign(batch, 1.0);
    for (std::size_t b = 0; b < batch; ++b) {
        const auto z = logits.subspan(b * class_count, class_count);
        LossAndGradient lg;
        if (obj.kind == LossKind::focal) {
            lg = focal_forward_backward(z, labels[b], obj.focal);
        } else {
            out.weights[b] = class_weights[labels[b]];
            lg = softmax_cross_entropy(z, labels[b], out.weights[b]);
        }
        out.loss += lg.loss * inv;
        for (std::size_t n = 0; n < class_count; ++n) out.gradients[b * class_count + n] = lg.gradient[n] * inv;
        out.norms[b] = gradient_norm(z, labels[b], zero);
    }
    return out;
}

}  // namespace

TrainResult train(Model model, const LabeledDataset& train_set, const TrainConfig& config,
                  const LabeledDataset* eval_set, TrainObserver* observer) {
    config.validate();
    if (train_set.empty()) throw std::invalid_argument("cannot train on an empty dataset");
    if (train_set.feature_dim() != model.feature_dim() || train_set.class_count() != model.class_count()) {
        throw std::invalid_argument("dataset and model dimensions differ");
    }
    if (eval_set == nullptr) eval_set = &train_set;

    const std::size_t classes = train_set.class_count();
    const std::size_t dim = train_set.feature_dim();
    const LossConfig& ghm = config.objective.ghm;

    std::vector<double> class_weights;
    if (config.objective.kind == LossKind::effective_number) {
        class_weights = effective_number_weights(train_set.class_sizes(), config.objective.effective_number);
    }

    std::vector<AdaptiveHistogram> live(classes, AdaptiveHistogram(ghm.region_count));
    std::optional<CategoryStats> stats;
    std::optional<MarginMatrix> margins;
    std::optional<std::uint64_t> stats_digest;

    auto velocity = zeros_like(model.layers());
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(config.seed);

    TrainResult result{model, {}};
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const int ep = static_cast<int>(epoch);
        if (observer) observer->on_epoch_begin(ep, stats ? &*stats : nullptr, margins ? &*margins : nullptr);
        const double lr = config.learning_rate_at(epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        Fnv1a digest;
        double loss_sum = 0.0;
        double weight_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            const std::size_t batch = stop - start;
            RowMatrix x(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(dim));
            std::vector<std::size_t> labels(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                const auto row = train_set.row(order[start + b]);
                for (std::size_t k = 0; k < dim; ++k) {
                    x(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = row[k];
                }
                labels[b] = train_set.label(order[start + b]);
            }

            const auto trace = model.forward(x);
            for (Eigen::Index i = 0; i < trace.logits.size(); ++i) {
                if (!std::isfinite(trace.logits.data()[i])) {
                    throw TrainingDiverged(ep, batch_index, "non-finite logits");
                }
            }
            const std::span<const double> logits(trace.logits.data(), batch * classes);
            auto step = objective_step(config.objective, logits, classes, labels, stats ? &*stats : nullptr,
                                       margins ? &*margins : nullptr, class_weights);
            if (!std::isfinite(step.loss)) throw TrainingDiverged(ep, batch_index, "non-finite loss");

            accumulate_norms(live, labels, step.norms, config.threads);
            for (std::size_t b = 0; b < batch; ++b) {
                digest.add(labels[b]);
                digest.add(std::bit_cast<std::uint64_t>(step.norms[b]));
                if (observer) observer->on_gradient_norm(ep, labels[b], step.norms[b]);
                weight_sum += step.weights[b];
            }
            loss_sum += step.loss * static_cast<double>(batch);

            const Eigen::Map<const RowMatrix> grad_logits(step.gradients.data(), static_cast<Eigen::Index>(batch),
                                                          static_cast<Eigen::Index>(classes));
            auto grads = model.backward(trace, grad_logits);
            auto layers = model.layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                if (config.weight_decay > 0.0) grads[l].weight += config.weight_decay * layers[l].weight;
                velocity[l].weight = config.momentum * velocity[l].weight + grads[l].weight;
                velocity[l].bias = config.momentum * velocity[l].bias + grads[l].bias;
                layers[l].weight -= lr * velocity[l].weight;
                layers[l].bias -= lr * velocity[l].bias;
            }
        }

        // Epoch end: freeze this epoch's histograms as the snapshot for the next one.
        std::vector<AdaptiveHistogram> snapshots = live;
        for (auto& h : live) h = ghm.adaptive_widths ? h.reassigned(ghm.width_shift) : h.reset();
        if (observer) observer->on_epoch_end(ep, snapshots);

        EpochRecord rec;
        rec.epoch = ep;
        rec.learning_rate = lr;
        rec.train_loss = loss_sum / static_cast<double>(order.size());
        rec.mean_weight = weight_sum / static_cast<double>(order.size());
        rec.gradient_norm_digest = digest.value();
        rec.consumed_stats_digest = stats_digest;

        stats.emplace(std::move(snapshots), ghm.alpha);
        margins.emplace(margin_matrix(*stats, ghm.gamma));
        stats_digest = digest.value();

        const auto s = stats->effective_sizes();
        rec.effective_sizes.assign(s.begin(), s.end());
        for (std::size_t m = 0; m < classes; ++m) {
            const auto r = margins->row(m);
            rec.margin_matrix.emplace_back(r.begin(), r.end());
            const auto w = live[m].widths();
            rec.widths.emplace_back(w.begin(), w.end());
        }
        if (epoch % config.eval_every == 0 || epoch == config.epochs) {
            rec.eval = evaluate(model, *eval_set, train_set.groups());
        }
        result.log.push_back(std::move(rec));
    }
    result.model = std::move(model);
    return result;
}

double GridSpec::x(std::size_t i) const {
    return nx == 1 ? x_min : x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(nx - 1);
}

double GridSpec::y(std::size_t j) const {
    return ny == 1 ? y_min : y_min + (y_max - y_min) * static_cast<double>(j) / static_cast<double>(ny - 1);
}

std::vector<std::size_t> decision_boundary_dump(const Model& model, const GridSpec& grid) {
    if (model.feature_dim() != 2) throw std::invalid_argument("decision boundary dump needs a 2D model");
    if (grid.nx == 0 || grid.ny == 0 || !(grid.x_max >= grid.x_min) || !(grid.y_max >= grid.y_min)) {
        throw std::invalid_argument("invalid grid specification");
    }
    std::vector<std::size_t> out;
    out.reserve(grid.nx * grid.ny);
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            const double p[2] = {grid.x(i), grid.y(j)};
            out.push_back(model.predict(p));
        }
    }
    return out;
}

void write_boundary_csv(const std::filesystem::path& path, const GridSpec& grid,
                        std::span<const std::size_t> labels) {
    if (labels.size() != grid.nx * grid.ny) throw std::invalid_argument("label grid has wrong size");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "x,y,label\n";
    out.precision(17);
    for (std::size_t j = 0; j < grid.ny; ++j) {
        for (std::size_t i = 0; i < grid.nx; ++i) {
            out << grid.x(i) << ',' << grid.y(j) << ',' << labels[j * grid.nx + i] << '\n';
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace ghmcw
