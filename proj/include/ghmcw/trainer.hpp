#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ghmcw/baselines.hpp"
#include "ghmcw/category_stats.hpp"
#include "ghmcw/data.hpp"
#include "ghmcw/histogram.hpp"
#include "ghmcw/loss.hpp"
#include "ghmcw/model.hpp"

namespace ghmcw {

enum class LossKind { softmax, focal, effective_number, ghm_cwap };

std::string_view loss_kind_name(LossKind k);
LossKind parse_loss_kind(std::string_view name);

/// Which objective to optimize. `ghm` is used by ghm_cwap; the other
/// members only by their baseline.
struct Objective {
    LossKind kind = LossKind::ghm_cwap;
    LossConfig ghm;
    FocalConfig focal;
    EffectiveNumberConfig effective_number;
};

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::vector<std::size_t> lr_decay_epochs;  // step decay at these epochs (1-based)
    double lr_decay_factor = 0.1;
    std::uint64_t seed = 0;
    std::size_t eval_every = 1;
    std::size_t threads = 1;  // >1 accumulates gradient norms in shard-local histograms
    Objective objective;

    void validate() const;
    double learning_rate_at(std::size_t epoch) const;
};

struct EvalMetrics {
    double overall = 0.0;
    std::vector<double> per_class;           // recall per class, NaN for classes without examples
    std::vector<Group> class_groups;
    std::vector<std::optional<double>> per_group;  // indexed by Group
    std::vector<std::size_t> group_examples;       // evaluated examples per group
    std::vector<std::size_t> group_classes;        // classes per group
};

/// Top-1 accuracy overall, per class and per group. `groups` assigns each
/// class to a group; empty means the dataset's own grouping.
EvalMetrics evaluate(const Model& model, const LabeledDataset& dataset,
                     std::span<const Group> groups = {});

struct EpochRecord {
    int epoch = 0;
    double learning_rate = 0.0;
    double train_loss = 0.0;
    double mean_weight = 1.0;
    std::optional<EvalMetrics> eval;
    /// Statistics built at the end of this epoch, consumed by the next one.
    std::vector<double> effective_sizes;
    std::vector<std::vector<double>> margin_matrix;
    std::vector<std::vector<double>> widths;  // live histogram widths for the next epoch
    /// Digest of the (label, gradient norm) stream observed this epoch and
    /// of the stream the statistics consumed during this epoch came from.
    std::uint64_t gradient_norm_digest = 0;
    std::optional<std::uint64_t> consumed_stats_digest;
};

nlohmann::json to_json(const EpochRecord& r);
nlohmann::json to_json(const EvalMetrics& m);

using MetricsLog = std::vector<EpochRecord>;

/// Hooks for instrumentation. All default to no-ops.
class TrainObserver {
public:
    virtual ~TrainObserver() = default;
    virtual void on_epoch_begin(int /*epoch*/, const CategoryStats* /*stats*/, const MarginMatrix* /*margins*/) {}
    virtual void on_gradient_norm(int /*epoch*/, std::size_t /*label*/, double /*g*/) {}
    virtual void on_epoch_end(int /*epoch*/, std::span<const AdaptiveHistogram> /*snapshots*/) {}
};

struct TrainResult {
    Model model;
    MetricsLog log;
};

/// SGD with momentum. Each epoch uses weights and margins from the previous
/// epoch's gradient-norm histograms (epoch 1: weights 1, margins 0), records
/// one gradient norm per example into its class histogram, then snapshots
/// the histograms and rebuilds the statistics. `eval_set` defaults to the
/// training set. Throws TrainingDiverged on a non-finite loss.
TrainResult train(Model model, const LabeledDataset& train_set, const TrainConfig& config,
                  const LabeledDataset* eval_set = nullptr, TrainObserver* observer = nullptr);

struct GridSpec {
    double x_min = -6.0;
    double x_max = 6.0;
    double y_min = -6.0;
    double y_max = 6.0;
    std::size_t nx = 121;
    std::size_t ny = 121;

    double x(std::size_t i) const;
    double y(std::size_t j) const;
};

/// Predicted label at every grid point, row-major with y outer (ny x nx).
/// Requires a 2D model.
std::vector<std::size_t> decision_boundary_dump(const Model& model, const GridSpec& grid);

/// CSV with header x,y,label.
void write_boundary_csv(const std::filesystem::path& path, const GridSpec& grid,
                        std::span<const std::size_t> labels);

}  // namespace ghmcw
