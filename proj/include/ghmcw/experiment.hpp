#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ghmcw/data.hpp"
#include "ghmcw/model.hpp"
#include "ghmcw/trainer.hpp"

namespace ghmcw {

struct SyntheticSource {
    DatasetSpec spec;
    std::vector<std::vector<double>> means;        // empty: circle_means(radius)
    std::vector<std::vector<double>> covariances;  // empty: identity
    double radius = 2.0;
    std::size_t test_per_class = 500;  // balanced held-out set; 0 evaluates on the training set
};

struct CsvSource {
    std::filesystem::path train;
    std::optional<std::filesystem::path> test;
    double imbalance_factor = 1.0;  // > 1 subsamples the training file
    std::size_t class_count = 0;    // 0 infers from labels
};

/// One experiment: dataset source, model, optimizer and loss. Parsed from a
/// JSON document; every field has a default except the dataset source.
struct ExperimentConfig {
    std::string name = "run";
    std::variant<SyntheticSource, CsvSource> dataset;
    nlohmann::json dataset_block;  // as written, for identity checks across runs
    Architecture architecture = Architecture::linear;
    std::size_t hidden_dim = 0;
    TrainConfig train;
    std::optional<std::filesystem::path> output_dir;
    std::vector<std::uint64_t> seeds;  // repeat seeds; empty means {train.seed}
    std::optional<GridSpec> boundary;
    nlohmann::json raw;  // full document, echoed into outputs

    std::vector<std::uint64_t> run_seeds() const;
};

/// Throws ConfigError with the dotted path of the first bad field.
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
nlohmann::json load_json_file(const std::filesystem::path& path);

/// Applies "a.b.c=value" to a JSON document. The value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct PreparedData {
    LabeledDataset train;
    LabeledDataset test;
};

/// Training and evaluation sets for one repeat seed. Synthetic data uses
/// dataset.seed + seed; CSV subsampling uses the seed directly.
PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t seed);

struct RunOutput {
    std::uint64_t seed = 0;
    TrainResult result;
    EvalMetrics final_metrics;
    PreparedData data;
};

RunOutput run_experiment(const ExperimentConfig& config, std::uint64_t seed);

/// Writes config.json, metrics.jsonl, summary.csv, model.json, sizes.json
/// and boundary.csv (when a boundary grid is configured) into `dir`.
void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config, const RunOutput& run);

std::string metrics_jsonl(const MetricsLog& log);
std::string summary_csv(const ExperimentConfig& config, const std::vector<RunOutput>& runs);

struct Variant {
    std::string name;
    ExperimentConfig config;
};

/// Softmax / R / A^URA / R+A^AURA built from a base configuration.
std::vector<Variant> ablation_variants(const ExperimentConfig& base);

struct ComparisonRow {
    std::string name;
    std::size_t runs = 0;
    // Indexed by Group, then overall at index 4. NaN when the group is empty.
    std::vector<double> mean;
    std::vector<double> stddev;
};

/// Runs every variant over the shared seed list. Variants must share the
/// dataset block and the seed list; throws std::invalid_argument otherwise.
/// `jobs` > 1 runs independent (variant, seed) pairs concurrently.
std::vector<ComparisonRow> compare_variants(const std::vector<Variant>& variants, std::size_t jobs = 1);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);

/// Output directory: explicit config value, else $GHMCW_OUTPUT_ROOT/name,
/// else runs/name.
std::filesystem::path resolve_output_dir(const ExperimentConfig& config);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ghmcw
