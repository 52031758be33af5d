#include "ghmcw/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ghmcw/errors.hpp"

namespace ghmcw {

namespace {

/// Typed access to one JSON object with dotted-path error messages.
class Section {
public:
    Section(const nlohmann::json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string at(const std::string& key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    Section child(const std::string& key) const { return Section(node_.at(key), at(key)); }

    const nlohmann::json& raw(const std::string& key) const { return node_.at(key); }

    void allow_only(std::initializer_list<std::string_view> keys) const {
        const std::set<std::string_view> allowed(keys);
        for (const auto& [k, _] : node_.items()) {
            if (!allowed.count(k)) throw ConfigError(at(k), "unknown field");
        }
    }

    template <class T>
    void read(const std::string& key, T& out) const {
        if (!has(key)) return;
        try {
            out = node_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(at(key), "wrong type");
        }
    }

    void read_size(const std::string& key, std::size_t& out) const {
        if (!has(key)) return;
        const auto& v = node_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ConfigError(at(key), "expected a non-negative integer");
        }
        out = v.get<std::size_t>();
    }

    void read_number(const std::string& key, double& out) const {
        if (!has(key)) return;
        if (!node_.at(key).is_number()) throw ConfigError(at(key), "expected a number");
        out = node_.at(key).get<double>();
    }

    void read_bool(const std::string& key, bool& out) const {
        if (!has(key)) return;
        if (!node_.at(key).is_boolean()) throw ConfigError(at(key), "expected true or false");
        out = node_.at(key).get<bool>();
    }

    void read_seed(const std::string& key, std::uint64_t& out) const {
        if (!has(key)) return;
        if (!node_.at(key).is_number_integer()) throw ConfigError(at(key), "expected an integer seed");
        out = node_.at(key).get<std::uint64_t>();
    }

private:
    const nlohmann::json& node_;
    std::string path_;
};

template <class F>
void checked(const std::string& field, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(field, e.what());
    }
}

std::vector<std::vector<double>> read_matrix_list(const Section& s, const std::string& key) {
    std::vector<std::vector<double>> out;
    s.read(key, out);
    return out;
}

SyntheticSource parse_synthetic(const Section& s) {
    s.allow_only({"class_count", "max_class_size", "imbalance_factor", "feature_dim", "seed", "means",
                  "covariances", "radius", "test_per_class"});
    SyntheticSource src;
    s.read_size("class_count", src.spec.class_count);
    s.read_size("max_class_size", src.spec.max_class_size);
    s.read_number("imbalance_factor", src.spec.imbalance_factor);
    s.read_size("feature_dim", src.spec.feature_dim);
    s.read_seed("seed", src.spec.seed);
    s.read_number("radius", src.radius);
    s.read_size("test_per_class", src.test_per_class);
    src.means = read_matrix_list(s, "means");
    src.covariances = read_matrix_list(s, "covariances");
    checked(s.at("<spec>"), [&] { src.spec.validate(); });
    if (!src.means.empty()) {
        if (src.means.size() != src.spec.class_count) throw ConfigError(s.at("means"), "need one mean per class");
        for (const auto& m : src.means) {
            if (m.size() != src.spec.feature_dim) throw ConfigError(s.at("means"), "mean has wrong dimension");
        }
    }
    if (!src.covariances.empty() && src.covariances.size() != src.spec.class_count) {
        throw ConfigError(s.at("covariances"), "need one covariance per class");
    }
    return src;
}

CsvSource parse_csv(const Section& s) {
    s.allow_only({"train", "test", "imbalance_factor", "class_count"});
    CsvSource src;
    if (!s.has("train")) throw ConfigError(s.at("train"), "missing dataset path");
    std::string train, test;
    s.read("train", train);
    src.train = train;
    if (s.has("test")) {
        s.read("test", test);
        src.test = test;
    }
    s.read_number("imbalance_factor", src.imbalance_factor);
    s.read_size("class_count", src.class_count);
    if (!(src.imbalance_factor >= 1.0)) throw ConfigError(s.at("imbalance_factor"), "must be >= 1");
    return src;
}

void parse_loss(const Section& s, Objective& obj) {
    s.allow_only({"kind", "alpha", "gamma", "region_count", "intra_balance", "inter_balance", "adaptive_widths",
                  "normalize_batch_weights", "width_shift", "focusing", "beta"});
    if (s.has("kind")) {
        std::string kind;
        s.read("kind", kind);
        checked(s.at("kind"), [&] { obj.kind = parse_loss_kind(kind); });
    }
    auto& g = obj.ghm;
    s.read_number("alpha", g.alpha);
    s.read_number("gamma", g.gamma);
    s.read_size("region_count", g.region_count);
    s.read_bool("intra_balance", g.intra_balance);
    s.read_bool("inter_balance", g.inter_balance);
    s.read_bool("adaptive_widths", g.adaptive_widths);
    s.read_bool("normalize_batch_weights", g.normalize_batch_weights);
    s.read_number("width_shift", g.width_shift);
    s.read_number("focusing", obj.focal.focusing);
    s.read_number("beta", obj.effective_number.beta);
}

void parse_train(const Section& s, TrainConfig& t) {
    s.allow_only({"epochs", "batch_size", "learning_rate", "momentum", "weight_decay", "lr_decay_epochs",
                  "lr_decay_factor", "seed", "eval_every", "threads"});
    s.read_size("epochs", t.epochs);
    s.read_size("batch_size", t.batch_size);
    s.read_number("learning_rate", t.learning_rate);
    s.read_number("momentum", t.momentum);
    s.read_number("weight_decay", t.weight_decay);
    s.read("lr_decay_epochs", t.lr_decay_epochs);
    s.read_number("lr_decay_factor", t.lr_decay_factor);
    s.read_seed("seed", t.seed);
    s.read_size("eval_every", t.eval_every);
    s.read_size("threads", t.threads);
}

GridSpec parse_grid(const Section& s) {
    s.allow_only({"x_min", "x_max", "y_min", "y_max", "nx", "ny"});
    GridSpec g;
    s.read_number("x_min", g.x_min);
    s.read_number("x_max", g.x_max);
    s.read_number("y_min", g.y_min);
    s.read_number("y_max", g.y_max);
    s.read_size("nx", g.nx);
    s.read_size("ny", g.ny);
    if (g.nx == 0 || g.ny == 0) throw ConfigError(s.at("nx"), "grid needs at least one cell per axis");
    return g;
}

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::string fmt_number(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
    return seeds.empty() ? std::vector<std::uint64_t>{train.seed} : seeds;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
    const Section root(doc, "");
    root.allow_only({"name", "dataset", "model", "train", "loss", "output_dir", "seeds", "boundary"});
    ExperimentConfig cfg;
    cfg.raw = doc;
    root.read("name", cfg.name);

    if (!root.has("dataset")) throw ConfigError("dataset", "missing dataset block");
    const Section ds = root.child("dataset");
    ds.allow_only({"synthetic", "csv"});
    if (ds.has("synthetic") == ds.has("csv")) {
        throw ConfigError("dataset", "exactly one of dataset.synthetic or dataset.csv is required");
    }
    cfg.dataset_block = doc.at("dataset");
    if (ds.has("synthetic")) {
        cfg.dataset = parse_synthetic(ds.child("synthetic"));
    } else {
        cfg.dataset = parse_csv(ds.child("csv"));
    }

    if (root.has("model")) {
        const Section m = root.child("model");
        m.allow_only({"architecture", "hidden_dim"});
        std::string arch = "linear";
        m.read("architecture", arch);
        checked(m.at("architecture"), [&] { cfg.architecture = parse_architecture(arch); });
        m.read_size("hidden_dim", cfg.hidden_dim);
        if (cfg.architecture == Architecture::mlp && cfg.hidden_dim == 0) {
            throw ConfigError(m.at("hidden_dim"), "mlp needs hidden_dim >= 1");
        }
    }
    if (root.has("train")) parse_train(root.child("train"), cfg.train);
    if (root.has("loss")) parse_loss(root.child("loss"), cfg.train.objective);
    try {
        cfg.train.validate();
    } catch (const std::invalid_argument& e) {
        // messages start with the dotted field path, e.g. "loss.alpha must ..."
        const std::string msg = e.what();
        const auto space = msg.find(' ');
        const std::string field = space == std::string::npos ? "train" : msg.substr(0, space);
        throw ConfigError(field, space == std::string::npos ? msg : msg.substr(space + 1));
    }

    if (root.has("output_dir")) {
        std::string out;
        root.read("output_dir", out);
        cfg.output_dir = out;
    }
    if (root.has("seeds")) {
        if (!doc.at("seeds").is_array()) throw ConfigError("seeds", "expected a list of integers");
        for (std::size_t i = 0; i < doc.at("seeds").size(); ++i) {
            const auto& v = doc.at("seeds")[i];
            if (!v.is_number_integer()) throw ConfigError("seeds[" + std::to_string(i) + "]", "expected an integer");
            cfg.seeds.push_back(v.get<std::uint64_t>());
        }
    }
    if (root.has("boundary")) cfg.boundary = parse_grid(root.child("boundary"));
    return cfg;
}

nlohmann::json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string(), e.what());
    }
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(assignment, "override must look like key.path=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
        value = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        value = text;
    }
    nlohmann::json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError(key, "empty path component");
        if (!node->is_object() && !node->is_null()) throw ConfigError(key, "path crosses a non-object value");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = std::move(value);
}

PreparedData prepare_data(const ExperimentConfig& config, std::uint64_t seed) {
    if (const auto* syn = std::get_if<SyntheticSource>(&config.dataset)) {
        DatasetSpec spec = syn->spec;
        spec.seed = syn->spec.seed + seed;
        const auto means = syn->means.empty() ? circle_means(spec.class_count, spec.feature_dim, syn->radius)
                                              : syn->means;
        PreparedData out{synth_gaussian(spec, means, syn->covariances), {}};
        if (syn->test_per_class == 0) {
            out.test = out.train;
        } else {
            DatasetSpec test_spec = spec;
            test_spec.imbalance_factor = 1.0;
            test_spec.max_class_size = syn->test_per_class;
            test_spec.seed = spec.seed ^ 0x9e3779b97f4a7c15ull;
            out.test = synth_gaussian(test_spec, means, syn->covariances);
        }
        return out;
    }
    const auto& csv = std::get<CsvSource>(config.dataset);
    LabeledDataset source = read_csv(csv.train, csv.class_count);
    PreparedData out;
    out.train = csv.imbalance_factor > 1.0 ? subsample_longtailed(source, csv.imbalance_factor, seed)
                                           : std::move(source);
    out.test = csv.test ? read_csv(*csv.test, out.train.class_count()) : out.train;
    return out;
}

RunOutput run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
    auto data = prepare_data(config, seed);
    TrainConfig tc = config.train;
    tc.seed = seed;
    Model model(config.architecture, data.train.feature_dim(), data.train.class_count(), config.hidden_dim, seed + 1);
    auto result = train(std::move(model), data.train, tc, &data.test);
    auto metrics = evaluate(result.model, data.test, data.train.groups());
    return RunOutput{seed, std::move(result), std::move(metrics), std::move(data)};
}

std::string metrics_jsonl(const MetricsLog& log) {
    std::string out;
    for (const auto& rec : log) {
        out += to_json(rec).dump();
        out += '\n';
    }
    return out;
}

std::string summary_csv(const ExperimentConfig& config, const std::vector<RunOutput>& runs) {
    std::string out = "name,loss,seed,overall,Many,Medium,Few,Rare,final_train_loss\n";
    for (const auto& run : runs) {
        out += config.name + "," + std::string(loss_kind_name(config.train.objective.kind)) + "," +
               std::to_string(run.seed) + "," + fmt_number(run.final_metrics.overall);
        for (const auto& g : run.final_metrics.per_group) {
            out += "," + (g ? fmt_number(*g) : std::string());
        }
        out += "," + fmt_number(run.result.log.back().train_loss) + "\n";
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& config, const RunOutput& run) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    write_text_file(dir / "config.json", config.raw.dump(2) + "\n");
    write_text_file(dir / "metrics.jsonl", metrics_jsonl(run.result.log));
    write_text_file(dir / "summary.csv", summary_csv(config, {run}));
    nlohmann::json model;
    to_json(model, run.result.model);
    write_text_file(dir / "model.json", model.dump() + "\n");
    write_text_file(dir / "sizes.json", sizes_record(run.data.train).dump(2) + "\n");
    if (config.boundary) {
        write_boundary_csv(dir / "boundary.csv", *config.boundary,
                           decision_boundary_dump(run.result.model, *config.boundary));
    }
}

std::vector<Variant> ablation_variants(const ExperimentConfig& base) {
    auto make = [&](std::string name, LossKind kind, bool intra, bool inter, bool adaptive) {
        Variant v{std::move(name), base};
        auto& obj = v.config.train.objective;
        obj.kind = kind;
        obj.ghm.intra_balance = intra;
        obj.ghm.inter_balance = inter;
        obj.ghm.adaptive_widths = adaptive;
        v.config.name = v.name;
        return v;
    };
    return {make("Softmax", LossKind::softmax, false, false, false),
            make("R", LossKind::ghm_cwap, true, false, false),
            make("A^URA", LossKind::ghm_cwap, false, true, false),
            make("R+A^AURA", LossKind::ghm_cwap, true, true, true)};
}

std::vector<ComparisonRow> compare_variants(const std::vector<Variant>& variants, std::size_t jobs) {
    if (variants.size() < 2) throw std::invalid_argument("comparison needs at least two runs");
    const auto& ref = variants.front().config;
    for (const auto& v : variants) {
        if (v.config.dataset_block != ref.dataset_block) {
            throw std::invalid_argument("variant '" + v.name + "' uses a different dataset than '" +
                                        variants.front().name + "'");
        }
        if (v.config.run_seeds() != ref.run_seeds()) {
            throw std::invalid_argument("variant '" + v.name + "' uses a different seed list");
        }
    }
    const auto seeds = ref.run_seeds();

    struct Task {
        std::size_t variant;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        for (auto s : seeds) tasks.push_back({v, s});
    }
    std::vector<EvalMetrics> results(tasks.size());
    auto run_task = [&](std::size_t i) {
        results[i] = run_experiment(variants[tasks[i].variant].config, tasks[i].seed).final_metrics;
    };
    if (jobs <= 1) {
        for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> workers;
        for (std::size_t j = 0; j < std::min(jobs, tasks.size()); ++j) {
            workers.push_back(std::async(std::launch::async, [&] {
                for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(i);
            }));
        }
        for (auto& w : workers) w.get();
    }

    std::vector<ComparisonRow> rows;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        ComparisonRow row{variants[v].name, seeds.size(), std::vector<double>(5), std::vector<double>(5)};
        for (std::size_t col = 0; col < 5; ++col) {
            std::vector<double> xs;
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                if (tasks[i].variant != v) continue;
                if (col == 4) {
                    xs.push_back(results[i].overall);
                } else if (results[i].per_group[col]) {
                    xs.push_back(*results[i].per_group[col]);
                }
            }
            if (xs.empty()) {
                row.mean[col] = row.stddev[col] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            row.mean[col] = mean;
            row.stddev[col] = sample_std(xs, mean);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "variant,runs";
    for (const char* col : {"Many", "Medium", "Few", "Rare", "Overall"}) {
        out += std::string(",") + col + "_mean," + col + "_std";
    }
    out += "\n";
    for (const auto& r : rows) {
        out += r.name + "," + std::to_string(r.runs);
        for (std::size_t c = 0; c < 5; ++c) out += "," + fmt_number(r.mean[c]) + "," + fmt_number(r.stddev[c]);
        out += "\n";
    }
    return out;
}

std::filesystem::path resolve_output_dir(const ExperimentConfig& config) {
    if (config.output_dir) return *config.output_dir;
    if (const char* root = std::getenv("GHMCW_OUTPUT_ROOT"); root != nullptr && *root != '\0') {
        return std::filesystem::path(root) / config.name;
    }
    return std::filesystem::path("runs") / config.name;
}

}  // namespace ghmcw
