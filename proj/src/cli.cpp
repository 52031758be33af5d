#include "ghmcw/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"

#include "ghmcw/errors.hpp"
#include "ghmcw/experiment.hpp"

namespace ghmcw {

namespace {

namespace fs = std::filesystem;

struct CommonOptions {
    std::vector<std::string> configs;
    std::vector<std::string> overrides;
    std::string output;
    std::optional<std::uint64_t> seed;
};

ExperimentConfig load_config(const std::string& path, const CommonOptions& opts) {
    auto doc = load_json_file(path);
    for (const auto& o : opts.overrides) apply_override(doc, o);
    if (opts.seed) doc["seeds"] = nlohmann::json::array({*opts.seed});
    if (!opts.output.empty()) doc["output_dir"] = opts.output;
    return parse_experiment_config(doc);
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool many_configs) {
    if (many_configs) {
        cmd->add_option("-c,--config", opts.configs, "Experiment config (JSON); repeat to compare")->required();
    } else {
        cmd->add_option("-c,--config", opts.configs, "Experiment config (JSON)")->required()->expected(1);
    }
    cmd->add_option("-s,--set", opts.overrides, "Override a config field, e.g. train.epochs=5");
    cmd->add_option("-o,--output", opts.output, "Output directory");
    cmd->add_option("--seed", opts.seed, "Run a single repeat seed");
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

int cmd_synth(const CommonOptions& opts, std::ostream& out) {
    const auto cfg = load_config(opts.configs.front(), opts);
    const auto dir = resolve_output_dir(cfg);
    ensure_dir(dir);
    const auto seed = cfg.run_seeds().front();
    const auto data = prepare_data(cfg, seed);
    write_csv(dir / "train.csv", data.train);
    if (std::holds_alternative<SyntheticSource>(cfg.dataset) &&
        std::get<SyntheticSource>(cfg.dataset).test_per_class > 0) {
        write_csv(dir / "test.csv", data.test);
    }
    write_text_file(dir / "sizes.json", sizes_record(data.train).dump(2) + "\n");
    write_text_file(dir / "config.json", cfg.raw.dump(2) + "\n");
    out << "wrote " << data.train.size() << " training rows to " << (dir / "train.csv").string() << "\n";
    return exit_ok;
}

int cmd_train(const CommonOptions& opts, std::ostream& out) {
    const auto cfg = load_config(opts.configs.front(), opts);
    const auto dir = resolve_output_dir(cfg);
    const auto seeds = cfg.run_seeds();
    std::vector<RunOutput> runs;
    for (auto seed : seeds) {
        auto run = run_experiment(cfg, seed);
        const auto run_dir = seeds.size() == 1 ? dir : dir / ("seed_" + std::to_string(seed));
        write_run_outputs(run_dir, cfg, run);
        out << "seed " << seed << ": overall accuracy " << run.final_metrics.overall << "\n";
        runs.push_back(std::move(run));
    }
    if (seeds.size() > 1) {
        ensure_dir(dir);
        write_text_file(dir / "summary.csv", summary_csv(cfg, runs));
        write_text_file(dir / "config.json", cfg.raw.dump(2) + "\n");
    }
    return exit_ok;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& sizes_path,
             const std::string& output, std::ostream& out) {
    const Model model = model_from_json(load_json_file(model_path));
    const auto data = read_csv(data_path, model.class_count());
    std::vector<Group> groups;
    if (!sizes_path.empty()) {
        const auto sizes = load_json_file(sizes_path).at("class_sizes").get<std::vector<std::size_t>>();
        if (sizes.size() != model.class_count()) {
            throw ConfigError(sizes_path, "class_sizes length does not match the model");
        }
        groups = assign_groups(sizes);
    }
    const auto metrics = evaluate(model, data, groups);
    const auto text = to_json(metrics).dump(2) + "\n";
    if (!output.empty()) {
        const fs::path path(output);
        if (path.has_parent_path()) ensure_dir(path.parent_path());
        write_text_file(path, text);
    }
    out << text;
    return exit_ok;
}

int cmd_compare(const CommonOptions& opts, bool ablation, std::size_t jobs, std::ostream& out) {
    std::vector<Variant> variants;
    if (ablation) {
        if (opts.configs.size() != 1) throw ConfigError("--config", "--ablation takes exactly one base config");
        variants = ablation_variants(load_config(opts.configs.front(), opts));
    } else {
        for (const auto& path : opts.configs) {
            auto cfg = load_config(path, opts);
            std::string name = cfg.name;
            if (std::any_of(variants.begin(), variants.end(), [&](const Variant& v) { return v.name == name; })) {
                name += "#" + std::to_string(variants.size());
            }
            variants.push_back({std::move(name), std::move(cfg)});
        }
    }
    if (variants.size() < 2) throw ConfigError("--config", "compare needs at least two configs or --ablation");
    const auto rows = compare_variants(variants, jobs);
    const auto text = comparison_csv(rows);
    fs::path dir = opts.output.empty() ? resolve_output_dir(variants.front().config).parent_path() / "compare"
                                       : fs::path(opts.output);
    ensure_dir(dir);
    write_text_file(dir / "comparison.csv", text);
    out << text;
    return exit_ok;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Category-wise gradient harmonized loss: experiment runner", "ghmcw"};
    app.require_subcommand(1);

    CommonOptions synth_opts, train_opts, compare_opts;
    auto* synth = app.add_subcommand("synth", "Generate a long-tailed synthetic dataset");
    add_common(synth, synth_opts, false);
    auto* train_cmd = app.add_subcommand("train", "Train a model and write metrics");
    add_common(train_cmd, train_opts, false);

    std::string model_path, data_path, sizes_path, eval_output;
    auto* eval = app.add_subcommand("eval", "Evaluate a model checkpoint on a CSV dataset");
    eval->add_option("-m,--model", model_path, "Model checkpoint (model.json)")->required();
    eval->add_option("-d,--data", data_path, "Dataset CSV")->required();
    eval->add_option("--sizes", sizes_path, "sizes.json of the training set, for group assignment");
    eval->add_option("-o,--output", eval_output, "Write metrics JSON here");

    bool ablation = false;
    std::size_t jobs = 1;
    auto* compare = app.add_subcommand("compare", "Compare loss variants over a seed list");
    add_common(compare, compare_opts, true);
    compare->add_flag("--ablation", ablation, "Expand one config into the Softmax/R/A^URA/R+A^AURA lattice");
    compare->add_option("-j,--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_opts, out);
        if (train_cmd->parsed()) return cmd_train(train_opts, out);
        if (eval->parsed()) return cmd_eval(model_path, data_path, sizes_path, eval_output, out);
        return cmd_compare(compare_opts, ablation, jobs, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        err << "invalid argument: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_runtime;
    }
}

}  // namespace ghmcw
