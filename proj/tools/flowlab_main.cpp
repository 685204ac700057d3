// Command-line front end: sampling, single edits, the multi-seed benchmark,
// parameter sweeps, MLP training and the release-gate check, all against a
// JSON config (or a built-in preset) and a single master seed.
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowlab/acceptance.hpp"
#include "flowlab/csv_io.hpp"
#include "flowlab/editing.hpp"
#include "flowlab/errors.hpp"
#include "flowlab/experiment.hpp"
#include "flowlab/serialize.hpp"
#include "flowlab/train.hpp"

namespace {

using flowlab::ExperimentConfig;

/// Options shared by every config-consuming subcommand, applied on top of
/// the loaded file/preset so a flag always wins over the config.
struct Overrides {
    std::string config_path;
    std::string preset = "benchmark";
    std::optional<std::uint64_t> seed;
    std::optional<int> samples;
    std::optional<int> num_seeds;
    std::optional<int> steps;
    std::optional<int> n_max;
    std::optional<int> n_min;
    std::optional<int> n_avg;
    std::optional<double> step_scale;
    std::optional<double> guidance_scale;
    bool trajectories = false;
};

void add_config_flags(CLI::App* cmd, Overrides& over) {
    cmd->add_option("--config", over.config_path, "JSON config file (see README for the schema)");
    cmd->add_option("--preset", over.preset,
                    "built-in config when --config is not given: benchmark | sd3-style");
    cmd->add_option("--seed", over.seed, "master seed (run r uses seed + r)");
    cmd->add_option("--samples", over.samples, "points per run");
    cmd->add_option("--num-seeds", over.num_seeds, "number of runs per method");
    cmd->add_option("--steps", over.steps, "time-grid step count T");
    cmd->add_option("--n-max", over.n_max, "first (deepest) editing step index");
    cmd->add_option("--n-min", over.n_min, "last editing step index (tail is plain sampling)");
    cmd->add_option("--n-avg", over.n_avg, "noise draws averaged per editing step");
    cmd->add_option("--step-scale", over.step_scale, "Euler delta scaling c for flowedit");
    cmd->add_option("--guidance-scale", over.guidance_scale,
                    "enable guidance with this target-side scale");
    cmd->add_flag("--trajectories", over.trajectories,
                  "record and write integration paths for the first seed");
}

ExperimentConfig resolve_config(const Overrides& over) {
    ExperimentConfig config = over.config_path.empty()
                                  ? flowlab::preset_config(over.preset)
                                  : flowlab::load_config(over.config_path);
    if (over.seed) config.seed = *over.seed;
    if (over.samples) config.samples = *over.samples;
    if (over.num_seeds) config.num_seeds = *over.num_seeds;
    if (over.steps) config.schedule.step_count = *over.steps;
    if (over.n_max) config.schedule.n_max = *over.n_max;
    if (over.n_min) config.schedule.n_min = *over.n_min;
    if (over.n_avg) config.schedule.n_avg = *over.n_avg;
    if (over.step_scale) config.schedule.step_scale_c = *over.step_scale;
    if (over.guidance_scale) {
        config.guidance.enabled = true;
        config.guidance.target_scale = *over.guidance_scale;
    }
    if (over.trajectories) config.record_trajectories = true;
    config.validate();
    return config;
}

void print_stanza(const ExperimentConfig& config) {
    std::cout << "flowlab " << flowlab::kToolVersion << " | config " << flowlab::config_hash(config)
              << " | seed " << config.seed << " | samples " << config.samples << " | T="
              << config.schedule.step_count << " n_max=" << config.schedule.n_max
              << " n_min=" << config.schedule.n_min << " n_avg=" << config.schedule.n_avg
              << " c=" << config.schedule.step_scale_c << "\n";
}

void print_aggregates(const flowlab::MetricsReport& report) {
    std::cout << "energy-distance threshold (same-distribution calibration): "
              << flowlab::format_double(report.calibration_threshold) << "\n";
    for (const auto& [method, metrics] : report.aggregates) {
        std::cout << "  " << method << ":";
        for (const auto& [metric, aggregate] : metrics) {
            std::cout << " " << metric << "=" << flowlab::format_double(aggregate.mean)
                      << "+-" << flowlab::format_double(aggregate.stddev);
        }
        std::cout << "\n";
    }
}

int run_sample(const Overrides& over, const std::string& which, double t,
               const std::string& out_file) {
    ExperimentConfig config = resolve_config(over);
    print_stanza(config);
    const flowlab::GaussianMixture& base = which == "target" ? config.target : config.source;
    const flowlab::GaussianMixture mixture = t > 0.0 ? base.marginal_at(t) : base;

    const auto [points, labels] = mixture.sample_with_labels(config.samples, config.seed);
    std::vector<std::string> header = {"row", "component"};
    for (int c = 0; c < mixture.dim(); ++c) {
        header.push_back("x" + std::to_string(c));
    }
    flowlab::CsvBuilder csv(header);
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        csv.cell(static_cast<int>(r)).cell(labels[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < points.cols(); ++c) {
            csv.cell(points(r, c));
        }
        csv.end_row();
    }
    flowlab::write_file_atomic(out_file, csv.str());
    std::cout << "wrote " << points.rows() << " draws from the " << which
              << (t > 0.0 ? " marginal at t=" + flowlab::format_double(t) : " distribution")
              << " to " << out_file << "\n";
    return 0;
}

int run_edit_command(const Overrides& over, const std::string& method,
                     const std::string& out_dir) {
    ExperimentConfig config = resolve_config(over);
    config.methods = {method};
    config.num_seeds = 1;
    config.validate();
    print_stanza(config);

    const flowlab::MetricsReport report =
        flowlab::run_benchmark(config, std::filesystem::path(out_dir));
    print_aggregates(report);
    std::cout << "artifacts in " << out_dir << "\n";
    return 0;
}

int run_benchmark_command(const Overrides& over, const std::string& out_dir) {
    ExperimentConfig config = resolve_config(over);
    print_stanza(config);
    const flowlab::MetricsReport report =
        flowlab::run_benchmark(config, std::filesystem::path(out_dir));
    print_aggregates(report);
    std::cout << "artifacts in " << out_dir << "\n";
    return 0;
}

int run_sweep_command(const Overrides& over, const std::string& axis,
                      const std::string& out_dir) {
    ExperimentConfig config = resolve_config(over);
    print_stanza(config);
    const flowlab::SweepResult sweep = flowlab::run_sweep(
        flowlab::build_analytic_model(config), config, axis, std::filesystem::path(out_dir));

    const std::vector<std::string> methods =
        (axis == "n_avg" || axis == "c") ? std::vector<std::string>{"flowedit"} : config.methods;
    for (const std::string& method : methods) {
        std::cout << "  " << method << " seed-mean MSD over " << axis << ":";
        for (double value : sweep.seed_mean(method, "msd")) {
            std::cout << " " << flowlab::format_double(value);
        }
        std::cout << "\n";
    }
    std::cout << "artifacts in " << out_dir << "\n";
    return 0;
}

int run_train_command(const Overrides& over, const std::string& out_file,
                      const std::string& curve_file, std::optional<int> iterations) {
    ExperimentConfig config = resolve_config(over);
    print_stanza(config);

    flowlab::TrainConfig train_config;
    if (iterations) train_config.iterations = *iterations;
    const flowlab::TrainResult result =
        flowlab::train({config.source, config.target}, train_config, config.seed);
    std::cout << "loss " << flowlab::format_double(result.initial_loss) << " -> "
              << flowlab::format_double(result.final_loss) << " over "
              << train_config.iterations << " iterations\n";

    flowlab::save_checkpoint(result.net, out_file);
    std::cout << "checkpoint written to " << out_file << "\n";
    if (!curve_file.empty()) {
        flowlab::CsvBuilder csv({"iteration", "loss"});
        for (const auto& [iteration, loss] : result.loss_curve) {
            csv.cell(iteration).cell(loss);
            csv.end_row();
        }
        flowlab::write_file_atomic(curve_file, csv.str());
        std::cout << "loss curve written to " << curve_file << "\n";
    }
    return 0;
}

int run_check_command(const std::string& self_path, const std::string& scratch,
                      const std::string& cli_override) {
    flowlab::AcceptanceOptions options;
    options.scratch_dir = scratch;
    options.log = [](const std::string& line) { std::cout << line << std::endl; };
    if (!cli_override.empty()) {
        options.cli_executable = cli_override;
    } else {
        std::error_code ec;
        const auto absolute = std::filesystem::absolute(self_path, ec);
        if (!ec && std::filesystem::exists(absolute)) {
            options.cli_executable = absolute.string();
        }
    }

    const std::vector<flowlab::CriterionResult> results = flowlab::run_acceptance_suite(options);
    int failed = 0;
    for (const flowlab::CriterionResult& result : results) {
        failed += result.passed ? 0 : 1;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria FAILED")
              << " (" << results.size() - static_cast<std::size_t>(failed) << "/" << results.size()
              << ")\n";
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowlab: rectified-flow editing on analytically tractable 2D mixtures"};
    app.require_subcommand(1);

    Overrides over_sample, over_edit, over_bench, over_sweep, over_train;
    std::string which = "source", out_path, method = "flowedit", axis = "n_max";
    std::string curve_file, scratch = "acceptance-scratch", cli_override;
    double marginal_t = 0.0;
    std::optional<int> iterations;

    CLI::App* sample = app.add_subcommand("sample", "draw points from a configured mixture");
    add_config_flags(sample, over_sample);
    sample->add_option("--which", which, "source | target");
    sample->add_option("--t", marginal_t, "sample the noising marginal at this time instead");
    sample->add_option("--out", out_path, "output CSV file")->required();

    CLI::App* edit = app.add_subcommand("edit", "run one editing method once");
    add_config_flags(edit, over_edit);
    edit->add_option("--method", method, "flowedit | invert | direct | sdedit");
    edit->add_option("--out", out_path, "output directory")->required();

    CLI::App* bench = app.add_subcommand(
        "benchmark", "run every configured method across seeds and write the report");
    add_config_flags(bench, over_bench);
    bench->add_option("--out", out_path, "output directory")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "sweep one schedule parameter");
    add_config_flags(sweep, over_sweep);
    sweep->add_option("--axis", axis, "n_max | n_min | n_avg | c | guidance_scale");
    sweep->add_option("--out", out_path, "output directory")->required();

    CLI::App* train_cmd = app.add_subcommand("train", "fit the MLP velocity field");
    add_config_flags(train_cmd, over_train);
    train_cmd->add_option("--iterations", iterations, "optimizer steps");
    train_cmd->add_option("--out", out_path, "checkpoint JSON file")->required();
    train_cmd->add_option("--curve", curve_file, "also write the loss curve CSV here");

    CLI::App* check = app.add_subcommand("check", "run the full release gate");
    check->add_option("--scratch", scratch, "work directory for the determinism check");
    check->add_option("--cli", cli_override,
                      "executable the determinism check reruns (default: this binary)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sample->parsed()) {
            if (which != "source" && which != "target") {
                throw flowlab::config_error("--which must be 'source' or 'target'");
            }
            return run_sample(over_sample, which, marginal_t, out_path);
        }
        if (edit->parsed()) {
            return run_edit_command(over_edit, method, out_path);
        }
        if (bench->parsed()) {
            return run_benchmark_command(over_bench, out_path);
        }
        if (sweep->parsed()) {
            return run_sweep_command(over_sweep, axis, out_path);
        }
        if (train_cmd->parsed()) {
            return run_train_command(over_train, out_path, curve_file, iterations);
        }
        if (check->parsed()) {
            return run_check_command(argv[0], scratch, cli_override);
        }
    } catch (const flowlab::config_error& error) {
        std::cerr << "config error: " << error.what() << "\n";
        return 2;
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
    return 0;
}
