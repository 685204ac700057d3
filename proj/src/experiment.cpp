#include "flowlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>
#include <stdexcept>
#include <utility>

#include "flowlab/csv_io.hpp"
#include "flowlab/errors.hpp"
#include "flowlab/metrics.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/serialize.hpp"

namespace flowlab {

namespace {

const std::set<std::string>& known_methods() {
    static const std::set<std::string> methods = {"flowedit", "invert", "direct", "sdedit"};
    return methods;
}

const std::set<std::string>& known_sweep_axes() {
    static const std::set<std::string> axes = {"n_max", "n_min", "n_avg", "c", "guidance_scale"};
    return axes;
}

std::vector<Eigen::VectorXd> component_means(const GaussianMixture& mixture) {
    std::vector<Eigen::VectorXd> means;
    means.reserve(static_cast<std::size_t>(mixture.num_components()));
    for (const GaussianComponent& component : mixture.components()) {
        means.push_back(component.mean);
    }
    return means;
}

void reject_unknown_keys(const nlohmann::json& object, const std::set<std::string>& known,
                         const std::string& where) {
    for (const auto& item : object.items()) {
        if (known.count(item.key()) == 0) {
            throw config_error(where + ": unknown field '" + item.key() + "'");
        }
    }
}

} // namespace

Schedule ScheduleConfig::build() const {
    Schedule base = Schedule::uniform(step_count);
    return Schedule(base.timesteps(), n_max, n_min, n_avg, step_scale_c);
}

std::vector<std::uint64_t> ExperimentConfig::run_seeds() const {
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(num_seeds));
    for (int i = 0; i < num_seeds; ++i) {
        seeds.push_back(seed + static_cast<std::uint64_t>(i));
    }
    return seeds;
}

void ExperimentConfig::validate() const {
    if (source.dim() != target.dim()) {
        throw config_error("source and target mixtures must share a dimension (got " +
                           std::to_string(source.dim()) + " and " + std::to_string(target.dim()) + ")");
    }
    if (source_conditioning != "auto" && source_conditioning != "mode" &&
        source_conditioning != "mixture") {
        throw config_error("source_conditioning must be 'auto', 'mode', or 'mixture' (got '" +
                           source_conditioning + "')");
    }
    if (samples < 2) {
        throw config_error("samples must be at least 2 (two-sample metrics need pairs)");
    }
    if (num_seeds < 1) {
        throw config_error("num_seeds must be at least 1");
    }
    if (methods.empty()) {
        throw config_error("methods must not be empty");
    }
    for (const std::string& method : methods) {
        if (known_methods().count(method) == 0) {
            throw config_error("unknown editing method '" + method + "'");
        }
    }
    if (calibration.resamples < 1) {
        throw config_error("calibration.resamples must be at least 1");
    }
    if (!(calibration.percentile > 0.0 && calibration.percentile <= 1.0)) {
        throw config_error("calibration.percentile must lie in (0, 1]");
    }
    if (expectation_reference_samples < 256) {
        throw config_error("expectation_reference_samples must be at least 256");
    }
    for (const auto& [axis, values] : sweep) {
        if (known_sweep_axes().count(axis) == 0) {
            throw config_error("unknown sweep axis '" + axis + "'");
        }
        if (values.empty()) {
            throw config_error("sweep axis '" + axis + "' has no values");
        }
    }
    try {
        (void)schedule.build();
    } catch (const std::invalid_argument& error) {
        throw config_error(std::string("invalid schedule: ") + error.what());
    }
}

ExperimentConfig default_benchmark_config() {
    const double s = 15.0 / std::sqrt(2.0);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);

    std::vector<GaussianComponent> source_components(2);
    source_components[0] = {0.5, Eigen::Vector2d(s, s), eye};
    source_components[1] = {0.5, Eigen::Vector2d(-s, -s), eye};

    std::vector<GaussianComponent> target_components(2);
    target_components[0] = {0.5, Eigen::Vector2d(-15.0, 0.0), eye};
    target_components[1] = {0.5, Eigen::Vector2d(0.0, 15.0), eye};

    ExperimentConfig config(GaussianMixture(std::move(source_components)),
                            GaussianMixture(std::move(target_components)));
    return config;
}

ExperimentConfig preset_config(const std::string& name) {
    if (name == "benchmark") {
        return default_benchmark_config();
    }
    if (name == "sd3-style") {
        ExperimentConfig config = default_benchmark_config();
        config.schedule.n_max = 33;
        config.schedule.n_avg = 1;
        return config;
    }
    throw config_error("unknown preset '" + name + "' (known: benchmark, sd3-style)");
}

ExperimentConfig config_from_json(const nlohmann::json& value) {
    if (!value.is_object()) {
        throw config_error("config root must be a JSON object");
    }
    reject_unknown_keys(value,
                        {"source", "target", "schedule", "source_conditioning", "methods",
                         "samples", "seed", "num_seeds", "guidance", "calibration",
                         "record_trajectories", "sweep", "expectation_reference_samples"},
                        "config");
    if (!value.contains("source")) {
        throw config_error("config: missing required field 'source'");
    }
    if (!value.contains("target")) {
        throw config_error("config: missing required field 'target'");
    }

    ExperimentConfig config(gmm_from_json(value.at("source")), gmm_from_json(value.at("target")));

    if (value.contains("schedule")) {
        const nlohmann::json& sched = value.at("schedule");
        reject_unknown_keys(sched, {"steps", "n_max", "n_min", "n_avg", "step_scale_c"},
                            "config.schedule");
        config.schedule.step_count = sched.value("steps", config.schedule.step_count);
        config.schedule.n_max = sched.value("n_max", config.schedule.step_count);
        config.schedule.n_min = sched.value("n_min", config.schedule.n_min);
        config.schedule.n_avg = sched.value("n_avg", config.schedule.n_avg);
        config.schedule.step_scale_c = sched.value("step_scale_c", config.schedule.step_scale_c);
    }
    config.source_conditioning = value.value("source_conditioning", config.source_conditioning);
    if (value.contains("methods")) {
        config.methods = value.at("methods").get<std::vector<std::string>>();
    }
    config.samples = value.value("samples", config.samples);
    config.seed = value.value("seed", config.seed);
    config.num_seeds = value.value("num_seeds", config.num_seeds);
    if (value.contains("guidance")) {
        const nlohmann::json& guidance = value.at("guidance");
        reject_unknown_keys(guidance, {"enabled", "source_scale", "target_scale"},
                            "config.guidance");
        config.guidance.enabled = guidance.value("enabled", config.guidance.enabled);
        config.guidance.source_scale = guidance.value("source_scale", config.guidance.source_scale);
        config.guidance.target_scale = guidance.value("target_scale", config.guidance.target_scale);
    }
    if (value.contains("calibration")) {
        const nlohmann::json& calibration = value.at("calibration");
        reject_unknown_keys(calibration, {"resamples", "percentile"}, "config.calibration");
        config.calibration.resamples = calibration.value("resamples", config.calibration.resamples);
        config.calibration.percentile = calibration.value("percentile", config.calibration.percentile);
    }
    config.record_trajectories = value.value("record_trajectories", config.record_trajectories);
    if (value.contains("sweep")) {
        if (!value.at("sweep").is_object()) {
            throw config_error("config.sweep must be an object mapping axis -> values");
        }
        for (const auto& item : value.at("sweep").items()) {
            config.sweep[item.key()] = item.value().get<std::vector<double>>();
        }
    }
    config.expectation_reference_samples =
        value.value("expectation_reference_samples", config.expectation_reference_samples);

    config.validate();
    return config;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json value;
    value["source"] = gmm_to_json(config.source);
    value["target"] = gmm_to_json(config.target);
    value["schedule"] = {{"steps", config.schedule.step_count},
                         {"n_max", config.schedule.n_max},
                         {"n_min", config.schedule.n_min},
                         {"n_avg", config.schedule.n_avg},
                         {"step_scale_c", config.schedule.step_scale_c}};
    value["source_conditioning"] = config.source_conditioning;
    value["methods"] = config.methods;
    value["samples"] = config.samples;
    value["seed"] = config.seed;
    value["num_seeds"] = config.num_seeds;
    value["guidance"] = {{"enabled", config.guidance.enabled},
                         {"source_scale", config.guidance.source_scale},
                         {"target_scale", config.guidance.target_scale}};
    value["calibration"] = {{"resamples", config.calibration.resamples},
                            {"percentile", config.calibration.percentile}};
    value["record_trajectories"] = config.record_trajectories;
    if (!config.sweep.empty()) {
        nlohmann::json sweep = nlohmann::json::object();
        for (const auto& [axis, values] : config.sweep) {
            sweep[axis] = values;
        }
        value["sweep"] = sweep;
    }
    value["expectation_reference_samples"] = config.expectation_reference_samples;
    return value;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    return config_from_json(parse_json_file(path));
}

std::string config_hash(const ExperimentConfig& config) {
    const std::string text = config_to_json(config).dump();
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char byte : text) {
        hash ^= byte;
        hash *= 1099511628211ULL;
    }
    char buffer[19];
    std::snprintf(buffer, sizeof(buffer), "0x%016llx", static_cast<unsigned long long>(hash));
    return std::string(buffer);
}

ConditionedModel build_analytic_model(const ExperimentConfig& config) {
    ConditionedModel model = ConditionedModel::analytic(config.source.dim());
    model.add_condition("src", config.source);
    model.add_condition("tar", config.target);

    // One condition per source component, for runs that condition each sample
    // on the component that generated it rather than on the whole mixture.
    for (int k = 0; k < config.source.num_components(); ++k) {
        GaussianComponent single = config.source.component(k);
        single.weight = 1.0;
        model.add_condition("src/" + std::to_string(k),
                            GaussianMixture({std::move(single)}));
    }

    // The unconditional distribution for guidance: an even split between the
    // two conditions, mirroring training a single model on the pooled data.
    std::vector<GaussianComponent> pooled;
    for (const GaussianComponent& component : config.source.components()) {
        GaussianComponent half = component;
        half.weight *= 0.5;
        pooled.push_back(std::move(half));
    }
    for (const GaussianComponent& component : config.target.components()) {
        GaussianComponent half = component;
        half.weight *= 0.5;
        pooled.push_back(std::move(half));
    }
    model.add_condition("uncond", GaussianMixture(std::move(pooled)));
    return model;
}

std::uint64_t mode_group_seed(std::uint64_t run_seed, int mode) {
    // Stir the component index into the run seed so the per-component groups
    // of one run draw independent edit noise while the whole run remains
    // reproducible from a single number.
    return splitmix64(run_seed ^ splitmix64(0x6d6f646524u + static_cast<std::uint64_t>(mode)));
}

EditResult run_edit_method(const ConditionedModel& model, const std::string& method,
                           const EditRequest& request) {
    if (method == "flowedit") {
        return flowedit(model, request);
    }
    if (method == "invert") {
        return invert_edit(model, request);
    }
    if (method == "direct") {
        return direct_path_edit(model, request);
    }
    if (method == "sdedit") {
        return sdedit(model, request);
    }
    throw config_error("unknown editing method '" + method + "'");
}

namespace {

/// Request skeleton shared by every group of a run: schedule and guidance from
/// the config, conditions defaulted to the whole mixtures.
EditRequest base_request(const ExperimentConfig& config, std::uint64_t seed) {
    EditRequest request;
    request.src_condition = "src";
    request.tar_condition = "tar";
    request.schedule = config.schedule.build();
    request.seed = seed;
    if (config.guidance.enabled) {
        request.guidance.enabled = true;
        request.guidance.unconditional = "uncond";
        request.guidance.source_scale = config.guidance.source_scale;
        request.guidance.target_scale = config.guidance.target_scale;
    }
    return request;
}

/// Whether `method` should condition each sample's source-side velocity on
/// its generating component (true) or on the whole source mixture (false)
/// under this config. "auto" reserves per-component conditioning for the
/// inversion family, whose forward leg is what benefits from (and whose
/// intermixing behaviour is explained by) a sample-specific condition.
bool per_mode_conditioning(const ExperimentConfig& config, const std::string& method) {
    if (config.source_conditioning == "mode") {
        return true;
    }
    if (config.source_conditioning == "mixture") {
        return false;
    }
    return method == "invert" || method == "direct";
}

/// Runs `edit` once per conditioning group and scatters the per-group rows
/// back into the original sample order. Whole-mixture conditioning issues a
/// single request; per-component conditioning edits each sample under the
/// component that generated it, with a group seed derived from the run seed.
EditResult run_grouped(const ExperimentConfig& config, bool per_mode, const Batch& points,
                       const std::vector<int>& labels, std::uint64_t run_seed, bool record,
                       const std::function<EditResult(const EditRequest&)>& edit) {
    if (!per_mode) {
        EditRequest request = base_request(config, run_seed);
        request.source_points = points;
        request.record_trajectory = record;
        return edit(request);
    }

    const int n = static_cast<int>(points.rows());
    std::vector<std::vector<int>> groups(config.source.num_components());
    for (int i = 0; i < n; ++i) {
        groups[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);
    }

    EditResult merged;
    merged.edited_points = Batch::Zero(n, points.cols());
    for (int k = 0; k < static_cast<int>(groups.size()); ++k) {
        const std::vector<int>& rows = groups[static_cast<std::size_t>(k)];
        if (rows.empty()) {
            continue;
        }
        EditRequest request = base_request(config, mode_group_seed(run_seed, k));
        request.src_condition = "src/" + std::to_string(k);
        request.record_trajectory = record;
        request.source_points.resize(static_cast<Eigen::Index>(rows.size()), points.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            request.source_points.row(static_cast<Eigen::Index>(r)) = points.row(rows[r]);
        }

        EditResult part = edit(request);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            merged.edited_points.row(rows[r]) =
                part.edited_points.row(static_cast<Eigen::Index>(r));
        }
        if (part.endpoint_mc_se.size() > 0) {
            if (merged.endpoint_mc_se.size() == 0) {
                merged.endpoint_mc_se = Batch::Zero(n, points.cols());
            }
            for (std::size_t r = 0; r < rows.size(); ++r) {
                merged.endpoint_mc_se.row(rows[r]) =
                    part.endpoint_mc_se.row(static_cast<Eigen::Index>(r));
            }
        }
        for (Trajectory& trajectory : part.trajectories) {
            trajectory.label += "@" + request.src_condition;
            merged.trajectories.push_back(std::move(trajectory));
        }
        merged.replay = part.replay;
    }
    // Replay metadata describes the run as a whole, so report the run seed
    // rather than the seed of whichever group happened to come last.
    merged.replay.seed = run_seed;
    return merged;
}

}  // namespace

MethodRun run_method(const ConditionedModel& model, const ExperimentConfig& config,
                     const std::string& method, std::uint64_t run_seed) {
    auto [points, labels] = config.source.sample_with_labels(config.samples, run_seed);
    const bool record = config.record_trajectories && run_seed == config.seed;
    EditResult result = run_grouped(config, per_mode_conditioning(config, method), points,
                                    labels, run_seed, record,
                                    [&](const EditRequest& request) {
                                        return run_edit_method(model, method, request);
                                    });
    return MethodRun{std::move(points), std::move(labels), std::move(result)};
}

namespace {

SeedMetrics compute_metrics(const ExperimentConfig& config, const std::string& method,
                            std::uint64_t run_seed, const MethodRun& run,
                            double threshold) {
    SeedMetrics row;
    row.method = method;
    row.seed = run_seed;
    row.transport_cost_msd = transport_cost(run.source, run.result.edited_points);
    row.pairing_accuracy = pairing_accuracy(run.result.edited_points, run.source_labels,
                                            component_means(config.source),
                                            component_means(config.target));
    const std::uint64_t target_seed = derive_key(run_seed, rng_stream::fresh_target);
    const Batch target_draw = config.target.sample(config.samples, target_seed);
    row.energy_distance_to_target = energy_distance(run.result.edited_points, target_draw);
    row.self_distance_threshold = threshold;
    return row;
}

void fill_aggregates(MetricsReport& report, const std::vector<std::string>& methods) {
    for (const std::string& method : methods) {
        std::vector<const SeedMetrics*> rows;
        for (const SeedMetrics& row : report.rows) {
            if (row.method == method) {
                rows.push_back(&row);
            }
        }
        if (rows.empty()) {
            continue;
        }
        auto aggregate = [&rows](auto member) {
            Aggregate out;
            for (const SeedMetrics* row : rows) {
                out.mean += row->*member;
            }
            out.mean /= static_cast<double>(rows.size());
            if (rows.size() > 1) {
                double ss = 0.0;
                for (const SeedMetrics* row : rows) {
                    const double diff = row->*member - out.mean;
                    ss += diff * diff;
                }
                out.stddev = std::sqrt(ss / static_cast<double>(rows.size() - 1));
            }
            return out;
        };
        auto& slot = report.aggregates[method];
        slot["transport_cost_msd"] = aggregate(&SeedMetrics::transport_cost_msd);
        slot["pairing_accuracy"] = aggregate(&SeedMetrics::pairing_accuracy);
        slot["energy_distance_to_target"] = aggregate(&SeedMetrics::energy_distance_to_target);
    }
}

std::vector<std::string> edits_csv_header(int dim) {
    std::vector<std::string> header = {"method", "seed", "row"};
    for (int c = 0; c < dim; ++c) {
        header.push_back("src_x" + std::to_string(c));
    }
    for (int c = 0; c < dim; ++c) {
        header.push_back("edit_x" + std::to_string(c));
    }
    header.insert(header.end(), {"n_max", "n_min", "n_avg", "step_scale_c"});
    return header;
}

void append_edit_rows(CsvBuilder& csv, const std::string& method, std::uint64_t seed,
                      const MethodRun& run) {
    const Batch& source = run.source;
    const Batch& edited = run.result.edited_points;
    const ReplayInfo& replay = run.result.replay;
    for (Eigen::Index r = 0; r < source.rows(); ++r) {
        csv.cell(method).cell(seed).cell(static_cast<int>(r));
        for (Eigen::Index c = 0; c < source.cols(); ++c) {
            csv.cell(source(r, c));
        }
        for (Eigen::Index c = 0; c < edited.cols(); ++c) {
            csv.cell(edited(r, c));
        }
        csv.cell(replay.n_max).cell(replay.n_min).cell(replay.n_avg).cell(replay.step_scale_c);
        csv.end_row();
    }
}

} // namespace

MetricsReport evaluate_benchmark(const ConditionedModel& model,
                                 const ExperimentConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir) {
    config.validate();

    MetricsReport report;
    report.calibration_threshold =
        calibrate_energy_threshold(config.target, config.samples, config.calibration.resamples,
                                   config.calibration.percentile, config.seed);

    CsvBuilder edits(edits_csv_header(config.source.dim()));
    CsvBuilder pairing({"method", "seed", "row", "source_mode", "expected_mode",
                        "assigned_mode", "correct"});
    CsvBuilder metrics({"method", "seed", "transport_cost_msd", "pairing_accuracy",
                        "energy_distance_to_target", "self_distance_threshold"});
    std::vector<Trajectory> recorded;

    const std::vector<Eigen::VectorXd> source_modes = component_means(config.source);
    const std::vector<Eigen::VectorXd> target_modes = component_means(config.target);

    for (const std::string& method : config.methods) {
        for (std::uint64_t run_seed : config.run_seeds()) {
            MethodRun run = run_method(model, config, method, run_seed);
            report.rows.push_back(
                compute_metrics(config, method, run_seed, run, report.calibration_threshold));

            if (out_dir) {
                append_edit_rows(edits, method, run_seed, run);
                const std::vector<PairingRow> details = pairing_details(
                    run.result.edited_points, run.source_labels, source_modes, target_modes);
                for (std::size_t r = 0; r < details.size(); ++r) {
                    pairing.cell(method)
                        .cell(run_seed)
                        .cell(static_cast<int>(r))
                        .cell(details[r].source_mode)
                        .cell(details[r].expected_mode)
                        .cell(details[r].assigned_mode)
                        .cell(details[r].correct ? 1 : 0);
                    pairing.end_row();
                }
            }
            for (Trajectory trajectory : run.result.trajectories) {
                trajectory.label = method + "/" + trajectory.label;
                recorded.push_back(std::move(trajectory));
            }
        }
    }

    fill_aggregates(report, config.methods);

    if (out_dir) {
        for (const SeedMetrics& row : report.rows) {
            metrics.cell(row.method)
                .cell(row.seed)
                .cell(row.transport_cost_msd)
                .cell(row.pairing_accuracy)
                .cell(row.energy_distance_to_target)
                .cell(row.self_distance_threshold);
            metrics.end_row();
        }
        write_file_atomic(*out_dir / "edits.csv", edits.str());
        write_file_atomic(*out_dir / "pairing.csv", pairing.str());
        write_file_atomic(*out_dir / "metrics.csv", metrics.str());
        write_file_atomic(*out_dir / "report.json", report_to_json(report, config).dump(2) + "\n");
        if (!recorded.empty()) {
            write_file_atomic(*out_dir / "trajectories.csv", trajectories_to_csv(recorded));
        }
    }
    return report;
}

MetricsReport run_benchmark(const ExperimentConfig& config,
                            const std::optional<std::filesystem::path>& out_dir) {
    return evaluate_benchmark(build_analytic_model(config), config, out_dir);
}

std::vector<double> SweepResult::seed_mean(const std::string& method,
                                           const std::string& metric) const {
    std::vector<double> means(values.size(), 0.0);
    std::vector<int> counts(values.size(), 0);
    for (const SweepRow& row : rows) {
        if (row.metrics.method != method) {
            continue;
        }
        const auto it = std::find(values.begin(), values.end(), row.axis_value);
        if (it == values.end()) {
            continue;
        }
        const std::size_t index = static_cast<std::size_t>(it - values.begin());
        double value = 0.0;
        if (metric == "msd") {
            value = row.metrics.transport_cost_msd;
        } else if (metric == "energy") {
            value = row.metrics.energy_distance_to_target;
        } else if (metric == "pairing") {
            value = row.metrics.pairing_accuracy;
        } else if (metric == "gap") {
            value = row.rms_gap;
        } else {
            throw std::invalid_argument("unknown sweep metric '" + metric + "'");
        }
        means[index] += value;
        counts[index] += 1;
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (counts[i] == 0) {
            means[i] = std::numeric_limits<double>::quiet_NaN();
        } else {
            means[i] /= static_cast<double>(counts[i]);
        }
    }
    return means;
}

namespace {

std::vector<double> default_sweep_values(const std::string& axis, int step_count) {
    const double T = static_cast<double>(step_count);
    if (axis == "n_max") {
        return {0.0, std::round(T / 4.0), std::round(T / 2.0), std::round(3.0 * T / 4.0), T};
    }
    if (axis == "n_min") {
        return {0.0, std::round(T / 8.0), std::round(T / 4.0), std::round(T / 2.0)};
    }
    if (axis == "n_avg") {
        return {1.0, 4.0, 16.0, 64.0};
    }
    if (axis == "c") {
        return {0.6, 0.8, 1.0, 1.2, 1.4};
    }
    if (axis == "guidance_scale") {
        return {0.0, 0.5, 1.0, 1.5, 2.0};
    }
    throw config_error("unknown sweep axis '" + axis + "'");
}

/// RMS over points of the Euclidean gap between two batches.
double rms_point_gap(const Batch& a, const Batch& b) {
    return std::sqrt((a - b).rowwise().squaredNorm().mean());
}

} // namespace

SweepResult run_sweep(const ConditionedModel& model, const ExperimentConfig& config,
                      const std::string& axis,
                      const std::optional<std::filesystem::path>& out_dir) {
    config.validate();
    if (known_sweep_axes().count(axis) == 0) {
        throw config_error("unknown sweep axis '" + axis + "'");
    }

    SweepResult result;
    result.axis = axis;
    const auto configured = config.sweep.find(axis);
    result.values = configured != config.sweep.end()
                        ? configured->second
                        : default_sweep_values(axis, config.schedule.step_count);

    // The flowedit-only axes don't change the other methods' outputs at all,
    // so sweeping them there would only add identical rows.
    const bool flowedit_only = axis == "n_avg" || axis == "c";
    std::vector<std::string> methods = config.methods;
    if (flowedit_only) {
        methods = {"flowedit"};
    }

    const double threshold =
        calibrate_energy_threshold(config.target, config.samples, config.calibration.resamples,
                                   config.calibration.percentile, config.seed);

    // Converged per-seed reference endpoints for the n_avg axis, computed once
    // (the noise streams are keyed so every finite n_avg run shares its
    // leading draws with this reference).
    std::map<std::uint64_t, Batch> references;
    if (axis == "n_avg") {
        for (std::uint64_t run_seed : config.run_seeds()) {
            auto [points, labels] = config.source.sample_with_labels(config.samples, run_seed);
            references[run_seed] =
                run_grouped(config, per_mode_conditioning(config, "flowedit"), points, labels,
                            run_seed, false,
                            [&](const EditRequest& request) {
                                return flowedit_expectation(model, request,
                                                            config.expectation_reference_samples);
                            })
                    .edited_points;
        }
    }

    for (double value : result.values) {
        ExperimentConfig point = config;
        if (axis == "n_max") {
            point.schedule.n_max = static_cast<int>(std::llround(value));
            point.schedule.n_min = std::min(point.schedule.n_min, point.schedule.n_max);
        } else if (axis == "n_min") {
            point.schedule.n_min = static_cast<int>(std::llround(value));
        } else if (axis == "n_avg") {
            point.schedule.n_avg = static_cast<int>(std::llround(value));
        } else if (axis == "c") {
            point.schedule.step_scale_c = value;
        } else if (axis == "guidance_scale") {
            point.guidance.enabled = true;
            point.guidance.target_scale = value;
        }
        point.validate();

        for (const std::string& method : methods) {
            for (std::uint64_t run_seed : config.run_seeds()) {
                MethodRun run = run_method(model, point, method, run_seed);
                SweepRow row;
                row.axis_value = value;
                row.metrics = compute_metrics(point, method, run_seed, run, threshold);
                if (axis == "n_avg" && method == "flowedit") {
                    row.rms_gap = rms_point_gap(run.result.edited_points, references.at(run_seed));
                }
                result.rows.push_back(std::move(row));
            }
        }
    }

    if (out_dir) {
        std::vector<std::string> header = {"axis", "value", "method", "seed",
                                           "transport_cost_msd", "pairing_accuracy",
                                           "energy_distance_to_target"};
        const bool with_gap = axis == "n_avg";
        if (with_gap) {
            header.push_back("rms_gap_to_reference");
        }
        CsvBuilder csv(header);
        for (const SweepRow& row : result.rows) {
            csv.cell(axis)
                .cell(row.axis_value)
                .cell(row.metrics.method)
                .cell(row.metrics.seed)
                .cell(row.metrics.transport_cost_msd)
                .cell(row.metrics.pairing_accuracy)
                .cell(row.metrics.energy_distance_to_target);
            if (with_gap) {
                csv.cell(row.rms_gap);
            }
            csv.end_row();
        }
        write_file_atomic(*out_dir / ("sweep_" + axis + ".csv"), csv.str());
    }
    return result;
}

nlohmann::json report_to_json(const MetricsReport& report, const ExperimentConfig& config) {
    nlohmann::json value;
    value["tool_version"] = kToolVersion;
    value["config_hash"] = config_hash(config);
    value["config"] = config_to_json(config);
    value["calibration"] = {{"threshold", report.calibration_threshold},
                            {"resamples", config.calibration.resamples},
                            {"percentile", config.calibration.percentile},
                            {"samples", config.samples}};
    nlohmann::json aggregates = nlohmann::json::object();
    for (const auto& [method, metrics] : report.aggregates) {
        nlohmann::json slot = nlohmann::json::object();
        for (const auto& [metric, aggregate] : metrics) {
            slot[metric] = {{"mean", aggregate.mean}, {"stddev", aggregate.stddev}};
        }
        aggregates[method] = slot;
    }
    value["aggregates"] = aggregates;
    nlohmann::json rows = nlohmann::json::array();
    for (const SeedMetrics& row : report.rows) {
        rows.push_back({{"method", row.method},
                        {"seed", row.seed},
                        {"transport_cost_msd", row.transport_cost_msd},
                        {"pairing_accuracy", row.pairing_accuracy},
                        {"energy_distance_to_target", row.energy_distance_to_target},
                        {"self_distance_threshold", row.self_distance_threshold}});
    }
    value["rows"] = rows;
    return value;
}

} // namespace flowlab
