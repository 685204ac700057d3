// Experiment orchestration tests: config validation and JSON round-trips,
// the analytic model's condition registry, per-method conditioning
// semantics, and byte-identical benchmark artifacts across reruns. The
// heavyweight statistical claims live in the acceptance suite; here the
// benchmark runs at toy sizes to keep the loop fast.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "flowlab/errors.hpp"
#include "flowlab/experiment.hpp"
#include "flowlab/metrics.hpp"
#include "support.hpp"

using namespace flowlab;
using testsupport::bitwise_equal;

namespace {

ExperimentConfig tiny_config() {
    ExperimentConfig config = default_benchmark_config();
    config.samples = 24;
    config.num_seeds = 2;
    config.schedule = ScheduleConfig{10, 10, 0, 2, 1.0};
    config.calibration.resamples = 20;
    return config;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::string first_line(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    return line;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("flowlab-exp-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("the stock benchmark puts diagonal modes against axis modes") {
    const ExperimentConfig config = default_benchmark_config();
    REQUIRE(config.source.num_components() == 2);
    REQUIRE(config.target.num_components() == 2);

    const double coord = 15.0 / std::sqrt(2.0);
    CHECK((config.source.component(0).mean - Eigen::Vector2d(coord, coord)).norm() <
          1e-12);
    CHECK((config.source.component(1).mean - Eigen::Vector2d(-coord, -coord)).norm() <
          1e-12);
    CHECK((config.target.component(0).mean - Eigen::Vector2d(-15.0, 0.0)).norm() <
          1e-12);
    CHECK((config.target.component(1).mean - Eigen::Vector2d(0.0, 15.0)).norm() <
          1e-12);
    for (int k = 0; k < 2; ++k) {
        CHECK(config.source.component(k).weight == 0.5);
        CHECK((config.source.component(k).covariance - Eigen::Matrix2d::Identity())
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }

    CHECK(config.schedule.step_count == 50);
    CHECK(config.schedule.n_max == 50);
    CHECK(config.schedule.n_min == 0);
    CHECK(config.schedule.n_avg == 16);
    CHECK(config.source_conditioning == "auto");
    CHECK(config.methods == std::vector<std::string>{"flowedit", "invert", "sdedit"});
    CHECK(config.samples == 1000);
    CHECK(config.num_seeds == 20);
    CHECK(config.seed == 1);
    CHECK(config.calibration.resamples == 200);
    CHECK(config.calibration.percentile == 0.99);
    CHECK(config.expectation_reference_samples == 4096);
    CHECK_NOTHROW(config.validate());
}

TEST_CASE("presets are the stock benchmark and a shallow single-draw variant") {
    const ExperimentConfig benchmark = preset_config("benchmark");
    CHECK(config_to_json(benchmark).dump() ==
          config_to_json(default_benchmark_config()).dump());

    const ExperimentConfig sd3 = preset_config("sd3-style");
    CHECK(sd3.schedule.step_count == 50);
    CHECK(sd3.schedule.n_max == 33);
    CHECK(sd3.schedule.n_avg == 1);
    CHECK_NOTHROW(sd3.validate());

    CHECK_THROWS_WITH_AS(preset_config("bogus"), doctest::Contains("unknown preset"),
                         config_error);
}

TEST_CASE("validate rejects each inconsistent field with a pointed message") {
    CHECK_THROWS_WITH_AS(
        [] {
            ExperimentConfig config(
                default_benchmark_config().source,
                testsupport::single_gaussian(Eigen::Vector3d::Zero()));
            config.validate();
        }(),
        doctest::Contains("share a dimension"), config_error);

    ExperimentConfig config = tiny_config();
    config.source_conditioning = "sometimes";
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("source_conditioning"),
                         config_error);

    config = tiny_config();
    config.samples = 1;
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("at least 2"),
                         config_error);

    config = tiny_config();
    config.num_seeds = 0;
    CHECK_THROWS_AS(config.validate(), config_error);

    config = tiny_config();
    config.methods = {};
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("methods"), config_error);

    config = tiny_config();
    config.methods = {"flowedit", "bogus"};
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("unknown editing method"),
                         config_error);

    config = tiny_config();
    config.calibration.resamples = 0;
    CHECK_THROWS_AS(config.validate(), config_error);

    config = tiny_config();
    config.calibration.percentile = 1.2;
    CHECK_THROWS_AS(config.validate(), config_error);

    config = tiny_config();
    config.expectation_reference_samples = 255;
    CHECK_THROWS_AS(config.validate(), config_error);

    config = tiny_config();
    config.sweep["bogus"] = {1.0};
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("unknown sweep axis"),
                         config_error);

    config = tiny_config();
    config.sweep["n_max"] = {};
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("has no values"),
                         config_error);

    config = tiny_config();
    config.schedule.n_max = 60;
    CHECK_THROWS_WITH_AS(config.validate(), doctest::Contains("invalid schedule"),
                         config_error);
}

TEST_CASE("run seeds are consecutive from the base seed") {
    ExperimentConfig config = tiny_config();
    config.seed = 9;
    config.num_seeds = 3;
    CHECK(config.run_seeds() == std::vector<std::uint64_t>{9, 10, 11});
}

TEST_CASE("config JSON round-trips byte for byte and rejects unknown keys") {
    const ExperimentConfig config = default_benchmark_config();
    const nlohmann::json j = config_to_json(config);
    CHECK(config_to_json(config_from_json(j)).dump() == j.dump());
    CHECK(config_hash(config_from_json(j)) == config_hash(config));

    nlohmann::json extra = j;
    extra["bogus"] = 1;
    CHECK_THROWS_WITH_AS(config_from_json(extra), doctest::Contains("unknown field 'bogus'"),
                         config_error);

    nlohmann::json bad_schedule = j;
    bad_schedule["schedule"]["stepss"] = 10;
    CHECK_THROWS_WITH_AS(config_from_json(bad_schedule),
                         doctest::Contains("unknown field"), config_error);

    nlohmann::json no_source = j;
    no_source.erase("source");
    CHECK_THROWS_WITH_AS(config_from_json(no_source), doctest::Contains("source"),
                         config_error);
    nlohmann::json no_target = j;
    no_target.erase("target");
    CHECK_THROWS_AS(config_from_json(no_target), config_error);

    CHECK_THROWS_AS(config_from_json(nlohmann::json::array()), config_error);

    const TempDir dir;
    const std::filesystem::path file = dir.path / "config.json";
    {
        std::ofstream out(file);
        out << j.dump(2);
    }
    CHECK(config_hash(load_config(file)) == config_hash(config));
}

TEST_CASE("the config hash is a stable 64-bit fingerprint") {
    const ExperimentConfig config = default_benchmark_config();
    const std::string hash = config_hash(config);
    REQUIRE(hash.size() == 18);
    CHECK(hash.substr(0, 2) == "0x");
    CHECK(hash.find_first_not_of("0123456789abcdef", 2) == std::string::npos);
    CHECK(config_hash(config) == hash);

    ExperimentConfig changed = config;
    changed.samples = 999;
    CHECK(config_hash(changed) != hash);
}

TEST_CASE("the analytic model registers whole, per-mode and union conditions") {
    const ExperimentConfig config = default_benchmark_config();
    const ConditionedModel model = build_analytic_model(config);
    CHECK(model.dim() == 2);

    std::vector<Condition> conditions = model.conditions();
    std::sort(conditions.begin(), conditions.end());
    CHECK(conditions ==
          std::vector<Condition>{"src", "src/0", "src/1", "tar", "uncond"});

    for (int k = 0; k < 2; ++k) {
        const GaussianMixture& mode = model.mixture("src/" + std::to_string(k));
        REQUIRE(mode.num_components() == 1);
        CHECK(mode.component(0).weight == 1.0);
        CHECK((mode.component(0).mean - config.source.component(k).mean).norm() == 0.0);
    }

    const GaussianMixture& uncond = model.mixture("uncond");
    REQUIRE(uncond.num_components() == 4);
    for (int k = 0; k < 4; ++k) CHECK(uncond.component(k).weight == 0.25);
}

TEST_CASE("group seeds separate modes without losing determinism") {
    std::set<std::uint64_t> seen;
    for (const std::uint64_t run_seed : {1ull, 2ull, 3ull}) {
        for (int mode = 0; mode < 2; ++mode) {
            seen.insert(mode_group_seed(run_seed, mode));
            CHECK(mode_group_seed(run_seed, mode) == mode_group_seed(run_seed, mode));
        }
    }
    CHECK(seen.size() == 6);
}

TEST_CASE("auto conditioning is per-mode for inversion, whole-mixture for flowedit") {
    const ExperimentConfig base = tiny_config();
    const ConditionedModel model = build_analytic_model(base);

    auto run_with = [&](const std::string& conditioning, const std::string& method) {
        ExperimentConfig config = base;
        config.source_conditioning = conditioning;
        return run_method(model, config, method, 5);
    };

    const MethodRun invert_auto = run_with("auto", "invert");
    CHECK(invert_auto.source.rows() == base.samples);
    CHECK(invert_auto.source_labels.size() == static_cast<std::size_t>(base.samples));
    CHECK(invert_auto.result.replay.seed == 5);

    CHECK(bitwise_equal(invert_auto.result.edited_points,
                        run_with("mode", "invert").result.edited_points));
    CHECK_FALSE(bitwise_equal(invert_auto.result.edited_points,
                              run_with("mixture", "invert").result.edited_points));

    const MethodRun flowedit_auto = run_with("auto", "flowedit");
    CHECK(bitwise_equal(flowedit_auto.result.edited_points,
                        run_with("mixture", "flowedit").result.edited_points));
    CHECK_FALSE(bitwise_equal(flowedit_auto.result.edited_points,
                              run_with("mode", "flowedit").result.edited_points));
}

TEST_CASE("per-mode runs tag their trajectories with the group condition") {
    ExperimentConfig config = tiny_config();
    config.record_trajectories = true;
    config.seed = 5;
    const ConditionedModel model = build_analytic_model(config);

    const MethodRun run = run_method(model, config, "invert", 5);
    REQUIRE_FALSE(run.result.trajectories.empty());
    bool saw_mode0 = false;
    bool saw_mode1 = false;
    for (const Trajectory& trajectory : run.result.trajectories) {
        saw_mode0 = saw_mode0 || trajectory.label.find("@src/0") != std::string::npos;
        saw_mode1 = saw_mode1 || trajectory.label.find("@src/1") != std::string::npos;
    }
    CHECK(saw_mode0);
    CHECK(saw_mode1);

    // Recording is tied to the run whose seed matches the config seed.
    CHECK(run_method(model, config, "invert", 6).result.trajectories.empty());
}

TEST_CASE("the benchmark writes the documented artifacts deterministically") {
    ExperimentConfig config = tiny_config();
    config.methods = {"flowedit", "invert", "direct", "sdedit"};

    const TempDir dir_a;
    const TempDir dir_b;
    const MetricsReport report = run_benchmark(config, dir_a.path);
    run_benchmark(config, dir_b.path);

    REQUIRE(report.rows.size() == config.methods.size() *
                                      static_cast<std::size_t>(config.num_seeds));
    CHECK(report.calibration_threshold > 0.0);
    for (const SeedMetrics& row : report.rows) {
        CHECK(std::isfinite(row.transport_cost_msd));
        CHECK(row.transport_cost_msd > 0.0);
        CHECK(row.pairing_accuracy >= 0.0);
        CHECK(row.pairing_accuracy <= 1.0);
        CHECK(std::isfinite(row.energy_distance_to_target));
        CHECK(row.self_distance_threshold == report.calibration_threshold);
    }

    for (const std::string& method : config.methods) {
        REQUIRE(report.aggregates.count(method) == 1);
        for (const char* metric : {"transport_cost_msd", "pairing_accuracy",
                                   "energy_distance_to_target"}) {
            REQUIRE(report.aggregates.at(method).count(metric) == 1);
            CHECK(std::isfinite(report.aggregates.at(method).at(metric).mean));
            CHECK(report.aggregates.at(method).at(metric).stddev >= 0.0);
        }
    }

    CHECK(first_line(dir_a.path / "edits.csv") ==
          "method,seed,row,src_x0,src_x1,edit_x0,edit_x1,n_max,n_min,n_avg,step_scale_c");
    CHECK(first_line(dir_a.path / "pairing.csv") ==
          "method,seed,row,source_mode,expected_mode,assigned_mode,correct");
    CHECK(first_line(dir_a.path / "metrics.csv") ==
          "method,seed,transport_cost_msd,pairing_accuracy,energy_distance_to_target,"
          "self_distance_threshold");

    for (const char* name : {"edits.csv", "pairing.csv", "metrics.csv", "report.json"}) {
        CAPTURE(name);
        CHECK(slurp(dir_a.path / name) == slurp(dir_b.path / name));
    }

    const nlohmann::json report_json = nlohmann::json::parse(slurp(dir_a.path / "report.json"));
    CHECK(report_json.at("tool_version").get<std::string>() == kToolVersion);
    CHECK(report_json.at("config_hash").get<std::string>() == config_hash(config));
    CHECK(report_json.at("calibration").at("resamples").get<int>() ==
          config.calibration.resamples);
    CHECK(report_json.at("rows").size() == report.rows.size());
    CHECK(report_json.contains("config"));
    CHECK(report_json.contains("aggregates"));

    // metrics.csv rows: header plus methods x seeds.
    std::istringstream metrics(slurp(dir_a.path / "metrics.csv"));
    std::string line;
    int lines = 0;
    while (std::getline(metrics, line)) ++lines;
    CHECK(lines == 1 + static_cast<int>(report.rows.size()));
}

TEST_CASE("trajectory recording adds a first-seed trajectories.csv") {
    ExperimentConfig config = tiny_config();
    config.methods = {"invert"};
    config.num_seeds = 1;
    config.samples = 6;
    config.record_trajectories = true;

    const TempDir dir;
    run_benchmark(config, dir.path);
    REQUIRE(std::filesystem::exists(dir.path / "trajectories.csv"));
    CHECK(first_line(dir.path / "trajectories.csv") ==
          "path_label,step_index,t,point_index,x0,x1");
    const std::string body = slurp(dir.path / "trajectories.csv");
    CHECK(body.find("invert/src-forward@src/0") != std::string::npos);
    CHECK(body.find("invert/tar-reverse@src/1") != std::string::npos);
}

TEST_CASE("the n_avg sweep reports a shrinking gap to the converged edit") {
    ExperimentConfig config = tiny_config();
    config.methods = {"flowedit", "invert"};
    config.num_seeds = 1;
    config.sweep["n_avg"] = {1.0, 4.0};
    config.expectation_reference_samples = 256;
    const ConditionedModel model = build_analytic_model(config);

    const TempDir dir;
    const SweepResult sweep = run_sweep(model, config, "n_avg", dir.path);
    CHECK(sweep.axis == "n_avg");
    CHECK(sweep.values == std::vector<double>{1.0, 4.0});
    // n_avg only concerns flowedit, so other configured methods are skipped.
    REQUIRE(sweep.rows.size() == 2);
    for (const SweepRow& row : sweep.rows) {
        CHECK(row.metrics.method == "flowedit");
        CHECK(std::isfinite(row.rms_gap));
        CHECK(row.rms_gap > 0.0);
    }
    // Averaging more velocity draws per step gets closer to the
    // expectation-integrated path.
    const std::vector<double> gaps = sweep.seed_mean("flowedit", "gap");
    REQUIRE(gaps.size() == 2);
    CHECK(gaps[1] < gaps[0]);

    CHECK(first_line(dir.path / "sweep_n_avg.csv") ==
          "axis,value,method,seed,transport_cost_msd,pairing_accuracy,"
          "energy_distance_to_target,rms_gap_to_reference");

    CHECK_THROWS_AS(sweep.seed_mean("flowedit", "bogus"), std::invalid_argument);
    CHECK_THROWS_AS(run_sweep(model, config, "bogus", std::nullopt), config_error);
}

TEST_CASE("the n_max sweep covers every configured method") {
    ExperimentConfig config = tiny_config();
    config.methods = {"flowedit", "sdedit"};
    config.num_seeds = 2;
    config.sweep["n_max"] = {4.0, 8.0};
    const ConditionedModel model = build_analytic_model(config);

    const TempDir dir;
    const SweepResult sweep = run_sweep(model, config, "n_max", dir.path);
    // methods x seeds x axis values.
    CHECK(sweep.rows.size() == 2u * 2u * 2u);
    CHECK(first_line(dir.path / "sweep_n_max.csv") ==
          "axis,value,method,seed,transport_cost_msd,pairing_accuracy,"
          "energy_distance_to_target");

    const std::vector<double> msd = sweep.seed_mean("sdedit", "msd");
    REQUIRE(msd.size() == 2);
    // Deeper noising moves points further on average.
    CHECK(msd[1] > msd[0]);
}

TEST_CASE("report JSON carries the reproducibility stanza") {
    ExperimentConfig config = tiny_config();
    config.methods = {"sdedit"};
    config.num_seeds = 1;
    const MetricsReport report = run_benchmark(config, std::nullopt);
    const nlohmann::json j = report_to_json(report, config);
    CHECK(j.at("tool_version").get<std::string>() == kToolVersion);
    CHECK(j.at("config_hash").get<std::string>() == config_hash(config));
    CHECK(j.at("calibration").at("threshold").get<double>() ==
          report.calibration_threshold);
    CHECK(j.at("rows").size() == 1);
    CHECK(j.at("rows")[0].at("method").get<std::string>() == "sdedit");
}
