#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowlab/editing.hpp"
#include "flowlab/field.hpp"
#include "flowlab/gmm.hpp"
#include "flowlab/ode.hpp"

namespace flowlab {

inline constexpr const char* kToolVersion = "0.1.0";

struct ScheduleConfig {
    int step_count = 50;
    int n_max = 50;
    int n_min = 0;
    int n_avg = 16;
    double step_scale_c = 1.0;

    Schedule build() const;
};

struct GuidanceConfig {
    bool enabled = false;
    double source_scale = 1.0;
    double target_scale = 1.0;
};

struct CalibrationConfig {
    int resamples = 200;
    double percentile = 0.99;
};

/// Full description of a benchmark run: the two mixtures, the schedule, the
/// methods to compare and the sampling/seeding parameters. Loadable from a
/// JSON file that mirrors these fields one to one.
struct ExperimentConfig {
    ExperimentConfig(GaussianMixture source_mixture, GaussianMixture target_mixture)
        : source(std::move(source_mixture)), target(std::move(target_mixture)) {}

    GaussianMixture source;
    GaussianMixture target;
    ScheduleConfig schedule;
    /// How each row's source-side velocity is conditioned.
    ///
    /// "auto" (default) gives each method its conventional conditioning:
    /// inversion-family methods (invert, direct) run every sample under its
    /// own generating component -- the 2D analog of inverting with a prompt
    /// that describes the specific source image, which is what sends both
    /// modes through one shared noise blob and scatters each across both
    /// target modes -- while flowedit contrasts the full source mixture
    /// against the full target mixture (its correction term is a
    /// distribution-level contrast; per-component conditioning would shove
    /// the cloud into the target field's unresolved zone at t near 1 and
    /// scatter it) and sdedit has no source leg at all.
    ///
    /// "mode" / "mixture" force one granularity for every method, as study
    /// controls: "mode" = per-component for all, "mixture" = whole-mixture
    /// for all.
    std::string source_conditioning = "auto";
    std::vector<std::string> methods = {"flowedit", "invert", "sdedit"};
    int samples = 1000;
    std::uint64_t seed = 1;
    int num_seeds = 20;
    GuidanceConfig guidance;
    CalibrationConfig calibration;
    bool record_trajectories = false;
    /// Per-axis sweep values; axes without an entry use built-in defaults.
    std::map<std::string, std::vector<double>> sweep;
    /// Draw count of the converged reference used by the n_avg sweep.
    int expectation_reference_samples = 4096;

    /// The per-run seeds: seed, seed+1, ... (purpose-keyed streams keep
    /// adjacent integer seeds fully decorrelated).
    std::vector<std::uint64_t> run_seeds() const;
    void validate() const;
};

/// The two-mode diagonal-to-axes editing benchmark (unit covariances, equal
/// weights): source modes at (+-15/sqrt(2), +-15/sqrt(2)), target modes at
/// (-15, 0) and (0, 15).
ExperimentConfig default_benchmark_config();

/// Named presets: "benchmark" (the default above) and "sd3-style"
/// (same mixtures; T = 50, n_max = 33, n_avg = 1 -- the schedule shape used
/// when editing with large latent flow models).
ExperimentConfig preset_config(const std::string& name);

ExperimentConfig config_from_json(const nlohmann::json& value);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical JSON form; printed in the reproducibility
/// stanza and embedded in reports.
std::string config_hash(const ExperimentConfig& config);

/// Analytic model with conditions "src", "tar", one single-component
/// condition "src/<k>" per source mode (per-mode conditioning routes each
/// row through its own component), and "uncond" (the 50/50 union of both
/// mixtures, used by guidance).
ConditionedModel build_analytic_model(const ExperimentConfig& config);

/// Deterministic editing seed for the rows of source component `mode` in
/// the run with master seed `run_seed` (per-mode conditioning splits one
/// run into one editing call per component).
std::uint64_t mode_group_seed(std::uint64_t run_seed, int mode);

/// One (method, seed) edit on freshly sampled source points.
struct MethodRun {
    Batch source;
    std::vector<int> source_labels;
    EditResult result;
};

/// Run one editing method by name ("flowedit", "invert", "direct", "sdedit").
EditResult run_edit_method(const ConditionedModel& model, const std::string& method,
                           const EditRequest& request);

MethodRun run_method(const ConditionedModel& model, const ExperimentConfig& config,
                     const std::string& method, std::uint64_t run_seed);

struct SeedMetrics {
    std::string method;
    std::uint64_t seed = 0;
    double transport_cost_msd = 0.0;
    double pairing_accuracy = 0.0;
    double energy_distance_to_target = 0.0;
    double self_distance_threshold = 0.0;
};

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
};

struct MetricsReport {
    std::vector<SeedMetrics> rows;
    /// aggregates[method][metric] with metric in {"transport_cost_msd",
    /// "pairing_accuracy", "energy_distance_to_target"}.
    std::map<std::string, std::map<std::string, Aggregate>> aggregates;
    double calibration_threshold = 0.0;
};

/// Evaluate every configured method on every seed against `model`.
/// When `out_dir` is given, writes edits.csv, pairing.csv, metrics.csv,
/// report.json (and trajectories.csv for the first seed when trajectory
/// recording is on), each atomically.
MetricsReport evaluate_benchmark(const ConditionedModel& model,
                                 const ExperimentConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir);

/// evaluate_benchmark against the analytic model built from the config.
MetricsReport run_benchmark(const ExperimentConfig& config,
                            const std::optional<std::filesystem::path>& out_dir);

struct SweepRow {
    double axis_value = 0.0;
    SeedMetrics metrics;
    /// n_avg axis only: RMS endpoint gap to the converged reference.
    double rms_gap = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
    std::string axis;
    std::vector<double> values;
    std::vector<SweepRow> rows;

    /// Seed-mean of one metric at each axis value for one method;
    /// metric is "msd", "energy", "pairing" or "gap".
    std::vector<double> seed_mean(const std::string& method,
                                  const std::string& metric) const;
};

/// Sweep one axis ("n_max", "n_min", "n_avg", "c", "guidance_scale") over
/// its configured (or default) values. Writes sweep_<axis>.csv when
/// `out_dir` is given.
SweepResult run_sweep(const ConditionedModel& model, const ExperimentConfig& config,
                      const std::string& axis,
                      const std::optional<std::filesystem::path>& out_dir);

/// Serialize a report (plus run metadata) to JSON for report.json.
nlohmann::json report_to_json(const MetricsReport& report,
                              const ExperimentConfig& config);

} // namespace flowlab
