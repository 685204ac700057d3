#include "flowlab/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "flowlab/csv_io.hpp"
#include "flowlab/editing.hpp"
#include "flowlab/errors.hpp"
#include "flowlab/experiment.hpp"
#include "flowlab/metrics.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/serialize.hpp"
#include "flowlab/train.hpp"

namespace flowlab {

namespace {

std::string fmt(double value, int precision = 4) {
    std::ostringstream out;
    out << std::setprecision(precision) << value;
    return out.str();
}

/// Largest per-point relative gap between two batches:
/// ||a_r - b_r|| / max(1, ||b_r||) maximized over rows.
double max_relative_row_gap(const Batch& a, const Batch& b) {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double gap = (a.row(r) - b.row(r)).norm() / std::max(1.0, b.row(r).norm());
        worst = std::max(worst, gap);
    }
    return worst;
}

/// A small random full-covariance mixture (1-3 components) for property
/// checks that must hold beyond the hand-picked benchmark mixtures.
GaussianMixture random_mixture(std::uint64_t seed) {
    const std::uint64_t key = derive_key(seed, rng_stream::scratch);
    const int num_components = 1 + static_cast<int>(uniform01(key, 0, 0, 0, 0) * 3.0) % 3;
    const Eigen::MatrixXd means = standard_normal_matrix(key, num_components, 2, 1, 0) * 5.0;

    std::vector<GaussianComponent> components;
    double total_weight = 0.0;
    for (int k = 0; k < num_components; ++k) {
        GaussianComponent component;
        component.weight = 0.25 + uniform01(key, static_cast<std::uint32_t>(k), 2, 0, 0);
        component.mean = means.row(k).transpose();
        const Eigen::MatrixXd a =
            standard_normal_matrix(key, 2, 2, 3, static_cast<std::uint32_t>(k)) * 0.6;
        component.covariance = a * a.transpose() + 0.4 * Eigen::MatrixXd::Identity(2, 2);
        total_weight += component.weight;
        components.push_back(std::move(component));
    }
    for (GaussianComponent& component : components) {
        component.weight /= total_weight;
    }
    return GaussianMixture(std::move(components));
}

EditRequest make_request(Batch source_points, const Schedule& schedule, std::uint64_t seed) {
    EditRequest request;
    request.source_points = std::move(source_points);
    request.src_condition = "src";
    request.tar_condition = "tar";
    request.schedule = schedule;
    request.seed = seed;
    return request;
}

// ---------------------------------------------------------------- C1

CriterionResult check_direct_equivalence() {
    CriterionResult result{1, "direct-path endpoints match inversion endpoints", false, ""};
    constexpr double kTol = 1e-9;
    constexpr int kPoints = 64;

    struct Case {
        std::string name;
        GaussianMixture source;
        GaussianMixture target;
    };
    std::vector<Case> cases;
    {
        const ExperimentConfig benchmark = default_benchmark_config();
        cases.push_back({"benchmark", benchmark.source, benchmark.target});
        for (std::uint64_t i = 0; i < 5; ++i) {
            cases.push_back({"random-" + std::to_string(i), random_mixture(100 + 2 * i),
                             random_mixture(101 + 2 * i)});
        }
    }

    const auto net = std::make_shared<VelocityNet>(VelocityNet::initialized(2, 2, 7));
    double worst = 0.0;
    std::string worst_case = "none";
    int case_count = 0;

    for (const Case& c : cases) {
        ConditionedModel analytic = ConditionedModel::analytic(2);
        analytic.add_condition("src", c.source);
        analytic.add_condition("tar", c.target);
        ConditionedModel learned = ConditionedModel::learned(net);
        learned.add_condition("src", 0);
        learned.add_condition("tar", 1);

        for (int steps : {10, 50}) {
            for (int n_max : {steps / 2, steps}) {
                const Schedule schedule = Schedule::uniform(steps).with_n_max(n_max);
                const std::uint64_t seed = 900 + static_cast<std::uint64_t>(case_count);
                const Batch source = c.source.sample(kPoints, seed);
                for (const auto* model : {&analytic, &learned}) {
                    const EditRequest request = make_request(source, schedule, seed);
                    const Batch direct = direct_path_edit(*model, request).edited_points;
                    const Batch inverted = invert_edit(*model, request).edited_points;
                    const double gap = max_relative_row_gap(direct, inverted);
                    if (gap > worst) {
                        worst = gap;
                        worst_case = c.name + (model == &learned ? "/mlp" : "/analytic") +
                                     "/T=" + std::to_string(steps) +
                                     "/n_max=" + std::to_string(n_max);
                    }
                    ++case_count;
                }
            }
        }
    }

    result.passed = worst <= kTol;
    result.details = "max relative endpoint gap " + fmt(worst, 3) + " over " +
                     std::to_string(case_count) + " cases (tol 1e-9, worst at " + worst_case + ")";
    return result;
}

// ------------------------------------------------------------ C2/C3/C4

struct BenchmarkBundle {
    ExperimentConfig config = default_benchmark_config();
    MetricsReport report;

    std::vector<const SeedMetrics*> rows(const std::string& method) const {
        std::vector<const SeedMetrics*> out;
        for (const SeedMetrics& row : report.rows) {
            if (row.method == method) {
                out.push_back(&row);
            }
        }
        return out;
    }
};

BenchmarkBundle run_benchmark_bundle() {
    BenchmarkBundle bundle;
    bundle.report = run_benchmark(bundle.config, std::nullopt);
    return bundle;
}

CriterionResult check_mode_pairing(const BenchmarkBundle& bundle) {
    CriterionResult result{2, "benchmark mode pairing separates, inversion intermixes", false, ""};
    const auto flowedit_rows = bundle.rows("flowedit");
    const auto invert_rows = bundle.rows("invert");

    double mean_pairing = 0.0;
    int lower_count = 0;
    for (std::size_t i = 0; i < flowedit_rows.size(); ++i) {
        mean_pairing += flowedit_rows[i]->pairing_accuracy;
        if (invert_rows[i]->pairing_accuracy < flowedit_rows[i]->pairing_accuracy) {
            ++lower_count;
        }
    }
    mean_pairing /= static_cast<double>(flowedit_rows.size());

    double mean_invert = 0.0;
    for (const SeedMetrics* row : invert_rows) {
        mean_invert += row->pairing_accuracy;
    }
    mean_invert /= static_cast<double>(invert_rows.size());

    result.passed = mean_pairing >= 0.95 && lower_count >= 18;
    result.details = "flowedit pairing mean " + fmt(mean_pairing) + " (need >= 0.95); invert mean " +
                     fmt(mean_invert) + ", strictly lower on " + std::to_string(lower_count) + "/" +
                     std::to_string(flowedit_rows.size()) + " seeds (need >= 18)";
    return result;
}

CriterionResult check_cost_ordering(const BenchmarkBundle& bundle) {
    CriterionResult result{3, "flowedit moves points less than inversion on every seed", false, ""};
    const auto flowedit_rows = bundle.rows("flowedit");
    const auto invert_rows = bundle.rows("invert");

    int ordered = 0;
    double ratio_sum = 0.0;
    double mean_invert = 0.0;
    for (std::size_t i = 0; i < flowedit_rows.size(); ++i) {
        if (flowedit_rows[i]->transport_cost_msd < invert_rows[i]->transport_cost_msd) {
            ++ordered;
        }
        ratio_sum += flowedit_rows[i]->transport_cost_msd / invert_rows[i]->transport_cost_msd;
        mean_invert += invert_rows[i]->transport_cost_msd;
    }
    const double mean_ratio = ratio_sum / static_cast<double>(flowedit_rows.size());
    mean_invert /= static_cast<double>(invert_rows.size());

    // The same ordering must hold on seed means with single-draw averaging;
    // inversion ignores n_avg so its rows above stand in for both settings.
    ExperimentConfig single_draw = bundle.config;
    single_draw.schedule.n_avg = 1;
    const ConditionedModel model = build_analytic_model(single_draw);
    double mean_single = 0.0;
    for (std::uint64_t run_seed : single_draw.run_seeds()) {
        const MethodRun run = run_method(model, single_draw, "flowedit", run_seed);
        mean_single += transport_cost(run.source, run.result.edited_points);
    }
    mean_single /= static_cast<double>(single_draw.num_seeds);
    const bool single_ok = mean_single < mean_invert;

    result.passed = ordered == static_cast<int>(flowedit_rows.size()) && single_ok;
    result.details = "flowedit MSD < invert MSD on " + std::to_string(ordered) + "/" +
                     std::to_string(flowedit_rows.size()) + " seeds (need all); mean cost ratio " +
                     fmt(mean_ratio) + "; n_avg=1 flowedit mean " + fmt(mean_single, 5) +
                     " vs invert mean " + fmt(mean_invert, 5) + " (need lower)";
    return result;
}

CriterionResult check_target_alignment(const BenchmarkBundle& bundle) {
    CriterionResult result{4, "edited batches pass the calibrated two-sample test", false, ""};
    const double threshold = bundle.report.calibration_threshold;

    bool all_pass = true;
    std::string detail = "threshold " + fmt(threshold) + " at n=" +
                         std::to_string(bundle.config.samples) + ";";
    for (const std::string& method : {std::string("flowedit"), std::string("invert"),
                                      std::string("sdedit")}) {
        const auto rows = bundle.rows(method);
        double mean_energy = 0.0;
        for (const SeedMetrics* row : rows) {
            mean_energy += row->energy_distance_to_target;
        }
        mean_energy /= static_cast<double>(rows.size());
        const bool pass = mean_energy <= threshold;
        all_pass = all_pass && pass;
        detail += " " + method + " mean energy " + fmt(mean_energy) + (pass ? " (ok)" : " (FAIL)");
    }

    result.passed = all_pass;
    result.details = detail;
    return result;
}

// ---------------------------------------------------------------- C5

CriterionResult check_identity_fixpoint() {
    CriterionResult result{5, "identity edits: flowedit exact, inversion first-order", false, ""};
    const ExperimentConfig benchmark = default_benchmark_config();

    ConditionedModel model = ConditionedModel::analytic(2);
    model.add_condition("src", benchmark.source);
    model.add_condition("tar", benchmark.source); // identical target

    const Batch source = benchmark.source.sample(1000, 5);
    const EditRequest request = make_request(source, Schedule::uniform(50), 5);
    const Batch edited = flowedit(model, request).edited_points;
    const double flowedit_gap = (edited - source).cwiseAbs().maxCoeff();
    const bool bit_identical = flowedit_gap == 0.0;

    // Round-trip error of forward-then-reverse integration under one
    // condition, for step counts T, 2T, 4T; the decay order comes from the
    // log2 of successive error ratios. The base T starts where the
    // first-order asymptotics has set in: coarser grids (T <= 50) sit in a
    // pre-asymptotic regime where the mixture's stiff mode-resolution zone
    // makes the error fall off faster than O(1/T).
    std::vector<double> errors;
    for (int steps : {100, 200, 400}) {
        const EditRequest round_trip = make_request(source, Schedule::uniform(steps), 5);
        const Batch back = invert_edit(model, round_trip).edited_points;
        errors.push_back(std::sqrt((back - source).rowwise().squaredNorm().mean()));
    }
    const double order1 = std::log2(errors[0] / errors[1]);
    const double order2 = std::log2(errors[1] / errors[2]);
    const bool order_ok = order1 >= 0.8 && order1 <= 1.2 && order2 >= 0.8 && order2 <= 1.2;

    result.passed = bit_identical && order_ok;
    result.details = "flowedit max |out - src| = " + fmt(flowedit_gap, 3) +
                     " (need exactly 0); round-trip RMS " + fmt(errors[0], 3) + " -> " +
                     fmt(errors[1], 3) + " -> " + fmt(errors[2], 3) + ", decay orders " +
                     fmt(order1) + ", " + fmt(order2) + " (need within [0.8, 1.2])";
    return result;
}

// ---------------------------------------------------------------- C6

CriterionResult check_navg_convergence() {
    CriterionResult result{6, "per-step averaging converges monotonically", false, ""};
    ExperimentConfig config = default_benchmark_config();
    config.samples = 64; // the dense reference is 4096 draws per step; a
                         // smaller batch keeps this check fast without
                         // touching the statistics being compared
    config.sweep["n_avg"] = {1.0, 4.0, 16.0, 64.0};

    const SweepResult sweep =
        run_sweep(build_analytic_model(config), config, "n_avg", std::nullopt);
    const std::vector<double> gaps = sweep.seed_mean("flowedit", "gap");

    bool monotone = true;
    std::string listed;
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        if (i > 0 && !(gaps[i] < gaps[i - 1])) {
            monotone = false;
        }
        listed += (i ? ", " : "") + fmt(gaps[i]);
    }

    result.passed = monotone;
    result.details = "seed-mean RMS gap to the 4096-draw reference over n_avg {1, 4, 16, 64}: " +
                     listed + " (need strictly decreasing)";
    return result;
}

// ---------------------------------------------------------------- C7

CriterionResult check_step_scale_extremum() {
    CriterionResult result{7, "step scaling is best left at c = 1", false, ""};
    ExperimentConfig config = default_benchmark_config();
    config.sweep["c"] = {0.6, 0.8, 1.0, 1.2, 1.4};

    const SweepResult sweep = run_sweep(build_analytic_model(config), config, "c", std::nullopt);
    const std::vector<double> energy = sweep.seed_mean("flowedit", "energy");

    std::size_t argmin = 0;
    std::string listed;
    for (std::size_t i = 0; i < energy.size(); ++i) {
        if (energy[i] < energy[argmin]) {
            argmin = i;
        }
        listed += (i ? ", " : "") + fmt(energy[i]);
    }

    result.passed = sweep.values[argmin] == 1.0;
    result.details = "seed-mean energy distance over c {0.6, 0.8, 1, 1.2, 1.4}: " + listed +
                     " (minimum at c = " + fmt(sweep.values[argmin], 2) + ", need 1)";
    return result;
}

// ---------------------------------------------------------------- C8

CriterionResult check_nmax_boundary(const BenchmarkBundle& bundle) {
    CriterionResult result{8, "n_max = 0 is a no-op and cost grows with n_max", false, ""};
    ExperimentConfig config = bundle.config;
    const ConditionedModel model = build_analytic_model(config);

    // Boundary: with no noising steps every method must hand back the
    // source batch untouched, bit for bit.
    double boundary_gap = 0.0;
    {
        ExperimentConfig zero = config;
        zero.schedule.n_max = 0;
        zero.schedule.n_min = 0;
        for (const std::string& method : config.methods) {
            const MethodRun run = run_method(model, zero, method, config.seed);
            boundary_gap = std::max(
                boundary_gap, (run.result.edited_points - run.source).cwiseAbs().maxCoeff());
        }
    }

    const SweepResult sweep = run_sweep(model, config, "n_max", std::nullopt);
    bool monotone = true;
    std::string detail;
    for (const std::string& method : config.methods) {
        const std::vector<double> msd = sweep.seed_mean(method, "msd");
        for (std::size_t i = 1; i < msd.size(); ++i) {
            if (!(msd[i] >= msd[i - 1])) {
                monotone = false;
            }
        }
        detail += " " + method + " [" + fmt(msd.front(), 3) + " .. " + fmt(msd.back(), 5) + "]";
    }

    result.passed = boundary_gap == 0.0 && monotone;
    result.details = "n_max=0 max |out - src| = " + fmt(boundary_gap, 3) +
                     " (need exactly 0); seed-mean MSD over n_max {0, T/4, T/2, 3T/4, T} "
                     "nondecreasing for" +
                     detail;
    return result;
}

// ---------------------------------------------------------------- C9

CriterionResult check_noise_prediction_identity() {
    CriterionResult result{9, "velocity/noise-prediction conversion identities", false, ""};
    constexpr double kIdentityTol = 1e-8;
    constexpr double kRoundTripTol = 1e-12;

    std::vector<GaussianComponent> components(1);
    components[0] = {1.0, Eigen::Vector2d::Zero(), Eigen::MatrixXd::Identity(2, 2)};
    ConditionedModel model = ConditionedModel::analytic(2);
    model.add_condition("n01", GaussianMixture(std::move(components)));

    const Batch points =
        standard_normal_matrix(derive_key(11, rng_stream::scratch), 10, 2, 0, 0) * 2.0;

    double worst_identity = 0.0;
    double worst_round_trip = 0.0;
    int pairs = 0;
    for (int i = 0; i < 10; ++i) {
        const double t = 0.1 * static_cast<double>(i); // 0.0 .. 0.9
        const Batch velocity = model.velocity("n01", t, points);
        const Batch noise_pred = velocity_to_noise_pred(velocity, points, t);

        // For the standard normal the posterior mean of the noise endpoint
        // has the closed form t / ((1-t)^2 + t^2) * z.
        const double factor = t / ((1.0 - t) * (1.0 - t) + t * t);
        const Batch expected = factor * points;
        worst_identity = std::max(worst_identity, max_relative_row_gap(noise_pred, expected));

        const Batch back = noise_pred_to_velocity(noise_pred, points, t);
        worst_round_trip = std::max(worst_round_trip, max_relative_row_gap(back, velocity));
        pairs += static_cast<int>(points.rows());
    }

    result.passed = worst_identity <= kIdentityTol && worst_round_trip <= kRoundTripTol;
    result.details = "over " + std::to_string(pairs) + " (z, t) pairs: posterior-mean gap " +
                     fmt(worst_identity, 3) + " (tol 1e-8), round-trip gap " +
                     fmt(worst_round_trip, 3) + " (tol 1e-12)";
    return result;
}

// --------------------------------------------------------------- C10

CriterionResult check_learned_parity() {
    CriterionResult result{10, "trained MLP field reproduces the benchmark behaviour", false, ""};
    ExperimentConfig config = default_benchmark_config();
    config.methods = {"flowedit", "invert"};

    // Gradient check on a generically perturbed network (an all-zero output
    // head would make most gradients vanish identically and prove nothing).
    double worst_grad = 0.0;
    {
        VelocityNet net(2, 2);
        const std::uint64_t key = derive_key(77, rng_stream::weight_init);
        Eigen::VectorXd params(net.parameter_count());
        for (int i = 0; i < params.size(); ++i) {
            params[i] = 0.3 * (2.0 * uniform01(key, static_cast<std::uint32_t>(i), 0, 0, 0) - 1.0);
        }
        net.set_parameters(params);

        const TrainingBatch batch =
            make_training_batch({config.source, config.target}, 64, 78, 0);
        const LossGrad analytic = flow_matching_loss(net, batch);

        const std::uint64_t pick = derive_key(79, rng_stream::scratch);
        constexpr double kH = 1e-5;
        for (int s = 0; s < 50; ++s) {
            const int index = static_cast<int>(uniform01(pick, static_cast<std::uint32_t>(s), 0, 0, 0) *
                                               static_cast<double>(net.parameter_count())) %
                              net.parameter_count();
            Eigen::VectorXd shifted = params;
            shifted[index] = params[index] + kH;
            net.set_parameters(shifted);
            const double up = flow_matching_loss(net, batch).loss;
            shifted[index] = params[index] - kH;
            net.set_parameters(shifted);
            const double down = flow_matching_loss(net, batch).loss;
            const double finite_diff = (up - down) / (2.0 * kH);
            const double rel = std::abs(finite_diff - analytic.grad[index]) /
                               std::max({std::abs(finite_diff), std::abs(analytic.grad[index]), 1e-8});
            worst_grad = std::max(worst_grad, rel);
        }
    }
    const bool grad_ok = worst_grad <= 1e-4;

    // Slots mirror the analytic benchmark's conditioning: the whole source
    // mixture (flowedit's source contrast), one slot per source component
    // (inversion runs each sample under the component that generated it),
    // and the target mixture.
    GaussianComponent first = config.source.component(0);
    first.weight = 1.0;
    GaussianComponent second = config.source.component(1);
    second.weight = 1.0;
    const TrainResult trained =
        train({config.source, GaussianMixture({std::move(first)}),
               GaussianMixture({std::move(second)}), config.target},
              TrainConfig{}, 42);
    ConditionedModel model =
        ConditionedModel::learned(std::make_shared<VelocityNet>(trained.net));
    model.add_condition("src", 0);
    model.add_condition("src/0", 1);
    model.add_condition("src/1", 2);
    model.add_condition("tar", 3);

    const MetricsReport report = evaluate_benchmark(model, config, std::nullopt);
    const Aggregate pairing = report.aggregates.at("flowedit").at("pairing_accuracy");
    const Aggregate flowedit_msd = report.aggregates.at("flowedit").at("transport_cost_msd");
    const Aggregate invert_msd = report.aggregates.at("invert").at("transport_cost_msd");

    const bool pairing_ok = pairing.mean >= 0.85;
    // The cost ordering is asserted on seed means for the learned field (the
    // per-seed version is the analytic-field check).
    const bool ordering_ok = flowedit_msd.mean < invert_msd.mean;

    result.passed = grad_ok && pairing_ok && ordering_ok;
    result.details = "worst gradient mismatch " + fmt(worst_grad, 3) +
                     " (tol 1e-4); trained loss " + fmt(trained.initial_loss, 4) + " -> " +
                     fmt(trained.final_loss, 4) + "; flowedit pairing mean " + fmt(pairing.mean) +
                     " (need >= 0.85); MSD means flowedit " + fmt(flowedit_msd.mean, 5) +
                     " vs invert " + fmt(invert_msd.mean, 5) + " (need flowedit lower)";
    return result;
}

// --------------------------------------------------------------- C11

std::string read_file_or_tag(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return "<missing " + path.string() + ">";
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

CriterionResult check_determinism(const AcceptanceOptions& options) {
    CriterionResult result{11, "identical seed and config give byte-identical artifacts", false, ""};

    ExperimentConfig config = default_benchmark_config();
    config.samples = 200;
    config.num_seeds = 2;
    config.calibration.resamples = 50;

    const std::filesystem::path base = options.scratch_dir;
    std::filesystem::create_directories(base);
    const std::filesystem::path first = base / "run-a";
    const std::filesystem::path second = base / "run-b";

    if (!options.cli_executable.empty()) {
        const std::filesystem::path config_path = base / "config.json";
        write_file_atomic(config_path, config_to_json(config).dump(2) + "\n");
        for (const std::filesystem::path& out : {first, second}) {
            const std::string command = "\"" + options.cli_executable + "\" benchmark --config \"" +
                                        config_path.string() + "\" --out \"" + out.string() +
                                        "\" > /dev/null";
            const int status = std::system(command.c_str());
            if (status != 0) {
                result.details = "command failed with status " + std::to_string(status) + ": " +
                                 command;
                return result;
            }
        }
    } else {
        run_benchmark(config, first);
        run_benchmark(config, second);
    }

    const std::vector<std::string> artifacts = {"edits.csv", "pairing.csv", "metrics.csv",
                                                "report.json"};
    int identical = 0;
    std::string mismatch;
    for (const std::string& name : artifacts) {
        const std::string a = read_file_or_tag(first / name);
        const std::string b = read_file_or_tag(second / name);
        if (a == b && a.rfind("<missing", 0) != 0) {
            ++identical;
        } else if (mismatch.empty()) {
            mismatch = name;
        }
    }

    result.passed = identical == static_cast<int>(artifacts.size());
    result.details = std::to_string(identical) + "/" + std::to_string(artifacts.size()) +
                     " artifacts byte-identical across reruns" +
                     (mismatch.empty() ? "" : " (first mismatch: " + mismatch + ")") +
                     (options.cli_executable.empty() ? " [library writer]" : " [real executable]");
    return result;
}

CriterionResult guarded(int index, const std::string& name,
                        const std::function<CriterionResult()>& check) {
    try {
        return check();
    } catch (const std::exception& error) {
        return CriterionResult{index, name, false, std::string("raised: ") + error.what()};
    }
}

} // namespace

std::vector<CriterionResult> run_acceptance_suite(const AcceptanceOptions& options) {
    std::vector<CriterionResult> results;
    const auto push = [&](CriterionResult result) {
        if (options.log) {
            options.log(format_criterion(result));
        }
        results.push_back(std::move(result));
    };

    push(guarded(1, "direct-path endpoints match inversion endpoints", check_direct_equivalence));

    try {
        const BenchmarkBundle bundle = run_benchmark_bundle();
        push(guarded(2, "benchmark mode pairing separates, inversion intermixes",
                     [&] { return check_mode_pairing(bundle); }));
        push(guarded(3, "flowedit moves points less than inversion on every seed",
                     [&] { return check_cost_ordering(bundle); }));
        push(guarded(4, "edited batches pass the calibrated two-sample test",
                     [&] { return check_target_alignment(bundle); }));
        push(guarded(5, "identity edits: flowedit exact, inversion first-order",
                     check_identity_fixpoint));
        push(guarded(6, "per-step averaging converges monotonically", check_navg_convergence));
        push(guarded(7, "step scaling is best left at c = 1", check_step_scale_extremum));
        push(guarded(8, "n_max = 0 is a no-op and cost grows with n_max",
                     [&] { return check_nmax_boundary(bundle); }));
    } catch (const std::exception& error) {
        // The shared benchmark runs failed outright: report every dependent
        // criterion as failed rather than aborting the gate.
        const std::string reason = std::string("benchmark runs raised: ") + error.what();
        for (int index : {2, 3, 4, 5, 6, 7, 8}) {
            bool present = false;
            for (const CriterionResult& r : results) {
                present = present || r.index == index;
            }
            if (!present) {
                push(CriterionResult{index, "benchmark-dependent check", false, reason});
            }
        }
    }

    push(guarded(9, "velocity/noise-prediction conversion identities",
                 check_noise_prediction_identity));
    push(guarded(10, "trained MLP field reproduces the benchmark behaviour",
                 check_learned_parity));
    push(guarded(11, "identical seed and config give byte-identical artifacts",
                 [&] { return check_determinism(options); }));
    return results;
}

std::string format_criterion(const CriterionResult& result) {
    return std::string(result.passed ? "[PASS]" : "[FAIL]") + " C" + std::to_string(result.index) +
           ": " + result.name + " -- " + result.details;
}

} // namespace flowlab
