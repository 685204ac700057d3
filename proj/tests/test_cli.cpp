// End-to-end tests of the flowlab binary: every subcommand is exercised
// through a real process, and the benchmark artifacts are checked for
// byte-identical reruns. The binary path arrives via the FLOWLAB_CLI_PATH
// compile definition so the tests track whatever the build produced.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "flowlab/experiment.hpp"
#include "flowlab/serialize.hpp"

using namespace flowlab;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

int count_lines(const std::string& text) {
    int lines = 0;
    for (const char c : text) lines += (c == '\n');
    return lines;
}

struct CliFixture {
    std::filesystem::path dir;

    CliFixture() {
        static int counter = 0;
        dir = std::filesystem::temp_directory_path() /
              ("flowlab-cli-" + std::to_string(::getpid()) + "-" +
               std::to_string(counter++));
        std::filesystem::create_directories(dir);
    }
    ~CliFixture() { std::filesystem::remove_all(dir); }

    CommandResult run(const std::string& args) const {
        const std::filesystem::path out_file = dir / "stdout.txt";
        const std::filesystem::path err_file = dir / "stderr.txt";
        const std::string command = std::string("\"") + FLOWLAB_CLI_PATH + "\" " + args +
                                    " > " + out_file.string() + " 2> " +
                                    err_file.string();
        const int status = std::system(command.c_str());
        CommandResult result;
        result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        result.out = slurp(out_file);
        result.err = slurp(err_file);
        return result;
    }

    /// A small config file the CLI commands can run in milliseconds.
    std::filesystem::path write_tiny_config(const std::string& name) const {
        ExperimentConfig config = default_benchmark_config();
        config.samples = 24;
        config.num_seeds = 2;
        config.schedule = ScheduleConfig{10, 10, 0, 2, 1.0};
        config.calibration.resamples = 20;
        config.sweep["n_avg"] = {1.0, 2.0};
        config.expectation_reference_samples = 256;
        const std::filesystem::path path = dir / name;
        std::ofstream out(path);
        out << config_to_json(config).dump(2) << "\n";
        return path;
    }
};

} // namespace

TEST_CASE("sample writes labeled draws and prints the reproducibility stanza") {
    const CliFixture cli;
    const std::filesystem::path csv = cli.dir / "samples.csv";
    const CommandResult result =
        cli.run("sample --samples 50 --seed 3 --out " + csv.string());
    CAPTURE(result.err);
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("flowlab " + std::string(kToolVersion)) != std::string::npos);
    CHECK(result.out.find("config 0x") != std::string::npos);

    const std::string content = slurp(csv);
    CHECK(content.substr(0, content.find('\n')) == "row,component,x0,x1");
    CHECK(count_lines(content) == 51);

    // Same seed, same draws: byte-identical output file.
    const std::filesystem::path again = cli.dir / "samples2.csv";
    cli.run("sample --samples 50 --seed 3 --out " + again.string());
    CHECK(slurp(again) == content);

    const CommandResult target =
        cli.run("sample --which target --samples 10 --out " + csv.string());
    CHECK(target.exit_code == 0);

    const CommandResult bad = cli.run("sample --which bogus --out " + csv.string());
    CHECK(bad.exit_code == 2);
    CHECK(bad.err.find("config error") != std::string::npos);
}

TEST_CASE("edit runs a single method once and writes the artifact set") {
    const CliFixture cli;
    const std::filesystem::path out = cli.dir / "edit-out";
    const CommandResult result = cli.run(
        "edit --method direct --samples 16 --steps 8 --n-max 8 --n-avg 2 --out " +
        out.string());
    CAPTURE(result.err);
    REQUIRE(result.exit_code == 0);

    const std::string edits = slurp(out / "edits.csv");
    CHECK(edits.substr(0, edits.find('\n')) ==
          "method,seed,row,src_x0,src_x1,edit_x0,edit_x1,n_max,n_min,n_avg,step_scale_c");
    // Header plus one method x one seed x 16 rows.
    CHECK(count_lines(edits) == 17);
    CHECK(std::filesystem::exists(out / "report.json"));
    CHECK(std::filesystem::exists(out / "metrics.csv"));
    CHECK(std::filesystem::exists(out / "pairing.csv"));
}

TEST_CASE("benchmark reruns are byte-identical for a fixed config") {
    const CliFixture cli;
    const std::filesystem::path config = cli.write_tiny_config("tiny.json");
    const std::filesystem::path out_a = cli.dir / "a";
    const std::filesystem::path out_b = cli.dir / "b";

    const CommandResult first =
        cli.run("benchmark --config " + config.string() + " --out " + out_a.string());
    CAPTURE(first.err);
    REQUIRE(first.exit_code == 0);
    CHECK(first.out.find("energy-distance threshold") != std::string::npos);

    const CommandResult second =
        cli.run("benchmark --config " + config.string() + " --out " + out_b.string());
    REQUIRE(second.exit_code == 0);

    for (const char* name : {"edits.csv", "pairing.csv", "metrics.csv", "report.json"}) {
        CAPTURE(name);
        CHECK(slurp(out_a / name) == slurp(out_b / name));
    }

    const nlohmann::json report = nlohmann::json::parse(slurp(out_a / "report.json"));
    CHECK(report.at("tool_version").get<std::string>() == kToolVersion);
}

TEST_CASE("config mistakes come back as exit code 2 with a pointed message") {
    const CliFixture cli;
    const std::filesystem::path config = cli.write_tiny_config("tiny.json");

    // Unknown top-level key.
    nlohmann::json j = nlohmann::json::parse(slurp(config));
    j["bogus"] = true;
    const std::filesystem::path broken = cli.dir / "broken.json";
    {
        std::ofstream out(broken);
        out << j.dump(2);
    }
    const CommandResult bad_key = cli.run("benchmark --config " + broken.string() +
                                          " --out " + (cli.dir / "x").string());
    CHECK(bad_key.exit_code == 2);
    CHECK(bad_key.err.find("unknown field 'bogus'") != std::string::npos);

    const CommandResult bad_preset = cli.run("benchmark --preset bogus --out " +
                                             (cli.dir / "y").string());
    CHECK(bad_preset.exit_code == 2);
    CHECK(bad_preset.err.find("unknown preset") != std::string::npos);

    // Lowering --steps below the preset's n_max without also lowering
    // --n-max leaves an inconsistent schedule.
    const CommandResult bad_schedule =
        cli.run("benchmark --steps 8 --out " + (cli.dir / "z").string());
    CHECK(bad_schedule.exit_code == 2);
    CHECK(bad_schedule.err.find("invalid schedule") != std::string::npos);

    const CommandResult missing =
        cli.run("benchmark --config " + (cli.dir / "absent.json").string() +
                " --out " + (cli.dir / "w").string());
    CHECK(missing.exit_code == 2);
}

TEST_CASE("sweep writes the per-axis CSV") {
    const CliFixture cli;
    const std::filesystem::path config = cli.write_tiny_config("tiny.json");
    const std::filesystem::path out = cli.dir / "sweep-out";
    const CommandResult result = cli.run("sweep --axis n_avg --config " +
                                         config.string() + " --out " + out.string());
    CAPTURE(result.err);
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("seed-mean MSD over n_avg") != std::string::npos);

    const std::string csv = slurp(out / "sweep_n_avg.csv");
    CHECK(csv.substr(0, csv.find('\n')) ==
          "axis,value,method,seed,transport_cost_msd,pairing_accuracy,"
          "energy_distance_to_target,rms_gap_to_reference");
    // Header plus flowedit x 2 seeds x 2 axis values.
    CHECK(count_lines(csv) == 5);
}

TEST_CASE("train writes a loadable checkpoint and a loss curve") {
    const CliFixture cli;
    const std::filesystem::path ckpt = cli.dir / "net.json";
    const std::filesystem::path curve = cli.dir / "curve.csv";
    const CommandResult result =
        cli.run("train --iterations 40 --seed 2 --out " + ckpt.string() + " --curve " +
                curve.string());
    CAPTURE(result.err);
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("checkpoint written") != std::string::npos);

    const VelocityNet net = load_checkpoint(ckpt);
    CHECK(net.dim() == 2);
    CHECK(net.num_conditions() == 2);

    const std::string curve_text = slurp(curve);
    CHECK(curve_text.substr(0, curve_text.find('\n')) == "iteration,loss");
    CHECK(count_lines(curve_text) >= 2);
}
