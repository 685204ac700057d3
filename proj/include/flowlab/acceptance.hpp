#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace flowlab {

/// Outcome of one release-gate check: what was measured, against what bound,
/// and whether it held. `details` carries the measured numbers so a failing
/// line is diagnosable without re-running.
struct CriterionResult {
    int index = 0;
    std::string name;
    bool passed = false;
    std::string details;
};

struct AcceptanceOptions {
    /// Where the determinism check writes its duplicate artifact trees.
    std::filesystem::path scratch_dir = "acceptance-scratch";
    /// Path to the built command-line binary. When set, the determinism
    /// check re-runs the real executable twice; when empty it double-runs
    /// the library writer instead.
    std::string cli_executable;
    /// Progress sink called with one formatted line per finished criterion.
    std::function<void(const std::string&)> log;
};

/// Run the full release gate (11 checks) in order. Never throws: a check
/// that raises is reported as failed with the exception text.
std::vector<CriterionResult> run_acceptance_suite(const AcceptanceOptions& options);

/// "[PASS] C7: step-scale extremum (...)" -- one line per criterion.
std::string format_criterion(const CriterionResult& result);

} // namespace flowlab
