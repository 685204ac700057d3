#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "flowlab/gmm.hpp"

namespace flowlab {

/// Mean squared displacement between paired rows: how far the edit moved
/// the batch on average.
double transport_cost(const Batch& source, const Batch& edited);

/// Index of the mode (vector in `modes`) closest to `point` in Euclidean
/// distance; ties break toward the lower index.
int nearest_mode(const Eigen::VectorXd& point, const std::vector<Eigen::VectorXd>& modes);

/// Per-row pairing outcome: which target mode each edited point landed on,
/// versus the target mode its generating source mode should map to (the
/// source mode's nearest target mode).
struct PairingRow {
    int source_mode = 0;
    int expected_mode = 0;
    int assigned_mode = 0;
    bool correct = false;
};

std::vector<PairingRow> pairing_details(const Batch& edited,
                                        const std::vector<int>& source_labels,
                                        const std::vector<Eigen::VectorXd>& source_modes,
                                        const std::vector<Eigen::VectorXd>& target_modes);

/// Fraction of rows whose edited point's nearest target mode matches the
/// nearest target mode of the row's generating source mode.
double pairing_accuracy(const Batch& edited, const std::vector<int>& source_labels,
                        const std::vector<Eigen::VectorXd>& source_modes,
                        const std::vector<Eigen::VectorXd>& target_modes);

/// Two-sample energy distance 2 E||x - y|| - E||x - x'|| - E||y - y'|| with
/// unbiased pairwise estimators (within-sample terms exclude the diagonal).
/// Near zero -- possibly slightly negative -- when the samples come from the
/// same distribution. Requires at least two rows per side.
double energy_distance(const Batch& a, const Batch& b);

/// Null calibration for the two-sample test: the `percentile` quantile
/// (order statistic at ceil(p * resamples)) of the energy distance between
/// `resamples` pairs of independent n-point draws from `reference`. Any
/// batch scoring below this against a fresh reference draw is statistically
/// indistinguishable from the reference at that sample size.
double calibrate_energy_threshold(const GaussianMixture& reference, int n,
                                  int resamples, double percentile,
                                  std::uint64_t seed);

} // namespace flowlab
