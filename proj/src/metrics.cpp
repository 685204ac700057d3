#include "flowlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "flowlab/rng.hpp"

namespace flowlab {

double transport_cost(const Batch& source, const Batch& edited) {
    if (source.rows() != edited.rows() || source.cols() != edited.cols())
        throw std::invalid_argument("transport_cost: batch shapes differ");
    if (source.rows() == 0)
        throw std::invalid_argument("transport_cost: empty batch");
    return (edited - source).rowwise().squaredNorm().mean();
}

int nearest_mode(const Eigen::VectorXd& point,
                 const std::vector<Eigen::VectorXd>& modes) {
    if (modes.empty()) throw std::invalid_argument("nearest_mode: no modes given");
    int best = 0;
    double best_dist = (point - modes[0]).squaredNorm();
    for (std::size_t k = 1; k < modes.size(); ++k) {
        const double dist = (point - modes[k]).squaredNorm();
        if (dist < best_dist) {
            best = static_cast<int>(k);
            best_dist = dist;
        }
    }
    return best;
}

std::vector<PairingRow> pairing_details(
    const Batch& edited, const std::vector<int>& source_labels,
    const std::vector<Eigen::VectorXd>& source_modes,
    const std::vector<Eigen::VectorXd>& target_modes) {
    if (edited.rows() == 0)
        throw std::invalid_argument("pairing: empty batch");
    if (static_cast<std::size_t>(edited.rows()) != source_labels.size())
        throw std::invalid_argument("pairing: one source label per row required");
    if (source_modes.empty() || target_modes.empty())
        throw std::invalid_argument("pairing: mode lists must be nonempty");

    // Which target mode each source mode should map to: its nearest one.
    std::vector<int> expected(source_modes.size());
    for (std::size_t k = 0; k < source_modes.size(); ++k)
        expected[k] = nearest_mode(source_modes[k], target_modes);

    std::vector<PairingRow> rows(static_cast<std::size_t>(edited.rows()));
    for (int r = 0; r < edited.rows(); ++r) {
        const int label = source_labels[static_cast<std::size_t>(r)];
        if (label < 0 || label >= static_cast<int>(source_modes.size()))
            throw std::invalid_argument("pairing: source label " +
                                        std::to_string(label) + " out of range");
        PairingRow& row = rows[static_cast<std::size_t>(r)];
        row.source_mode = label;
        row.expected_mode = expected[static_cast<std::size_t>(label)];
        row.assigned_mode = nearest_mode(edited.row(r).transpose(), target_modes);
        row.correct = row.assigned_mode == row.expected_mode;
    }
    return rows;
}

double pairing_accuracy(const Batch& edited, const std::vector<int>& source_labels,
                        const std::vector<Eigen::VectorXd>& source_modes,
                        const std::vector<Eigen::VectorXd>& target_modes) {
    const auto rows = pairing_details(edited, source_labels, source_modes, target_modes);
    std::size_t correct = 0;
    for (const auto& row : rows) correct += row.correct ? 1u : 0u;
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

namespace {

double mean_cross_distance(const Batch& a, const Batch& b) {
    double sum = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        sum += (b.rowwise() - a.row(i)).rowwise().norm().sum();
    return sum / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

double mean_within_distance(const Batch& a) {
    double sum = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        sum += (a.bottomRows(a.rows() - i - 1).rowwise() - a.row(i))
                   .rowwise()
                   .norm()
                   .sum();
    const double n = static_cast<double>(a.rows());
    return 2.0 * sum / (n * (n - 1.0));
}

} // namespace

double energy_distance(const Batch& a, const Batch& b) {
    if (a.cols() != b.cols())
        throw std::invalid_argument("energy_distance: dimension mismatch");
    if (a.rows() < 2 || b.rows() < 2)
        throw std::invalid_argument(
            "energy_distance: need at least two rows per sample");
    return 2.0 * mean_cross_distance(a, b) - mean_within_distance(a) -
           mean_within_distance(b);
}

double calibrate_energy_threshold(const GaussianMixture& reference, int n,
                                  int resamples, double percentile,
                                  std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("calibrate: need n >= 2");
    if (resamples < 1)
        throw std::invalid_argument("calibrate: need at least one resample");
    if (!(percentile > 0.0) || !(percentile < 1.0))
        throw std::invalid_argument("calibrate: percentile must lie in (0, 1)");

    const std::uint64_t base = derive_key(seed, rng_stream::calibration);
    std::vector<double> values(static_cast<std::size_t>(resamples));
    for (int rep = 0; rep < resamples; ++rep) {
        const Batch a = reference.sample(
            n, splitmix64(base + 2 * static_cast<std::uint64_t>(rep)));
        const Batch b = reference.sample(
            n, splitmix64(base + 2 * static_cast<std::uint64_t>(rep) + 1));
        values[static_cast<std::size_t>(rep)] = energy_distance(a, b);
    }
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(
        std::ceil(percentile * static_cast<double>(resamples)));
    return values[std::min(values.size() - 1, std::max<std::size_t>(rank, 1) - 1)];
}

} // namespace flowlab
