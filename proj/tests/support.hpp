#pragma once

// Small helpers shared across the unit test files: the canonical two-mode
// benchmark fixture and a couple of dense comparison utilities.

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flowlab/editing.hpp"
#include "flowlab/experiment.hpp"
#include "flowlab/gmm.hpp"
#include "flowlab/ode.hpp"

namespace testsupport {

inline double max_abs_diff(const flowlab::Batch& a, const flowlab::Batch& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

/// True when the two batches match entry for entry, including the shape.
inline bool bitwise_equal(const flowlab::Batch& a, const flowlab::Batch& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

/// A single unit-covariance Gaussian as a one-component mixture.
inline flowlab::GaussianMixture single_gaussian(const Eigen::VectorXd& mean) {
    flowlab::GaussianComponent comp;
    comp.weight = 1.0;
    comp.mean = mean;
    comp.covariance = Eigen::MatrixXd::Identity(mean.size(), mean.size());
    return flowlab::GaussianMixture({std::move(comp)});
}

/// The stock two-mode editing benchmark plus its analytic model.
struct BenchmarkFixture {
    flowlab::ExperimentConfig config;
    flowlab::ConditionedModel model;

    BenchmarkFixture()
        : config(flowlab::default_benchmark_config()),
          model(flowlab::build_analytic_model(config)) {}
};

/// Whole-mixture edit request on a fresh source draw with a small schedule,
/// so individual editing tests stay fast.
inline flowlab::EditRequest small_request(const flowlab::ExperimentConfig& config,
                                          int samples = 24, int steps = 12,
                                          int n_avg = 3, std::uint64_t seed = 5) {
    flowlab::EditRequest request;
    request.source_points = config.source.sample(samples, seed + 1000);
    request.src_condition = "src";
    request.tar_condition = "tar";
    request.schedule = flowlab::Schedule(flowlab::Schedule::uniform(steps).timesteps(),
                                         steps, 0, n_avg, 1.0);
    request.seed = seed;
    return request;
}

} // namespace testsupport
