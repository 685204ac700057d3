#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace flowlab {

/// A batch of points, one row per point, one column per coordinate.
using Batch = Eigen::MatrixXd;

struct GaussianComponent {
    double weight = 1.0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
};

/// Finite mixture of full-covariance Gaussians. Provides the exact density,
/// seeded sampling, the noising marginal at interpolation time t, posterior
/// component responsibilities, and the closed-form interpolation velocity
/// field -- everything downstream modules need from a ground-truth model.
///
/// Construction validates the component set: weights must be positive and sum
/// to one within 1e-12, covariances must be symmetric, and every covariance
/// gets an eigenvalue floor of 1e-10 so near-degenerate components stay
/// usable by the Cholesky-based kernels.
class GaussianMixture {
public:
    explicit GaussianMixture(std::vector<GaussianComponent> components);

    int dim() const { return dim_; }
    int num_components() const { return static_cast<int>(components_.size()); }
    const GaussianComponent& component(int k) const { return components_.at(static_cast<std::size_t>(k)); }
    const std::vector<GaussianComponent>& components() const { return components_; }

    /// Mixture mean (weight-averaged component means).
    Eigen::VectorXd mean() const;

    /// log p(x) per row, evaluated with log-sum-exp across components so far
    /// tails stay finite instead of underflowing to log(0).
    Eigen::VectorXd log_density(const Batch& points) const;

    /// n iid draws. Deterministic for a fixed seed; row r depends only on
    /// (seed, r), so a prefix of a larger batch equals a smaller batch.
    Batch sample(int n, std::uint64_t seed) const;

    /// As sample(), also reporting the generating component of each row.
    std::pair<Batch, std::vector<int>> sample_with_labels(int n, std::uint64_t seed) const;

    /// Distribution of Z_t = (1-t) X0 + t X1 with X0 ~ this mixture and
    /// X1 ~ N(0, I) independent: component k keeps weight w_k and becomes
    /// N((1-t) mu_k, (1-t)^2 Sigma_k + t^2 I).
    GaussianMixture marginal_at(double t) const;

    /// Posterior component probabilities P(k | Z_t = row) under the time-t
    /// marginal; one row per point, each row sums to 1. Log-space softmax.
    Eigen::MatrixXd responsibilities(double t, const Batch& points) const;

    /// Exact interpolation velocity V(z, t) = E[X1 - X0 | Z_t = z], one row
    /// per input row. Per component the pair (X0, Z_t) is jointly Gaussian,
    /// so the conditional means are linear in z; the mixture answer weights
    /// them by the posterior responsibilities. Valid on all of t in [0, 1];
    /// at t = 0 this reduces to V(z, 0) = -z for every mixture.
    Batch analytic_velocity(double t, const Batch& points) const;

private:
    /// log w_k + log N(row; (1-t) mu_k, S_k) for all rows/components, plus the
    /// per-component solves S_k^{-1} (z - (1-t) mu_k) that both the velocity
    /// and the responsibilities are built from.
    struct TimeSlice {
        Eigen::MatrixXd log_weighted; ///< n x K
        std::vector<Eigen::MatrixXd> solved; ///< per component: d x n
    };
    TimeSlice time_slice(double t, const Batch& points) const;

    int dim_ = 0;
    std::vector<GaussianComponent> components_;
    std::vector<double> log_weights_;
};

/// Row-wise softmax of a matrix of log-weighted densities (shared by
/// log-space posterior computations).
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& log_values);

} // namespace flowlab
