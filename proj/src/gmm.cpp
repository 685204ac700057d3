#include "flowlab/gmm.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "flowlab/rng.hpp"

namespace flowlab {

namespace {

constexpr double kWeightSumTolerance = 1e-12;
constexpr double kEigenvalueFloor = 1e-10;
constexpr double kLog2Pi = 1.8378770664093454836;

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

} // namespace

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
    require(!components_.empty(), "GaussianMixture: component list is empty");
    dim_ = static_cast<int>(components_[0].mean.size());
    require(dim_ >= 1, "GaussianMixture: dimension must be at least 1");

    double weight_sum = 0.0;
    for (std::size_t k = 0; k < components_.size(); ++k) {
        auto& comp = components_[k];
        const std::string where = "GaussianMixture component " + std::to_string(k);
        require(std::isfinite(comp.weight) && comp.weight > 0.0,
                where + ": weight must be finite and positive");
        require(comp.mean.size() == dim_, where + ": mean dimension mismatch");
        require(comp.mean.allFinite(), where + ": mean has non-finite entries");
        require(comp.covariance.rows() == dim_ && comp.covariance.cols() == dim_,
                where + ": covariance must be " + std::to_string(dim_) + "x" +
                    std::to_string(dim_));
        require(comp.covariance.allFinite(),
                where + ": covariance has non-finite entries");
        const double scale = std::max(1.0, comp.covariance.cwiseAbs().maxCoeff());
        const double asym =
            (comp.covariance - comp.covariance.transpose()).cwiseAbs().maxCoeff();
        require(asym <= 1e-9 * scale, where + ": covariance is not symmetric");
        weight_sum += comp.weight;

        // Eigenvalue floor: keeps point-mass-like components strictly positive
        // definite so every downstream Cholesky factorization succeeds.
        Eigen::MatrixXd sym =
            0.5 * (comp.covariance + comp.covariance.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
        require(eig.info() == Eigen::Success,
                where + ": covariance eigendecomposition failed");
        Eigen::VectorXd values = eig.eigenvalues().cwiseMax(kEigenvalueFloor);
        sym = eig.eigenvectors() * values.asDiagonal() *
              eig.eigenvectors().transpose();
        comp.covariance = 0.5 * (sym + sym.transpose());
        log_weights_.push_back(std::log(comp.weight));
    }
    require(std::abs(weight_sum - 1.0) <= kWeightSumTolerance,
            "GaussianMixture: weights sum to " + std::to_string(weight_sum) +
                ", expected 1 within 1e-12");
}

Eigen::VectorXd GaussianMixture::mean() const {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
    for (const auto& comp : components_) m += comp.weight * comp.mean;
    return m;
}

GaussianMixture::TimeSlice GaussianMixture::time_slice(double t,
                                                       const Batch& points) const {
    require(std::isfinite(t) && t >= 0.0 && t <= 1.0,
            "GaussianMixture: time must lie in [0, 1]");
    require(points.cols() == dim_, "GaussianMixture: batch has " +
                                       std::to_string(points.cols()) +
                                       " columns, model dimension is " +
                                       std::to_string(dim_));
    require(points.allFinite(), "GaussianMixture: batch has non-finite entries");

    const int n = static_cast<int>(points.rows());
    const int K = num_components();
    TimeSlice slice;
    slice.log_weighted.resize(n, K);
    slice.solved.resize(static_cast<std::size_t>(K));

    const Eigen::MatrixXd points_t = points.transpose();
    for (int k = 0; k < K; ++k) {
        const auto& comp = components_[static_cast<std::size_t>(k)];
        const Eigen::VectorXd center = (1.0 - t) * comp.mean;
        const Eigen::MatrixXd cov_t =
            (1.0 - t) * (1.0 - t) * comp.covariance +
            t * t * Eigen::MatrixXd::Identity(dim_, dim_);
        Eigen::LLT<Eigen::MatrixXd> llt(cov_t);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument(
                "GaussianMixture: time-t covariance is not positive definite");
        const double log_det =
            2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();

        Eigen::MatrixXd centered = points_t.colwise() - center; // d x n
        Eigen::MatrixXd solved = llt.solve(centered);           // S^{-1}(z - m)
        const Eigen::VectorXd quad =
            (centered.array() * solved.array()).colwise().sum().transpose();
        slice.log_weighted.col(k) =
            (-0.5 * (dim_ * kLog2Pi + log_det)) +
            log_weights_[static_cast<std::size_t>(k)] - 0.5 * quad.array();
        slice.solved[static_cast<std::size_t>(k)] = std::move(solved);
    }
    return slice;
}

Eigen::VectorXd GaussianMixture::log_density(const Batch& points) const {
    const TimeSlice slice = time_slice(0.0, points);
    if (slice.log_weighted.rows() == 0) return Eigen::VectorXd(0);
    const Eigen::VectorXd row_max = slice.log_weighted.rowwise().maxCoeff();
    const Eigen::VectorXd sums =
        (slice.log_weighted.colwise() - row_max).array().exp().rowwise().sum();
    return row_max.array() + sums.array().log();
}

Batch GaussianMixture::sample(int n, std::uint64_t seed) const {
    return sample_with_labels(n, seed).first;
}

std::pair<Batch, std::vector<int>> GaussianMixture::sample_with_labels(
    int n, std::uint64_t seed) const {
    require(n >= 0, "GaussianMixture: sample count must be nonnegative");
    const int K = num_components();

    std::vector<Eigen::MatrixXd> chol(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        Eigen::LLT<Eigen::MatrixXd> llt(components_[static_cast<std::size_t>(k)].covariance);
        chol[static_cast<std::size_t>(k)] = llt.matrixL();
    }
    std::vector<double> cumulative(static_cast<std::size_t>(K));
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
        acc += components_[static_cast<std::size_t>(k)].weight;
        cumulative[static_cast<std::size_t>(k)] = acc;
    }

    const std::uint64_t comp_key = derive_key(seed, rng_stream::mixture_component);
    const Eigen::MatrixXd normals = standard_normal_matrix(
        derive_key(seed, rng_stream::mixture_normal), n, dim_, 0, 0);

    Batch out(n, dim_);
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (int r = 0; r < n; ++r) {
        const double u = uniform01(comp_key, static_cast<std::uint32_t>(r), 0, 0, 0);
        int k = K - 1;
        for (int j = 0; j < K; ++j) {
            if (u <= cumulative[static_cast<std::size_t>(j)]) { k = j; break; }
        }
        labels[static_cast<std::size_t>(r)] = k;
        const auto& comp = components_[static_cast<std::size_t>(k)];
        out.row(r) = (comp.mean +
                      chol[static_cast<std::size_t>(k)] * normals.row(r).transpose())
                         .transpose();
    }
    return {std::move(out), std::move(labels)};
}

GaussianMixture GaussianMixture::marginal_at(double t) const {
    require(std::isfinite(t) && t >= 0.0 && t <= 1.0,
            "GaussianMixture: time must lie in [0, 1]");
    std::vector<GaussianComponent> comps;
    comps.reserve(components_.size());
    for (const auto& comp : components_) {
        GaussianComponent c;
        c.weight = comp.weight;
        c.mean = (1.0 - t) * comp.mean;
        c.covariance = (1.0 - t) * (1.0 - t) * comp.covariance +
                       t * t * Eigen::MatrixXd::Identity(dim_, dim_);
        comps.push_back(std::move(c));
    }
    return GaussianMixture(std::move(comps));
}

Eigen::MatrixXd GaussianMixture::responsibilities(double t,
                                                  const Batch& points) const {
    return softmax_rows(time_slice(t, points).log_weighted);
}

Batch GaussianMixture::analytic_velocity(double t, const Batch& points) const {
    const TimeSlice slice = time_slice(t, points);
    const Eigen::MatrixXd resp = softmax_rows(slice.log_weighted);
    const int n = static_cast<int>(points.rows());

    Batch velocity = Batch::Zero(n, dim_);
    for (int k = 0; k < num_components(); ++k) {
        const auto& comp = components_[static_cast<std::size_t>(k)];
        // E[X1 | z, k] - E[X0 | z, k] = (t I - (1-t) Sigma_k) S_k^{-1}(z - m_k) - mu_k
        const Eigen::MatrixXd gain =
            t * Eigen::MatrixXd::Identity(dim_, dim_) - (1.0 - t) * comp.covariance;
        Eigen::MatrixXd diff = gain * slice.solved[static_cast<std::size_t>(k)];
        diff.colwise() -= comp.mean;
        velocity.array() += diff.transpose().array().colwise() * resp.col(k).array();
    }
    return velocity;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& log_values) {
    if (log_values.rows() == 0)
        return Eigen::MatrixXd(0, log_values.cols());
    const Eigen::VectorXd row_max = log_values.rowwise().maxCoeff();
    Eigen::MatrixXd shifted =
        (log_values.colwise() - row_max).array().exp();
    const Eigen::VectorXd sums = shifted.rowwise().sum();
    return shifted.array().colwise() / sums.array();
}

} // namespace flowlab
