#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "flowlab/gmm.hpp"
#include "flowlab/net.hpp"

namespace flowlab {

/// One training minibatch of the interpolation objective: clean points x0
/// (each from its row's condition), noise endpoints x1 ~ N(0, I), times
/// t ~ U[0, 1] and the per-row condition indices.
struct TrainingBatch {
    Batch x0;
    Batch x1;
    Eigen::VectorXd t;
    std::vector<int> condition;
};

/// Deterministically build the minibatch for `iteration`: condition chosen
/// uniformly per row, x0 drawn from that condition's mixture, x1 standard
/// normal, t uniform. Pure function of (data, batch_size, seed, iteration).
TrainingBatch make_training_batch(const std::vector<GaussianMixture>& data_per_condition,
                                  int batch_size, std::uint64_t seed,
                                  std::uint64_t iteration);

struct LossGrad {
    double loss = 0.0;
    Eigen::VectorXd grad;
};

/// Mean over rows of || net(z_t, t, c) - (x1 - x0) ||^2 with
/// z_t = (1 - t) x0 + t x1, plus its exact gradient with respect to the
/// flat parameter vector (reverse-mode accumulation through the MLP).
LossGrad flow_matching_loss(const VelocityNet& net, const TrainingBatch& batch);

/// Loss only, for an arbitrary velocity field (oracle comparisons). The
/// field is called row by row with that row's time and condition.
double flow_matching_loss_value(
    const std::function<Batch(const Batch&, double, int)>& field,
    const TrainingBatch& batch);

struct TrainConfig {
    int iterations = 20000;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int record_every = 100;      ///< loss-curve sampling stride
    double divergence_factor = 10.0;
    int divergence_patience = 500;
    std::vector<int> hidden = {64, 64, 64};
};

struct TrainResult {
    VelocityNet net;
    std::vector<std::pair<int, double>> loss_curve; ///< (iteration, batch loss)
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

/// Adam on the flow-matching objective. Deterministic for a fixed seed
/// (same seed -> identical loss curve and final weights). Raises
/// training_error if the batch loss stays above divergence_factor x the
/// initial loss for divergence_patience consecutive iterations.
TrainResult train(const std::vector<GaussianMixture>& data_per_condition,
                  const TrainConfig& config, std::uint64_t seed);

} // namespace flowlab
