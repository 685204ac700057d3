#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "flowlab/gmm.hpp"

namespace flowlab {

/// Number of sin/cos harmonic pairs appended to the raw time input.
inline constexpr int kTimeFrequencies = 4;

/// Small fully connected velocity network v(z, t, condition).
///
/// Input features are [z, t, sin/cos(2 pi 2^j t) for j = 0..3, one-hot
/// condition]; they feed three hidden layers of 64 units with SiLU
/// activations and a linear output head of `dim` units. A freshly
/// constructed net has all-zero parameters, so it represents the zero
/// velocity field; `initialized` applies fan-in-scaled uniform init to all
/// layers except the output head, which stays zero.
class VelocityNet {
public:
    struct Layer {
        Eigen::MatrixXd weight; ///< out x in
        Eigen::VectorXd bias;   ///< out
    };

    VelocityNet(int dim, int num_conditions, std::vector<int> hidden = {64, 64, 64});

    static VelocityNet initialized(int dim, int num_conditions, std::uint64_t seed,
                                   std::vector<int> hidden = {64, 64, 64});

    int dim() const { return dim_; }
    int num_conditions() const { return num_conditions_; }
    const std::vector<int>& hidden() const { return hidden_; }

    /// Width of the embedded input: dim + 1 + 2 * kTimeFrequencies + conditions.
    int input_features() const;

    /// Batched evaluation at one shared time and condition; one output row
    /// per input row. Pure function of (points, t, condition_index).
    Batch forward(const Batch& points, double t, int condition_index) const;

    /// Evaluation with per-row times and conditions (training batches mix them).
    Batch forward_mixed(const Batch& points, const Eigen::VectorXd& times,
                        const std::vector<int>& condition_indices) const;

    /// Feature embedding shared by inference and the training backward pass.
    Eigen::MatrixXd embed(const Batch& points, const Eigen::VectorXd& times,
                          const std::vector<int>& condition_indices) const;

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    // Flat parameter view in a fixed order (per layer: row-major weight, then
    // bias). Used by the optimizer, checkpoints and finite-difference checks.
    int parameter_count() const;
    Eigen::VectorXd parameters() const;
    void set_parameters(const Eigen::VectorXd& flat);

private:
    int dim_ = 0;
    int num_conditions_ = 0;
    std::vector<int> hidden_;
    std::vector<Layer> layers_;
};

/// SiLU activation x * sigmoid(x) and its derivative (shared with backprop).
Eigen::ArrayXXd silu(const Eigen::ArrayXXd& x);
Eigen::ArrayXXd silu_derivative(const Eigen::ArrayXXd& x);

} // namespace flowlab
