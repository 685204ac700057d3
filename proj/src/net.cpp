#include "flowlab/net.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "flowlab/rng.hpp"

namespace flowlab {

VelocityNet::VelocityNet(int dim, int num_conditions, std::vector<int> hidden)
    : dim_(dim), num_conditions_(num_conditions), hidden_(std::move(hidden)) {
    if (dim_ < 1) throw std::invalid_argument("VelocityNet: dim must be >= 1");
    if (num_conditions_ < 1)
        throw std::invalid_argument("VelocityNet: need at least one condition");
    if (hidden_.empty())
        throw std::invalid_argument("VelocityNet: need at least one hidden layer");
    for (int width : hidden_)
        if (width < 1)
            throw std::invalid_argument("VelocityNet: hidden width must be >= 1");

    int in = input_features();
    for (int width : hidden_) {
        layers_.push_back({Eigen::MatrixXd::Zero(width, in),
                           Eigen::VectorXd::Zero(width)});
        in = width;
    }
    layers_.push_back({Eigen::MatrixXd::Zero(dim_, in), Eigen::VectorXd::Zero(dim_)});
}

VelocityNet VelocityNet::initialized(int dim, int num_conditions,
                                     std::uint64_t seed, std::vector<int> hidden) {
    VelocityNet net(dim, num_conditions, std::move(hidden));
    const std::uint64_t key = derive_key(seed, rng_stream::weight_init);
    // Fan-in-scaled uniform for every layer but the output head: the head
    // stays zero so the initial field is exactly zero.
    for (std::size_t l = 0; l + 1 < net.layers_.size(); ++l) {
        auto& layer = net.layers_[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        for (int r = 0; r < layer.weight.rows(); ++r) {
            for (int c = 0; c < layer.weight.cols(); ++c) {
                const double u = uniform01(key, static_cast<std::uint32_t>(r),
                                           static_cast<std::uint32_t>(l),
                                           static_cast<std::uint32_t>(c), 0);
                layer.weight(r, c) = bound * (2.0 * u - 1.0);
            }
        }
    }
    return net;
}

int VelocityNet::input_features() const {
    return dim_ + 1 + 2 * kTimeFrequencies + num_conditions_;
}

Eigen::MatrixXd VelocityNet::embed(const Batch& points, const Eigen::VectorXd& times,
                                   const std::vector<int>& condition_indices) const {
    const int n = static_cast<int>(points.rows());
    if (points.cols() != dim_)
        throw std::invalid_argument("VelocityNet: batch dimension mismatch");
    if (times.size() != n || static_cast<int>(condition_indices.size()) != n)
        throw std::invalid_argument("VelocityNet: times/conditions length mismatch");

    Eigen::MatrixXd features = Eigen::MatrixXd::Zero(n, input_features());
    features.leftCols(dim_) = points;
    features.col(dim_) = times;
    for (int j = 0; j < kTimeFrequencies; ++j) {
        const double freq = 2.0 * std::numbers::pi * static_cast<double>(1 << j);
        features.col(dim_ + 1 + 2 * j) = (freq * times).array().sin();
        features.col(dim_ + 2 + 2 * j) = (freq * times).array().cos();
    }
    const int one_hot_base = dim_ + 1 + 2 * kTimeFrequencies;
    for (int r = 0; r < n; ++r) {
        const int c = condition_indices[static_cast<std::size_t>(r)];
        if (c < 0 || c >= num_conditions_)
            throw std::invalid_argument("VelocityNet: condition index " +
                                        std::to_string(c) + " out of range");
        features(r, one_hot_base + c) = 1.0;
    }
    return features;
}

Batch VelocityNet::forward(const Batch& points, double t, int condition_index) const {
    const int n = static_cast<int>(points.rows());
    const Eigen::VectorXd times = Eigen::VectorXd::Constant(n, t);
    const std::vector<int> conditions(static_cast<std::size_t>(n), condition_index);
    return forward_mixed(points, times, conditions);
}

Batch VelocityNet::forward_mixed(const Batch& points, const Eigen::VectorXd& times,
                                 const std::vector<int>& condition_indices) const {
    Eigen::MatrixXd activations = embed(points, times, condition_indices);
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        Eigen::MatrixXd pre = activations * layer.weight.transpose();
        pre.rowwise() += layer.bias.transpose();
        activations = silu(pre.array());
    }
    const auto& head = layers_.back();
    Eigen::MatrixXd out = activations * head.weight.transpose();
    out.rowwise() += head.bias.transpose();
    return out;
}

int VelocityNet::parameter_count() const {
    int count = 0;
    for (const auto& layer : layers_)
        count += static_cast<int>(layer.weight.size() + layer.bias.size());
    return count;
}

Eigen::VectorXd VelocityNet::parameters() const {
    Eigen::VectorXd flat(parameter_count());
    int offset = 0;
    for (const auto& layer : layers_) {
        for (int r = 0; r < layer.weight.rows(); ++r)
            for (int c = 0; c < layer.weight.cols(); ++c)
                flat(offset++) = layer.weight(r, c);
        for (int r = 0; r < layer.bias.size(); ++r) flat(offset++) = layer.bias(r);
    }
    return flat;
}

void VelocityNet::set_parameters(const Eigen::VectorXd& flat) {
    if (flat.size() != parameter_count())
        throw std::invalid_argument("VelocityNet: parameter vector has size " +
                                    std::to_string(flat.size()) + ", expected " +
                                    std::to_string(parameter_count()));
    int offset = 0;
    for (auto& layer : layers_) {
        for (int r = 0; r < layer.weight.rows(); ++r)
            for (int c = 0; c < layer.weight.cols(); ++c)
                layer.weight(r, c) = flat(offset++);
        for (int r = 0; r < layer.bias.size(); ++r) layer.bias(r) = flat(offset++);
    }
}

Eigen::ArrayXXd silu(const Eigen::ArrayXXd& x) {
    return x / (1.0 + (-x).exp());
}

Eigen::ArrayXXd silu_derivative(const Eigen::ArrayXXd& x) {
    const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-x).exp());
    return sig * (1.0 + x * (1.0 - sig));
}

} // namespace flowlab
