#include "flowlab/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "flowlab/errors.hpp"
#include "flowlab/rng.hpp"

namespace flowlab {

namespace {

// Realization slots within one training iteration's noise stream.
constexpr std::uint32_t kDrawCondition = 0;
constexpr std::uint32_t kDrawTime = 1;
constexpr std::uint32_t kDrawNoise = 2;
constexpr std::uint32_t kDrawComponent = 3;
constexpr std::uint32_t kDrawClean = 4;

} // namespace

TrainingBatch make_training_batch(const std::vector<GaussianMixture>& data_per_condition,
                                  int batch_size, std::uint64_t seed,
                                  std::uint64_t iteration) {
    if (data_per_condition.empty())
        throw std::invalid_argument("make_training_batch: no data mixtures");
    if (batch_size < 1)
        throw std::invalid_argument("make_training_batch: batch size must be >= 1");
    const int dim = data_per_condition[0].dim();
    for (const auto& gmm : data_per_condition)
        if (gmm.dim() != dim)
            throw std::invalid_argument(
                "make_training_batch: mixtures must share one dimension");

    const int num_conditions = static_cast<int>(data_per_condition.size());
    const std::uint64_t key = derive_key(seed, rng_stream::train_batch);
    const auto step = static_cast<std::uint32_t>(iteration);

    // Cholesky factors once per call, reused across rows.
    std::vector<std::vector<Eigen::MatrixXd>> chol(data_per_condition.size());
    for (std::size_t c = 0; c < data_per_condition.size(); ++c)
        for (const auto& comp : data_per_condition[c].components())
            chol[c].push_back(Eigen::LLT<Eigen::MatrixXd>(comp.covariance).matrixL());

    TrainingBatch batch;
    batch.x0.resize(batch_size, dim);
    batch.x1 = standard_normal_matrix(key, batch_size, dim, step, kDrawNoise);
    batch.t.resize(batch_size);
    batch.condition.resize(static_cast<std::size_t>(batch_size));

    const Eigen::MatrixXd clean_normals =
        standard_normal_matrix(key, batch_size, dim, step, kDrawClean);
    for (int r = 0; r < batch_size; ++r) {
        const auto row = static_cast<std::uint32_t>(r);
        const double u_cond = uniform01(key, row, step, kDrawCondition, 0);
        const int cond = std::min(num_conditions - 1,
                                  static_cast<int>(u_cond * num_conditions));
        batch.condition[static_cast<std::size_t>(r)] = cond;
        batch.t(r) = uniform01(key, row, step, kDrawTime, 0);

        const auto& gmm = data_per_condition[static_cast<std::size_t>(cond)];
        const double u_comp = uniform01(key, row, step, kDrawComponent, 0);
        int k = gmm.num_components() - 1;
        double cumulative = 0.0;
        for (int j = 0; j < gmm.num_components(); ++j) {
            cumulative += gmm.component(j).weight;
            if (u_comp <= cumulative) { k = j; break; }
        }
        batch.x0.row(r) =
            (gmm.component(k).mean +
             chol[static_cast<std::size_t>(cond)][static_cast<std::size_t>(k)] *
                 clean_normals.row(r).transpose())
                .transpose();
    }
    return batch;
}

LossGrad flow_matching_loss(const VelocityNet& net, const TrainingBatch& batch) {
    const int n = static_cast<int>(batch.x0.rows());
    if (n == 0) throw std::invalid_argument("flow_matching_loss: empty batch");
    if (batch.x1.rows() != n || batch.t.size() != n ||
        static_cast<int>(batch.condition.size()) != n)
        throw std::invalid_argument("flow_matching_loss: batch fields disagree on n");

    const Batch z = (batch.x0.array().colwise() * (1.0 - batch.t.array())).matrix() +
                    (batch.x1.array().colwise() * batch.t.array()).matrix();
    const Batch target = batch.x1 - batch.x0;

    // Forward pass, caching pre-activations and activations per layer.
    const auto& layers = net.layers();
    const std::size_t n_hidden = layers.size() - 1;
    std::vector<Eigen::MatrixXd> activations; // activations[l] feeds layer l
    std::vector<Eigen::MatrixXd> pre;         // pre[l] = pre-activation of layer l
    activations.reserve(layers.size());
    pre.reserve(n_hidden);
    activations.push_back(net.embed(z, batch.t, batch.condition));
    for (std::size_t l = 0; l < n_hidden; ++l) {
        Eigen::MatrixXd p = activations[l] * layers[l].weight.transpose();
        p.rowwise() += layers[l].bias.transpose();
        pre.push_back(p);
        activations.push_back(silu(p.array()));
    }
    Eigen::MatrixXd out = activations.back() * layers.back().weight.transpose();
    out.rowwise() += layers.back().bias.transpose();

    const Eigen::MatrixXd residual = out - target;
    LossGrad result;
    result.loss = residual.squaredNorm() / static_cast<double>(n);

    // Reverse pass. Gradients are packed in the same order as
    // VelocityNet::parameters(): per layer, row-major weight then bias.
    result.grad.resize(net.parameter_count());
    std::vector<Eigen::MatrixXd> grad_w(layers.size());
    std::vector<Eigen::VectorXd> grad_b(layers.size());

    Eigen::MatrixXd delta = (2.0 / static_cast<double>(n)) * residual;
    grad_w.back() = delta.transpose() * activations.back();
    grad_b.back() = delta.colwise().sum().transpose();
    Eigen::MatrixXd upstream = delta * layers.back().weight;
    for (std::size_t l = n_hidden; l-- > 0;) {
        const Eigen::MatrixXd dz =
            (upstream.array() * silu_derivative(pre[l].array())).matrix();
        grad_w[l] = dz.transpose() * activations[l];
        grad_b[l] = dz.colwise().sum().transpose();
        if (l > 0) upstream = dz * layers[l].weight;
    }

    int offset = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (int r = 0; r < grad_w[l].rows(); ++r)
            for (int c = 0; c < grad_w[l].cols(); ++c)
                result.grad(offset++) = grad_w[l](r, c);
        for (int r = 0; r < grad_b[l].size(); ++r)
            result.grad(offset++) = grad_b[l](r);
    }
    return result;
}

double flow_matching_loss_value(
    const std::function<Batch(const Batch&, double, int)>& field,
    const TrainingBatch& batch) {
    const int n = static_cast<int>(batch.x0.rows());
    if (n == 0) throw std::invalid_argument("flow_matching_loss: empty batch");
    double total = 0.0;
    for (int r = 0; r < n; ++r) {
        const Batch z = (1.0 - batch.t(r)) * batch.x0.row(r) +
                        batch.t(r) * batch.x1.row(r);
        const Batch v = field(z, batch.t(r), batch.condition[static_cast<std::size_t>(r)]);
        total += (v - (batch.x1.row(r) - batch.x0.row(r))).squaredNorm();
    }
    return total / static_cast<double>(n);
}

TrainResult train(const std::vector<GaussianMixture>& data_per_condition,
                  const TrainConfig& config, std::uint64_t seed) {
    if (data_per_condition.empty())
        throw std::invalid_argument("train: no data mixtures");
    if (config.iterations < 1)
        throw std::invalid_argument("train: need at least one iteration");
    if (config.batch_size < 1)
        throw std::invalid_argument("train: batch size must be >= 1");
    if (!(config.learning_rate > 0.0))
        throw std::invalid_argument("train: learning rate must be positive");

    const int dim = data_per_condition[0].dim();
    const int num_conditions = static_cast<int>(data_per_condition.size());
    VelocityNet net =
        VelocityNet::initialized(dim, num_conditions, seed, config.hidden);

    Eigen::VectorXd params = net.parameters();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
    Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());

    TrainResult result{std::move(net), {}, 0.0, 0.0};
    int diverged_for = 0;
    for (int iter = 0; iter < config.iterations; ++iter) {
        const TrainingBatch batch = make_training_batch(
            data_per_condition, config.batch_size, seed,
            static_cast<std::uint64_t>(iter));
        const LossGrad lg = flow_matching_loss(result.net, batch);
        if (iter == 0) result.initial_loss = lg.loss;
        if (iter % config.record_every == 0 || iter == config.iterations - 1)
            result.loss_curve.emplace_back(iter, lg.loss);

        if (!std::isfinite(lg.loss) ||
            lg.loss > config.divergence_factor * result.initial_loss) {
            if (++diverged_for >= config.divergence_patience)
                throw training_error(
                    "train: loss has stayed above " +
                    std::to_string(config.divergence_factor) +
                    "x the initial loss for " + std::to_string(diverged_for) +
                    " consecutive iterations (diverged at iteration " +
                    std::to_string(iter) + ")");
        } else {
            diverged_for = 0;
        }

        const double step = static_cast<double>(iter + 1);
        m = config.beta1 * m + (1.0 - config.beta1) * lg.grad;
        v = config.beta2 * v.array().matrix() +
            (1.0 - config.beta2) * lg.grad.cwiseProduct(lg.grad);
        const Eigen::VectorXd m_hat = m / (1.0 - std::pow(config.beta1, step));
        const Eigen::VectorXd v_hat = v / (1.0 - std::pow(config.beta2, step));
        params -= config.learning_rate *
                  (m_hat.array() / (v_hat.array().sqrt() + config.adam_epsilon))
                      .matrix();
        result.net.set_parameters(params);
        result.final_loss = lg.loss;
    }
    return result;
}

} // namespace flowlab
