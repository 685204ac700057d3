#include "flowlab/field.hpp"

#include <stdexcept>

namespace flowlab {

namespace {

constexpr double kTimeGuard = 1.0 - 1e-6;

void check_condition_label(const Condition& condition) {
    if (condition.empty())
        throw std::invalid_argument("ConditionedModel: condition label is empty");
}

} // namespace

ConditionedModel ConditionedModel::analytic(int dim) {
    if (dim < 1)
        throw std::invalid_argument("ConditionedModel: dim must be >= 1");
    return ConditionedModel(dim, backend_kind::analytic);
}

ConditionedModel ConditionedModel::learned(std::shared_ptr<const VelocityNet> net) {
    if (!net) throw std::invalid_argument("ConditionedModel: net is null");
    ConditionedModel model(net->dim(), backend_kind::learned);
    model.net_ = std::move(net);
    return model;
}

void ConditionedModel::add_condition(const Condition& condition,
                                     GaussianMixture mixture) {
    check_condition_label(condition);
    if (kind_ != backend_kind::analytic)
        throw std::invalid_argument(
            "ConditionedModel: mixture-backed conditions need an analytic model");
    if (mixture.dim() != dim_)
        throw std::invalid_argument("ConditionedModel: mixture dimension " +
                                    std::to_string(mixture.dim()) +
                                    " does not match model dimension " +
                                    std::to_string(dim_));
    if (has_condition(condition))
        throw std::invalid_argument("ConditionedModel: condition '" + condition +
                                    "' registered twice");
    mixtures_.emplace(condition, std::move(mixture));
}

void ConditionedModel::add_condition(const Condition& condition,
                                     int condition_index) {
    check_condition_label(condition);
    if (kind_ != backend_kind::learned)
        throw std::invalid_argument(
            "ConditionedModel: index-backed conditions need a learned model");
    if (condition_index < 0 || condition_index >= net_->num_conditions())
        throw std::invalid_argument("ConditionedModel: condition index " +
                                    std::to_string(condition_index) +
                                    " out of range for the shared net");
    if (has_condition(condition))
        throw std::invalid_argument("ConditionedModel: condition '" + condition +
                                    "' registered twice");
    net_slots_.emplace(condition, condition_index);
}

bool ConditionedModel::has_condition(const Condition& condition) const {
    return mixtures_.count(condition) > 0 || net_slots_.count(condition) > 0;
}

std::vector<Condition> ConditionedModel::conditions() const {
    std::vector<Condition> out;
    for (const auto& [label, unused] : mixtures_) out.push_back(label);
    for (const auto& [label, unused] : net_slots_) out.push_back(label);
    return out;
}

const GaussianMixture& ConditionedModel::mixture(const Condition& condition) const {
    const auto it = mixtures_.find(condition);
    if (it == mixtures_.end())
        throw std::invalid_argument("ConditionedModel: no mixture for condition '" +
                                    condition + "'");
    return it->second;
}

const VelocityNet& ConditionedModel::net() const {
    if (!net_)
        throw std::invalid_argument("ConditionedModel: model has no learned net");
    return *net_;
}

int ConditionedModel::condition_slot(const Condition& condition) const {
    const auto it = net_slots_.find(condition);
    if (it == net_slots_.end())
        throw std::invalid_argument("ConditionedModel: no net slot for condition '" +
                                    condition + "'");
    return it->second;
}

Batch ConditionedModel::velocity(const Condition& condition, double t,
                                 const Batch& points) const {
    if (kind_ == backend_kind::analytic) {
        const auto it = mixtures_.find(condition);
        if (it == mixtures_.end())
            throw std::invalid_argument(
                "ConditionedModel: unknown condition '" + condition + "'");
        return it->second.analytic_velocity(t, points);
    }
    const auto it = net_slots_.find(condition);
    if (it == net_slots_.end())
        throw std::invalid_argument("ConditionedModel: unknown condition '" +
                                    condition + "'");
    if (points.cols() != dim_)
        throw std::invalid_argument("ConditionedModel: batch dimension mismatch");
    return net_->forward(points, t, it->second);
}

Batch eval_field(const ConditionedModel& model, const FieldSpec& spec, double t,
                 const Batch& points) {
    if (!spec.guided) return model.velocity(spec.condition, t, points);
    return guided_velocity(model, spec.condition, spec.unconditional, t, points,
                           spec.guidance_scale);
}

Batch velocity_delta(const ConditionedModel& model, const FieldSpec& src,
                     const FieldSpec& tar, double t, const Batch& src_points,
                     const Batch& tar_points) {
    if (src_points.rows() != tar_points.rows() ||
        src_points.cols() != tar_points.cols())
        throw std::invalid_argument("velocity_delta: batch shapes differ");
    return eval_field(model, tar, t, tar_points) -
           eval_field(model, src, t, src_points);
}

namespace {

void check_conversion_inputs(const Batch& a, const Batch& b, double t,
                             const char* name) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(name) + ": batch shapes differ");
    if (!(t >= 0.0) || !(t <= 1.0))
        throw std::invalid_argument(std::string(name) + ": time must lie in [0, 1]");
    if (t >= kTimeGuard)
        throw std::domain_error(
            std::string(name) +
            ": the velocity/noise-prediction map degenerates as t -> 1 "
            "(t = " + std::to_string(t) + " is past the 1 - 1e-6 guard)");
}

} // namespace

Batch velocity_to_noise_pred(const Batch& velocity, const Batch& points, double t) {
    check_conversion_inputs(velocity, points, t, "velocity_to_noise_pred");
    return points + (1.0 - t) * velocity;
}

Batch noise_pred_to_velocity(const Batch& noise_pred, const Batch& points, double t) {
    check_conversion_inputs(noise_pred, points, t, "noise_pred_to_velocity");
    return (noise_pred - points) / (1.0 - t);
}

Batch guided_velocity(const ConditionedModel& model, const Condition& condition,
                      const Condition& unconditional, double t, const Batch& points,
                      double scale) {
    if (!std::isfinite(scale))
        throw std::invalid_argument("guided_velocity: scale must be finite");
    const Batch v_uncond = model.velocity(unconditional, t, points);
    const Batch v_cond = model.velocity(condition, t, points);
    return v_uncond + scale * (v_cond - v_uncond);
}

} // namespace flowlab
