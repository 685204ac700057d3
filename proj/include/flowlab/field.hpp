#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "flowlab/gmm.hpp"
#include "flowlab/net.hpp"

namespace flowlab {

/// A condition is a nonempty label naming one distribution a velocity field
/// can be conditioned on ("src", "tar", "uncond", ...).
using Condition = std::string;

enum class backend_kind { analytic, learned };

/// Registry mapping condition labels to velocity backends that share one
/// ambient dimension. An analytic model stores a GaussianMixture per
/// condition and evaluates the exact mixture velocity; a learned model
/// routes all conditions through one VelocityNet via per-condition one-hot
/// indices. Velocity evaluation never mutates the model, so identical calls
/// return identical values.
class ConditionedModel {
public:
    static ConditionedModel analytic(int dim);
    static ConditionedModel learned(std::shared_ptr<const VelocityNet> net);

    backend_kind kind() const { return kind_; }
    int dim() const { return dim_; }

    /// Register a condition backed by an exact mixture (analytic models).
    void add_condition(const Condition& condition, GaussianMixture mixture);

    /// Register a condition backed by the shared net's one-hot slot
    /// `condition_index` (learned models).
    void add_condition(const Condition& condition, int condition_index);

    bool has_condition(const Condition& condition) const;
    std::vector<Condition> conditions() const;

    /// The mixture backing `condition`; only valid on analytic models.
    const GaussianMixture& mixture(const Condition& condition) const;

    /// The shared net; only valid on learned models.
    const VelocityNet& net() const;

    /// The one-hot slot `condition` routes to; only valid on learned models.
    int condition_slot(const Condition& condition) const;

    /// V(z, t | condition) for each row of `points`.
    Batch velocity(const Condition& condition, double t, const Batch& points) const;

private:
    explicit ConditionedModel(int dim, backend_kind kind)
        : dim_(dim), kind_(kind) {}

    int dim_ = 0;
    backend_kind kind_ = backend_kind::analytic;
    std::shared_ptr<const VelocityNet> net_;
    std::map<Condition, GaussianMixture> mixtures_;
    std::map<Condition, int> net_slots_;
};

/// One side of an editing problem: which condition drives the field, and
/// optionally classifier-free-style guidance against an unconditional label.
/// A FieldSpec built from a bare condition evaluates the plain velocity.
struct FieldSpec {
    Condition condition;
    bool guided = false;
    Condition unconditional;
    double guidance_scale = 1.0;

    FieldSpec() = default;
    FieldSpec(Condition c) : condition(std::move(c)) {} // NOLINT: implicit by design
    FieldSpec(const char* c) : condition(c) {}          // NOLINT: implicit by design
};

/// Evaluate a FieldSpec: plain velocity, or the guided combination.
Batch eval_field(const ConditionedModel& model, const FieldSpec& spec, double t,
                 const Batch& points);

/// The editing integrand: V(z_tar, t | tar) - V(z_src, t | src).
Batch velocity_delta(const ConditionedModel& model, const FieldSpec& src,
                     const FieldSpec& tar, double t, const Batch& src_points,
                     const Batch& tar_points);

/// Noise prediction implied by a velocity: eps = z + (1 - t) v. The linear
/// map between the two parameterizations degenerates at t = 1, so times
/// t >= 1 - 1e-6 raise std::domain_error instead of being clamped.
Batch velocity_to_noise_pred(const Batch& velocity, const Batch& points, double t);

/// Velocity implied by a noise prediction: v = (eps - z) / (1 - t).
/// Same t >= 1 - 1e-6 guard as velocity_to_noise_pred.
Batch noise_pred_to_velocity(const Batch& noise_pred, const Batch& points, double t);

/// v_uncond + scale * (v_cond - v_uncond); scale 1 reproduces the
/// conditional field, scale 0 the unconditional one.
Batch guided_velocity(const ConditionedModel& model, const Condition& condition,
                      const Condition& unconditional, double t, const Batch& points,
                      double scale);

} // namespace flowlab
