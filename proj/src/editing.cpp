#include "flowlab/editing.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "flowlab/errors.hpp"
#include "flowlab/rng.hpp"

namespace flowlab {

namespace {

void validate_request(const ConditionedModel& model, const EditRequest& request) {
    if (request.source_points.cols() != model.dim())
        throw std::invalid_argument(
            "edit: source batch has " + std::to_string(request.source_points.cols()) +
            " columns, model dimension is " + std::to_string(model.dim()));
    if (!request.source_points.allFinite())
        throw std::invalid_argument("edit: source batch has non-finite entries");
    for (const Condition* cond : {&request.src_condition, &request.tar_condition})
        if (!model.has_condition(*cond))
            throw std::invalid_argument("edit: condition '" + *cond +
                                        "' is not registered on the model");
    if (request.guidance.enabled &&
        !model.has_condition(request.guidance.unconditional))
        throw std::invalid_argument("edit: unconditional condition '" +
                                    request.guidance.unconditional +
                                    "' is not registered on the model");
}

FieldSpec side_spec(const EditRequest& request, bool target_side) {
    FieldSpec spec(target_side ? request.tar_condition : request.src_condition);
    if (request.guidance.enabled) {
        spec.guided = true;
        spec.unconditional = request.guidance.unconditional;
        spec.guidance_scale = target_side ? request.guidance.target_scale
                                          : request.guidance.source_scale;
    }
    return spec;
}

ReplayInfo replay_info(const EditRequest& request, std::string method) {
    ReplayInfo info;
    info.method = std::move(method);
    info.seed = request.seed;
    info.n_max = request.schedule.n_max();
    info.n_min = request.schedule.n_min();
    info.n_avg = request.schedule.n_avg();
    info.step_scale_c = request.schedule.step_scale_c();
    info.shared_noise = request.shared_noise;
    return info;
}

void check_finite_step(const Batch& state, const char* method, int grid_index,
                       double t) {
    if (!state.allFinite())
        throw numerical_error(std::string(method) +
                              ": state became non-finite after the step from grid "
                              "index " + std::to_string(grid_index) + " (t = " +
                              std::to_string(t) + ")");
}

/// Shared core of flowedit / flowedit_expectation / flowedit_scaled.
EditResult flowedit_impl(const ConditionedModel& model, const EditRequest& request,
                         int n_avg, bool estimate_se, std::string method) {
    validate_request(model, request);
    const Schedule& schedule = request.schedule;
    const Batch& x_src = request.source_points;
    const int n = static_cast<int>(x_src.rows());
    const int d = model.dim();
    const double c = schedule.step_scale_c();
    const FieldSpec src = side_spec(request, false);
    const FieldSpec tar = side_spec(request, true);

    Batch z_fe = x_src;
    Batch se_accum;
    if (estimate_se) se_accum = Batch::Zero(n, d);

    Trajectory fe_traj;
    fe_traj.label = "flowedit";
    if (request.record_trajectory) {
        fe_traj.times.push_back(schedule.t(schedule.n_max()));
        fe_traj.states.push_back(z_fe);
    }

    for (int i = schedule.n_max(); i > schedule.n_min(); --i) {
        const double t_i = schedule.t(i);
        const double dt = schedule.t(i - 1) - t_i;
        Batch v_sum = Batch::Zero(n, d);
        Batch v_sq = estimate_se ? Batch::Zero(n, d) : Batch();
        for (int a = 0; a < n_avg; ++a) {
            // Source and target sides of one draw share the noise instance;
            // the ablation mode gives the target side its own draw. Source
            // draws sit at even realization indices either way, so the shared
            // and independent modes see identical source noises.
            const Batch noise = draw_noise(request.seed, i, 2 * a, n, d).values;
            const Batch z_src = (1.0 - t_i) * x_src + t_i * noise;
            Batch z_tar;
            if (request.shared_noise) {
                z_tar = (z_fe - x_src) + z_src;
            } else {
                const Batch noise_tar =
                    draw_noise(request.seed, i, 2 * a + 1, n, d).values;
                z_tar = (z_fe - x_src) + ((1.0 - t_i) * x_src + t_i * noise_tar);
            }
            const Batch v_delta = eval_field(model, tar, t_i, z_tar) -
                                  eval_field(model, src, t_i, z_src);
            v_sum += v_delta;
            if (estimate_se) v_sq += v_delta.cwiseProduct(v_delta);
        }
        const Batch v_mean = v_sum / static_cast<double>(n_avg);
        if (estimate_se && n_avg >= 2) {
            // Variance of the per-step mean, accumulated first-order into an
            // endpoint standard-error estimate.
            const Batch var_mean =
                (v_sq - static_cast<double>(n_avg) * v_mean.cwiseProduct(v_mean))
                    .cwiseMax(0.0) /
                (static_cast<double>(n_avg - 1) * static_cast<double>(n_avg));
            se_accum += (c * dt) * (c * dt) * var_mean;
        }
        z_fe += (c * dt) * v_mean;
        check_finite_step(z_fe, method.c_str(), i, t_i);
        if (request.record_trajectory) {
            fe_traj.velocities.push_back(v_mean);
            fe_traj.states.push_back(z_fe);
            fe_traj.times.push_back(schedule.t(i - 1));
        }
    }

    EditResult result;
    result.replay = replay_info(request, std::move(method));
    result.replay.n_avg = n_avg;
    if (estimate_se) result.endpoint_mc_se = se_accum.cwiseSqrt();

    if (schedule.n_min() == 0) {
        result.edited_points = std::move(z_fe);
        if (request.record_trajectory) result.trajectories.push_back(std::move(fe_traj));
        return result;
    }

    // Tail below n_min: bridge onto a concrete target-side state with one
    // more noise draw, then plain reverse sampling under the target condition.
    const int m = schedule.n_min();
    const double t_m = schedule.t(m);
    const Batch noise = draw_noise(request.seed, m, 0, n, d).values;
    const Batch z_src_m = (1.0 - t_m) * x_src + t_m * noise;
    Batch z_tar = (z_fe - x_src) + z_src_m;

    Trajectory tail;
    tail.label = "tar-reverse";
    if (request.record_trajectory) {
        tail.times.push_back(t_m);
        tail.states.push_back(z_tar);
    }
    for (int i = m; i > 0; --i) {
        const double t_i = schedule.t(i);
        const double dt = schedule.t(i - 1) - t_i;
        const Batch velocity = eval_field(model, tar, t_i, z_tar);
        z_tar += (c * dt) * velocity;
        check_finite_step(z_tar, result.replay.method.c_str(), i, t_i);
        if (request.record_trajectory) {
            tail.velocities.push_back(velocity);
            tail.states.push_back(z_tar);
            tail.times.push_back(schedule.t(i - 1));
        }
    }
    result.edited_points = std::move(z_tar);
    if (request.record_trajectory) {
        result.trajectories.push_back(std::move(fe_traj));
        result.trajectories.push_back(std::move(tail));
    }
    return result;
}

} // namespace

EditResult invert_edit(const ConditionedModel& model, const EditRequest& request) {
    validate_request(model, request);
    const Schedule& schedule = request.schedule;
    const Trajectory forward =
        integrate_forward(model, side_spec(request, false), schedule,
                          request.source_points, 0, schedule.n_max(), "src-forward");
    const Trajectory reverse =
        integrate_reverse(model, side_spec(request, true), schedule,
                          forward.endpoint(), schedule.n_max(), 0, "tar-reverse");
    EditResult result;
    result.edited_points = reverse.endpoint();
    result.replay = replay_info(request, "invert");
    if (request.record_trajectory) result.trajectories = {forward, reverse};
    return result;
}

EditResult direct_path_edit(const ConditionedModel& model,
                            const EditRequest& request) {
    validate_request(model, request);
    const Schedule& schedule = request.schedule;
    const Batch& x_src = request.source_points;
    const FieldSpec tar = side_spec(request, true);

    const Trajectory forward =
        integrate_forward(model, side_spec(request, false), schedule, x_src, 0,
                          schedule.n_max(), "src-forward");
    // Recorded for parity with invert_edit and for trajectory output; the
    // direct loop below never reads it.
    const Trajectory reverse = integrate_reverse(
        model, tar, schedule, forward.endpoint(), schedule.n_max(), 0, "tar-reverse");

    // Difference path: starts at the source points and steps by the velocity
    // difference. The target state is reconstructed from the difference path
    // itself; the source contribution must be the recorded forward step
    // velocity (evaluated where the forward pass evaluated it), because that
    // is what makes the telescoping identity with invert_edit exact.
    Trajectory direct;
    direct.label = "direct";
    Batch z_diff = x_src;
    if (request.record_trajectory) {
        direct.times.push_back(schedule.t(schedule.n_max()));
        direct.states.push_back(z_diff);
    }
    for (int i = schedule.n_max(); i > 0; --i) {
        const double t_i = schedule.t(i);
        const double dt = schedule.t(i - 1) - t_i;
        const Batch reconstructed =
            (z_diff - x_src) + forward.states[static_cast<std::size_t>(i)];
        const Batch v_tar = eval_field(model, tar, t_i, reconstructed);
        const Batch& v_src = forward.velocities[static_cast<std::size_t>(i - 1)];
        const Batch v_delta = v_tar - v_src;
        z_diff += dt * v_delta;
        check_finite_step(z_diff, "direct_path_edit", i, t_i);
        if (request.record_trajectory) {
            direct.velocities.push_back(v_delta);
            direct.states.push_back(z_diff);
            direct.times.push_back(schedule.t(i - 1));
        }
    }

    EditResult result;
    result.edited_points = std::move(z_diff);
    result.replay = replay_info(request, "direct");
    if (request.record_trajectory)
        result.trajectories = {forward, reverse, std::move(direct)};
    return result;
}

EditResult flowedit(const ConditionedModel& model, const EditRequest& request) {
    return flowedit_impl(model, request, request.schedule.n_avg(), false, "flowedit");
}

EditResult flowedit_expectation(const ConditionedModel& model,
                                const EditRequest& request, int mc_samples) {
    if (mc_samples < 256)
        throw std::invalid_argument(
            "flowedit_expectation: need at least 256 draws per step, got " +
            std::to_string(mc_samples));
    return flowedit_impl(model, request, mc_samples, true, "flowedit_expectation");
}

EditResult sdedit(const ConditionedModel& model, const EditRequest& request) {
    validate_request(model, request);
    const Schedule& schedule = request.schedule;
    EditResult result;
    result.replay = replay_info(request, "sdedit");
    if (schedule.n_max() == 0) {
        result.edited_points = request.source_points;
        return result;
    }
    const int n = static_cast<int>(request.source_points.rows());
    const double t_start = schedule.t(schedule.n_max());
    const Batch noise = draw_noise(request.seed, schedule.n_max(), 0, n, model.dim()).values;
    const Batch noised = (1.0 - t_start) * request.source_points + t_start * noise;
    const Trajectory reverse =
        integrate_reverse(model, side_spec(request, true), schedule, noised,
                          schedule.n_max(), 0, "tar-reverse");
    result.edited_points = reverse.endpoint();
    if (request.record_trajectory) result.trajectories = {reverse};
    return result;
}

EditResult flowedit_scaled(const ConditionedModel& model, const EditRequest& request,
                           double c) {
    EditRequest scaled = request;
    scaled.schedule = request.schedule.with_step_scale(c);
    return flowedit_impl(model, scaled, scaled.schedule.n_avg(), false,
                         "flowedit_scaled");
}

} // namespace flowlab
