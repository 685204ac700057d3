#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowlab/field.hpp"
#include "flowlab/gmm.hpp"
#include "flowlab/ode.hpp"

namespace flowlab {

/// Guidance settings shared by the two sides of an edit. Disabled by
/// default; when enabled, each side's velocity is evaluated as
/// v_uncond + scale * (v_cond - v_uncond) against `unconditional`.
struct GuidanceSettings {
    bool enabled = false;
    Condition unconditional;
    double source_scale = 1.0;
    double target_scale = 1.0;
};

/// One editing problem: move `source_points` (draws from the source
/// distribution) so they look like draws from the target distribution while
/// staying close to where they started.
struct EditRequest {
    Batch source_points;
    Condition src_condition;
    Condition tar_condition;
    Schedule schedule = Schedule::uniform(50);
    std::uint64_t seed = 0;
    bool record_trajectory = false;
    /// The target-side interpolant reuses the source-side noise instance
    /// (the default). When false, the two sides draw independent noises --
    /// kept as an ablation switch.
    bool shared_noise = true;
    GuidanceSettings guidance;
};

/// Everything needed to regenerate an edit bit for bit: the editing noise is
/// a pure function of (seed, timestep index, realization index), so these
/// fields plus the method name replay any single row in isolation.
struct ReplayInfo {
    std::string method;
    std::uint64_t seed = 0;
    int n_max = 0;
    int n_min = 0;
    int n_avg = 1;
    double step_scale_c = 1.0;
    bool shared_noise = true;
};

struct EditResult {
    Batch edited_points;
    std::vector<Trajectory> trajectories; ///< filled only when requested
    ReplayInfo replay;
    /// Filled by flowedit_expectation: an accumulated first-order estimate of
    /// the per-coordinate Monte Carlo standard error of each endpoint.
    Batch endpoint_mc_se;
};

/// Editing by inversion: integrate the source points forward under the
/// source condition up to t_{n_max}, then integrate that state back down to
/// t_0 under the target condition. n_max = 0 returns the source unchanged.
EditResult invert_edit(const ConditionedModel& model, const EditRequest& request);

/// The direct-path reinterpretation of invert_edit: the difference path
/// z_diff(t) = z_src(0) + z_tar(t) - z_src(t) is integrated directly, with
/// the target state reconstructed each step as z_diff + z_src(t) - z_src(0)
/// and the source contribution taken from the recorded forward step
/// velocities. Step for step this telescopes to exactly the invert_edit
/// endpoint (up to float round-off), which is the point of the construction.
EditResult direct_path_edit(const ConditionedModel& model, const EditRequest& request);

/// Inversion-free editing: instead of an ODE-accurate source path, each step
/// re-noises the source points directly to t (z_src = (1-t) x_src + t N with
/// a fresh N per step), forms the target state by the same difference-path
/// bridge, and steps along the velocity difference averaged over n_avg
/// independent noise draws. Runs from n_max down to n_min; when n_min > 0
/// the remaining steps are plain reverse sampling under the target
/// condition. Identical source and target conditions return the source
/// batch bit for bit.
EditResult flowedit(const ConditionedModel& model, const EditRequest& request);

/// flowedit with the per-step velocity-difference average replaced by a
/// dense Monte Carlo estimate (mc_samples >= 256 draws per step). Serves as
/// the converged reference the finite-n_avg runs are compared against; also
/// fills EditResult::endpoint_mc_se.
EditResult flowedit_expectation(const ConditionedModel& model,
                                const EditRequest& request, int mc_samples);

/// Noising baseline: jump straight to z = (1 - t_{n_max}) x_src +
/// t_{n_max} N with a single noise draw, then reverse-sample under the
/// target condition. At n_max = T the output is independent of the source.
EditResult sdedit(const ConditionedModel& model, const EditRequest& request);

/// flowedit with every Euler delta multiplied by c (schedule step scaling);
/// c = 1 reproduces flowedit bit for bit.
EditResult flowedit_scaled(const ConditionedModel& model, const EditRequest& request,
                           double c);

} // namespace flowlab
