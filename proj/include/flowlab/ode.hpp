#pragma once

#include <string>
#include <vector>

#include "flowlab/field.hpp"
#include "flowlab/gmm.hpp"

namespace flowlab {

/// Time grid t_0 = 0 < t_1 < ... < t_T = 1 plus the editing-loop parameters
/// that ride along with it. Endpoints must be exactly 0 and 1 and the grid
/// strictly increasing; n_min <= n_max <= T.
///
/// step_scale_c is consumed only by the flowedit family (it rescales their
/// Euler deltas); the plain integrators always integrate the unscaled ODE.
class Schedule {
public:
    /// Uniform grid t_i = i / T.
    static Schedule uniform(int step_count);

    Schedule(std::vector<double> timesteps, int n_max, int n_min = 0,
             int n_avg = 1, double step_scale_c = 1.0);

    int step_count() const { return static_cast<int>(timesteps_.size()) - 1; }
    double t(int index) const { return timesteps_.at(static_cast<std::size_t>(index)); }
    const std::vector<double>& timesteps() const { return timesteps_; }

    int n_max() const { return n_max_; }
    int n_min() const { return n_min_; }
    int n_avg() const { return n_avg_; }
    double step_scale_c() const { return step_scale_c_; }

    // Copies with one parameter replaced (sweeps build these).
    Schedule with_n_max(int n_max) const;
    Schedule with_n_min(int n_min) const;
    Schedule with_n_avg(int n_avg) const;
    Schedule with_step_scale(double c) const;

private:
    std::vector<double> timesteps_;
    int n_max_ = 0;
    int n_min_ = 0;
    int n_avg_ = 1;
    double step_scale_c_ = 1.0;
};

/// A recorded integration path for a whole batch: states[j] is the batch at
/// times[j], and velocities[j] is the field evaluation that moved states[j]
/// to states[j + 1] (so velocities has one fewer entry than states).
struct Trajectory {
    std::string label;
    std::vector<double> times;
    std::vector<Batch> states;
    std::vector<Batch> velocities;

    const Batch& endpoint() const { return states.back(); }
    void check_shape() const;
};

/// One explicit Euler step z + dt * v.
Batch euler_step(const Batch& state, const Batch& velocity, double dt);

/// Integrate dz = V(z, t | spec) dt from grid index `from_index` up to
/// `to_index` (defaults: 0 -> T), evaluating the field at the current state
/// and time of each step. Raises numerical_error naming the step if a state
/// stops being finite.
Trajectory integrate_forward(const ConditionedModel& model, const FieldSpec& spec,
                             const Schedule& schedule, const Batch& start,
                             int from_index = 0, int to_index = -1,
                             const std::string& label = "forward");

/// Same loop run backwards: from `from_index` (default T) down to `to_index`
/// (default 0). The dt of each step is negative.
Trajectory integrate_reverse(const ConditionedModel& model, const FieldSpec& spec,
                             const Schedule& schedule, const Batch& start,
                             int from_index = -1, int to_index = 0,
                             const std::string& label = "reverse");

} // namespace flowlab
