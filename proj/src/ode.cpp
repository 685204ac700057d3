#include "flowlab/ode.hpp"

#include <cmath>
#include <stdexcept>

#include "flowlab/errors.hpp"

namespace flowlab {

Schedule Schedule::uniform(int step_count) {
    if (step_count < 1)
        throw std::invalid_argument("Schedule: step count must be >= 1");
    std::vector<double> grid(static_cast<std::size_t>(step_count) + 1);
    for (int i = 0; i <= step_count; ++i)
        grid[static_cast<std::size_t>(i)] =
            static_cast<double>(i) / static_cast<double>(step_count);
    return Schedule(std::move(grid), step_count);
}

Schedule::Schedule(std::vector<double> timesteps, int n_max, int n_min, int n_avg,
                   double step_scale_c)
    : timesteps_(std::move(timesteps)),
      n_max_(n_max),
      n_min_(n_min),
      n_avg_(n_avg),
      step_scale_c_(step_scale_c) {
    if (timesteps_.size() < 2)
        throw std::invalid_argument("Schedule: need at least one step");
    if (timesteps_.front() != 0.0)
        throw std::invalid_argument("Schedule: grid must start at exactly 0");
    if (timesteps_.back() != 1.0)
        throw std::invalid_argument("Schedule: grid must end at exactly 1");
    for (std::size_t i = 0; i + 1 < timesteps_.size(); ++i) {
        if (!std::isfinite(timesteps_[i + 1]) || timesteps_[i] >= timesteps_[i + 1])
            throw std::invalid_argument(
                "Schedule: grid must be strictly increasing");
    }
    const int T = step_count();
    if (n_max_ < 0 || n_max_ > T)
        throw std::invalid_argument("Schedule: n_max must lie in [0, " +
                                    std::to_string(T) + "]");
    if (n_min_ < 0 || n_min_ > n_max_)
        throw std::invalid_argument("Schedule: n_min must lie in [0, n_max]");
    if (n_avg_ < 1)
        throw std::invalid_argument("Schedule: n_avg must be >= 1");
    if (!std::isfinite(step_scale_c_) || step_scale_c_ <= 0.0)
        throw std::invalid_argument("Schedule: step scale must be positive");
}

Schedule Schedule::with_n_max(int n_max) const {
    return Schedule(timesteps_, n_max, std::min(n_min_, n_max), n_avg_, step_scale_c_);
}

Schedule Schedule::with_n_min(int n_min) const {
    return Schedule(timesteps_, n_max_, n_min, n_avg_, step_scale_c_);
}

Schedule Schedule::with_n_avg(int n_avg) const {
    return Schedule(timesteps_, n_max_, n_min_, n_avg, step_scale_c_);
}

Schedule Schedule::with_step_scale(double c) const {
    return Schedule(timesteps_, n_max_, n_min_, n_avg_, c);
}

void Trajectory::check_shape() const {
    if (states.size() != times.size())
        throw std::logic_error("Trajectory: states/times length mismatch");
    if (!states.empty() && velocities.size() != states.size() - 1)
        throw std::logic_error("Trajectory: velocity count must be steps - 1");
}

Batch euler_step(const Batch& state, const Batch& velocity, double dt) {
    if (state.rows() != velocity.rows() || state.cols() != velocity.cols())
        throw std::invalid_argument("euler_step: state/velocity shapes differ");
    return state + dt * velocity;
}

namespace {

Trajectory integrate(const ConditionedModel& model, const FieldSpec& spec,
                     const Schedule& schedule, const Batch& start, int from_index,
                     int to_index, int direction, const std::string& label) {
    const int T = schedule.step_count();
    if (from_index < 0 || from_index > T || to_index < 0 || to_index > T)
        throw std::invalid_argument("integrate: grid index out of range");
    if (direction * (to_index - from_index) < 0)
        throw std::invalid_argument("integrate: index range opposes direction");
    if (start.cols() != model.dim())
        throw std::invalid_argument("integrate: batch dimension mismatch");
    if (!start.allFinite())
        throw std::invalid_argument("integrate: start batch has non-finite entries");

    Trajectory traj;
    traj.label = label;
    traj.times.push_back(schedule.t(from_index));
    traj.states.push_back(start);
    for (int i = from_index; i != to_index; i += direction) {
        const double t_here = schedule.t(i);
        const double t_next = schedule.t(i + direction);
        const Batch velocity = eval_field(model, spec, t_here, traj.states.back());
        Batch next = euler_step(traj.states.back(), velocity, t_next - t_here);
        if (!next.allFinite())
            throw numerical_error(
                "integrate (" + label + "): state became non-finite on the step "
                "from t = " + std::to_string(t_here) + " (grid index " +
                std::to_string(i) + ") to t = " + std::to_string(t_next));
        traj.velocities.push_back(velocity);
        traj.times.push_back(t_next);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

} // namespace

Trajectory integrate_forward(const ConditionedModel& model, const FieldSpec& spec,
                             const Schedule& schedule, const Batch& start,
                             int from_index, int to_index,
                             const std::string& label) {
    if (to_index < 0) to_index = schedule.step_count();
    return integrate(model, spec, schedule, start, from_index, to_index, +1, label);
}

Trajectory integrate_reverse(const ConditionedModel& model, const FieldSpec& spec,
                             const Schedule& schedule, const Batch& start,
                             int from_index, int to_index,
                             const std::string& label) {
    if (from_index < 0) from_index = schedule.step_count();
    return integrate(model, spec, schedule, start, from_index, to_index, -1, label);
}

} // namespace flowlab
