// SPDX-License-Identifier: Apache-2.0

#include "photonrl/envs.hpp"

#include <cmath>
#include <numbers>

#include "photonrl/errors.hpp"

namespace photonrl::envs {

namespace {
constexpr double kPi = std::numbers::pi;

Eigen::VectorXd observe(const PendulumState& s) {
    Eigen::VectorXd obs(3);
    obs << std::cos(s.theta), std::sin(s.theta), s.theta_dot;
    return obs;
}
}  // namespace

void PendulumParams::validate() const {
    if (!(mass > 0.0 && length > 0.0 && gravity > 0.0 && dt > 0.0 && max_torque > 0.0 &&
          max_speed > 0.0 && episode_len > 0))
        throw ConfigError("pendulum parameters must be positive");
}

double angle_normalize(double theta) {
    if (!std::isfinite(theta)) throw NumericError("non-finite angle");
    double wrapped = std::fmod(theta + kPi, 2.0 * kPi);
    if (wrapped <= 0.0) wrapped += 2.0 * kPi;
    return wrapped - kPi;
}

std::pair<PendulumState, Eigen::VectorXd> pendulum_reset(const PendulumParams& params, Rng& rng) {
    params.validate();
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    std::uniform_real_distribution<double> speed(-1.0, 1.0);
    PendulumState s;
    s.theta = angle(rng);
    s.theta_dot = speed(rng);
    s.step_count = 0;
    return {s, observe(s)};
}

PendulumStepOut pendulum_step(const PendulumState& state, double torque,
                              const PendulumParams& params) {
    params.validate();
    if (!std::isfinite(torque)) throw NumericError("non-finite torque");
    const double u = std::clamp(torque, -params.max_torque, params.max_torque);

    const double wrapped = angle_normalize(state.theta);
    const double reward =
        -(wrapped * wrapped + 0.1 * state.theta_dot * state.theta_dot + 0.001 * u * u);

    const double accel = 3.0 * params.gravity / (2.0 * params.length) * std::sin(state.theta) +
                         3.0 * u / (params.mass * params.length * params.length);
    PendulumStepOut out;
    out.state.theta_dot =
        std::clamp(state.theta_dot + accel * params.dt, -params.max_speed, params.max_speed);
    out.state.theta = state.theta + out.state.theta_dot * params.dt;
    out.state.step_count = state.step_count + 1;
    out.observation = observe(out.state);
    out.reward = reward;
    out.done = out.state.step_count >= params.episode_len;
    return out;
}

double cheetah_reward(double dx, double dt, const Eigen::VectorXd& actions) {
    if (!(dt > 0.0)) throw RangeError("cheetah reward needs dt > 0");
    if (!std::isfinite(dx) || !actions.allFinite())
        throw NumericError("non-finite cheetah reward inputs");
    return dx / dt - 0.1 * actions.squaredNorm();
}

PendulumEnv::PendulumEnv(const PendulumParams& params, std::uint64_t seed)
    : params_(params), rng_(seed) {
    params_.validate();
    spec_.state_dim = 3;
    spec_.action_dim = 1;
    spec_.action_low = Eigen::VectorXd::Constant(1, -params_.max_torque);
    spec_.action_high = Eigen::VectorXd::Constant(1, params_.max_torque);
}

Eigen::VectorXd PendulumEnv::reset(std::optional<std::uint64_t> seed) {
    if (seed.has_value()) rng_.seed(*seed);
    auto [state, obs] = pendulum_reset(params_, rng_);
    state_ = state;
    return obs;
}

StepResult PendulumEnv::step(const Eigen::VectorXd& action) {
    if (action.size() != 1) throw DimensionError("pendulum expects a 1-dimensional action");
    auto out = pendulum_step(state_, action[0], params_);
    state_ = out.state;
    StepResult result;
    result.state = std::move(out.observation);
    result.reward = out.reward;
    result.done = out.done;
    result.truncated = out.done;  // time-limit truncation is the only stop
    return result;
}

}  // namespace photonrl::envs
