// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>

#include "photonrl/rng.hpp"

namespace photonrl::envs {

struct EnvSpec {
    int state_dim = 0;
    int action_dim = 0;
    Eigen::VectorXd action_low;
    Eigen::VectorXd action_high;
};

struct StepResult {
    Eigen::VectorXd state;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;
};

// Common reset/step contract; the training engine never distinguishes the
// built-in pendulum from a remote physics engine.
class Environment {
public:
    virtual ~Environment() = default;
    virtual const EnvSpec& spec() const = 0;
    virtual Eigen::VectorXd reset(std::optional<std::uint64_t> seed = std::nullopt) = 0;
    virtual StepResult step(const Eigen::VectorXd& action) = 0;
};

// Inverted pendulum swing-up, torque-controlled, 200-step episodes.
struct PendulumParams {
    double mass = 1.0;        // kg
    double length = 1.0;      // m
    double gravity = 9.8;     // m/s^2
    double dt = 0.05;         // s
    double max_torque = 2.0;  // N*m
    double max_speed = 8.0;   // rad/s
    int episode_len = 200;
    void validate() const;
};

struct PendulumState {
    double theta = 0.0;      // angle from upright, rad
    double theta_dot = 0.0;  // rad/s
    int step_count = 0;
};

// Wraps to (-pi, pi].
double angle_normalize(double theta);

// theta ~ U[-pi, pi], theta_dot ~ U[-1, 1]; observation [cos, sin, theta_dot].
std::pair<PendulumState, Eigen::VectorXd> pendulum_reset(const PendulumParams& params, Rng& rng);

struct PendulumStepOut {
    PendulumState state;
    Eigen::VectorXd observation;
    double reward = 0.0;
    bool done = false;
};

// Semi-implicit Euler update with the torque clipped to the allowed range;
// reward is the negated penalty -(wrap(theta)^2 + 0.1 theta_dot^2 + 0.001 u^2)
// evaluated at the pre-step state. `done` flags the 200-step truncation.
PendulumStepOut pendulum_step(const PendulumState& state, double torque,
                              const PendulumParams& params);

// 1.0 * dx/dt - 0.1 * sum(action^2); the locomotion reward as a pure function.
double cheetah_reward(double dx, double dt, const Eigen::VectorXd& actions);

class PendulumEnv final : public Environment {
public:
    explicit PendulumEnv(const PendulumParams& params = PendulumParams{},
                         std::uint64_t seed = 0);
    const EnvSpec& spec() const override { return spec_; }
    Eigen::VectorXd reset(std::optional<std::uint64_t> seed = std::nullopt) override;
    StepResult step(const Eigen::VectorXd& action) override;
    const PendulumState& state() const { return state_; }

private:
    PendulumParams params_;
    EnvSpec spec_;
    PendulumState state_;
    Rng rng_;
};

}  // namespace photonrl::envs
