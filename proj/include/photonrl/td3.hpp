// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "photonrl/envs.hpp"
#include "photonrl/mlp.hpp"
#include "photonrl/rng.hpp"
#include "photonrl/snn.hpp"

namespace photonrl::td3 {

// Twin-delayed deterministic policy gradient with a spiking actor and
// conventional twin critics: clipped-noise target smoothing, min-of-two
// bootstrap targets, delayed actor and target updates, FIFO replay.

using CriticNet = mlp::Mlp;  // d_s + d_a -> h_c -> h_c -> 1, rectified-linear

struct Transition {
    Eigen::VectorXd state;
    Eigen::VectorXd action;
    double reward = 0.0;
    Eigen::VectorXd next_state;
    double done = 0.0;  // bootstrap mask: 1 cuts the tail off the target
};

struct Batch {
    Eigen::MatrixXd state;       // d_s x N
    Eigen::MatrixXd action;      // d_a x N
    Eigen::VectorXd reward;      // N
    Eigen::MatrixXd next_state;  // d_s x N
    Eigen::VectorXd done;        // N
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);
    void push(Transition t);
    Batch sample(int n, Rng& rng) const;
    const Transition& at(std::size_t i) const { return storage_[i]; }
    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }
    // Index of the oldest element still stored (for FIFO checks).
    std::size_t head() const { return head_; }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // next eviction slot once full
    std::vector<Transition> storage_;
};

struct Td3Config {
    double gamma = 0.99;
    double tau = 0.005;
    int policy_delay = 2;
    double explore_sigma = 0.1;  // x action_scale
    double target_sigma = 0.2;   // x action_scale
    double target_clip = 0.5;    // x action_scale
    int batch_size = 256;
    long warmup_steps = 10000;
    long total_steps = 150000;
    std::size_t buffer_capacity = 1000000;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    int critic_hidden = 32;
    long eval_every = 5000;
    int eval_episodes = 10;
    bool bootstrap_through_truncation = true;
    std::uint64_t seed = 0;
    void validate() const;  // throws ConfigError
};

// a = clip(actor(s) + N(0, sigma * scale), +-scale). sigma = 0 gives the
// deterministic policy.
Eigen::VectorXd select_action(const snn::ActorNet& actor, snn::LinearBackend& backend,
                              const Eigen::VectorXd& state, double sigma, Rng& rng);

// y = r + gamma * (1 - done) * min(Q1'(s', a'), Q2'(s', a')) with
// a' = clip(pi'(s') + clip(eps, +-c * scale), +-scale), eps ~ N(0, sigma~ * scale).
double compute_target(double reward, const Eigen::VectorXd& next_state, double done,
                      const snn::ActorNet& target_actor, snn::LinearBackend& target_backend,
                      const CriticNet& target_q1, const CriticNet& target_q2,
                      const Td3Config& cfg, Rng& rng);

// One adaptive-moment step on each critic against the mean-squared error to
// y; returns the two losses.
std::pair<double, double> critic_update(CriticNet& q1, CriticNet& q2, mlp::MlpAdam& opt1,
                                        mlp::MlpAdam& opt2, const Batch& batch,
                                        const Eigen::VectorXd& targets);

// Adam over the six actor tensors; skips w2 when the backend is frozen.
class ActorAdam {
public:
    ActorAdam(const snn::ActorNet& net, const mlp::AdamConfig& cfg);
    void step(snn::ActorNet& net, const snn::ActorGrads& grads, bool skip_w2);

private:
    mlp::AdamConfig cfg_;
    mlp::AdamState w1_, b1_, w2_, b2_, w3_, b3_;
};

// Deterministic policy-gradient step through Q1; returns the policy loss
// -mean(Q1(s, pi(s))). A frozen (non-trainable) backend leaves w2 untouched.
double actor_update(snn::ActorNet& actor, snn::LinearBackend& backend, const CriticNet& q1,
                    const Eigen::MatrixXd& states, ActorAdam& opt);

// target' = tau * live + (1 - tau) * target, elementwise.
void soft_update(const Eigen::MatrixXd& live, Eigen::MatrixXd& target, double tau);
void soft_update(const Eigen::VectorXd& live, Eigen::VectorXd& target, double tau);
void soft_update_actor(const snn::ActorNet& live, snn::ActorNet& target, double tau,
                       bool skip_w2);
void soft_update_critic(const CriticNet& live, CriticNet& target, double tau);

struct TraceRow {
    long step = 0;
    long episode = 0;
    double episode_return = 0.0;
    bool has_return = false;
    double eval_mean = 0.0;
    double eval_std = 0.0;
    bool has_eval = false;
};

struct TrainResult {
    snn::ActorNet actor;
    CriticNet q1, q2;
    std::vector<TraceRow> trace;
    long steps_run = 0;
    long actor_updates = 0;
};

// Optional monitor: called after each evaluation with the live policy;
// returning true stops training early.
using EvalHook =
    std::function<bool(long step, double eval_mean, const snn::ActorNet& actor,
                       snn::LinearBackend& backend)>;

// Runs the full loop: exploration rollouts with Gaussian noise, replay
// insertion, per-step critic updates after warmup, delayed actor/target
// updates, periodic deterministic evaluations on eval_env. When `l2_override`
// is non-null it provides the actor's layer-2 product (frozen hardware); w2
// then receives no gradient and is excluded from soft updates.
TrainResult train(envs::Environment& env, envs::Environment& eval_env, snn::ActorNet actor,
                  const Td3Config& cfg, snn::LinearBackend* l2_override = nullptr,
                  const EvalHook& hook = {});

// Deterministic-policy average return over `episodes` episodes.
std::pair<double, double> evaluate(envs::Environment& env, const snn::ActorNet& actor,
                                   snn::LinearBackend& backend, int episodes,
                                   std::uint64_t seed);

}  // namespace photonrl::td3
