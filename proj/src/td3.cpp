// SPDX-License-Identifier: Apache-2.0

#include "photonrl/td3.hpp"

#include <cmath>
#include <numeric>

#include "photonrl/errors.hpp"

namespace photonrl::td3 {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
        return;
    }
    storage_[head_] = std::move(t);  // overwrite the oldest entry
    head_ = (head_ + 1) % capacity_;
}

Batch ReplayBuffer::sample(int n, Rng& rng) const {
    if (storage_.empty()) throw UsageError("cannot sample from an empty replay buffer");
    if (n < 1) throw ConfigError("batch size must be positive");
    const int d_s = static_cast<int>(storage_.front().state.size());
    const int d_a = static_cast<int>(storage_.front().action.size());

    Batch batch;
    batch.state.resize(d_s, n);
    batch.action.resize(d_a, n);
    batch.reward.resize(n);
    batch.next_state.resize(d_s, n);
    batch.done.resize(n);

    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    for (int j = 0; j < n; ++j) {
        const Transition& t = storage_[pick(rng)];
        batch.state.col(j) = t.state;
        batch.action.col(j) = t.action;
        batch.reward[j] = t.reward;
        batch.next_state.col(j) = t.next_state;
        batch.done[j] = t.done;
    }
    return batch;
}

void Td3Config::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must be in (0, 1]");
    if (policy_delay < 1) throw ConfigError("policy_delay must be >= 1");
    if (!(target_clip > 0.0)) throw ConfigError("target_clip must be > 0");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (explore_sigma < 0.0 || target_sigma < 0.0)
        throw ConfigError("noise scales must be nonnegative");
    if (total_steps < 0 || warmup_steps < 0) throw ConfigError("step counts must be nonnegative");
    if (buffer_capacity == 0) throw ConfigError("buffer capacity must be positive");
    if (eval_every < 1 || eval_episodes < 0) throw ConfigError("eval schedule invalid");
    if (critic_hidden < 1) throw ConfigError("critic hidden width must be positive");
}

namespace {

Eigen::VectorXd clip_to_scale(Eigen::VectorXd a, const Eigen::VectorXd& scale) {
    return a.cwiseMax(-scale).cwiseMin(scale);
}

Eigen::MatrixXd critic_input(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
    Eigen::MatrixXd x(states.rows() + actions.rows(), states.cols());
    x.topRows(states.rows()) = states;
    x.bottomRows(actions.rows()) = actions;
    return x;
}

}  // namespace

Eigen::VectorXd select_action(const snn::ActorNet& actor, snn::LinearBackend& backend,
                              const Eigen::VectorXd& state, double sigma, Rng& rng) {
    Eigen::VectorXd a = snn::act(actor, state, backend);
    if (sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, 1.0);
        for (Eigen::Index i = 0; i < a.size(); ++i)
            a[i] += sigma * actor.action_scale[i] * noise(rng);
    }
    return clip_to_scale(std::move(a), actor.action_scale);
}

double compute_target(double reward, const Eigen::VectorXd& next_state, double done,
                      const snn::ActorNet& target_actor, snn::LinearBackend& target_backend,
                      const CriticNet& target_q1, const CriticNet& target_q2,
                      const Td3Config& cfg, Rng& rng) {
    Eigen::VectorXd a = snn::act(target_actor, next_state, target_backend);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double scale = target_actor.action_scale[i];
        const double eps = std::clamp(cfg.target_sigma * scale * noise(rng),
                                      -cfg.target_clip * scale, cfg.target_clip * scale);
        a[i] += eps;
    }
    a = clip_to_scale(std::move(a), target_actor.action_scale);

    Eigen::MatrixXd x = critic_input(next_state, a);
    const double q1 = mlp_forward(target_q1, x).out[0];
    const double q2 = mlp_forward(target_q2, x).out[0];
    return reward + cfg.gamma * (1.0 - done) * std::min(q1, q2);
}

std::pair<double, double> critic_update(CriticNet& q1, CriticNet& q2, mlp::MlpAdam& opt1,
                                        mlp::MlpAdam& opt2, const Batch& batch,
                                        const Eigen::VectorXd& targets) {
    const int n = static_cast<int>(targets.size());
    if (batch.state.cols() != n) throw DimensionError("target count must match the batch");
    const Eigen::MatrixXd x = critic_input(batch.state, batch.action);

    auto one = [&](CriticNet& q, mlp::MlpAdam& opt) {
        auto trace = mlp_forward(q, x);
        const Eigen::RowVectorXd err = trace.out - targets.transpose();
        const double loss = err.squaredNorm() / n;
        const Eigen::RowVectorXd dout = 2.0 * err / n;
        auto grads = mlp_backward(q, trace, dout);
        opt.step(q, grads);
        return loss;
    };
    return {one(q1, opt1), one(q2, opt2)};
}

ActorAdam::ActorAdam(const snn::ActorNet& net, const mlp::AdamConfig& cfg)
    : cfg_(cfg),
      w1_(net.w1.size()),
      b1_(net.b1.size()),
      w2_(net.w2.size()),
      b2_(net.b2.size()),
      w3_(net.w3.size()),
      b3_(net.b3.size()) {}

void ActorAdam::step(snn::ActorNet& net, const snn::ActorGrads& grads, bool skip_w2) {
    w1_.update(cfg_, net.w1.data(), grads.w1.data(), net.w1.size());
    b1_.update(cfg_, net.b1.data(), grads.b1.data(), net.b1.size());
    if (!skip_w2) w2_.update(cfg_, net.w2.data(), grads.w2.data(), net.w2.size());
    b2_.update(cfg_, net.b2.data(), grads.b2.data(), net.b2.size());
    w3_.update(cfg_, net.w3.data(), grads.w3.data(), net.w3.size());
    b3_.update(cfg_, net.b3.data(), grads.b3.data(), net.b3.size());
}

double actor_update(snn::ActorNet& actor, snn::LinearBackend& backend, const CriticNet& q1,
                    const Eigen::MatrixXd& states, ActorAdam& opt) {
    const int n = static_cast<int>(states.cols());
    auto actor_trace = snn::actor_forward(actor, states, backend);

    const Eigen::MatrixXd x = critic_input(states, actor_trace.action);
    auto q_trace = mlp_forward(q1, x);
    const double loss = -q_trace.out.mean();

    // dLoss/dQ = -1/N; pull the action gradient out of the critic.
    const Eigen::RowVectorXd dout = Eigen::RowVectorXd::Constant(n, -1.0 / n);
    Eigen::MatrixXd dx;
    mlp_backward(q1, q_trace, dout, &dx);
    const Eigen::MatrixXd upstream = dx.bottomRows(actor.action_dim());

    auto grads = snn::actor_backward(actor, actor_trace, upstream, backend);
    opt.step(actor, grads, !backend.trainable());
    return loss;
}

void soft_update(const Eigen::MatrixXd& live, Eigen::MatrixXd& target, double tau) {
    if (live.rows() != target.rows() || live.cols() != target.cols())
        throw DimensionError("soft update shape mismatch");
    target = tau * live + (1.0 - tau) * target;
}

void soft_update(const Eigen::VectorXd& live, Eigen::VectorXd& target, double tau) {
    if (live.size() != target.size()) throw DimensionError("soft update shape mismatch");
    target = tau * live + (1.0 - tau) * target;
}

void soft_update_actor(const snn::ActorNet& live, snn::ActorNet& target, double tau,
                       bool skip_w2) {
    soft_update(live.w1, target.w1, tau);
    soft_update(live.b1, target.b1, tau);
    if (!skip_w2) soft_update(live.w2, target.w2, tau);
    soft_update(live.b2, target.b2, tau);
    soft_update(live.w3, target.w3, tau);
    soft_update(live.b3, target.b3, tau);
}

void soft_update_critic(const CriticNet& live, CriticNet& target, double tau) {
    soft_update(live.w1, target.w1, tau);
    soft_update(live.b1, target.b1, tau);
    soft_update(live.w2, target.w2, tau);
    soft_update(live.b2, target.b2, tau);
    soft_update(live.w3, target.w3, tau);
    soft_update(live.b3, target.b3, tau);
}

std::pair<double, double> evaluate(envs::Environment& env, const snn::ActorNet& actor,
                                   snn::LinearBackend& backend, int episodes,
                                   std::uint64_t seed) {
    std::vector<double> returns;
    returns.reserve(episodes);
    for (int ep = 0; ep < episodes; ++ep) {
        Eigen::VectorXd obs = env.reset(derive_seed(seed, static_cast<std::uint64_t>(ep)));
        double total = 0.0;
        for (;;) {
            Eigen::VectorXd a = snn::act(actor, obs, backend);
            a = clip_to_scale(std::move(a), actor.action_scale);
            auto result = env.step(a);
            total += result.reward;
            obs = std::move(result.state);
            if (result.done || result.truncated) break;
        }
        returns.push_back(total);
    }
    const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / returns.size();
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var /= returns.size();
    return {mean, std::sqrt(var)};
}

TrainResult train(envs::Environment& env, envs::Environment& eval_env, snn::ActorNet actor,
                  const Td3Config& cfg, snn::LinearBackend* l2_override, const EvalHook& hook) {
    cfg.validate();
    actor.validate();
    const auto& spec = env.spec();
    if (spec.state_dim != actor.state_dim() || spec.action_dim != actor.action_dim())
        throw ConfigError("actor dimensions do not match the environment");

    const bool frozen_l2 = l2_override != nullptr && !l2_override->trainable();

    // Per-purpose random streams.
    Rng rng_init(derive_seed(cfg.seed, 1));
    Rng rng_explore(derive_seed(cfg.seed, 2));
    Rng rng_sample(derive_seed(cfg.seed, 3));
    Rng rng_target(derive_seed(cfg.seed, 4));

    CriticNet q1 = mlp::Mlp::init(spec.state_dim + spec.action_dim, cfg.critic_hidden, rng_init);
    CriticNet q2 = mlp::Mlp::init(spec.state_dim + spec.action_dim, cfg.critic_hidden, rng_init);
    CriticNet q1_target = q1, q2_target = q2;
    snn::ActorNet actor_target = actor;

    snn::DigitalBackend own_backend(actor.w2, true);
    snn::LinearBackend& backend = l2_override != nullptr ? *l2_override : own_backend;
    snn::DigitalBackend target_backend_own(actor_target.w2, false);
    snn::LinearBackend& target_backend =
        l2_override != nullptr ? *l2_override : target_backend_own;

    mlp::AdamConfig critic_adam{cfg.critic_lr};
    mlp::AdamConfig actor_adam_cfg{cfg.actor_lr};
    mlp::MlpAdam opt_q1(q1, critic_adam), opt_q2(q2, critic_adam);
    ActorAdam opt_actor(actor, actor_adam_cfg);

    ReplayBuffer buffer(cfg.buffer_capacity);
    TrainResult result;

    Eigen::VectorXd obs = env.reset(derive_seed(cfg.seed, 5));
    double episode_return = 0.0;
    long episode = 0;
    std::uniform_real_distribution<double> uniform_action(-1.0, 1.0);
    bool stop = false;

    for (long step = 1; step <= cfg.total_steps && !stop; ++step) {
        Eigen::VectorXd a;
        if (step <= cfg.warmup_steps) {
            a.resize(spec.action_dim);
            for (int i = 0; i < spec.action_dim; ++i)
                a[i] = uniform_action(rng_explore) * actor.action_scale[i];
        } else {
            a = select_action(actor, backend, obs, cfg.explore_sigma, rng_explore);
        }

        auto res = env.step(a);
        episode_return += res.reward;

        Transition t;
        t.state = obs;
        t.action = a;
        t.reward = res.reward;
        t.next_state = res.state;
        const bool terminal = res.done && !(res.truncated && cfg.bootstrap_through_truncation);
        t.done = terminal ? 1.0 : 0.0;
        buffer.push(std::move(t));

        obs = std::move(res.state);
        if (res.done || res.truncated) {
            ++episode;
            TraceRow row;
            row.step = step;
            row.episode = episode;
            row.episode_return = episode_return;
            row.has_return = true;
            result.trace.push_back(row);
            episode_return = 0.0;
            obs = env.reset();
        }

        if (step > cfg.warmup_steps && buffer.size() >= static_cast<std::size_t>(cfg.batch_size)) {
            Batch batch = buffer.sample(cfg.batch_size, rng_sample);

            // Batched version of compute_target using the same noise law.
            Eigen::MatrixXd a_next;
            {
                auto trace = snn::actor_forward(actor_target, batch.next_state, target_backend);
                a_next = trace.action;
                std::normal_distribution<double> noise(0.0, 1.0);
                for (int j = 0; j < a_next.cols(); ++j) {
                    for (int i = 0; i < a_next.rows(); ++i) {
                        const double scale = actor_target.action_scale[i];
                        const double eps =
                            std::clamp(cfg.target_sigma * scale * noise(rng_target),
                                       -cfg.target_clip * scale, cfg.target_clip * scale);
                        a_next(i, j) = std::clamp(a_next(i, j) + eps, -scale, scale);
                    }
                }
            }
            const Eigen::MatrixXd x_next = critic_input(batch.next_state, a_next);
            const Eigen::RowVectorXd tq1 = mlp_forward(q1_target, x_next).out;
            const Eigen::RowVectorXd tq2 = mlp_forward(q2_target, x_next).out;
            Eigen::VectorXd y(cfg.batch_size);
            for (int j = 0; j < cfg.batch_size; ++j)
                y[j] = batch.reward[j] +
                       cfg.gamma * (1.0 - batch.done[j]) * std::min(tq1[j], tq2[j]);

            critic_update(q1, q2, opt_q1, opt_q2, batch, y);

            if (step % cfg.policy_delay == 0) {
                actor_update(actor, backend, q1, batch.state, opt_actor);
                ++result.actor_updates;
                soft_update_actor(actor, actor_target, cfg.tau, frozen_l2);
                soft_update_critic(q1, q1_target, cfg.tau);
                soft_update_critic(q2, q2_target, cfg.tau);
            }
        }

        if (step % cfg.eval_every == 0 && cfg.eval_episodes > 0) {
            auto [mean, stddev] = evaluate(eval_env, actor, backend, cfg.eval_episodes,
                                           derive_seed(cfg.seed, 100 + step / cfg.eval_every));
            TraceRow row;
            row.step = step;
            row.episode = episode;
            row.eval_mean = mean;
            row.eval_std = stddev;
            row.has_eval = true;
            result.trace.push_back(row);
            if (hook && hook(step, mean, actor, backend)) stop = true;
        }
        result.steps_run = step;
    }

    result.actor = std::move(actor);
    result.q1 = std::move(q1);
    result.q2 = std::move(q2);
    return result;
}

}  // namespace photonrl::td3
