// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "photonrl/rng.hpp"

namespace photonrl::snn {

// Spiking actor: two leaky integrate-and-fire layers unrolled over `steps`
// time steps, temporal averaging of the second layer's spikes, and a tanh
// head scaled to the action range. The second linear layer's product is
// supplied by a pluggable backend so the same network runs against either the
// stored weights or a photonic mesh.

struct LifConfig {
    double decay = 0.5;            // membrane leak, in [0, 1)
    double threshold = 1.0;        // firing threshold, > 0
    double surrogate_width = 0.5;  // rectangular pseudo-derivative half-width
    void validate() const;         // throws ConfigError
};

struct LifState {
    Eigen::VectorXd membrane;     // post-reset potentials (0 where spiked)
    Eigen::VectorXd last_spikes;  // binary
    static LifState rest(int size);
};

// One discrete update: u' = decay * membrane + current, spike where
// u' >= threshold, hard reset applied through the returned state. Returns the
// new state and the spike vector (same vector as state.last_spikes).
std::pair<LifState, Eigen::VectorXd> lif_step(const LifState& state, const LifConfig& cfg,
                                              const Eigen::VectorXd& current);

// Rectangular surrogate: 1/(2a) inside |u - threshold| < a, else 0.
double surrogate_grad(double u_minus_threshold, double width);

// Direct-current coding: the observation is injected unchanged at every step.
std::vector<Eigen::VectorXd> encode(const Eigen::VectorXd& observation, int steps);

struct ActorNet {
    Eigen::MatrixXd w1;  // h x d_s
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // h x h
    Eigen::VectorXd b2;
    Eigen::MatrixXd w3;  // d_a x h
    Eigen::VectorXd b3;
    LifConfig lif1, lif2;
    int steps = 1;                 // unrolling length T
    Eigen::VectorXd action_scale;  // per-dimension a_max

    int state_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    int action_dim() const { return static_cast<int>(w3.rows()); }

    static ActorNet init(int state_dim, int hidden_dim, int action_dim, int steps,
                         const Eigen::VectorXd& action_scale, Rng& rng);
    void validate() const;  // throws ConfigError
};

// Provider of the layer-2 linear product. `weight()` is the matrix the
// backward pass propagates through; `trainable()` gates the w2 gradient
// (false for a frozen hardware layer).
class LinearBackend {
public:
    virtual ~LinearBackend() = default;
    virtual Eigen::MatrixXd apply(const Eigen::MatrixXd& spikes) = 0;
    virtual const Eigen::MatrixXd& weight() const = 0;
    virtual bool trainable() const = 0;
};

class DigitalBackend final : public LinearBackend {
public:
    explicit DigitalBackend(const Eigen::MatrixXd& weight, bool trainable = true)
        : weight_(&weight), trainable_(trainable) {}
    Eigen::MatrixXd apply(const Eigen::MatrixXd& spikes) override { return *weight_ * spikes; }
    const Eigen::MatrixXd& weight() const override { return *weight_; }
    bool trainable() const override { return trainable_; }

private:
    const Eigen::MatrixXd* weight_;
    bool trainable_;
};

// Forward cache over a batch (one column per sample). `u*` hold pre-reset
// potentials, `s*` the binary spikes, `l2_out` the raw backend products.
struct ActorTrace {
    Eigen::MatrixXd obs;
    std::vector<Eigen::MatrixXd> u1, s1, u2, s2, l2_out;
    Eigen::MatrixXd avg;
    Eigen::MatrixXd preact;
    Eigen::MatrixXd action;
};

ActorTrace actor_forward(const ActorNet& net, const Eigen::MatrixXd& obs_batch,
                         LinearBackend& backend);

// Single-observation convenience wrapper.
Eigen::VectorXd act(const ActorNet& net, const Eigen::VectorXd& obs, LinearBackend& backend);

struct ActorGrads {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
};

// Backpropagation through the unrolled dynamics with the rectangular
// surrogate replacing the spike derivative; the membrane recurrence
// u' = decay * u * (1 - s) + I is differentiated as written (product rule
// through the reset gate). `upstream` is dLoss/daction, one column per
// sample. w2's gradient is zero when the backend is not trainable.
ActorGrads actor_backward(const ActorNet& net, const ActorTrace& trace,
                          const Eigen::MatrixXd& upstream, const LinearBackend& backend);

}  // namespace photonrl::snn
