// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include "photonrl/rng.hpp"

namespace photonrl::mlp {

// Two-hidden-layer perceptron with rectified-linear activations and a scalar
// linear output; the critic network shape. Batched: one column per sample.

struct Mlp {
    Eigen::MatrixXd w1;  // h x in
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // h x h
    Eigen::VectorXd b2;
    Eigen::MatrixXd w3;  // 1 x h
    Eigen::VectorXd b3;  // 1

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }

    static Mlp init(int input_dim, int hidden_dim, Rng& rng);
    void validate() const;
};

struct MlpTrace {
    Eigen::MatrixXd x;        // in x B
    Eigen::MatrixXd z1, h1;   // pre/post activation, h x B
    Eigen::MatrixXd z2, h2;
    Eigen::RowVectorXd out;   // 1 x B
};

MlpTrace mlp_forward(const Mlp& net, const Eigen::MatrixXd& x);

struct MlpGrads {
    Eigen::MatrixXd w1, w2, w3;
    Eigen::VectorXd b1, b2, b3;
};

// `dout` is dLoss/dout per sample. When `dx` is non-null it receives the
// gradient with respect to the inputs (used to steer the actor through the
// critic).
MlpGrads mlp_backward(const Mlp& net, const MlpTrace& trace, const Eigen::RowVectorXd& dout,
                      Eigen::MatrixXd* dx = nullptr);

// Adaptive-moment estimation state for one parameter tensor.
struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    explicit AdamState(Eigen::Index size)
        : m_(Eigen::ArrayXd::Zero(size)), v_(Eigen::ArrayXd::Zero(size)) {}

    void update(const AdamConfig& cfg, double* param, const double* grad, Eigen::Index size);

private:
    Eigen::ArrayXd m_, v_;
    long step_ = 0;
};

// Optimizer bundles keeping one Adam slot per tensor.
class MlpAdam {
public:
    explicit MlpAdam(const Mlp& net, const AdamConfig& cfg);
    void step(Mlp& net, const MlpGrads& grads);

private:
    AdamConfig cfg_;
    AdamState w1_, b1_, w2_, b2_, w3_, b3_;
};

}  // namespace photonrl::mlp
