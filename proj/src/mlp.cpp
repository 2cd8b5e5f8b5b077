// SPDX-License-Identifier: Apache-2.0

#include "photonrl/mlp.hpp"

#include <cmath>

#include "photonrl/errors.hpp"

namespace photonrl::mlp {

Mlp Mlp::init(int input_dim, int hidden_dim, Rng& rng) {
    if (input_dim < 1 || hidden_dim < 1) throw ConfigError("mlp dimensions must be positive");
    auto fill = [&rng](auto& tensor, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index j = 0; j < tensor.cols(); ++j)
            for (Eigen::Index i = 0; i < tensor.rows(); ++i) tensor(i, j) = u(rng);
    };
    Mlp net;
    net.w1.resize(hidden_dim, input_dim);
    net.b1.resize(hidden_dim);
    net.w2.resize(hidden_dim, hidden_dim);
    net.b2.resize(hidden_dim);
    net.w3.resize(1, hidden_dim);
    net.b3.resize(1);
    fill(net.w1, input_dim);
    fill(net.b1, input_dim);
    fill(net.w2, hidden_dim);
    fill(net.b2, hidden_dim);
    fill(net.w3, hidden_dim);
    fill(net.b3, hidden_dim);
    return net;
}

void Mlp::validate() const {
    const int h = hidden_dim();
    if (b1.size() != h || w2.rows() != h || w2.cols() != h || b2.size() != h ||
        w3.rows() != 1 || w3.cols() != h || b3.size() != 1)
        throw ConfigError("mlp parameter shapes are inconsistent");
}

MlpTrace mlp_forward(const Mlp& net, const Eigen::MatrixXd& x) {
    net.validate();
    if (x.rows() != net.input_dim()) throw DimensionError("mlp input dimension mismatch");
    MlpTrace trace;
    trace.x = x;
    trace.z1 = (net.w1 * x).colwise() + net.b1;
    trace.h1 = trace.z1.cwiseMax(0.0);
    trace.z2 = (net.w2 * trace.h1).colwise() + net.b2;
    trace.h2 = trace.z2.cwiseMax(0.0);
    trace.out = (net.w3 * trace.h2).row(0).array() + net.b3[0];
    return trace;
}

MlpGrads mlp_backward(const Mlp& net, const MlpTrace& trace, const Eigen::RowVectorXd& dout,
                      Eigen::MatrixXd* dx) {
    if (dout.cols() != trace.out.cols())
        throw DimensionError("mlp backward batch mismatch");

    MlpGrads g;
    g.w3 = dout * trace.h2.transpose();
    g.b3 = Eigen::VectorXd::Constant(1, dout.sum());

    Eigen::MatrixXd dh2 = net.w3.transpose() * dout;
    Eigen::MatrixXd dz2 =
        dh2.cwiseProduct((trace.z2.array() > 0.0).cast<double>().matrix());
    g.w2 = dz2 * trace.h1.transpose();
    g.b2 = dz2.rowwise().sum();

    Eigen::MatrixXd dh1 = net.w2.transpose() * dz2;
    Eigen::MatrixXd dz1 =
        dh1.cwiseProduct((trace.z1.array() > 0.0).cast<double>().matrix());
    g.w1 = dz1 * trace.x.transpose();
    g.b1 = dz1.rowwise().sum();

    if (dx != nullptr) *dx = net.w1.transpose() * dz1;
    return g;
}

void AdamState::update(const AdamConfig& cfg, double* param, const double* grad,
                       Eigen::Index size) {
    if (size != m_.size()) throw DimensionError("adam state size mismatch");
    ++step_;
    Eigen::Map<Eigen::ArrayXd> p(param, size);
    Eigen::Map<const Eigen::ArrayXd> g(grad, size);
    m_ = cfg.beta1 * m_ + (1.0 - cfg.beta1) * g;
    v_ = cfg.beta2 * v_ + (1.0 - cfg.beta2) * g.square();
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
    p -= cfg.lr * (m_ / bc1) / ((v_ / bc2).sqrt() + cfg.eps);
}

MlpAdam::MlpAdam(const Mlp& net, const AdamConfig& cfg)
    : cfg_(cfg),
      w1_(net.w1.size()),
      b1_(net.b1.size()),
      w2_(net.w2.size()),
      b2_(net.b2.size()),
      w3_(net.w3.size()),
      b3_(net.b3.size()) {}

void MlpAdam::step(Mlp& net, const MlpGrads& grads) {
    w1_.update(cfg_, net.w1.data(), grads.w1.data(), net.w1.size());
    b1_.update(cfg_, net.b1.data(), grads.b1.data(), net.b1.size());
    w2_.update(cfg_, net.w2.data(), grads.w2.data(), net.w2.size());
    b2_.update(cfg_, net.b2.data(), grads.b2.data(), net.b2.size());
    w3_.update(cfg_, net.w3.data(), grads.w3.data(), net.w3.size());
    b3_.update(cfg_, net.b3.data(), grads.b3.data(), net.b3.size());
}

}  // namespace photonrl::mlp
