// SPDX-License-Identifier: Apache-2.0

#include "photonrl/snn.hpp"

#include <cmath>
#include <string>

#include "photonrl/errors.hpp"

namespace photonrl::snn {

void LifConfig::validate() const {
    if (decay < 0.0 || decay >= 1.0) throw ConfigError("lif decay must be in [0, 1)");
    if (!(threshold > 0.0)) throw ConfigError("lif threshold must be > 0");
    if (!(surrogate_width > 0.0)) throw ConfigError("lif surrogate width must be > 0");
}

LifState LifState::rest(int size) {
    LifState s;
    s.membrane = Eigen::VectorXd::Zero(size);
    s.last_spikes = Eigen::VectorXd::Zero(size);
    return s;
}

std::pair<LifState, Eigen::VectorXd> lif_step(const LifState& state, const LifConfig& cfg,
                                              const Eigen::VectorXd& current) {
    cfg.validate();
    if (current.size() != state.membrane.size())
        throw DimensionError("lif current size mismatch");
    if (!current.allFinite()) throw NumericError("non-finite lif input current");

    const Eigen::VectorXd potential = cfg.decay * state.membrane + current;
    const Eigen::VectorXd spikes =
        (potential.array() >= cfg.threshold).cast<double>().matrix();
    LifState next;
    next.membrane = potential.cwiseProduct(Eigen::VectorXd::Ones(spikes.size()) - spikes);
    next.last_spikes = spikes;
    return {std::move(next), spikes};
}

double surrogate_grad(double u_minus_threshold, double width) {
    if (!(width > 0.0)) throw ConfigError("surrogate width must be > 0");
    return std::abs(u_minus_threshold) < width ? 1.0 / (2.0 * width) : 0.0;
}

std::vector<Eigen::VectorXd> encode(const Eigen::VectorXd& observation, int steps) {
    if (steps < 1) throw ConfigError("encoding needs at least one time step");
    if (!observation.allFinite()) throw NumericError("non-finite observation");
    return std::vector<Eigen::VectorXd>(static_cast<size_t>(steps), observation);
}

ActorNet ActorNet::init(int state_dim, int hidden_dim, int action_dim, int steps,
                        const Eigen::VectorXd& action_scale, Rng& rng) {
    if (state_dim < 1 || hidden_dim < 1 || action_dim < 1 || steps < 1)
        throw ConfigError("actor dimensions must be positive");
    if (action_scale.size() != action_dim)
        throw ConfigError("action_scale length must equal the action dimension");

    auto uniform_fill = [&rng](Eigen::MatrixXd& m, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (int j = 0; j < m.cols(); ++j)
            for (int i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
    };
    auto uniform_fill_v = [&rng](Eigen::VectorXd& v, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (int i = 0; i < v.size(); ++i) v[i] = u(rng);
    };

    ActorNet net;
    net.w1.resize(hidden_dim, state_dim);
    net.b1.resize(hidden_dim);
    net.w2.resize(hidden_dim, hidden_dim);
    net.b2.resize(hidden_dim);
    net.w3.resize(action_dim, hidden_dim);
    net.b3.resize(action_dim);
    uniform_fill(net.w1, state_dim);
    uniform_fill_v(net.b1, state_dim);
    uniform_fill(net.w2, hidden_dim);
    uniform_fill_v(net.b2, hidden_dim);
    uniform_fill(net.w3, hidden_dim);
    uniform_fill_v(net.b3, hidden_dim);
    net.steps = steps;
    net.action_scale = action_scale;
    net.validate();
    return net;
}

void ActorNet::validate() const {
    lif1.validate();
    lif2.validate();
    if (steps < 1) throw ConfigError("actor steps must be >= 1");
    const int h = hidden_dim();
    if (w2.rows() != h || w2.cols() != h || b1.size() != h || b2.size() != h ||
        w3.cols() != h || b3.size() != w3.rows() || action_scale.size() != w3.rows())
        throw ConfigError("actor parameter shapes are inconsistent");
}

namespace {

Eigen::MatrixXd spike_mask(const Eigen::MatrixXd& potential, double threshold) {
    return (potential.array() >= threshold).cast<double>().matrix();
}

Eigen::MatrixXd surrogate_mask(const Eigen::MatrixXd& potential, const LifConfig& cfg) {
    return ((potential.array() - cfg.threshold).abs() < cfg.surrogate_width)
        .cast<double>()
        .matrix() *
        (1.0 / (2.0 * cfg.surrogate_width));
}

}  // namespace

ActorTrace actor_forward(const ActorNet& net, const Eigen::MatrixXd& obs_batch,
                         LinearBackend& backend) {
    net.validate();
    if (obs_batch.rows() != net.state_dim())
        throw DimensionError("observation dimension " + std::to_string(obs_batch.rows()) +
                             " does not match actor input " + std::to_string(net.state_dim()));
    if (!obs_batch.allFinite()) throw NumericError("non-finite observation batch");
    if (backend.weight().rows() != net.hidden_dim() ||
        backend.weight().cols() != net.hidden_dim())
        throw ConfigError("layer-2 backend shape does not match the hidden dimension");

    const int batch = static_cast<int>(obs_batch.cols());
    const int h = net.hidden_dim();
    const int T = net.steps;

    ActorTrace trace;
    trace.obs = obs_batch;
    trace.u1.reserve(T);
    trace.s1.reserve(T);
    trace.u2.reserve(T);
    trace.s2.reserve(T);
    trace.l2_out.reserve(T);

    // Direct coding: the same input current at every step.
    const Eigen::MatrixXd i1 =
        (net.w1 * obs_batch).colwise() + net.b1;

    Eigen::MatrixXd m1 = Eigen::MatrixXd::Zero(h, batch);
    Eigen::MatrixXd m2 = Eigen::MatrixXd::Zero(h, batch);
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(h, batch);

    for (int t = 0; t < T; ++t) {
        const Eigen::MatrixXd u1 = net.lif1.decay * m1 + i1;
        const Eigen::MatrixXd s1 = spike_mask(u1, net.lif1.threshold);
        m1 = u1.cwiseProduct(Eigen::MatrixXd::Ones(h, batch) - s1);

        Eigen::MatrixXd l2 = backend.apply(s1);
        if (l2.rows() != h || l2.cols() != batch)
            throw ConfigError("layer-2 backend returned a mismatched shape");
        const Eigen::MatrixXd u2 = net.lif2.decay * m2 + (l2.colwise() + net.b2);
        const Eigen::MatrixXd s2 = spike_mask(u2, net.lif2.threshold);
        m2 = u2.cwiseProduct(Eigen::MatrixXd::Ones(h, batch) - s2);

        avg += s2;
        trace.u1.push_back(u1);
        trace.s1.push_back(s1);
        trace.u2.push_back(u2);
        trace.s2.push_back(s2);
        trace.l2_out.push_back(std::move(l2));
    }
    avg /= static_cast<double>(T);

    trace.avg = avg;
    trace.preact = (net.w3 * avg).colwise() + net.b3;
    trace.action =
        trace.preact.array().tanh().matrix().array().colwise() * net.action_scale.array();
    return trace;
}

Eigen::VectorXd act(const ActorNet& net, const Eigen::VectorXd& obs, LinearBackend& backend) {
    return actor_forward(net, obs, backend).action.col(0);
}

ActorGrads actor_backward(const ActorNet& net, const ActorTrace& trace,
                          const Eigen::MatrixXd& upstream, const LinearBackend& backend) {
    const int T = net.steps;
    if (static_cast<int>(trace.s2.size()) != T || trace.action.cols() != upstream.cols() ||
        upstream.rows() != net.action_dim())
        throw UsageError("actor_backward needs the forward trace matching the upstream batch");

    const int h = net.hidden_dim();
    const int batch = static_cast<int>(trace.obs.cols());
    const Eigen::MatrixXd& w2_eff = backend.weight();

    ActorGrads g;
    g.w1 = Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols());
    g.w2 = Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols());
    g.w3 = Eigen::MatrixXd::Zero(net.w3.rows(), net.w3.cols());
    g.b1 = Eigen::VectorXd::Zero(net.b1.size());
    g.b2 = Eigen::VectorXd::Zero(net.b2.size());
    g.b3 = Eigen::VectorXd::Zero(net.b3.size());

    const Eigen::MatrixXd tanh_out = trace.preact.array().tanh().matrix();
    const Eigen::MatrixXd dz =
        (upstream.array() * (1.0 - tanh_out.array().square())).matrix().array().colwise() *
        net.action_scale.array();

    g.w3 = dz * trace.avg.transpose();
    g.b3 = dz.rowwise().sum();
    const Eigen::MatrixXd davg = net.w3.transpose() * dz / static_cast<double>(T);

    Eigen::MatrixXd du1_next = Eigen::MatrixXd::Zero(h, batch);
    Eigen::MatrixXd du2_next = Eigen::MatrixXd::Zero(h, batch);

    for (int t = T - 1; t >= 0; --t) {
        const Eigen::MatrixXd surr2 = surrogate_mask(trace.u2[t], net.lif2);
        Eigen::MatrixXd ds2 = davg;
        if (t < T - 1)
            ds2 -= net.lif2.decay * du2_next.cwiseProduct(trace.u2[t]);
        Eigen::MatrixXd du2 = ds2.cwiseProduct(surr2);
        if (t < T - 1)
            du2 += net.lif2.decay *
                   du2_next.cwiseProduct(Eigen::MatrixXd::Ones(h, batch) - trace.s2[t]);

        if (backend.trainable()) g.w2 += du2 * trace.s1[t].transpose();
        g.b2 += du2.rowwise().sum();

        const Eigen::MatrixXd surr1 = surrogate_mask(trace.u1[t], net.lif1);
        Eigen::MatrixXd ds1 = w2_eff.transpose() * du2;
        if (t < T - 1)
            ds1 -= net.lif1.decay * du1_next.cwiseProduct(trace.u1[t]);
        Eigen::MatrixXd du1 = ds1.cwiseProduct(surr1);
        if (t < T - 1)
            du1 += net.lif1.decay *
                   du1_next.cwiseProduct(Eigen::MatrixXd::Ones(h, batch) - trace.s1[t]);

        g.w1 += du1 * trace.obs.transpose();
        g.b1 += du1.rowwise().sum();

        du2_next = std::move(du2);
        du1_next = std::move(du1);
    }
    return g;
}

}  // namespace photonrl::snn
