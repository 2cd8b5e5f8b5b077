// SPDX-License-Identifier: Apache-2.0

#include "photonrl/spgd.hpp"

#include <cmath>
#include <string>

#include "photonrl/errors.hpp"

namespace photonrl::spgd {

void SpgdConfig::validate() const {
    if (!(gain > 0.0)) throw ConfigError("spgd gain must be > 0");
    if (!(perturb_amp > 0.0)) throw ConfigError("spgd perturb_amp must be > 0");
    if (max_iters < 1) throw ConfigError("spgd max_iters must be >= 1");
    if (!(target_similarity > 0.0) || target_similarity > 1.0)
        throw ConfigError("spgd target_similarity must be in (0, 1]");
    if (gain_decay_exponent < 0.0 || perturb_decay_exponent < 0.0 || !(decay_offset > 0.0))
        throw ConfigError("spgd decay schedule parameters must be nonnegative");
    if (restarts < 1) throw ConfigError("spgd restarts must be >= 1");
}

double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("cosine similarity needs equal shapes");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0)
        throw NumericError("cosine similarity undefined for a zero matrix");
    return (a.array() * b.array()).sum() / (na * nb);
}

namespace {

double objective_value(Objective obj, const Eigen::MatrixXd& measured,
                       const Eigen::MatrixXd& target) {
    switch (obj) {
        case Objective::Cosine: return cosine_similarity(measured, target);
        case Objective::NegMse: return -(measured - target).squaredNorm() /
                                       static_cast<double>(measured.size());
    }
    throw ConfigError("unknown spgd objective");
}

mesh::VoltageTable clamped(const mesh::VoltageTable& v, const mesh::PhaseVoltageMap& map) {
    mesh::VoltageTable out = v;
    out.mzi = out.mzi.cwiseMax(map.v_min).cwiseMin(map.v_max);
    out.diag = out.diag.cwiseMax(map.v_min).cwiseMin(map.v_max);
    return out;
}

double annealed(double base, double exponent, double offset, int iter) {
    if (exponent == 0.0) return base;
    return base / std::pow(1.0 + static_cast<double>(iter) / offset, exponent);
}

}  // namespace

SpgdStepResult spgd_step(const mesh::MeshTopology& topo, const mesh::PhaseVoltageMap& map,
                         const mesh::VoltageTable& voltages, const Eigen::MatrixXd& target,
                         const SpgdConfig& cfg, const mesh::NoiseModel& noise, Rng& rng,
                         int iter) {
    cfg.validate();
    if (target.rows() != topo.n || target.cols() != topo.n)
        throw DimensionError("spgd target must be " + std::to_string(topo.n) + "x" +
                             std::to_string(topo.n));

    const double sigma = annealed(cfg.perturb_amp, cfg.perturb_decay_exponent,
                                  cfg.decay_offset, iter);
    const double gain = annealed(cfg.gain, cfg.gain_decay_exponent, cfg.decay_offset, iter);

    const int n_mzi = topo.n_mzi();
    const int n_all = topo.n_shifters();
    Eigen::VectorXd delta(n_all);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < n_all; ++i) delta[i] = coin(rng) ? sigma : -sigma;

    mesh::VoltageTable plus = voltages, minus = voltages;
    plus.mzi += delta.head(n_mzi);
    plus.diag += delta.tail(topo.n_diag());
    minus.mzi -= delta.head(n_mzi);
    minus.diag -= delta.tail(topo.n_diag());

    const double j_plus = objective_value(
        cfg.objective, mesh::probe_matrix(topo, map, clamped(plus, map), noise, rng), target);
    const double j_minus = objective_value(
        cfg.objective, mesh::probe_matrix(topo, map, clamped(minus, map), noise, rng), target);

    const double scale = gain * (j_plus - j_minus) / (2.0 * sigma);
    mesh::VoltageTable next = voltages;
    next.mzi += scale * delta.head(n_mzi);
    next.diag += scale * delta.tail(topo.n_diag());
    next = clamped(next, map);

    SpgdStepResult result;
    result.voltages = std::move(next);
    const Eigen::MatrixXd measured =
        mesh::probe_matrix(topo, map, result.voltages, noise, rng);
    result.objective = objective_value(cfg.objective, measured, target);
    result.similarity = cosine_similarity(measured, target);
    return result;
}

CalibrationRecord calibrate(const mesh::MeshTopology& topo, const mesh::PhaseVoltageMap& map,
                            const Eigen::MatrixXd& target, const SpgdConfig& cfg,
                            const mesh::NoiseModel& noise) {
    cfg.validate();
    if (target.norm() == 0.0)
        throw NumericError("calibration target is all-zero; similarity undefined");

    Rng rng(cfg.seed);
    const double v_mid = 0.5 * (map.v_min + map.v_max);
    std::uniform_real_distribution<double> jitter(-cfg.init_jitter, cfg.init_jitter);

    CalibrationRecord record;
    record.best_similarity = -2.0;

    const int per_restart = std::max(1, cfg.max_iters / cfg.restarts);
    int global_iter = 0;
    for (int restart = 0; restart < cfg.restarts && !record.converged; ++restart) {
        mesh::VoltageTable v;
        v.mzi.resize(topo.n_mzi());
        v.diag.resize(topo.n_diag());
        for (int k = 0; k < v.mzi.size(); ++k) v.mzi[k] = v_mid + jitter(rng);
        for (int i = 0; i < v.diag.size(); ++i) v.diag[i] = v_mid + jitter(rng);
        v = clamped(v, map);

        {
            const Eigen::MatrixXd measured = mesh::probe_matrix(topo, map, v, noise, rng);
            const double obj = objective_value(cfg.objective, measured, target);
            const double sim = cosine_similarity(measured, target);
            record.history.push_back({global_iter, obj, sim});
            if (sim > record.best_similarity) {
                record.best_similarity = sim;
                record.best_voltages = v;
            }
        }

        // Schedules run on the local counter so every restart anneals afresh.
        for (int iter = 1; iter <= per_restart && global_iter < cfg.max_iters; ++iter) {
            ++global_iter;
            SpgdStepResult step = spgd_step(topo, map, v, target, cfg, noise, rng, iter);
            v = step.voltages;
            record.history.push_back({global_iter, step.objective, step.similarity});
            if (step.similarity > record.best_similarity) {
                record.best_similarity = step.similarity;
                record.best_voltages = v;
            }
            if (record.best_similarity >= cfg.target_similarity) {
                record.converged = true;
                break;
            }
        }
    }

    Rng noiseless_rng(0);
    record.realized_matrix =
        mesh::effective_weight(topo, map, record.best_voltages, mesh::NoiseModel{}, noiseless_rng);
    return record;
}

}  // namespace photonrl::spgd
