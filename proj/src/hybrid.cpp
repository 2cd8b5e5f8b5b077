// SPDX-License-Identifier: Apache-2.0

#include "photonrl/hybrid.hpp"

#include <cmath>
#include <string>

#include "photonrl/errors.hpp"

namespace photonrl::hybrid {

WeightSnapshot extract_l2(const snn::ActorNet& trained, envs::Environment& env, int n_samples,
                          std::uint64_t seed) {
    trained.validate();
    if (n_samples < 1) throw ConfigError("extract_l2 needs n_samples >= 1");
    if (env.spec().state_dim != trained.state_dim() ||
        env.spec().action_dim != trained.action_dim())
        throw ConfigError("actor does not match the environment");

    WeightSnapshot snap;
    snap.actor = trained;
    snap.l2_target = trained.w2;
    const double max_abs = trained.w2.cwiseAbs().maxCoeff();
    snap.scale = max_abs > 0.0 ? max_abs : 1.0;
    snap.test_set.reserve(n_samples);

    snn::ActorNet actor = trained;
    snn::DigitalBackend backend(actor.w2, false);

    Eigen::VectorXd obs = env.reset(seed);
    for (int i = 0; i < n_samples; ++i) {
        auto trace = snn::actor_forward(actor, obs, backend);

        TestSample sample;
        sample.obs = obs;
        sample.action = trace.action.col(0);
        sample.inputs.reserve(actor.steps);
        sample.outputs.reserve(actor.steps);
        for (int t = 0; t < actor.steps; ++t) {
            sample.inputs.push_back(trace.s1[t].col(0));
            sample.outputs.push_back(trace.l2_out[t].col(0));
        }
        snap.test_set.push_back(std::move(sample));

        auto res = env.step(Eigen::VectorXd(trace.action.col(0)));
        obs = std::move(res.state);
        if (res.done || res.truncated) obs = env.reset();
    }
    return snap;
}

namespace {

Eigen::VectorXd stage_gains(const MeshConfig& cfg, const mesh::VoltageTable& volts) {
    Eigen::VectorXd gains(cfg.topology.n_diag());
    for (int i = 0; i < gains.size(); ++i) {
        const double theta = mesh::phase_from_voltage(cfg.map, volts.diag[i]);
        gains[i] = std::pow(std::sin(0.5 * theta), 2);
    }
    return gains;
}

// Rescale every attenuator stage by `factor`, keeping the similarity
// untouched (uniform row scaling). Returns false when a stage's phase is not
// reachable, in which case the caller keeps the untrimmed voltages.
bool trim_gains(const MeshConfig& cfg, mesh::VoltageTable& volts, double factor) {
    Eigen::VectorXd gains = stage_gains(cfg, volts);
    Eigen::VectorXd new_diag = volts.diag;
    for (int i = 0; i < gains.size(); ++i) {
        const double target_gain = std::clamp(factor * gains[i], 0.0, 1.0);
        const double theta = 2.0 * std::asin(std::sqrt(target_gain));
        if (!mesh::voltage_from_phase(cfg.map, theta, new_diag[i])) return false;
    }
    volts.diag = std::move(new_diag);
    return true;
}

}  // namespace

MapResult map_to_hardware(const WeightSnapshot& snapshot, const MeshConfig& mesh_cfg,
                          const spgd::SpgdConfig& spgd_cfg, bool gain_trim) {
    const int h = snapshot.actor.hidden_dim();
    if (h != mesh_cfg.topology.n)
        throw DimensionError("hidden dimension " + std::to_string(h) +
                             " needs a mesh of the same size, got n = " +
                             std::to_string(mesh_cfg.topology.n));
    if (snapshot.l2_target.rows() != h || snapshot.l2_target.cols() != h)
        throw DimensionError("layer-2 target must be h x h");

    MapResult result;
    if (snapshot.l2_target.norm() == 0.0) {
        // Nothing to calibrate against: fully attenuated stages realize the
        // zero matrix exactly.
        result.record.degenerate = true;
        result.record.converged = false;
        result.record.best_similarity = 0.0;
        double v_dark = mesh_cfg.map.v_min;
        mesh::voltage_from_phase(mesh_cfg.map, 0.0, v_dark);
        result.record.best_voltages.mzi = Eigen::VectorXd::Constant(
            mesh_cfg.topology.n_mzi(), 0.5 * (mesh_cfg.map.v_min + mesh_cfg.map.v_max));
        result.record.best_voltages.diag =
            Eigen::VectorXd::Constant(mesh_cfg.topology.n_diag(), v_dark);
        Rng rng(0);
        result.record.realized_matrix =
            mesh::effective_weight(mesh_cfg.topology, mesh_cfg.map, result.record.best_voltages,
                                   mesh::NoiseModel{}, rng);
        result.w_eff_scaled = snapshot.scale * result.record.realized_matrix;
    } else {
        const Eigen::MatrixXd target = snapshot.l2_target / snapshot.scale;
        result.record =
            spgd::calibrate(mesh_cfg.topology, mesh_cfg.map, target, spgd_cfg, mesh_cfg.noise);

        if (gain_trim) {
            const Eigen::MatrixXd& realized = result.record.realized_matrix;
            const double denom = realized.squaredNorm();
            if (denom > 0.0) {
                const double beta = (realized.array() * target.array()).sum() / denom;
                const Eigen::VectorXd gains =
                    stage_gains(mesh_cfg, result.record.best_voltages);
                const double max_gain = gains.maxCoeff();
                const double cap = max_gain > 0.0 ? 1.0 / max_gain : 1.0;
                const double factor = std::clamp(beta, 0.0, cap);
                mesh::VoltageTable trimmed = result.record.best_voltages;
                if (factor > 0.0 && trim_gains(mesh_cfg, trimmed, factor)) {
                    result.record.best_voltages = std::move(trimmed);
                    Rng rng(0);
                    result.record.realized_matrix =
                        mesh::effective_weight(mesh_cfg.topology, mesh_cfg.map,
                                               result.record.best_voltages, mesh::NoiseModel{},
                                               rng);
                }
            }
        }
        result.w_eff_scaled = snapshot.scale * result.record.realized_matrix;
    }

    result.layer.config = mesh_cfg;
    result.layer.voltages = result.record.best_voltages;
    result.layer.scale = snapshot.scale;
    result.layer.w_eff_scaled = result.w_eff_scaled;
    result.layer.noise_seed = spgd_cfg.seed;
    return result;
}

MeshBackend::MeshBackend(const HardwareLayer& layer)
    : layer_(&layer), rng_(layer.noise_seed) {}

Eigen::MatrixXd MeshBackend::apply(const Eigen::MatrixXd& spikes) {
    if (!layer_->route_through_mesh) return layer_->w_eff_scaled * spikes;
    Eigen::MatrixXd out(spikes.rows(), spikes.cols());
    for (Eigen::Index j = 0; j < spikes.cols(); ++j) {
        out.col(j) = layer_->scale *
                     mesh::mesh_forward(layer_->config.topology, layer_->config.map,
                                        layer_->voltages, layer_->config.noise, spikes.col(j),
                                        rng_);
    }
    return out;
}

const Eigen::MatrixXd& MeshBackend::weight() const { return layer_->w_eff_scaled; }

snn::ActorTrace hybrid_forward(const snn::ActorNet& actor, MeshBackend& backend,
                               const Eigen::VectorXd& state) {
    return snn::actor_forward(actor, state, backend);
}

DeviationReport offline_compare(const WeightSnapshot& snapshot, const HardwareLayer& layer) {
    if (snapshot.test_set.empty()) throw UsageError("offline_compare needs a non-empty test set");
    const int h = snapshot.actor.hidden_dim();
    const int T = snapshot.actor.steps;
    const int n = static_cast<int>(snapshot.test_set.size());
    const Eigen::VectorXd range = 2.0 * snapshot.actor.action_scale;

    DeviationReport report;
    report.samples.reserve(n);
    report.series_target.resize(h, static_cast<Eigen::Index>(n) * T);
    report.series_measured.resize(h, static_cast<Eigen::Index>(n) * T);

    MeshBackend backend(layer);
    double pct_sum = 0.0;
    long pct_count = 0;

    for (int i = 0; i < n; ++i) {
        const TestSample& sample = snapshot.test_set[i];
        auto trace = snn::actor_forward(snapshot.actor, sample.obs, backend);

        DeviationReport::SampleRow row;
        row.action_sw = sample.action;
        row.action_hw = trace.action.col(0);
        for (Eigen::Index d = 0; d < row.action_sw.size(); ++d) {
            const double pct =
                100.0 * std::abs(row.action_hw[d] - row.action_sw[d]) / range[d];
            row.max_pct = std::max(row.max_pct, pct);
            pct_sum += pct;
            ++pct_count;
            report.max_pct = std::max(report.max_pct, pct);
        }
        report.samples.push_back(row);

        for (int t = 0; t < T; ++t) {
            report.series_target.col(static_cast<Eigen::Index>(i) * T + t) = sample.outputs[t];
            report.series_measured.col(static_cast<Eigen::Index>(i) * T + t) =
                trace.l2_out[t].col(0);
        }
    }
    report.mean_pct = pct_sum / static_cast<double>(pct_count);

    const Eigen::MatrixXd err = report.series_measured - report.series_target;
    report.err_mean = err.mean();
    report.err_std =
        std::sqrt((err.array() - report.err_mean).square().sum() / err.size());
    report.channel_err_mean.resize(h);
    report.channel_err_std.resize(h);
    for (int c = 0; c < h; ++c) {
        const double mean = err.row(c).mean();
        report.channel_err_mean[c] = mean;
        report.channel_err_std[c] =
            std::sqrt((err.row(c).array() - mean).square().sum() / err.cols());
    }
    return report;
}

td3::TrainResult cotrain(const WeightSnapshot& snapshot, const HardwareLayer& layer,
                         envs::Environment& env, envs::Environment& eval_env,
                         const td3::Td3Config& cfg, const td3::EvalHook& hook) {
    snn::ActorNet actor = snapshot.actor;
    actor.w2 = layer.w_eff_scaled;  // pinned to the realized hardware layer
    MeshBackend backend(layer);
    return td3::train(env, eval_env, std::move(actor), cfg, &backend, hook);
}

namespace {

ConvergenceEntry first_crossing(const std::string& label,
                                const std::vector<td3::TraceRow>& trace, double threshold) {
    ConvergenceEntry entry;
    entry.label = label;
    for (const auto& row : trace) {
        if (row.has_eval && row.eval_mean >= threshold) {
            entry.converged = true;
            entry.steps_to_threshold = row.step;
            break;
        }
    }
    return entry;
}

}  // namespace

ConvergenceReport convergence_report(
    const std::vector<std::pair<std::string, std::vector<td3::TraceRow>>>& software_runs,
    const std::vector<std::pair<std::string, std::vector<td3::TraceRow>>>& cotrain_runs,
    double threshold) {
    ConvergenceReport report;
    report.threshold = threshold;

    double sw_sum = 0.0;
    int sw_n = 0;
    for (const auto& [label, trace] : software_runs) {
        auto entry = first_crossing(label, trace, threshold);
        if (entry.converged) {
            sw_sum += entry.steps_to_threshold;
            ++sw_n;
        } else {
            ++report.excluded;
        }
        report.software.push_back(std::move(entry));
    }
    double ct_sum = 0.0;
    int ct_n = 0;
    for (const auto& [label, trace] : cotrain_runs) {
        auto entry = first_crossing(label, trace, threshold);
        if (entry.converged) {
            ct_sum += entry.steps_to_threshold;
            ++ct_n;
        } else {
            ++report.excluded;
        }
        report.cotrain.push_back(std::move(entry));
    }

    if (sw_n > 0) report.mean_software_steps = sw_sum / sw_n;
    if (ct_n > 0) report.mean_cotrain_steps = ct_sum / ct_n;
    if (sw_n > 0 && ct_n > 0 && report.mean_software_steps > 0.0)
        report.reduction_percent = 100.0 *
                                   (report.mean_software_steps - report.mean_cotrain_steps) /
                                   report.mean_software_steps;
    return report;
}

}  // namespace photonrl::hybrid
