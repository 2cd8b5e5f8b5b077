// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "photonrl/envs.hpp"
#include "photonrl/mesh.hpp"
#include "photonrl/snn.hpp"
#include "photonrl/spgd.hpp"
#include "photonrl/td3.hpp"

namespace photonrl::hybrid {

// The three-stage pipeline around the photonic layer: extract the trained
// actor's second linear layer and a test dataset, map the layer onto the
// simulated mesh, compare hardware-vs-software inference, and resume
// training with the hardware layer frozen.

struct TestSample {
    Eigen::VectorXd obs;                   // observation that produced it
    std::vector<Eigen::VectorXd> inputs;   // per-step binary spikes entering L2
    std::vector<Eigen::VectorXd> outputs;  // per-step pure products w2 * input
    Eigen::VectorXd action;                // software action
};

struct WeightSnapshot {
    snn::ActorNet actor;
    Eigen::MatrixXd l2_target;  // w2, verbatim
    double scale = 1.0;         // max|w2| (1 for an all-zero layer)
    std::vector<TestSample> test_set;
};

// Deterministic-policy rollout collecting n_samples steps of layer-2 traffic.
// Each sample carries T spike vectors and products, so the transmitted data
// volume is n_samples * T * h values.
WeightSnapshot extract_l2(const snn::ActorNet& trained, envs::Environment& env, int n_samples,
                          std::uint64_t seed);

struct MeshConfig {
    mesh::MeshTopology topology;
    mesh::PhaseVoltageMap map;
    mesh::NoiseModel noise;
};

// Calibrated device handle: voltages, the digital twin of the realized layer
// (already rescaled by the snapshot scale), and the routing choice.
struct HardwareLayer {
    MeshConfig config;
    mesh::VoltageTable voltages;
    double scale = 1.0;
    Eigen::MatrixXd w_eff_scaled;
    bool route_through_mesh = false;  // true: simulate the optics per product
    std::uint64_t noise_seed = 0;
};

struct MapResult {
    spgd::CalibrationRecord record;
    Eigen::MatrixXd w_eff_scaled;
    HardwareLayer layer;
};

// Calibrates the mesh against l2_target / scale and returns the realized
// matrix rescaled by `scale`. With `gain_trim` (default) the attenuator
// stages are rescaled by the least-squares factor between the realized and
// target matrices after calibration; cosine similarity is invariant to the
// uniform trim but the digital twin then matches the target's magnitude.
// A zero target yields a degenerate record (nothing to calibrate against).
MapResult map_to_hardware(const WeightSnapshot& snapshot, const MeshConfig& mesh_cfg,
                          const spgd::SpgdConfig& spgd_cfg, bool gain_trim = true);

// Layer-2 provider routing through the hardware layer. Frozen by definition;
// backward passes use the digital twin.
class MeshBackend final : public snn::LinearBackend {
public:
    explicit MeshBackend(const HardwareLayer& layer);
    Eigen::MatrixXd apply(const Eigen::MatrixXd& spikes) override;
    const Eigen::MatrixXd& weight() const override;
    bool trainable() const override { return false; }

private:
    const HardwareLayer* layer_;
    Rng rng_;
};

// actor_forward with the hardware backend; bias b2 stays electronic.
snn::ActorTrace hybrid_forward(const snn::ActorNet& actor, MeshBackend& backend,
                               const Eigen::VectorXd& state);

struct DeviationReport {
    struct SampleRow {
        Eigen::VectorXd action_sw, action_hw;
        double max_pct = 0.0;
    };
    std::vector<SampleRow> samples;
    double mean_pct = 0.0;  // over all samples and action dimensions
    double max_pct = 0.0;
    double err_mean = 0.0;  // pooled layer-2 output error (measured - target)
    double err_std = 0.0;
    std::vector<double> channel_err_mean, channel_err_std;
    Eigen::MatrixXd series_target;    // h x (samples * T), transmission order
    Eigen::MatrixXd series_measured;  // same layout
};

// Replays every test input through the hardware layer and reruns the full
// hybrid forward per observation; percentage deviation is taken against the
// full action range (high - low = 2 * action_scale).
DeviationReport offline_compare(const WeightSnapshot& snapshot, const HardwareLayer& layer);

// Resumes training from the snapshot with layer 2 pinned to the realized
// hardware matrix (exact zero gradient, excluded from target blending).
// Critics and the replay buffer start fresh; everything else trains.
td3::TrainResult cotrain(const WeightSnapshot& snapshot, const HardwareLayer& layer,
                         envs::Environment& env, envs::Environment& eval_env,
                         const td3::Td3Config& cfg, const td3::EvalHook& hook = {});

struct ConvergenceEntry {
    std::string label;
    bool converged = false;
    long steps_to_threshold = 0;
};

struct ConvergenceReport {
    double threshold = 0.0;
    std::vector<ConvergenceEntry> software, cotrain;
    double mean_software_steps = 0.0;  // over converged runs only
    double mean_cotrain_steps = 0.0;
    double reduction_percent = 0.0;    // 100 * (sw - ct) / sw
    int excluded = 0;                  // non-convergent runs left out
};

// First evaluation crossing of `threshold` per trace; purely descriptive.
ConvergenceReport convergence_report(
    const std::vector<std::pair<std::string, std::vector<td3::TraceRow>>>& software_runs,
    const std::vector<std::pair<std::string, std::vector<td3::TraceRow>>>& cotrain_runs,
    double threshold);

}  // namespace photonrl::hybrid
