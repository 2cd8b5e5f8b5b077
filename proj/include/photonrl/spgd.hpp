// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "photonrl/mesh.hpp"
#include "photonrl/rng.hpp"

namespace photonrl::spgd {

// Model-free calibration: perturb every drive voltage simultaneously, measure
// the objective difference between the two perturbed probes, and step along
// the estimated gradient until the measured matrix matches the target.

enum class Objective { Cosine, NegMse };

struct SpgdConfig {
    double gain = 7.0;                // V per unit objective difference
    double perturb_amp = 0.12;        // V, per-shifter bilateral perturbation
    int max_iters = 2500;
    double target_similarity = 1.0;   // stop threshold, in (0, 1]
    std::uint64_t seed = 0;
    Objective objective = Objective::Cosine;

    // Optional annealing: value_k = value / (1 + k / decay_offset)^exponent.
    // Exponent 0 keeps the quantity constant; 0.5 gives the 1/sqrt(t) taper.
    double gain_decay_exponent = 0.602;
    double perturb_decay_exponent = 0.101;
    double decay_offset = 180.0;

    double init_jitter = 0.25;        // V, uniform jitter around mid-range start

    // Independent initializations sharing the max_iters budget. The loop
    // landscape has local optima whose basin is picked by the start point, so
    // hard targets are attacked with many wide starts (init_jitter at
    // half-range) rather than a longer single run.
    int restarts = 1;

    void validate() const;  // throws ConfigError
};

struct CalibrationSample {
    int iteration;
    double objective;
    double similarity;
};

struct CalibrationRecord {
    std::vector<CalibrationSample> history;
    mesh::VoltageTable best_voltages;
    double best_similarity = 0.0;
    Eigen::MatrixXd realized_matrix;  // noiseless re-probe of best_voltages
    bool converged = false;
    bool degenerate = false;          // zero target, nothing to calibrate against
};

// dot(flatten(a), flatten(b)) / (||a||_F * ||b||_F). Throws DimensionError on
// shape mismatch and NumericError when either matrix is all-zero.
double cosine_similarity(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct SpgdStepResult {
    mesh::VoltageTable voltages;
    double objective;
    double similarity;
};

// One bilateral-perturbation step. Draws delta with i.i.d. +-perturb_amp
// entries, probes both perturbed tables (clamped to the voltage range),
// updates V' = clamp(V + gain * (J+ - J-) * delta / (2 * perturb_amp)) and
// probes V' for the returned objective/similarity. `iter` feeds the optional
// annealing schedules (1-based).
SpgdStepResult spgd_step(const mesh::MeshTopology& topo, const mesh::PhaseVoltageMap& map,
                         const mesh::VoltageTable& voltages, const Eigen::MatrixXd& target,
                         const SpgdConfig& cfg, const mesh::NoiseModel& noise, Rng& rng,
                         int iter = 1);

// Full calibration loop from a mid-range + jitter start. Stops at
// target_similarity or after max_iters; running out of budget flags
// converged = false rather than throwing.
CalibrationRecord calibrate(const mesh::MeshTopology& topo, const mesh::PhaseVoltageMap& map,
                            const Eigen::MatrixXd& target, const SpgdConfig& cfg,
                            const mesh::NoiseModel& noise);

}  // namespace photonrl::spgd
