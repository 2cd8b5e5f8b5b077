// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <numbers>
#include <vector>

#include "photonrl/rng.hpp"

namespace photonrl::mesh {

// Physics-level simulator of a programmable interferometer mesh: a rectangular
// arrangement of 2x2 Mach-Zehnder units on n+1 waveguide modes followed by one
// variable attenuator per logical output port. Drive voltages map to phases,
// phases to unit transfers, unit transfers to the full mesh matrix, and the
// mesh matrix to an effective real-valued n x n weight matrix.

enum class PhaseMode { Linear, Quadratic };

struct PhaseVoltageMap {
    double alpha = 0.2 * std::numbers::pi;   // rad/V; [0,10] V spans a full 2*pi
    double phi0 = -0.5 * std::numbers::pi;   // mid-range voltage sits at quadrature
    PhaseMode mode = PhaseMode::Linear;
    double v_min = 0.0;
    double v_max = 10.0;
};

// phase(v) = alpha*v + phi0 (linear) or alpha*v^2 + phi0 (quadratic).
// Out-of-range voltage throws RangeError naming `shifter` when >= 0.
double phase_from_voltage(const PhaseVoltageMap& map, double v, int shifter = -1);

// Inverse of phase_from_voltage on the allowed range. Returns false when the
// requested phase is not reachable.
bool voltage_from_phase(const PhaseVoltageMap& map, double phase, double& v_out);

struct MziPlacement {
    int layer;
    int top_mode;  // unit couples modes (top_mode, top_mode + 1)
};

struct MeshTopology {
    int n = 0;                         // logical matrix dimension (ports)
    std::vector<MziPlacement> layout;  // layer-major order

    int modes() const { return n + 1; }
    int n_mzi() const { return static_cast<int>(layout.size()); }
    int n_diag() const { return n; }
    int n_shifters() const { return n_mzi() + n_diag(); }

    // Rectangular arrangement on n+1 modes: n+1 layers of units on adjacent
    // mode pairs, even layers starting at mode 0, odd layers at mode 1.
    // Yields (n+1)*n/2 units; with the n attenuator stages the n = 16 mesh
    // carries 136 + 16 = 152 tunable shifters.
    static MeshTopology rectangular(int n);

    // Checks layer alternation, adjacency and the unit count; throws
    // DimensionError on violation. Used after loading a topology from file.
    void validate() const;
};

struct VoltageTable {
    Eigen::VectorXd mzi;   // one internal phase shifter per unit, layout order
    Eigen::VectorXd diag;  // one shifter per attenuator stage, port order
};

// Throws DimensionError / RangeError if the table does not fit the topology
// or violates the map's voltage range.
void validate_voltages(const MeshTopology& topo, const PhaseVoltageMap& map,
                       const VoltageTable& v);

struct NoiseModel {
    double phase_jitter_sigma = 0.0;  // rad, additive Gaussian per shifter
    double readout_sigma = 0.0;       // additive Gaussian per output amplitude
    // Randomness is always drawn from the caller-supplied Rng; both sigmas at
    // zero make every operation exactly deterministic (the Rng is not
    // advanced).
};

enum class ReadoutMode {
    Coherent,   // signed weights: W[i][j] = d_i * Re(M_sub[i][j])
    Intensity,  // nonnegative:    W[i][j] = d_i * |M_sub[i][j]|^2
};

// Transfer of one unit at internal phase theta:
//   i*e^{i theta/2} * [[sin(theta/2), cos(theta/2)], [cos(theta/2), -sin(theta/2)]]
// Bar power sin^2(theta/2), cross power cos^2(theta/2).
Eigen::Matrix2cd mzi_unit_transfer(double theta);

// Full (n+1)x(n+1) mesh matrix, composing per-layer block transfers in layout
// order. Unitary to 1e-9 in the noiseless case; phase jitter preserves
// unitarity (it perturbs phases, not loss).
Eigen::MatrixXcd mesh_transfer(const MeshTopology& topo, const PhaseVoltageMap& map,
                               const VoltageTable& volts, const NoiseModel& noise,
                               Rng& rng);

// Effective n x n real weight matrix: attenuator gains d_i = sin^2(theta_i/2)
// applied to the n x n sub-block of the mesh matrix (the extra mode is a dump
// port: zero field in, output discarded).
Eigen::MatrixXd effective_weight(const MeshTopology& topo, const PhaseVoltageMap& map,
                                 const VoltageTable& volts, const NoiseModel& noise,
                                 Rng& rng, ReadoutMode readout = ReadoutMode::Coherent);

// y = W_eff * x plus readout noise. Noise off, this is bit-identical to a
// dense product against effective_weight's output.
Eigen::VectorXd mesh_forward(const MeshTopology& topo, const PhaseVoltageMap& map,
                             const VoltageTable& volts, const NoiseModel& noise,
                             const Eigen::VectorXd& x, Rng& rng,
                             ReadoutMode readout = ReadoutMode::Coherent);

// Measured matrix from n one-hot probes, noise per probe. Equals n successive
// mesh_forward calls bit-for-bit (the jitter-free path shares one mesh build,
// which is the same matrix every probe would see).
Eigen::MatrixXd probe_matrix(const MeshTopology& topo, const PhaseVoltageMap& map,
                             const VoltageTable& volts, const NoiseModel& noise,
                             Rng& rng, ReadoutMode readout = ReadoutMode::Coherent);

// ||M^dagger M - I||_F, the unitarity defect.
double unitarity_error(const Eigen::MatrixXcd& m);

}  // namespace photonrl::mesh
