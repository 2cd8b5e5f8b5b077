// SPDX-License-Identifier: Apache-2.0

#include "photonrl/mesh.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "photonrl/errors.hpp"

namespace photonrl::mesh {

using std::complex;

double phase_from_voltage(const PhaseVoltageMap& map, double v, int shifter) {
    if (!std::isfinite(v) || v < map.v_min || v > map.v_max) {
        std::string where = shifter >= 0 ? " (shifter " + std::to_string(shifter) + ")" : "";
        throw RangeError("voltage " + std::to_string(v) + " outside [" +
                         std::to_string(map.v_min) + ", " + std::to_string(map.v_max) + "]" + where);
    }
    switch (map.mode) {
        case PhaseMode::Linear: return map.alpha * v + map.phi0;
        case PhaseMode::Quadratic: return map.alpha * v * v + map.phi0;
    }
    throw ConfigError("unknown phase-voltage mode");
}

bool voltage_from_phase(const PhaseVoltageMap& map, double phase, double& v_out) {
    double v = 0.0;
    switch (map.mode) {
        case PhaseMode::Linear:
            if (map.alpha == 0.0) return false;
            v = (phase - map.phi0) / map.alpha;
            break;
        case PhaseMode::Quadratic: {
            if (map.alpha == 0.0) return false;
            double t = (phase - map.phi0) / map.alpha;
            if (t < 0.0) return false;
            v = std::sqrt(t);
            break;
        }
    }
    if (v < map.v_min || v > map.v_max) return false;
    v_out = v;
    return true;
}

MeshTopology MeshTopology::rectangular(int n) {
    if (n < 1) throw DimensionError("mesh dimension must be >= 1");
    MeshTopology topo;
    topo.n = n;
    const int m = n + 1;
    for (int layer = 0; layer < m; ++layer) {
        for (int top = layer % 2; top + 1 < m; top += 2) {
            topo.layout.push_back({layer, top});
        }
    }
    topo.validate();
    return topo;
}

void MeshTopology::validate() const {
    const int m = modes();
    const long expected = static_cast<long>(m) * (m - 1) / 2;
    if (static_cast<long>(layout.size()) != expected) {
        throw DimensionError("rectangular mesh on " + std::to_string(m) + " modes needs " +
                             std::to_string(expected) + " units, layout has " +
                             std::to_string(layout.size()));
    }
    int prev_layer = 0;
    for (const auto& p : layout) {
        if (p.layer < 0 || p.layer >= m || p.top_mode < 0 || p.top_mode + 1 >= m)
            throw DimensionError("unit placement out of range");
        if (p.top_mode % 2 != p.layer % 2)
            throw DimensionError("unit at layer " + std::to_string(p.layer) +
                                 " does not alternate mode pairs");
        if (p.layer < prev_layer) throw DimensionError("layout must be layer-ordered");
        prev_layer = p.layer;
    }
}

void validate_voltages(const MeshTopology& topo, const PhaseVoltageMap& map,
                       const VoltageTable& v) {
    if (v.mzi.size() != topo.n_mzi() || v.diag.size() != topo.n_diag()) {
        throw DimensionError("voltage table (" + std::to_string(v.mzi.size()) + " mzi, " +
                             std::to_string(v.diag.size()) + " diag) does not match topology (" +
                             std::to_string(topo.n_mzi()) + " mzi, " +
                             std::to_string(topo.n_diag()) + " diag)");
    }
    for (int k = 0; k < v.mzi.size(); ++k) phase_from_voltage(map, v.mzi[k], k);
    for (int i = 0; i < v.diag.size(); ++i)
        phase_from_voltage(map, v.diag[i], topo.n_mzi() + i);
}

Eigen::Matrix2cd mzi_unit_transfer(double theta) {
    if (!std::isfinite(theta)) throw NumericError("non-finite unit phase");
    const double s = std::sin(0.5 * theta);
    const double c = std::cos(0.5 * theta);
    const complex<double> g(-s, c);  // i * e^{i theta / 2}
    Eigen::Matrix2cd u;
    u << g * s, g * c,
         g * c, -g * s;
    return u;
}

namespace {

// Phases for every tunable shifter; jitter draws happen in a fixed order
// (all unit shifters in layout order, then the attenuator stages).
struct ShifterPhases {
    Eigen::VectorXd mzi;
    Eigen::VectorXd diag;
};

ShifterPhases resolve_phases(const MeshTopology& topo, const PhaseVoltageMap& map,
                             const VoltageTable& volts, const NoiseModel& noise, Rng& rng) {
    validate_voltages(topo, map, volts);
    ShifterPhases p;
    p.mzi.resize(topo.n_mzi());
    p.diag.resize(topo.n_diag());
    for (int k = 0; k < topo.n_mzi(); ++k) p.mzi[k] = phase_from_voltage(map, volts.mzi[k], k);
    for (int i = 0; i < topo.n_diag(); ++i)
        p.diag[i] = phase_from_voltage(map, volts.diag[i], topo.n_mzi() + i);
    if (noise.phase_jitter_sigma > 0.0) {
        std::normal_distribution<double> jitter(0.0, noise.phase_jitter_sigma);
        for (int k = 0; k < topo.n_mzi(); ++k) p.mzi[k] += jitter(rng);
        for (int i = 0; i < topo.n_diag(); ++i) p.diag[i] += jitter(rng);
    }
    return p;
}

// Rows of the mesh matrix kept as separate real/imaginary planes so the
// per-unit update is a vectorizable elementwise pass: column j of each plane
// holds row j of the matrix.
struct TransferPlanes {
    Eigen::MatrixXd re, im;
};

TransferPlanes transfer_planes(const MeshTopology& topo, const Eigen::VectorXd& mzi_phases) {
    const int m = topo.modes();
    TransferPlanes planes{Eigen::MatrixXd::Identity(m, m), Eigen::MatrixXd::Zero(m, m)};
    for (int k = 0; k < topo.n_mzi(); ++k) {
        const double s = std::sin(0.5 * mzi_phases[k]);
        const double c = std::cos(0.5 * mzi_phases[k]);
        if (!std::isfinite(s)) throw NumericError("non-finite unit phase");
        // u00 = g*s, u01 = u10 = g*c, u11 = -g*s with g = (-s, c).
        const double u00r = -s * s, u00i = c * s;
        const double u01r = -s * c, u01i = c * c;
        const int a = topo.layout[k].top_mode;
        double* are = planes.re.col(a).data();
        double* aim = planes.im.col(a).data();
        double* bre = planes.re.col(a + 1).data();
        double* bim = planes.im.col(a + 1).data();
        for (int j = 0; j < m; ++j) {
            const double xr = are[j], xi = aim[j], yr = bre[j], yi = bim[j];
            are[j] = (u00r * xr - u00i * xi) + (u01r * yr - u01i * yi);
            aim[j] = (u00r * xi + u00i * xr) + (u01r * yi + u01i * yr);
            bre[j] = (u01r * xr - u01i * xi) - (u00r * yr - u00i * yi);
            bim[j] = (u01r * xi + u01i * xr) - (u00r * yi + u00i * yr);
        }
    }
    return planes;
}

Eigen::MatrixXcd transfer_from_phases(const MeshTopology& topo, const Eigen::VectorXd& mzi_phases) {
    const TransferPlanes planes = transfer_planes(topo, mzi_phases);
    const int m = topo.modes();
    Eigen::MatrixXcd mat(m, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i) mat(j, i) = complex<double>(planes.re(i, j), planes.im(i, j));
    return mat;
}

Eigen::MatrixXd weight_from_planes(const TransferPlanes& planes,
                                   const Eigen::VectorXd& diag_phases, int n,
                                   ReadoutMode readout) {
    Eigen::MatrixXd w(n, n);
    for (int j = 0; j < n; ++j) {
        const double gain = std::pow(std::sin(0.5 * diag_phases[j]), 2);
        const double* re = planes.re.col(j).data();  // planes.re(i, j) = Re M(j, i)
        const double* im = planes.im.col(j).data();
        for (int i = 0; i < n; ++i) {
            const double entry = readout == ReadoutMode::Coherent
                                     ? re[i]
                                     : re[i] * re[i] + im[i] * im[i];
            w(j, i) = gain * entry;
        }
    }
    return w;
}

}  // namespace

Eigen::MatrixXcd mesh_transfer(const MeshTopology& topo, const PhaseVoltageMap& map,
                               const VoltageTable& volts, const NoiseModel& noise, Rng& rng) {
    ShifterPhases p = resolve_phases(topo, map, volts, noise, rng);
    return transfer_from_phases(topo, p.mzi);
}

Eigen::MatrixXd effective_weight(const MeshTopology& topo, const PhaseVoltageMap& map,
                                 const VoltageTable& volts, const NoiseModel& noise,
                                 Rng& rng, ReadoutMode readout) {
    ShifterPhases p = resolve_phases(topo, map, volts, noise, rng);
    return weight_from_planes(transfer_planes(topo, p.mzi), p.diag, topo.n, readout);
}

Eigen::VectorXd mesh_forward(const MeshTopology& topo, const PhaseVoltageMap& map,
                             const VoltageTable& volts, const NoiseModel& noise,
                             const Eigen::VectorXd& x, Rng& rng, ReadoutMode readout) {
    if (x.size() != topo.n)
        throw DimensionError("input vector length " + std::to_string(x.size()) +
                             " does not match mesh dimension " + std::to_string(topo.n));
    if (!x.allFinite()) throw NumericError("non-finite mesh input");
    Eigen::VectorXd y = effective_weight(topo, map, volts, noise, rng, readout) * x;
    if (noise.readout_sigma > 0.0) {
        std::normal_distribution<double> readout_noise(0.0, noise.readout_sigma);
        for (int i = 0; i < y.size(); ++i) y[i] += readout_noise(rng);
    }
    return y;
}

Eigen::MatrixXd probe_matrix(const MeshTopology& topo, const PhaseVoltageMap& map,
                             const VoltageTable& volts, const NoiseModel& noise,
                             Rng& rng, ReadoutMode readout) {
    const int n = topo.n;
    Eigen::MatrixXd measured(n, n);
    if (noise.phase_jitter_sigma > 0.0) {
        // Jitter re-draws per probe; each column goes through a fresh mesh.
        Eigen::VectorXd probe = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < n; ++j) {
            probe[j] = 1.0;
            measured.col(j) = mesh_forward(topo, map, volts, noise, probe, rng, readout);
            probe[j] = 0.0;
        }
        return measured;
    }
    // Without jitter every probe sees the same mesh; W * e_j is exactly
    // column j, so one build serves all probes. Readout draws keep the same
    // per-probe order as the literal loop above.
    measured = effective_weight(topo, map, volts, noise, rng, readout);
    if (noise.readout_sigma > 0.0) {
        std::normal_distribution<double> readout_noise(0.0, noise.readout_sigma);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) measured(i, j) += readout_noise(rng);
    }
    return measured;
}

double unitarity_error(const Eigen::MatrixXcd& m) {
    const Eigen::MatrixXcd defect =
        m.adjoint() * m - Eigen::MatrixXcd::Identity(m.cols(), m.cols());
    return defect.norm();
}

}  // namespace photonrl::mesh
