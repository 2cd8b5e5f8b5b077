// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "photonrl/errors.hpp"
#include "photonrl/mesh.hpp"
#include "photonrl/spgd.hpp"

using namespace photonrl;
using namespace photonrl::mesh;
using namespace photonrl::spgd;

constexpr double kPi = std::numbers::pi;

namespace {

PhaseVoltageMap identity_map() {
    PhaseVoltageMap m;
    m.alpha = 1.0;
    m.phi0 = 0.0;
    m.v_min = 0.0;
    m.v_max = 2.0 * kPi;
    return m;
}

VoltageTable random_table(const MeshTopology& topo, const PhaseVoltageMap& map, Rng& rng) {
    std::uniform_real_distribution<double> u(map.v_min, map.v_max);
    VoltageTable v;
    v.mzi.resize(topo.n_mzi());
    v.diag.resize(topo.n_diag());
    for (int k = 0; k < v.mzi.size(); ++k) v.mzi[k] = u(rng);
    for (int i = 0; i < v.diag.size(); ++i) v.diag[i] = u(rng);
    return v;
}

// Noiseless objective used by the analytic toy checks.
double toy_objective(const MeshTopology& topo, const PhaseVoltageMap& map,
                     const VoltageTable& v, const Eigen::MatrixXd& target) {
    Rng rng(0);
    return -(probe_matrix(topo, map, v, NoiseModel{}, rng) - target).squaredNorm() /
           static_cast<double>(target.size());
}

}  // namespace

TEST_CASE("cosine similarity identities") {
    Eigen::MatrixXd a(2, 2);
    a << 1.0, -2.0, 0.5, 3.0;
    CHECK(cosine_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(cosine_similarity(a, (-a).eval()) == doctest::Approx(-1.0).epsilon(1e-14));

    Eigen::MatrixXd b(2, 2), c(2, 2);
    b << 1.0, 0.0, 0.0, 0.0;
    c << 1.0, 1.0, 0.0, 0.0;
    CHECK(cosine_similarity(b, c) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(cosine_similarity(b, zero), NumericError);
    Eigen::MatrixXd wide(2, 3);
    wide.setOnes();
    CHECK_THROWS_AS(cosine_similarity(b, wide), DimensionError);
}

TEST_CASE("config validation") {
    SpgdConfig cfg;
    cfg.gain = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SpgdConfig{};
    cfg.target_similarity = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = SpgdConfig{};
    cfg.max_iters = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("zero objective difference leaves the voltages untouched") {
    // A flat phase map makes the mesh independent of its drive voltages, so
    // both probes agree exactly and the update must be exactly zero.
    auto topo = MeshTopology::rectangular(2);
    PhaseVoltageMap flat = identity_map();
    flat.alpha = 0.0;
    flat.phi0 = 1.0;

    VoltageTable v;
    v.mzi = Eigen::VectorXd::Constant(topo.n_mzi(), 2.0);
    v.diag = Eigen::VectorXd::Constant(topo.n_diag(), 3.0);

    Eigen::MatrixXd target = Eigen::MatrixXd::Ones(2, 2);
    SpgdConfig cfg;
    cfg.objective = Objective::NegMse;
    Rng rng(5);
    auto step = spgd_step(topo, flat, v, target, cfg, NoiseModel{}, rng);
    CHECK((step.voltages.mzi - v.mzi).cwiseAbs().maxCoeff() == 0.0);
    CHECK((step.voltages.diag - v.diag).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("updates are clamped to the voltage range") {
    auto topo = MeshTopology::rectangular(3);
    PhaseVoltageMap map;
    Rng rng(11);
    VoltageTable v = random_table(topo, map, rng);
    Eigen::MatrixXd target = Eigen::MatrixXd::Random(3, 3);

    SpgdConfig cfg;
    cfg.gain = 1e7;  // force saturation
    Rng step_rng(3);
    auto step = spgd_step(topo, map, v, target, cfg, NoiseModel{}, step_rng);
    CHECK(step.voltages.mzi.minCoeff() >= map.v_min);
    CHECK(step.voltages.mzi.maxCoeff() <= map.v_max);
    CHECK(step.voltages.diag.minCoeff() >= map.v_min);
    CHECK(step.voltages.diag.maxCoeff() <= map.v_max);
}

TEST_CASE("spgd_step is reproducible under a fixed seed") {
    auto topo = MeshTopology::rectangular(4);
    PhaseVoltageMap map;
    Rng rng(17);
    VoltageTable v = random_table(topo, map, rng);
    Eigen::MatrixXd target = Eigen::MatrixXd::Random(4, 4);
    SpgdConfig cfg;
    NoiseModel noise{0.002, 0.002};

    Rng r1(77), r2(77);
    auto s1 = spgd_step(topo, map, v, target, cfg, noise, r1);
    auto s2 = spgd_step(topo, map, v, target, cfg, noise, r2);
    CHECK((s1.voltages.mzi - s2.voltages.mzi).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s1.voltages.diag - s2.voltages.diag).cwiseAbs().maxCoeff() == 0.0);
    CHECK(s1.objective == s2.objective);
}

TEST_CASE("single-unit toy: update sign follows the analytic bar-power gradient") {
    // n = 1: the lone weight is w(theta) = -d * sin^2(theta/2). Holding the
    // attenuator stage at its gain extremum (theta_d = pi, d = 1) makes the
    // objective a function of the unit phase alone, so the sign of one SPGD
    // step must match dJ/dtheta with J = -(w - t)^2, dw/dtheta = -sin(theta)/2
    // and therefore dJ/dtheta = (w - t) * sin(theta).
    auto topo = MeshTopology::rectangular(1);
    PhaseVoltageMap map = identity_map();
    const double t = -0.37;

    SpgdConfig cfg;
    cfg.objective = Objective::NegMse;
    cfg.perturb_amp = 0.005;
    cfg.gain = 0.01;

    int checked = 0;
    for (int i = 0; i < 20; ++i) {
        const double theta = 0.15 + i * (2.0 * kPi - 0.3) / 19.0;
        const double w = -std::pow(std::sin(0.5 * theta), 2);
        const double analytic = (w - t) * std::sin(theta);
        if (std::abs(analytic) < 5e-2) continue;  // skip near-stationary points

        VoltageTable v;
        v.mzi = Eigen::VectorXd::Constant(1, theta);
        v.diag = Eigen::VectorXd::Constant(1, kPi);
        Eigen::MatrixXd target(1, 1);
        target << t;

        Rng rng(1000 + i);
        auto step = spgd_step(topo, map, v, target, cfg, NoiseModel{}, rng);
        const double update = step.voltages.mzi[0] - v.mzi[0];
        REQUIRE(update != 0.0);
        CHECK(update * analytic > 0.0);
        ++checked;
    }
    CHECK(checked >= 14);
}

TEST_CASE("update direction has positive expected alignment with the true gradient") {
    auto topo = MeshTopology::rectangular(1);
    PhaseVoltageMap map = identity_map();
    Eigen::MatrixXd target(1, 1);
    target << -0.5;

    VoltageTable v;
    v.mzi = Eigen::VectorXd::Constant(1, 2.0);
    v.diag = Eigen::VectorXd::Constant(1, 1.3);

    // Central finite differences of the noiseless objective.
    const double h = 1e-6;
    Eigen::Vector2d grad;
    for (int p = 0; p < 2; ++p) {
        VoltageTable plus = v, minus = v;
        (p == 0 ? plus.mzi[0] : plus.diag[0]) += h;
        (p == 0 ? minus.mzi[0] : minus.diag[0]) -= h;
        grad[p] = (toy_objective(topo, map, plus, target) -
                   toy_objective(topo, map, minus, target)) /
                  (2.0 * h);
    }
    REQUIRE(grad.norm() > 1e-4);

    SpgdConfig cfg;
    cfg.objective = Objective::NegMse;
    cfg.perturb_amp = 0.05;
    cfg.gain = 1.0;

    Rng rng(2024);
    Eigen::Vector2d mean_update = Eigen::Vector2d::Zero();
    const int trials = 1500;
    for (int trial = 0; trial < trials; ++trial) {
        auto step = spgd_step(topo, map, v, target, cfg, NoiseModel{}, rng);
        mean_update[0] += step.voltages.mzi[0] - v.mzi[0];
        mean_update[1] += step.voltages.diag[0] - v.diag[0];
    }
    mean_update /= static_cast<double>(trials);
    CHECK(mean_update.dot(grad) > 0.0);
}

TEST_CASE("calibrate recovers a mesh-realizable target") {
    auto topo = MeshTopology::rectangular(2);
    PhaseVoltageMap map;
    Rng rng(5);
    VoltageTable truth = random_table(topo, map, rng);
    Eigen::MatrixXd target = effective_weight(topo, map, truth, NoiseModel{}, rng);

    SpgdConfig cfg;
    cfg.seed = 9;
    cfg.max_iters = 8000;
    cfg.target_similarity = 0.999;
    auto record = calibrate(topo, map, target, cfg, NoiseModel{});
    CHECK(record.best_similarity >= 0.999);
    CHECK(record.converged);

    // The realized matrix is the noiseless re-probe of the best voltages.
    Rng check_rng(0);
    auto reprobed = probe_matrix(topo, map, record.best_voltages, NoiseModel{}, check_rng);
    CHECK((reprobed - record.realized_matrix).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("wide-start restarts recover targets a single mid-range run misses") {
    auto topo = MeshTopology::rectangular(3);
    PhaseVoltageMap map;
    Rng rng(101);
    VoltageTable truth = random_table(topo, map, rng);
    Eigen::MatrixXd target = effective_weight(topo, map, truth, NoiseModel{}, rng);

    SpgdConfig cfg;
    cfg.seed = 3;
    cfg.max_iters = 120000;
    cfg.target_similarity = 0.999;
    cfg.init_jitter = 0.5 * (map.v_max - map.v_min);  // full-range starts
    cfg.restarts = 20;
    auto record = calibrate(topo, map, target, cfg, NoiseModel{});
    CHECK(record.best_similarity >= 0.999);

    // Identical config replays to the identical record.
    auto replay = calibrate(topo, map, target, cfg, NoiseModel{});
    CHECK(replay.history.size() == record.history.size());
    CHECK(replay.best_similarity == record.best_similarity);
}

TEST_CASE("calibration record tracks the best similarity monotonically") {
    auto topo = MeshTopology::rectangular(3);
    PhaseVoltageMap map;
    Eigen::MatrixXd target = Eigen::MatrixXd::Random(3, 3) * 0.4;

    SpgdConfig cfg;
    cfg.seed = 21;
    cfg.max_iters = 300;
    auto record = calibrate(topo, map, target, cfg, NoiseModel{});

    double best = -2.0;
    for (const auto& row : record.history) best = std::max(best, row.similarity);
    CHECK(record.best_similarity == best);
    CHECK(record.history.front().iteration == 0);
    CHECK(record.history.size() <= static_cast<size_t>(cfg.max_iters) + 1);
}

TEST_CASE("running out of budget flags converged = false") {
    auto topo = MeshTopology::rectangular(3);
    PhaseVoltageMap map;
    Eigen::MatrixXd target = Eigen::MatrixXd::Random(3, 3);

    SpgdConfig cfg;
    cfg.seed = 4;
    cfg.max_iters = 3;
    cfg.target_similarity = 0.9999;  // unreachable in 3 iterations
    auto record = calibrate(topo, map, target, cfg, NoiseModel{});
    CHECK_FALSE(record.converged);
    CHECK(record.history.size() == 4);
}

TEST_CASE("calibration is reproducible and refuses a zero target") {
    auto topo = MeshTopology::rectangular(2);
    PhaseVoltageMap map;
    Eigen::MatrixXd target(2, 2);
    target << 0.2, -0.1, 0.05, 0.3;

    SpgdConfig cfg;
    cfg.seed = 31;
    cfg.max_iters = 50;
    auto r1 = calibrate(topo, map, target, cfg, NoiseModel{});
    auto r2 = calibrate(topo, map, target, cfg, NoiseModel{});
    REQUIRE(r1.history.size() == r2.history.size());
    for (size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].objective == r2.history[i].objective);
        CHECK(r1.history[i].similarity == r2.history[i].similarity);
    }
    CHECK((r1.best_voltages.mzi - r2.best_voltages.mzi).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(calibrate(topo, map, Eigen::MatrixXd::Zero(2, 2), cfg, NoiseModel{}),
                    NumericError);
}

TEST_CASE("calibration copes with measurement noise") {
    auto topo = MeshTopology::rectangular(2);
    PhaseVoltageMap map;
    Rng rng(8);
    VoltageTable truth = random_table(topo, map, rng);
    Eigen::MatrixXd target = effective_weight(topo, map, truth, NoiseModel{}, rng);

    SpgdConfig cfg;
    cfg.seed = 13;
    cfg.max_iters = 2000;
    cfg.target_similarity = 0.995;
    NoiseModel noise{0.0, 0.005};
    auto record = calibrate(topo, map, target, cfg, noise);
    CHECK(record.best_similarity > 0.9);
}
