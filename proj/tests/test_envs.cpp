// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include <json.hpp>

#include "photonrl/envs.hpp"
#include "photonrl/errors.hpp"
#include "photonrl/remote_env.hpp"

using namespace photonrl;
using namespace photonrl::envs;

constexpr double kPi = std::numbers::pi;

TEST_CASE("angle normalization wraps into (-pi, pi]") {
    CHECK(angle_normalize(0.0) == 0.0);
    CHECK(angle_normalize(2.0 * kPi) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(angle_normalize(1.5 * kPi) == doctest::Approx(-0.5 * kPi));
    CHECK(angle_normalize(kPi) == doctest::Approx(kPi));
    CHECK(angle_normalize(-kPi) == doctest::Approx(kPi));
    CHECK(angle_normalize(-0.25) == doctest::Approx(-0.25));
    CHECK_THROWS_AS(angle_normalize(std::nan("")), NumericError);
}

TEST_CASE("pendulum reset distributions and determinism") {
    PendulumParams params;
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        auto [state, obs] = pendulum_reset(params, rng);
        CHECK(obs[0] * obs[0] + obs[1] * obs[1] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(state.theta >= -kPi);
        CHECK(state.theta <= kPi);
        CHECK(std::abs(state.theta_dot) <= 1.0);
    }
    Rng a(7), b(7);
    auto [sa, oa] = pendulum_reset(params, a);
    auto [sb, ob] = pendulum_reset(params, b);
    CHECK(sa.theta == sb.theta);
    CHECK(sa.theta_dot == sb.theta_dot);
}

TEST_CASE("pendulum step hand-checked cases") {
    PendulumParams params;

    // Upright equilibrium: zero reward, nothing moves.
    PendulumState upright{0.0, 0.0, 0};
    auto still = pendulum_step(upright, 0.0, params);
    CHECK(still.reward == 0.0);
    CHECK(still.state.theta == 0.0);
    CHECK(still.state.theta_dot == 0.0);

    // Hanging down: reward is the squared angle penalty.
    PendulumState down{kPi, 0.0, 0};
    auto hung = pendulum_step(down, 0.0, params);
    CHECK(hung.reward == doctest::Approx(-kPi * kPi));

    // One Euler step from horizontal.
    PendulumState side{0.5 * kPi, 0.0, 0};
    auto swung = pendulum_step(side, 0.0, params);
    CHECK(swung.state.theta_dot == doctest::Approx(3.0 * 9.8 / 2.0 * 0.05));  // 0.735
    CHECK(swung.state.theta == doctest::Approx(0.5 * kPi + 0.735 * 0.05));

    CHECK_THROWS_AS(pendulum_step(upright, std::nan(""), params), NumericError);
}

TEST_CASE("pendulum invariants over random rollouts") {
    PendulumEnv env(PendulumParams{}, 11);
    Rng rng(5);
    std::uniform_real_distribution<double> torque(-4.0, 4.0);
    env.reset(42);
    int steps_in_episode = 0;
    for (int t = 0; t < 1000; ++t) {
        Eigen::VectorXd u(1);
        u << torque(rng);
        auto res = env.step(u);
        ++steps_in_episode;
        CHECK(res.reward <= 0.0);
        CHECK(res.state[0] * res.state[0] + res.state[1] * res.state[1] ==
              doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(res.state[2]) <= 8.0 + 1e-12);
        if (res.done) {
            CHECK(steps_in_episode == 200);
            CHECK(res.truncated);
            steps_in_episode = 0;
            env.reset();
        }
    }
}

TEST_CASE("locomotion reward formula") {
    Eigen::VectorXd zeros = Eigen::VectorXd::Zero(6);
    CHECK(cheetah_reward(0.0, 0.05, zeros) == 0.0);
    CHECK(cheetah_reward(0.5, 0.05, zeros) == doctest::Approx(10.0));
    CHECK(cheetah_reward(0.0, 0.05, Eigen::VectorXd::Ones(6)) == doctest::Approx(-0.6));
    CHECK_THROWS_AS(cheetah_reward(0.0, 0.0, zeros), RangeError);
    CHECK_THROWS_AS(cheetah_reward(0.0, -1.0, zeros), RangeError);

    // Linear in dx, concave in each action coordinate.
    Eigen::VectorXd a = Eigen::VectorXd::Constant(6, 0.3);
    const double r0 = cheetah_reward(1.0, 0.05, a);
    const double r1 = cheetah_reward(2.0, 0.05, a);
    const double r2 = cheetah_reward(3.0, 0.05, a);
    CHECK(r2 - r1 == doctest::Approx(r1 - r0));
    Eigen::VectorXd lo = a, mid = a, hi = a;
    lo[2] = 0.1;
    mid[2] = 0.2;
    hi[2] = 0.3;
    const double second_diff = cheetah_reward(0.0, 0.05, hi) -
                               2.0 * cheetah_reward(0.0, 0.05, mid) +
                               cheetah_reward(0.0, 0.05, lo);
    CHECK(second_diff < 0.0);
}

TEST_CASE("protocol doubles round-trip bit-exactly at 17 significant digits") {
    Rng rng(9);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 10000; ++i) {
        const double x = u(rng) * std::pow(10.0, i % 13 - 6);
        const double parsed = nlohmann::json::parse(format_double(x)).get<double>();
        CHECK(parsed == x);
    }
    for (double x : {0.0, -0.0, kPi, 1e-308, -2.2250738585072014e-308, 1.7976931348623157e308}) {
        const double parsed = nlohmann::json::parse(format_double(x)).get<double>();
        CHECK(parsed == x);
    }
}

namespace {

// Scripted transport for protocol error-path tests.
class ScriptedTransport final : public LineTransport {
public:
    explicit ScriptedTransport(std::vector<std::string> replies)
        : replies_(std::move(replies)) {}
    std::string roundtrip(const std::string&) override {
        if (next_ >= replies_.size()) throw ProtocolError("script exhausted");
        return replies_[next_++];
    }

private:
    std::vector<std::string> replies_;
    size_t next_ = 0;
};

RemoteEnvEndpoint test_endpoint() {
    RemoteEnvEndpoint e;
    e.transport = "scripted";
    return e;
}

}  // namespace

TEST_CASE("remote env rejects malformed and mismatched replies") {
    const std::string spec_reply =
        R"({"state_dim":3,"action_dim":2,"action_low":[-1,-1],"action_high":[1,1]})";

    {
        auto t = std::make_unique<ScriptedTransport>(
            std::vector<std::string>{"this is not json"});
        CHECK_THROWS_AS(RemoteEnv(std::move(t), test_endpoint()), ProtocolError);
    }
    {
        auto t = std::make_unique<ScriptedTransport>(
            std::vector<std::string>{R"({"error":"boom"})"});
        CHECK_THROWS_AS(RemoteEnv(std::move(t), test_endpoint()), ProtocolError);
    }
    {
        // Declared dimensions must match the endpoint expectation.
        auto t = std::make_unique<ScriptedTransport>(std::vector<std::string>{spec_reply});
        RemoteEnvEndpoint e = test_endpoint();
        e.expect_state_dim = 17;
        CHECK_THROWS_AS(RemoteEnv(std::move(t), e), ProtocolError);
    }
    {
        // State vector of the wrong length aborts the episode.
        auto t = std::make_unique<ScriptedTransport>(
            std::vector<std::string>{spec_reply, R"({"state":[1,2]})"});
        RemoteEnv env(std::move(t), test_endpoint());
        CHECK_THROWS_AS(env.reset(1), ProtocolError);
    }
    {
        // Action of the wrong length is refused before anything is sent.
        auto t = std::make_unique<ScriptedTransport>(std::vector<std::string>{spec_reply});
        RemoteEnv env(std::move(t), test_endpoint());
        CHECK_THROWS_AS(env.step(Eigen::VectorXd::Zero(5)), ProtocolError);
    }
}

TEST_CASE("remote env speaks to the demo server over stdio") {
    const char* server = std::getenv("PHOTONRL_ENVSERVER");
    REQUIRE_MESSAGE(server != nullptr, "PHOTONRL_ENVSERVER must point at the envserver binary");

    RemoteEnvEndpoint endpoint;
    endpoint.transport = std::string("stdio:") + server + " --state-dim 5 --action-dim 2";
    endpoint.expect_state_dim = 5;
    endpoint.expect_action_dim = 2;
    RemoteEnv env(endpoint);

    CHECK(env.spec().state_dim == 5);
    CHECK(env.spec().action_dim == 2);
    CHECK(env.spec().action_high[0] == 1.0);

    Eigen::VectorXd s1 = env.reset(123);
    Eigen::VectorXd s2 = env.reset(123);
    CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0);  // seeded resets repeat

    Eigen::VectorXd a(2);
    a << 0.5, -0.25;
    auto r1 = env.step(a);
    CHECK(r1.state.size() == 5);
    CHECK(std::isfinite(r1.reward));
    CHECK_FALSE(r1.done);

    env.reset(123);
    auto r2 = env.step(a);
    CHECK((r1.state - r2.state).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r1.reward == r2.reward);
}
