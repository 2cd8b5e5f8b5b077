// SPDX-License-Identifier: Apache-2.0
//
// Minimal environment server speaking the newline-delimited JSON protocol
// over stdio (default) or a TCP listener. The dynamics are a smooth
// point-mass locomotion toy: actions push a velocity state, the reward pays
// forward displacement against a quadratic action cost. It exists so the
// remote-environment plumbing can be exercised end-to-end without an
// external physics engine, and as a template for wrapping a real one.

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "photonrl/envs.hpp"
#include "photonrl/remote_env.hpp"

using nlohmann::json;

namespace {

struct ToyEnv {
    int state_dim;
    int action_dim;
    double dt = 0.05;
    int horizon;
    std::mt19937_64 rng{0};

    double position = 0.0;
    double velocity = 0.0;
    std::vector<double> last_action;
    int steps = 0;

    ToyEnv(int sd, int ad, int horizon_steps)
        : state_dim(sd), action_dim(ad), horizon(horizon_steps), last_action(ad, 0.0) {}

    std::vector<double> observe() const {
        std::vector<double> s(state_dim, 0.0);
        s[0] = std::sin(position);
        if (state_dim > 1) s[1] = std::cos(position);
        if (state_dim > 2) s[2] = velocity;
        for (int i = 0; i + 3 < state_dim && i < action_dim; ++i) s[i + 3] = last_action[i];
        return s;
    }

    std::vector<double> reset(std::uint64_t seed, bool has_seed) {
        if (has_seed) rng.seed(seed);
        std::uniform_real_distribution<double> u(-0.1, 0.1);
        position = u(rng);
        velocity = u(rng);
        std::fill(last_action.begin(), last_action.end(), 0.0);
        steps = 0;
        return observe();
    }

    json step(const std::vector<double>& action) {
        double drive = 0.0;
        Eigen::VectorXd a(action_dim);
        for (int i = 0; i < action_dim; ++i) {
            const double clipped = std::clamp(action[i], -1.0, 1.0);
            a[i] = clipped;
            drive += std::tanh(clipped);
            last_action[i] = clipped;
        }
        drive /= action_dim;

        velocity = 0.9 * velocity + 0.5 * drive;
        const double dx = velocity * dt;
        position += dx;
        ++steps;

        const double reward = photonrl::envs::cheetah_reward(dx, dt, a);
        json out;
        out["state"] = observe();
        out["reward"] = reward;
        out["done"] = false;
        out["truncated"] = steps >= horizon;
        if (steps >= horizon) reset(0, false);
        return out;
    }
};

std::string serve_line(ToyEnv& env, const std::string& line) {
    json msg = json::parse(line, nullptr, false);
    if (msg.is_discarded() || !msg.contains("cmd")) return R"({"error":"malformed message"})";
    const std::string cmd = msg["cmd"].is_string() ? msg["cmd"].get<std::string>() : "";
    if (cmd == "spec") {
        json out;
        out["state_dim"] = env.state_dim;
        out["action_dim"] = env.action_dim;
        out["action_low"] = std::vector<double>(env.action_dim, -1.0);
        out["action_high"] = std::vector<double>(env.action_dim, 1.0);
        return out.dump();
    }
    if (cmd == "reset") {
        const bool has_seed = msg.contains("seed") && msg["seed"].is_number();
        const std::uint64_t seed = has_seed ? msg["seed"].get<std::uint64_t>() : 0;
        json out;
        out["state"] = env.reset(seed, has_seed);
        return out.dump();
    }
    if (cmd == "step") {
        if (!msg.contains("action") || !msg["action"].is_array() ||
            static_cast<int>(msg["action"].size()) != env.action_dim)
            return R"({"error":"bad action"})";
        std::vector<double> action;
        for (const auto& v : msg["action"]) {
            if (!v.is_number()) return R"({"error":"bad action"})";
            action.push_back(v.get<double>());
        }
        return env.step(action).dump();
    }
    return R"({"error":"unknown cmd"})";
}

int serve_stream(ToyEnv& env, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out << serve_line(env, line) << "\n";
        out.flush();
    }
    return 0;
}

int serve_tcp(ToyEnv& env, int port) {
    int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) {
        std::perror("socket");
        return 1;
    }
    int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listener, 1) != 0) {
        std::perror("bind/listen");
        return 1;
    }
    std::fprintf(stderr, "envserver listening on 127.0.0.1:%d\n", port);
    for (;;) {
        int client = ::accept(listener, nullptr, nullptr);
        if (client < 0) continue;
        std::string buffer;
        char chunk[4096];
        for (;;) {
            ssize_t n = ::read(client, chunk, sizeof(chunk));
            if (n <= 0) break;
            buffer.append(chunk, static_cast<size_t>(n));
            for (auto pos = buffer.find('\n'); pos != std::string::npos;
                 pos = buffer.find('\n')) {
                std::string line = buffer.substr(0, pos);
                buffer.erase(0, pos + 1);
                if (line.empty()) continue;
                std::string reply = serve_line(env, line) + "\n";
                if (::write(client, reply.data(), reply.size()) < 0) break;
            }
        }
        ::close(client);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"toy locomotion environment speaking the line-JSON env protocol"};
    int state_dim = 17;
    int action_dim = 6;
    int horizon = 1000;
    int tcp_port = 0;
    app.add_option("--state-dim", state_dim, "observation dimension")->check(CLI::Range(3, 1024));
    app.add_option("--action-dim", action_dim, "action dimension")->check(CLI::Range(1, 256));
    app.add_option("--horizon", horizon, "steps before truncation")->check(CLI::PositiveNumber);
    app.add_option("--tcp", tcp_port, "listen on 127.0.0.1:<port> instead of stdio");
    CLI11_PARSE(app, argc, argv);

    ToyEnv env(state_dim, action_dim, horizon);
    if (tcp_port > 0) return serve_tcp(env, tcp_port);
    return serve_stream(env, std::cin, std::cout);
}
