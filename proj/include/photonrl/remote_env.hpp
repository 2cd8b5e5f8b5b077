// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>

#include "photonrl/envs.hpp"

namespace photonrl::envs {

// Newline-delimited JSON protocol, one message per line:
//   -> {"cmd":"spec"}
//   <- {"state_dim":17,"action_dim":6,"action_low":[...],"action_high":[...]}
//   -> {"cmd":"reset","seed":123}
//   <- {"state":[...]}
//   -> {"cmd":"step","action":[...]}
//   <- {"state":[...],"reward":r,"done":b,"truncated":b}
// Floating-point values are written with 17 significant digits so doubles
// survive the round trip bit-exactly. Unknown fields are ignored; a reply of
// {"error":"..."} or any malformed line raises ProtocolError.

struct RemoteEnvEndpoint {
    // "tcp:<host>:<port>" or "stdio:<command line>" (command is spawned and
    // spoken to over its stdin/stdout).
    std::string transport;
    int timeout_ms = 10000;
    // When set, the server's declared dimensions must match.
    std::optional<int> expect_state_dim;
    std::optional<int> expect_action_dim;
};

class LineTransport {
public:
    virtual ~LineTransport() = default;
    // Sends one line (newline appended) and returns the next reply line.
    virtual std::string roundtrip(const std::string& line) = 0;
};

std::unique_ptr<LineTransport> open_transport(const RemoteEnvEndpoint& endpoint);

class RemoteEnv final : public Environment {
public:
    explicit RemoteEnv(const RemoteEnvEndpoint& endpoint);
    // For tests: adopt an already-open transport.
    RemoteEnv(std::unique_ptr<LineTransport> transport, const RemoteEnvEndpoint& endpoint);

    const EnvSpec& spec() const override { return spec_; }
    Eigen::VectorXd reset(std::optional<std::uint64_t> seed = std::nullopt) override;
    StepResult step(const Eigen::VectorXd& action) override;

private:
    void fetch_spec(const RemoteEnvEndpoint& endpoint);
    std::unique_ptr<LineTransport> transport_;
    EnvSpec spec_;
};

// 17-significant-digit decimal, the protocol's number format.
std::string format_double(double value);

}  // namespace photonrl::envs
