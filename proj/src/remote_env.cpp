// SPDX-License-Identifier: Apache-2.0

#include "photonrl/remote_env.hpp"

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "photonrl/errors.hpp"

namespace photonrl::envs {

using nlohmann::json;

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace {

// Shared line-framed I/O over a pair of file descriptors with poll timeouts.
class FdTransport : public LineTransport {
public:
    FdTransport(int read_fd, int write_fd, int timeout_ms)
        : read_fd_(read_fd), write_fd_(write_fd), timeout_ms_(timeout_ms) {}

    ~FdTransport() override {
        if (read_fd_ >= 0) ::close(read_fd_);
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    }

    std::string roundtrip(const std::string& line) override {
        write_line(line);
        return read_line();
    }

protected:
    void write_line(const std::string& line) {
        std::string framed = line;
        framed.push_back('\n');
        size_t off = 0;
        while (off < framed.size()) {
            ssize_t n = ::write(write_fd_, framed.data() + off, framed.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("remote env write failed: ") +
                                    std::strerror(errno));
            }
            off += static_cast<size_t>(n);
        }
    }

    std::string read_line() {
        for (;;) {
            auto newline = buffer_.find('\n');
            if (newline != std::string::npos) {
                std::string line = buffer_.substr(0, newline);
                buffer_.erase(0, newline + 1);
                return line;
            }
            struct pollfd pfd{read_fd_, POLLIN, 0};
            int ready = ::poll(&pfd, 1, timeout_ms_);
            if (ready == 0) throw ProtocolError("remote env timed out waiting for a reply");
            if (ready < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("remote env poll failed: ") +
                                    std::strerror(errno));
            }
            char chunk[4096];
            ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
            if (n == 0) throw ProtocolError("remote env closed the connection");
            if (n < 0) {
                if (errno == EINTR) continue;
                throw ProtocolError(std::string("remote env read failed: ") +
                                    std::strerror(errno));
            }
            buffer_.append(chunk, static_cast<size_t>(n));
        }
    }

    int read_fd_;
    int write_fd_;
    int timeout_ms_;
    std::string buffer_;
};

class TcpTransport final : public FdTransport {
public:
    TcpTransport(const std::string& host, const std::string& port, int timeout_ms)
        : FdTransport(-1, -1, timeout_ms) {
        struct addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        struct addrinfo* info = nullptr;
        if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &info); rc != 0)
            throw ProtocolError("remote env resolve failed for " + host + ":" + port + " (" +
                                gai_strerror(rc) + ")");
        int fd = -1;
        for (auto* p = info; p != nullptr; p = p->ai_next) {
            fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
            ::close(fd);
            fd = -1;
        }
        ::freeaddrinfo(info);
        if (fd < 0) throw ProtocolError("remote env could not connect to " + host + ":" + port);
        read_fd_ = fd;
        write_fd_ = fd;
    }
};

class StdioTransport final : public FdTransport {
public:
    StdioTransport(const std::string& command, int timeout_ms)
        : FdTransport(-1, -1, timeout_ms) {
        std::vector<std::string> args;
        std::istringstream split(command);
        for (std::string tok; split >> tok;) args.push_back(tok);
        if (args.empty()) throw ConfigError("empty stdio env command");

        int to_child[2], from_child[2];
        if (::pipe(to_child) != 0 || ::pipe(from_child) != 0)
            throw ProtocolError("remote env pipe setup failed");

        pid_ = ::fork();
        if (pid_ < 0) throw ProtocolError("remote env fork failed");
        if (pid_ == 0) {
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            std::vector<char*> argv;
            argv.reserve(args.size() + 1);
            for (auto& a : args) argv.push_back(a.data());
            argv.push_back(nullptr);
            ::execvp(argv[0], argv.data());
            std::perror("execvp");
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        read_fd_ = from_child[0];
        write_fd_ = to_child[1];
    }

    ~StdioTransport() override {
        if (write_fd_ >= 0) {
            ::close(write_fd_);
            write_fd_ = -1;
        }
        if (pid_ > 0) {
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
    }

private:
    pid_t pid_ = -1;
};

json parse_reply(const std::string& line) {
    json reply = json::parse(line, nullptr, false);
    if (reply.is_discarded())
        throw ProtocolError("remote env sent malformed JSON: " + line);
    if (reply.contains("error"))
        throw ProtocolError("remote env error: " + reply["error"].dump());
    return reply;
}

Eigen::VectorXd parse_vector(const json& node, const char* field, int expected_dim) {
    if (!node.contains(field) || !node[field].is_array())
        throw ProtocolError(std::string("remote env reply missing array field '") + field + "'");
    const auto& arr = node[field];
    if (expected_dim >= 0 && static_cast<int>(arr.size()) != expected_dim)
        throw ProtocolError(std::string("remote env field '") + field + "' has length " +
                            std::to_string(arr.size()) + ", expected " +
                            std::to_string(expected_dim));
    Eigen::VectorXd v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number())
            throw ProtocolError(std::string("remote env field '") + field + "' is not numeric");
        v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    }
    return v;
}

}  // namespace

std::unique_ptr<LineTransport> open_transport(const RemoteEnvEndpoint& endpoint) {
    const std::string& t = endpoint.transport;
    if (t.rfind("tcp:", 0) == 0) {
        const std::string rest = t.substr(4);
        auto colon = rest.rfind(':');
        if (colon == std::string::npos)
            throw ConfigError("tcp endpoint must be tcp:<host>:<port>");
        return std::make_unique<TcpTransport>(rest.substr(0, colon), rest.substr(colon + 1),
                                              endpoint.timeout_ms);
    }
    if (t.rfind("stdio:", 0) == 0)
        return std::make_unique<StdioTransport>(t.substr(6), endpoint.timeout_ms);
    throw ConfigError("unknown remote env transport '" + t +
                      "' (expected tcp:<host>:<port> or stdio:<command>)");
}

RemoteEnv::RemoteEnv(const RemoteEnvEndpoint& endpoint)
    : RemoteEnv(open_transport(endpoint), endpoint) {}

RemoteEnv::RemoteEnv(std::unique_ptr<LineTransport> transport, const RemoteEnvEndpoint& endpoint)
    : transport_(std::move(transport)) {
    fetch_spec(endpoint);
}

void RemoteEnv::fetch_spec(const RemoteEnvEndpoint& endpoint) {
    json reply = parse_reply(transport_->roundtrip(R"({"cmd":"spec"})"));
    if (!reply.contains("state_dim") || !reply.contains("action_dim"))
        throw ProtocolError("remote env spec reply missing dimensions");
    spec_.state_dim = reply["state_dim"].get<int>();
    spec_.action_dim = reply["action_dim"].get<int>();
    if (spec_.state_dim < 1 || spec_.action_dim < 1)
        throw ProtocolError("remote env declared non-positive dimensions");
    spec_.action_low = parse_vector(reply, "action_low", spec_.action_dim);
    spec_.action_high = parse_vector(reply, "action_high", spec_.action_dim);
    if (endpoint.expect_state_dim && *endpoint.expect_state_dim != spec_.state_dim)
        throw ProtocolError("remote env state_dim " + std::to_string(spec_.state_dim) +
                            " does not match the declared " +
                            std::to_string(*endpoint.expect_state_dim));
    if (endpoint.expect_action_dim && *endpoint.expect_action_dim != spec_.action_dim)
        throw ProtocolError("remote env action_dim " + std::to_string(spec_.action_dim) +
                            " does not match the declared " +
                            std::to_string(*endpoint.expect_action_dim));
}

Eigen::VectorXd RemoteEnv::reset(std::optional<std::uint64_t> seed) {
    std::string msg = R"({"cmd":"reset")";
    if (seed.has_value()) msg += ",\"seed\":" + std::to_string(*seed);
    msg += "}";
    json reply = parse_reply(transport_->roundtrip(msg));
    return parse_vector(reply, "state", spec_.state_dim);
}

StepResult RemoteEnv::step(const Eigen::VectorXd& action) {
    if (action.size() != spec_.action_dim)
        throw ProtocolError("action length " + std::to_string(action.size()) +
                            " does not match remote action_dim " +
                            std::to_string(spec_.action_dim));
    std::string msg = R"({"cmd":"step","action":[)";
    for (Eigen::Index i = 0; i < action.size(); ++i) {
        if (i > 0) msg += ',';
        msg += format_double(action[i]);
    }
    msg += "]}";
    json reply = parse_reply(transport_->roundtrip(msg));

    StepResult result;
    result.state = parse_vector(reply, "state", spec_.state_dim);
    if (!reply.contains("reward") || !reply["reward"].is_number())
        throw ProtocolError("remote env step reply missing numeric reward");
    result.reward = reply["reward"].get<double>();
    result.done = reply.value("done", false);
    result.truncated = reply.value("truncated", false);
    return result;
}

}  // namespace photonrl::envs
