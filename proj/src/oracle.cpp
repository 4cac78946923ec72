#include "advlog/oracle.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <mutex>

#include "json.hpp"

namespace advlog {

using nlohmann::json;

std::vector<double> DetectorOracle::score_batch(const std::vector<std::string>& lines) {
    std::vector<double> scores;
    scores.reserve(lines.size());
    for (const auto& text : lines) {
        try {
            auto line = parse_log_line(text);
            scores.push_back(detector_.anomaly_score(encode(detector_.vocab(), line)));
        } catch (const FieldCountError&) {
            scores.push_back(penalty_);
        } catch (const NonNumericTimeError&) {
            scores.push_back(penalty_);
        }
    }
    return scores;
}

namespace {

// Scores cross the wire with 9 significant digits.
double round_9sig(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return std::strtod(buf, nullptr);
}

bool send_all(int fd, const std::string& data) {
    size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) return false;
        sent += static_cast<size_t>(n);
    }
    return true;
}

// Reads one newline-terminated line, buffering leftovers.
bool recv_line(int fd, std::string& buf, std::string& line) {
    while (true) {
        size_t pos = buf.find('\n');
        if (pos != std::string::npos) {
            line = buf.substr(0, pos);
            buf.erase(0, pos + 1);
            return true;
        }
        char chunk[4096];
        ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) return false;
        buf.append(chunk, static_cast<size_t>(n));
    }
}

}  // namespace

OracleServer::OracleServer(const Detector& detector, const std::string& host, uint16_t port)
    : oracle_(detector) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw OracleError("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw OracleError("bad bind address: " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(listen_fd_);
        throw OracleError("bind failed on " + host + ":" + std::to_string(port));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        throw OracleError("listen failed");
    }
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

OracleServer::~OracleServer() { stop(); }

void OracleServer::stop() {
    bool expected = true;
    if (!running_.compare_exchange_strong(expected, false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    {
        // Unblock workers parked in recv() on live connections.
        std::lock_guard<std::mutex> lock(conn_mu_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& w : workers_)
        if (w.joinable()) w.join();
    workers_.clear();
}

void OracleServer::accept_loop() {
    while (running_) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_) break;
            continue;
        }
        {
            std::lock_guard<std::mutex> lock(conn_mu_);
            conn_fds_.push_back(fd);
        }
        workers_.emplace_back([this, fd] { handle_connection(fd); });
    }
}

void OracleServer::handle_connection(int fd) {
    std::string buf, line;
    while (running_ && recv_line(fd, buf, line)) {
        json reply;
        try {
            json req = json::parse(line);
            uint64_t id = req.at("id").get<uint64_t>();
            reply["id"] = id;
            try {
                auto lines = req.at("lines").get<std::vector<std::string>>();
                auto scores = oracle_.score_batch(lines);
                for (double& s : scores) s = round_9sig(s);
                reply["scores"] = scores;
            } catch (const std::exception&) {
                reply["error"] = "bad request";
            }
        } catch (const std::exception&) {
            reply = {{"id", 0}, {"error", "bad request"}};
        }
        if (!send_all(fd, reply.dump() + "\n")) break;
    }
    {
        // Deregister before close so stop() never touches a recycled fd.
        std::lock_guard<std::mutex> lock(conn_mu_);
        std::erase(conn_fds_, fd);
    }
    ::close(fd);
}

RemoteOracle::RemoteOracle(const std::string& host, uint16_t port, int max_retries)
    : host_(host), port_(port), max_retries_(max_retries) {}

RemoteOracle::~RemoteOracle() { close_(); }

void RemoteOracle::close_() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    recv_buf_.clear();
}

void RemoteOracle::connect_() {
    close_();
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host_.c_str(), std::to_string(port_).c_str(), &hints, &res) != 0 || !res)
        throw OracleError("cannot resolve " + host_);
    int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        throw OracleError("socket() failed");
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
        ::freeaddrinfo(res);
        ::close(fd);
        throw OracleError("cannot connect to " + host_ + ":" + std::to_string(port_));
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    fd_ = fd;
}

std::vector<double> RemoteOracle::score_batch(const std::vector<std::string>& lines) {
    json req = {{"id", next_id_}, {"lines", lines}};
    std::string payload = req.dump() + "\n";
    std::string last_error = "unreachable";
    for (int attempt = 0; attempt <= max_retries_; ++attempt) {
        if (fd_ < 0) {
            try {
                connect_();
            } catch (const OracleError& e) {
                last_error = e.what();
                continue;  // transient: retry the connection
            }
        }
        try {
            std::string line;
            if (!send_all(fd_, payload) || !recv_line(fd_, recv_buf_, line)) {
                close_();
                last_error = "connection lost";
                continue;
            }
            json reply = json::parse(line);
            if (reply.contains("error"))
                throw OracleError("oracle error: " + reply["error"].get<std::string>());
            if (reply.at("id").get<uint64_t>() != next_id_)
                throw OracleError("oracle response id mismatch");
            auto scores = reply.at("scores").get<std::vector<double>>();
            if (scores.size() != lines.size()) throw OracleError("oracle score count mismatch");
            ++next_id_;
            return scores;
        } catch (const OracleError&) {
            throw;
        } catch (const std::exception& e) {
            close_();
            last_error = e.what();
        }
    }
    throw OracleError("oracle unreachable after retries: " + last_error);
}

}  // namespace advlog
