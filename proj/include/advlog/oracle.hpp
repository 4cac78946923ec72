#pragma once

// The black-box boundary between attacker and detector: raw text lines in,
// anomaly scores out. Available in-process or over a newline-delimited JSON
// TCP protocol, so the attack can run with zero access to detector internals.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "advlog/detector.hpp"

namespace advlog {

struct OracleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ScoreOracle {
public:
    virtual ~ScoreOracle() = default;
    virtual std::vector<double> score_batch(const std::vector<std::string>& lines) = 0;
};

// Scores lines against a frozen detector. Unparseable lines receive a fixed
// penalty worse than any in-schema line instead of raising an error.
class DetectorOracle : public ScoreOracle {
public:
    explicit DetectorOracle(const Detector& detector, size_t max_len = 32)
        : detector_(detector),
          penalty_(static_cast<double>(max_len + 1) *
                   std::log(static_cast<double>(detector.vocab().size()))) {}

    std::vector<double> score_batch(const std::vector<std::string>& lines) override;
    double penalty_score() const { return penalty_; }

private:
    const Detector& detector_;
    double penalty_;
};

// Counts how many lines have been scored; used for cost accounting.
class CountingOracle : public ScoreOracle {
public:
    explicit CountingOracle(ScoreOracle& inner) : inner_(inner) {}
    std::vector<double> score_batch(const std::vector<std::string>& lines) override {
        count_ += lines.size();
        return inner_.score_batch(lines);
    }
    size_t count() const { return count_; }
    void reset() { count_ = 0; }

private:
    ScoreOracle& inner_;
    size_t count_ = 0;
};

// TCP service speaking one JSON object per line:
//   request  {"id":<uint>,"lines":[<string>...]}
//   success  {"id":<uint>,"scores":[<number>...]}
//   failure  {"id":<uint>,"error":<string>}
// Scores are serialized with 9 significant digits. Responses are sent in
// request order per connection; concurrent connections are independent.
class OracleServer {
public:
    OracleServer(const Detector& detector, const std::string& host, uint16_t port);
    ~OracleServer();

    uint16_t port() const { return port_; }  // actual port (useful with port 0)
    void stop();

private:
    void accept_loop();
    void handle_connection(int fd);

    DetectorOracle oracle_;
    int listen_fd_ = -1;
    uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::mutex conn_mu_;
    std::vector<int> conn_fds_;  // open connections, shut down on stop()
};

// Client-side oracle over the wire protocol; reconnects and retries
// idempotently on transient failures.
class RemoteOracle : public ScoreOracle {
public:
    RemoteOracle(const std::string& host, uint16_t port, int max_retries = 3);
    ~RemoteOracle() override;

    std::vector<double> score_batch(const std::vector<std::string>& lines) override;

private:
    void connect_();
    void close_();

    std::string host_;
    uint16_t port_;
    int max_retries_;
    int fd_ = -1;
    uint64_t next_id_ = 1;
    std::string recv_buf_;
};

}  // namespace advlog
