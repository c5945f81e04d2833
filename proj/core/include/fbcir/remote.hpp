#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "fbcir/scoring.hpp"
#include "fbcir/transport.hpp"

namespace fbcir {

struct RemoteOptions {
    std::chrono::milliseconds timeout{30000};
    /// Extra attempts after a transport failure or timeout; each reopens the connection.
    std::size_t retries = 2;
    std::size_t pool_size = 1;
};

/// Pool of line channels to one endpoint. Each connection carries one request at a time.
class ConnectionPool {
public:
    ConnectionPool(Endpoint endpoint, RemoteOptions options);

    /// Sends one request line and returns the single response line.
    /// Throws Transport or Timeout once retries are exhausted.
    std::string round_trip(const std::string& request_line);

    const Endpoint& endpoint() const noexcept { return endpoint_; }

private:
    struct Slot {
        std::mutex mutex;
        std::unique_ptr<LineChannel> channel;
    };

    Endpoint endpoint_;
    RemoteOptions options_;
    std::vector<std::unique_ptr<Slot>> slots_;
    std::atomic<std::size_t> next_slot_{0};
};

/// Scorer backed by an out-of-process peer speaking the scorer wire protocol.
class RemoteScorer final : public Scorer {
public:
    RemoteScorer(Endpoint endpoint, RemoteOptions options = {});

protected:
    std::vector<double> do_score(const ScoreRequest& request) override;

private:
    ConnectionPool pool_;
};

}  // namespace fbcir
