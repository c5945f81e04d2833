#include "fbcir/remote.hpp"

#include "fbcir/error.hpp"
#include "fbcir/protocol.hpp"

namespace fbcir {

ConnectionPool::ConnectionPool(Endpoint endpoint, RemoteOptions options)
    : endpoint_(std::move(endpoint)), options_(options) {
    const auto size = std::max<std::size_t>(1, options_.pool_size);
    for (std::size_t i = 0; i < size; ++i) slots_.push_back(std::make_unique<Slot>());
}

std::string ConnectionPool::round_trip(const std::string& request_line) {
    auto& slot = *slots_[next_slot_.fetch_add(1) % slots_.size()];
    std::lock_guard lock(slot.mutex);

    std::string last_error;
    ErrorCode last_code = ErrorCode::Transport;
    for (std::size_t attempt = 0; attempt <= options_.retries; ++attempt) {
        try {
            if (!slot.channel) slot.channel = open_channel(endpoint_);
            slot.channel->write_line(request_line);
            auto line = slot.channel->read_line(options_.timeout);
            if (!line) throw Error(ErrorCode::Timeout, "no response from " + endpoint_.to_string());
            return std::move(*line);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Transport && e.code() != ErrorCode::Timeout) throw;
            // Requests are idempotent, so a fresh connection can simply resend.
            slot.channel.reset();
            last_error = e.detail();
            last_code = e.code();
        }
    }
    throw Error(last_code, last_error + " (after " + std::to_string(options_.retries + 1) + " attempts)");
}

RemoteScorer::RemoteScorer(Endpoint endpoint, RemoteOptions options) : pool_(std::move(endpoint), options) {}

std::vector<double> RemoteScorer::do_score(const ScoreRequest& request) {
    const auto line = pool_.round_trip(protocol::encode_score_request_line(request));
    return protocol::decode_score_response(line, request.sample_id, request.candidates.size());
}

}  // namespace fbcir
