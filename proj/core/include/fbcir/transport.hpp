#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace fbcir {

/// Where a line-protocol peer lives: `exec:<shell command>` or `tcp://host:port`.
struct Endpoint {
    enum class Kind { Exec, Tcp };

    Kind kind = Kind::Exec;
    std::string command;
    std::string host;
    int port = 0;

    /// Throws Parse on anything else.
    static Endpoint parse(std::string_view text);
    std::string to_string() const;
};

/// Bidirectional newline-delimited byte stream.
class LineChannel {
public:
    virtual ~LineChannel() = default;

    /// Writes text followed by '\n'. Throws Transport.
    virtual void write_line(std::string_view line) = 0;

    /// Next line without its terminator; nullopt on timeout. Throws Transport on EOF or I/O error.
    virtual std::optional<std::string> read_line(std::chrono::milliseconds timeout) = 0;
};

/// Opens a fresh connection (spawns the child or connects the socket). Throws Transport.
std::unique_ptr<LineChannel> open_channel(const Endpoint& endpoint);

}  // namespace fbcir
