#include "fbcir/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "fbcir/error.hpp"

namespace fbcir {

Endpoint Endpoint::parse(std::string_view text) {
    Endpoint endpoint;
    if (text.starts_with("exec:")) {
        endpoint.kind = Kind::Exec;
        endpoint.command = std::string(text.substr(5));
        if (endpoint.command.empty()) throw Error(ErrorCode::Parse, "empty exec command");
        return endpoint;
    }
    if (text.starts_with("tcp://")) {
        const auto rest = text.substr(6);
        const auto colon = rest.rfind(':');
        if (colon == std::string_view::npos || colon == 0) throw Error(ErrorCode::Parse, "expected tcp://host:port");
        endpoint.kind = Kind::Tcp;
        endpoint.host = std::string(rest.substr(0, colon));
        const auto port_text = rest.substr(colon + 1);
        auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), endpoint.port);
        if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || endpoint.port <= 0 ||
            endpoint.port > 65535) {
            throw Error(ErrorCode::Parse, "invalid tcp port '" + std::string(port_text) + "'");
        }
        return endpoint;
    }
    throw Error(ErrorCode::Parse, "endpoint must start with exec: or tcp:// (got '" + std::string(text) + "')");
}

std::string Endpoint::to_string() const {
    return kind == Kind::Exec ? "exec:" + command : "tcp://" + host + ":" + std::to_string(port);
}

namespace {

std::string errno_message(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

// Shared buffered reader over a readable file descriptor.
class FdLineReader {
public:
    std::optional<std::string> read_line(int fd, std::chrono::milliseconds timeout) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        for (;;) {
            if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
                std::string line = buffer_.substr(0, pos);
                buffer_.erase(0, pos + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            const auto remaining =
                std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) return std::nullopt;
            pollfd pfd{fd, POLLIN, 0};
            const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
            if (ready < 0) {
                if (errno == EINTR) continue;
                throw Error(ErrorCode::Transport, errno_message("poll"));
            }
            if (ready == 0) return std::nullopt;
            char chunk[4096];
            const auto got = ::read(fd, chunk, sizeof chunk);
            if (got < 0) {
                if (errno == EINTR || errno == EAGAIN) continue;
                throw Error(ErrorCode::Transport, errno_message("read"));
            }
            if (got == 0) throw Error(ErrorCode::Transport, "peer closed the stream");
            buffer_.append(chunk, static_cast<std::size_t>(got));
        }
    }

private:
    std::string buffer_;
};

void write_all(int fd, std::string_view data, bool is_socket) {
    while (!data.empty()) {
        const auto written = is_socket ? ::send(fd, data.data(), data.size(), MSG_NOSIGNAL)
                                       : ::write(fd, data.data(), data.size());
        if (written < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::Transport, errno_message("write"));
        }
        data.remove_prefix(static_cast<std::size_t>(written));
    }
}

class ProcessChannel final : public LineChannel {
public:
    explicit ProcessChannel(const std::string& command) {
        // Writes to a dead child must surface as EPIPE, not kill the process.
        ::signal(SIGPIPE, SIG_IGN);
        int to_child[2];
        int from_child[2];
        if (::pipe2(to_child, O_CLOEXEC) != 0) throw Error(ErrorCode::Transport, errno_message("pipe"));
        if (::pipe2(from_child, O_CLOEXEC) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw Error(ErrorCode::Transport, errno_message("pipe"));
        }
        pid_ = ::fork();
        if (pid_ < 0) throw Error(ErrorCode::Transport, errno_message("fork"));
        if (pid_ == 0) {
            // Own process group, so the shell and whatever it spawns can be killed together.
            ::setpgid(0, 0);
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        write_fd_ = to_child[1];
        read_fd_ = from_child[0];
    }

    ~ProcessChannel() override {
        if (write_fd_ >= 0) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        if (pid_ > 0) {
            // Closing stdin asks the child to exit; give it a moment before killing it.
            int status = 0;
            for (int attempt = 0; attempt < 50; ++attempt) {
                if (::waitpid(pid_, &status, WNOHANG) != 0) {
                    // The shell may have left children behind.
                    ::kill(-pid_, SIGKILL);
                    return;
                }
                ::usleep(2000);
            }
            ::kill(-pid_, SIGKILL);
            ::waitpid(pid_, &status, 0);
        }
    }

    ProcessChannel(const ProcessChannel&) = delete;
    ProcessChannel& operator=(const ProcessChannel&) = delete;

    void write_line(std::string_view line) override {
        std::string framed(line);
        framed.push_back('\n');
        write_all(write_fd_, framed, false);
    }

    std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
        return reader_.read_line(read_fd_, timeout);
    }

private:
    pid_t pid_ = -1;
    int write_fd_ = -1;
    int read_fd_ = -1;
    FdLineReader reader_;
};

class TcpChannel final : public LineChannel {
public:
    TcpChannel(const std::string& host, int port) {
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* found = nullptr;
        const auto service = std::to_string(port);
        if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
            throw Error(ErrorCode::Transport, std::string("resolve ") + host + ": " + ::gai_strerror(rc));
        }
        std::string last_error = "no addresses";
        for (auto* ai = found; ai != nullptr; ai = ai->ai_next) {
            const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
            if (fd < 0) {
                last_error = errno_message("socket");
                continue;
            }
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
                fd_ = fd;
                break;
            }
            last_error = errno_message("connect");
            ::close(fd);
        }
        ::freeaddrinfo(found);
        if (fd_ < 0) throw Error(ErrorCode::Transport, host + ":" + service + ": " + last_error);
    }

    ~TcpChannel() override {
        if (fd_ >= 0) ::close(fd_);
    }

    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;

    void write_line(std::string_view line) override {
        std::string framed(line);
        framed.push_back('\n');
        write_all(fd_, framed, true);
    }

    std::optional<std::string> read_line(std::chrono::milliseconds timeout) override {
        return reader_.read_line(fd_, timeout);
    }

private:
    int fd_ = -1;
    FdLineReader reader_;
};

}  // namespace

std::unique_ptr<LineChannel> open_channel(const Endpoint& endpoint) {
    if (endpoint.kind == Endpoint::Kind::Exec) return std::make_unique<ProcessChannel>(endpoint.command);
    return std::make_unique<TcpChannel>(endpoint.host, endpoint.port);
}

}  // namespace fbcir
