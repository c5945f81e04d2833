// Deterministic scorer/generator peer for protocol tests. Speaks the wire protocol on
// stdin/stdout, or on TCP with --listen (prints "port N" on stdout, then serves connections).
//
// Misbehaviour modes exercise the client's error handling:
//   ok, short (one score too few), nan, extra (stray line after each response), error,
//   wrong_id, crash (exit on first request), crash_once (crash unless --state exists), hang.

#include <CLI11.hpp>
#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fbcir/augment.hpp"

namespace {

using nlohmann::json;

struct Options {
    std::string mode = "ok";
    std::string table_path;
    std::string state_path;
    std::uint64_t seed = 0;
    std::optional<int> listen_port;
};

struct Peer {
    Options options;
    std::map<std::string, double> table;

    double unit(const std::string& key) const {
        return static_cast<double>(fbcir::stable_hash(key, options.seed) % 10007) / 10007.0;
    }

    // Mean over active tokens of a hash-derived affinity between token and candidate.
    double synthetic_score(const json& query, const std::string& asset) const {
        double sum = 0.0;
        std::size_t total = 0;
        for (const auto& t : query.value("image", json::array())) {
            ++total;
            if (t.value("active", true)) sum += unit("i:" + t.value("mask", std::string()) + "|" + asset);
        }
        for (const auto& t : query.value("text", json::array())) {
            ++total;
            if (t.value("active", true)) sum += unit("t:" + t.value("surface", std::string()) + "|" + asset);
        }
        return total == 0 ? 0.0 : sum / static_cast<double>(total);
    }

    json generate(const std::string& sample_id, const std::string& capability, const json& input) const {
        fbcir::MockGenerationClient client(options.seed);
        std::vector<std::string> outputs;
        if (capability == "mutate_text") {
            outputs = client.mutate_text(sample_id, input.at("text").get<std::string>(), input.at("count").get<std::size_t>());
        } else if (capability == "edit_image") {
            outputs.push_back(client.edit_image(sample_id, input.at("image").get<std::string>(),
                                                input.at("instruction").get<std::string>()));
        } else if (capability == "generate_image") {
            outputs.push_back(client.generate_image(sample_id, input.at("description").get<std::string>(),
                                                    input.at("variant").get<std::string>()));
        } else if (capability == "describe") {
            outputs.push_back(client.describe(sample_id, input.at("image").get<std::string>(),
                                              input.at("text").get<std::string>()));
        } else {
            throw std::runtime_error("unknown capability " + capability);
        }
        return json{{"v", 1}, {"type", "generated"}, {"sample_id", sample_id}, {"outputs", outputs}};
    }

    /// Response lines for one request line; nullopt means "terminate the connection".
    std::optional<std::vector<std::string>> respond(const std::string& line) const {
        const auto& mode = options.mode;
        if (mode == "crash") return std::nullopt;
        if (mode == "crash_once" && !std::filesystem::exists(options.state_path)) {
            std::ofstream(options.state_path) << "crashed\n";
            return std::nullopt;
        }
        if (mode == "hang") {
            std::this_thread::sleep_for(std::chrono::hours(1));
            return std::nullopt;
        }

        json request;
        std::string sample_id;
        try {
            request = json::parse(line);
            sample_id = request.value("sample_id", std::string());
        } catch (const json::exception& e) {
            return std::vector<std::string>{
                json{{"v", 1}, {"type", "error"}, {"sample_id", ""}, {"message", e.what()}}.dump()};
        }
        auto error_line = [&](const std::string& message) {
            return json{{"v", 1}, {"type", "error"}, {"sample_id", sample_id}, {"message", message}}.dump();
        };
        if (mode == "error") return std::vector<std::string>{error_line("mock backend failure")};

        json response;
        try {
            if (request.value("type", "") == "generate") {
                response = generate(sample_id, request.at("capability").get<std::string>(), request.at("input"));
            } else {
                std::vector<double> scores;
                for (const auto& c : request.at("candidates")) {
                    const auto asset = c.value("asset", std::string());
                    if (!table.empty()) {
                        const auto it = table.find(asset);
                        if (it == table.end()) return std::vector<std::string>{error_line("no table entry for " + asset)};
                        scores.push_back(it->second);
                    } else {
                        scores.push_back(synthetic_score(request.at("query"), asset));
                    }
                }
                if (mode == "short" && !scores.empty()) scores.pop_back();
                response = json{{"v", 1}, {"type", "scores"}, {"sample_id", sample_id}, {"scores", scores}};
                if (mode == "nan" && !scores.empty()) {
                    // JSON has no NaN literal; nlohmann would emit null, so splice the token in.
                    auto text = response.dump();
                    const auto pos = text.find("\"scores\":[") + 10;
                    const auto end = text.find_first_of(",]", pos);
                    text.replace(pos, end - pos, "NaN");
                    return std::vector<std::string>{text};
                }
            }
        } catch (const std::exception& e) {
            return std::vector<std::string>{error_line(e.what())};
        }
        if (mode == "wrong_id") response["sample_id"] = sample_id + "-other";
        std::vector<std::string> lines{response.dump()};
        if (mode == "extra") lines.push_back(response.dump());
        return lines;
    }
};

int serve_stdio(const Peer& peer) {
    std::string line;
    while (std::getline(std::cin, line)) {
        const auto lines = peer.respond(line);
        if (!lines) return 1;
        for (const auto& l : *lines) std::cout << l << '\n';
        std::cout.flush();
    }
    return 0;
}

bool send_all(int fd, const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
        const auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

void serve_connection(const Peer& peer, int fd) {
    std::string buffer;
    char chunk[4096];
    for (;;) {
        const auto n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t newline;
        while ((newline = buffer.find('\n')) != std::string::npos) {
            const auto line = buffer.substr(0, newline);
            buffer.erase(0, newline + 1);
            const auto lines = peer.respond(line);
            if (!lines) {
                ::close(fd);
                return;
            }
            for (const auto& l : *lines) {
                if (!send_all(fd, l + "\n")) {
                    ::close(fd);
                    return;
                }
            }
        }
    }
    ::close(fd);
}

int serve_tcp(const Peer& peer, int port) {
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listener < 0) return 1;
    const int yes = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 16) != 0) {
        std::cerr << "mock endpoint: cannot listen on port " << port << '\n';
        return 1;
    }
    socklen_t len = sizeof addr;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    std::cout << "port " << ntohs(addr.sin_port) << std::endl;
    for (;;) {
        const int fd = ::accept(listener, nullptr, nullptr);
        if (fd < 0) continue;
        std::thread([&peer, fd] { serve_connection(peer, fd); }).detach();
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mock scorer/generator endpoint", "fbcir_mock_endpoint"};
    Peer peer;
    app.add_option("--mode", peer.options.mode, "Behaviour")
        ->capture_default_str()
        ->check(CLI::IsMember({"ok", "short", "nan", "extra", "error", "wrong_id", "crash", "crash_once", "hang"}));
    app.add_option("--table", peer.options.table_path, "JSON object mapping candidate assets to fixed scores");
    app.add_option("--state", peer.options.state_path, "Marker file used by crash_once");
    app.add_option("--seed", peer.options.seed, "Seed for synthetic scores and generated content");
    app.add_option("--listen", peer.options.listen_port, "Serve TCP on this port (0 picks a free port)");
    CLI11_PARSE(app, argc, argv);

    if (peer.options.mode == "crash_once" && peer.options.state_path.empty()) {
        std::cerr << "crash_once needs --state\n";
        return 2;
    }
    if (!peer.options.table_path.empty()) {
        std::ifstream in(peer.options.table_path);
        if (!in) {
            std::cerr << "cannot open " << peer.options.table_path << '\n';
            return 2;
        }
        peer.table = json::parse(in).get<std::map<std::string, double>>();
    }
    if (peer.options.listen_port) return serve_tcp(peer, *peer.options.listen_port);
    return serve_stdio(peer);
}
