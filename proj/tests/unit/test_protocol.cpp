#include <doctest.h>

#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>

#include "fbcir/augment.hpp"
#include "fbcir/error.hpp"
#include "fbcir/protocol.hpp"
#include "fbcir/remote.hpp"

extern char** environ;

using namespace fbcir;
using nlohmann::json;

namespace {

const std::string kMock = FBCIR_MOCK_ENDPOINT;

Endpoint mock(const std::string& args) { return Endpoint::parse("exec:" + kMock + " " + args); }

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::InvalidArgument;
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("fbcir-unit-" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::filesystem::remove(path);
    return path;
}

AugmentedSample asset_sample(std::size_t candidates) {
    const std::vector<RawSegment> segs{{0.6, std::nullopt, "m0"}, {0.4, std::nullopt, "m1"}};
    const std::vector<RawToken> toks{{"red", std::nullopt}, {"car", std::nullopt}};
    AugmentedSample s;
    s.sample_id = "remote-1";
    s.query = normalize_query(segs, toks);
    s.query_image = "q.png";
    for (std::size_t i = 0; i < candidates; ++i) {
        s.candidates.push_back({static_cast<CandidateId>(i), i == 0 ? CandidateKind::Positive : CandidateKind::Distractor,
                                std::nullopt, "c" + std::to_string(i) + ".png"});
    }
    return s;
}

// Mock endpoint serving TCP on an ephemeral port for the lifetime of the object.
class TcpMock {
public:
    explicit TcpMock(const std::string& mode) {
        int fds[2];
        REQUIRE(::pipe(fds) == 0);
        posix_spawn_file_actions_t actions;
        posix_spawn_file_actions_init(&actions);
        posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
        posix_spawn_file_actions_addclose(&actions, fds[0]);
        std::vector<std::string> args{kMock, "--mode", mode, "--listen", "0"};
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        REQUIRE(posix_spawn(&pid_, kMock.c_str(), &actions, nullptr, argv.data(), environ) == 0);
        posix_spawn_file_actions_destroy(&actions);
        ::close(fds[1]);
        std::string line;
        char c;
        while (::read(fds[0], &c, 1) == 1 && c != '\n') line += c;
        ::close(fds[0]);
        REQUIRE(line.rfind("port ", 0) == 0);
        port_ = std::stoi(line.substr(5));
    }
    ~TcpMock() {
        ::kill(pid_, SIGTERM);
        ::waitpid(pid_, nullptr, 0);
    }
    Endpoint endpoint() const { return Endpoint::parse("tcp://127.0.0.1:" + std::to_string(port_)); }

private:
    pid_t pid_ = 0;
    int port_ = 0;
};

}  // namespace

TEST_CASE("endpoint grammar") {
    const auto e = Endpoint::parse("exec:python adapter.py --x");
    CHECK(e.kind == Endpoint::Kind::Exec);
    CHECK(e.command == "python adapter.py --x");
    const auto t = Endpoint::parse("tcp://localhost:9000");
    CHECK(t.kind == Endpoint::Kind::Tcp);
    CHECK(t.host == "localhost");
    CHECK(t.port == 9000);
    CHECK(Endpoint::parse(t.to_string()).port == 9000);
    for (const char* bad : {"exec:", "tcp://host", "tcp://host:0", "tcp://host:70000", "http://x:1", "tcp://:80"}) {
        CHECK(code_of([&] { Endpoint::parse(bad); }) == ErrorCode::Parse);
    }
}

TEST_CASE("score requests carry active flags") {
    const auto s = asset_sample(2);
    const auto active = s.query.full_mask().without(2);
    const auto j = protocol::encode_score_request({s.sample_id, s.query, s.query_image, active, s.candidates});
    CHECK(j["type"] == "score");
    CHECK(j["query"]["image"][0]["mask"] == "m0");
    CHECK(j["query"]["image"][1]["active"] == true);
    CHECK(j["query"]["text"][0]["active"] == false);
    CHECK(j["query"]["text"][1]["active"] == true);
    CHECK(j["candidates"].size() == 2);
}

TEST_CASE("response validation") {
    auto decode = [](const std::string& line, std::size_t n = 2) {
        return protocol::decode_score_response(line, "s", n);
    };
    CHECK(decode(R"({"v":1,"type":"scores","sample_id":"s","scores":[0.5,-1]})") == std::vector<double>{0.5, -1});
    CHECK(code_of([&] { decode(R"({"v":1,"type":"scores","sample_id":"s","scores":[0.5]})"); }) ==
          ErrorCode::ProtocolViolation);
    CHECK(code_of([&] { decode(R"({"v":1,"type":"scores","sample_id":"s","scores":[0.5,NaN]})"); }) ==
          ErrorCode::ProtocolViolation);
    CHECK(code_of([&] { decode(R"({"v":1,"type":"scores","sample_id":"s","scores":[0.5,null]})"); }) ==
          ErrorCode::ProtocolViolation);
    CHECK(code_of([&] { decode(R"({"v":1,"type":"scores","sample_id":"t","scores":[0.5,1]})"); }) ==
          ErrorCode::ProtocolViolation);
    CHECK(code_of([&] { decode(R"({"v":2,"type":"scores","sample_id":"s","scores":[0.5,1]})"); }) ==
          ErrorCode::ProtocolViolation);
    CHECK(code_of([&] { decode(R"({"v":1,"type":"error","sample_id":"s","message":"oom"})"); }) == ErrorCode::Backend);
    CHECK(code_of([&] { decode("garbage"); }) == ErrorCode::ProtocolViolation);

    CHECK(protocol::decode_generate_response(R"({"v":1,"type":"generated","sample_id":"s","outputs":["a"]})", "s") ==
          std::vector<std::string>{"a"});
    CHECK(code_of([] { protocol::decode_generate_response(R"({"v":1,"type":"generated","sample_id":"s"})", "s"); }) ==
          ErrorCode::ProtocolViolation);
}

TEST_CASE("golden transcripts against the mock") {
    const auto cases = protocol::golden_transcripts();
    REQUIRE(cases.front().request["candidates"].size() == 2);
    auto channel = open_channel(mock("--mode ok"));
    channel->write_line(cases.front().request.dump());
    const auto line = channel->read_line(std::chrono::milliseconds(5000));
    REQUIRE(line);
    CHECK(protocol::decode_score_response(*line, "golden-0", 2).size() == 2);
}

TEST_CASE("protocol check outcomes") {
    const std::chrono::milliseconds timeout(5000);
    CHECK(protocol::run_protocol_check(mock("--mode ok"), timeout).passed());

    auto failure = [&](const std::string& mode) {
        const auto report = protocol::run_protocol_check(mock("--mode " + mode), timeout);
        REQUIRE_FALSE(report.passed());
        for (const auto& o : report.outcomes) {
            if (!o.passed) return o.message;
        }
        return std::string();
    };
    CHECK(failure("short").find("ProtocolViolation") != std::string::npos);
    CHECK(failure("nan").find("ProtocolViolation") != std::string::npos);
    CHECK(failure("extra").find("framing") != std::string::npos);
    CHECK(failure("wrong_id").find("framing") != std::string::npos);
    CHECK(failure("error").find("Backend") != std::string::npos);
    CHECK(failure("crash").find("Transport") != std::string::npos);
}

TEST_CASE("remote scores follow a fixed table") {
    const auto table = scratch("table.json");
    std::ofstream(table) << R"({"c0.png":0.25,"c1.png":0.75,"c2.png":-0.5})";
    RemoteScorer scorer(mock("--table " + table.string()));
    const auto s = asset_sample(3);
    const auto scores = scorer.score({s.sample_id, s.query, s.query_image, s.query.full_mask(), s.candidates});
    CHECK(scores == std::vector<double>{0.25, 0.75, -0.5});
    CHECK(rank(scorer, s, s.query.full_mask()).order == std::vector<CandidateId>{1, 0, 2});
}

TEST_CASE("remote scorer is deterministic and reflects masking") {
    RemoteScorer scorer(mock("--seed 3"));
    const auto s = asset_sample(4);
    const auto full = rank(scorer, s, s.query.full_mask());
    CHECK(rank(scorer, s, s.query.full_mask()) == full);
    CHECK(rank(scorer, s, s.query.full_mask().without(0)).scores != full.scores);
}

TEST_CASE("transport failures are retried on a fresh connection") {
    const auto state = scratch("crash_once.state");
    RemoteOptions options;
    options.retries = 1;
    RemoteScorer scorer(mock("--mode crash_once --state " + state.string()), options);
    const auto s = asset_sample(2);
    CHECK(scorer.score({s.sample_id, s.query, s.query_image, s.query.full_mask(), s.candidates}).size() == 2);
    CHECK(std::filesystem::exists(state));

    options.retries = 0;
    RemoteScorer no_retry(mock("--mode crash"), options);
    try {
        no_retry.score({s.sample_id, s.query, s.query_image, s.query.full_mask(), s.candidates});
        FAIL("expected Transport");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Transport);
        CHECK(std::string(e.what()).find("Transport: Transport") == std::string::npos);
    }
}

TEST_CASE("silent peers time out") {
    RemoteOptions options;
    options.retries = 0;
    options.timeout = std::chrono::milliseconds(200);
    RemoteScorer scorer(mock("--mode hang"), options);
    const auto s = asset_sample(2);
    CHECK(code_of([&] { scorer.score({s.sample_id, s.query, s.query_image, s.query.full_mask(), s.candidates}); }) ==
          ErrorCode::Timeout);
}

TEST_CASE("tcp endpoint") {
    TcpMock server("ok");
    RemoteOptions options;
    options.pool_size = 2;
    RemoteScorer scorer(server.endpoint(), options);
    const auto s = asset_sample(3);
    const auto a = scorer.score({s.sample_id, s.query, s.query_image, s.query.full_mask(), s.candidates});
    const auto b = scorer.score({s.sample_id, s.query, s.query_image, s.query.full_mask(), s.candidates});
    CHECK(a == b);
    CHECK(protocol::run_protocol_check(server.endpoint(), std::chrono::milliseconds(5000)).passed());
}

TEST_CASE("unreachable tcp endpoint is a transport error") {
    RemoteOptions options;
    options.retries = 0;
    RemoteScorer scorer(Endpoint::parse("tcp://127.0.0.1:1"), options);
    const auto s = asset_sample(2);
    CHECK(code_of([&] { scorer.score({s.sample_id, s.query, s.query_image, s.query.full_mask(), s.candidates}); }) ==
          ErrorCode::Transport);
}

TEST_CASE("remote generation matches the in-process mock") {
    RemoteGenerationClient remote(mock("--seed 7"));
    MockGenerationClient local(7);
    CHECK(remote.mutate_text("s", "a red car", 2) == local.mutate_text("s", "a red car", 2));
    CHECK(remote.edit_image("s", "q.png", "blue") == local.edit_image("s", "q.png", "blue"));
    CHECK(remote.generate_image("s", "desc", "positive") == local.generate_image("s", "desc", "positive"));
    CHECK(remote.describe("s", "q.png", "t") == local.describe("s", "q.png", "t"));
}
