#include "fbcir/protocol.hpp"

#include <cmath>

#include "fbcir/error.hpp"

namespace fbcir::protocol {

using nlohmann::json;

json encode_score_request(const ScoreRequest& request) {
    const auto& query = request.query;
    json image = json::array();
    for (const auto& token : query.image_tokens()) {
        image.push_back({{"id", token.id},
                         {"asset", request.query_image},
                         {"mask", token.mask},
                         {"active", request.active.test(token.id)}});
    }
    json text = json::array();
    for (const auto& token : query.text_tokens()) {
        text.push_back({{"id", token.id},
                        {"surface", token.surface},
                        {"active", request.active.test(query.text_global_index(token.id))}});
    }
    json candidates = json::array();
    for (const auto& c : request.candidates) candidates.push_back({{"id", c.id}, {"asset", c.asset}});
    return {{"v", kVersion},
            {"type", "score"},
            {"sample_id", request.sample_id},
            {"query", {{"image", std::move(image)}, {"text", std::move(text)}}},
            {"candidates", std::move(candidates)}};
}

std::string encode_score_request_line(const ScoreRequest& request) { return encode_score_request(request).dump(); }

namespace {

json parse_envelope(std::string_view line, std::string_view sample_id) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ProtocolViolation, std::string("malformed response line: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::ProtocolViolation, "response is not a JSON object");
    if (!doc.contains("v") || doc["v"] != kVersion) throw Error(ErrorCode::ProtocolViolation, "unsupported version");
    if (!doc.contains("type") || !doc["type"].is_string()) throw Error(ErrorCode::ProtocolViolation, "missing type");
    if (!doc.contains("sample_id") || !doc["sample_id"].is_string() ||
        doc["sample_id"].get<std::string>() != sample_id) {
        throw Error(ErrorCode::ProtocolViolation,
                    "response sample_id does not match request '" + std::string(sample_id) + "' (framing)");
    }
    if (doc["type"] == "error") {
        const auto message = doc.contains("message") && doc["message"].is_string()
                                 ? doc["message"].get<std::string>()
                                 : std::string("unspecified");
        throw Error(ErrorCode::Backend, "peer error for " + std::string(sample_id) + ": " + message);
    }
    return doc;
}

}  // namespace

std::vector<double> decode_score_response(std::string_view line, std::string_view sample_id,
                                          std::size_t candidate_count) {
    const auto doc = parse_envelope(line, sample_id);
    if (doc["type"] != "scores") throw Error(ErrorCode::ProtocolViolation, "expected type 'scores'");
    if (!doc.contains("scores") || !doc["scores"].is_array()) {
        throw Error(ErrorCode::ProtocolViolation, "missing scores array");
    }
    const auto& scores = doc["scores"];
    if (scores.size() != candidate_count) {
        throw Error(ErrorCode::ProtocolViolation, "expected " + std::to_string(candidate_count) + " scores, got " +
                                                      std::to_string(scores.size()));
    }
    std::vector<double> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
        // nlohmann encodes NaN/inf as null.
        if (!s.is_number()) throw Error(ErrorCode::ProtocolViolation, "non-numeric or non-finite score");
        const double value = s.get<double>();
        if (!std::isfinite(value)) throw Error(ErrorCode::ProtocolViolation, "non-finite score");
        out.push_back(value);
    }
    return out;
}

std::string_view to_string(Capability capability) noexcept {
    switch (capability) {
        case Capability::MutateText: return "mutate_text";
        case Capability::EditImage: return "edit_image";
        case Capability::GenerateImage: return "generate_image";
        case Capability::Describe: return "describe";
    }
    return "describe";
}

Capability capability_from_string(std::string_view text) {
    for (auto c : {Capability::MutateText, Capability::EditImage, Capability::GenerateImage, Capability::Describe}) {
        if (to_string(c) == text) return c;
    }
    throw Error(ErrorCode::Parse, "unknown capability '" + std::string(text) + "'");
}

std::string encode_generate_request_line(std::string_view sample_id, Capability capability, const json& input) {
    return json{{"v", kVersion},
                {"type", "generate"},
                {"sample_id", sample_id},
                {"capability", to_string(capability)},
                {"input", input}}
        .dump();
}

std::vector<std::string> decode_generate_response(std::string_view line, std::string_view sample_id) {
    const auto doc = parse_envelope(line, sample_id);
    if (doc["type"] != "generated") throw Error(ErrorCode::ProtocolViolation, "expected type 'generated'");
    if (!doc.contains("outputs") || !doc["outputs"].is_array()) {
        throw Error(ErrorCode::ProtocolViolation, "missing outputs array");
    }
    std::vector<std::string> out;
    for (const auto& item : doc["outputs"]) {
        if (!item.is_string()) throw Error(ErrorCode::ProtocolViolation, "generated output is not a string");
        out.push_back(item.get<std::string>());
    }
    return out;
}

std::vector<TranscriptCase> golden_transcripts() {
    auto image = [](int id, const char* mask, bool active) {
        return json{{"id", id}, {"asset", "golden/query.png"}, {"mask", mask}, {"active", active}};
    };
    auto text = [](int id, const char* surface, bool active) {
        return json{{"id", id}, {"surface", surface}, {"active", active}};
    };
    auto candidate = [](int id, const char* asset) { return json{{"id", id}, {"asset", asset}}; };
    auto request = [](const char* sample_id, json image_tokens, json text_tokens, json candidates) {
        return json{{"v", kVersion},
                    {"type", "score"},
                    {"sample_id", sample_id},
                    {"query", {{"image", std::move(image_tokens)}, {"text", std::move(text_tokens)}}},
                    {"candidates", std::move(candidates)}};
    };

    std::vector<TranscriptCase> cases;
    cases.push_back({"two_candidates_all_active",
                     request("golden-0", json::array({image(0, "golden/m0.png", true), image(1, "golden/m1.png", true)}),
                             json::array({text(0, "make", true), text(1, "red", true)}),
                             json::array({candidate(0, "golden/c0.png"), candidate(1, "golden/c1.png")}))});
    cases.push_back({"partial_mask",
                     request("golden-1", json::array({image(0, "golden/m0.png", false), image(1, "golden/m1.png", true)}),
                             json::array({text(0, "make", true), text(1, "red", false), text(2, "car", true)}),
                             json::array({candidate(0, "golden/c0.png"), candidate(1, "golden/c1.png"),
                                          candidate(2, "golden/c2.png")}))});
    cases.push_back({"all_text_pruned",
                     request("golden-2", json::array({image(0, "golden/m0.png", true)}),
                             json::array({text(0, "make", false), text(1, "red", false)}),
                             json::array({candidate(0, "golden/c0.png"), candidate(1, "golden/c1.png"),
                                          candidate(2, "golden/c2.png"), candidate(3, "golden/c3.png"),
                                          candidate(4, "golden/c4.png")}))});
    cases.push_back({"single_candidate",
                     request("golden-3", json::array({image(0, "golden/m0.png", true)}),
                             json::array({text(0, "winter", true)}), json::array({candidate(7, "golden/c7.png")}))});
    return cases;
}

bool CheckReport::passed() const noexcept {
    if (outcomes.empty()) return false;
    for (const auto& o : outcomes) {
        if (!o.passed) return false;
    }
    return true;
}

CheckReport run_protocol_check(const Endpoint& endpoint, std::chrono::milliseconds timeout,
                               std::chrono::milliseconds grace) {
    CheckReport report;
    std::unique_ptr<LineChannel> channel;
    try {
        channel = open_channel(endpoint);
    } catch (const Error& e) {
        report.outcomes.push_back({"connect", false, e.what()});
        return report;
    }

    for (const auto& test : golden_transcripts()) {
        CheckOutcome outcome{test.name, false, {}};
        try {
            channel->write_line(test.request.dump());
            const auto line = channel->read_line(timeout);
            if (!line) throw Error(ErrorCode::Timeout, "no response line within timeout");
            const auto sample_id = test.request["sample_id"].get<std::string>();
            decode_score_response(*line, sample_id, test.request["candidates"].size());
            outcome.passed = true;
            outcome.message = "ok";
        } catch (const Error& e) {
            outcome.message = e.what();
        }
        report.outcomes.push_back(std::move(outcome));
        if (!report.outcomes.back().passed) return report;
    }

    CheckOutcome framing{"no_stray_lines", true, "ok"};
    try {
        if (auto stray = channel->read_line(grace)) {
            framing.passed = false;
            framing.message = "ProtocolViolation: stray line after final response (framing): " + *stray;
        }
    } catch (const Error&) {
        // Peer closing after the last response is fine.
    }
    report.outcomes.push_back(std::move(framing));
    return report;
}

}  // namespace fbcir::protocol
