#pragma once

// Newline-delimited JSON wire protocol shared with out-of-process scorers and generators.
//
//   {"v":1,"type":"score","sample_id":..,"query":{"image":[..],"text":[..]},"candidates":[..]}
//   {"v":1,"type":"scores","sample_id":..,"scores":[..]}
//   {"v":1,"type":"generate","sample_id":..,"capability":..,"input":{..}}
//   {"v":1,"type":"generated","sample_id":..,"outputs":[..]}
//   {"v":1,"type":"error","sample_id":..,"message":..}

#include <chrono>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "fbcir/scoring.hpp"
#include "fbcir/transport.hpp"

namespace fbcir::protocol {

inline constexpr int kVersion = 1;

nlohmann::json encode_score_request(const ScoreRequest& request);
std::string encode_score_request_line(const ScoreRequest& request);

/// Validates one response line against the request. Throws ProtocolViolation (bad framing,
/// wrong arity, non-finite score, mismatched sample id) or Backend (peer error message).
std::vector<double> decode_score_response(std::string_view line, std::string_view sample_id,
                                          std::size_t candidate_count);

enum class Capability { MutateText, EditImage, GenerateImage, Describe };

std::string_view to_string(Capability capability) noexcept;
Capability capability_from_string(std::string_view text);

std::string encode_generate_request_line(std::string_view sample_id, Capability capability,
                                         const nlohmann::json& input);
std::vector<std::string> decode_generate_response(std::string_view line, std::string_view sample_id);

struct TranscriptCase {
    std::string name;
    nlohmann::json request;
};

/// Fixed scorer-protocol requests replayed by the conformance check.
std::vector<TranscriptCase> golden_transcripts();

struct CheckOutcome {
    std::string name;
    bool passed = false;
    std::string message;
};

struct CheckReport {
    std::vector<CheckOutcome> outcomes;
    bool passed() const noexcept;
};

/// Replays the golden transcripts over one connection and validates framing, arity and
/// finiteness; a line arriving after the last response within `grace` counts as a framing error.
CheckReport run_protocol_check(const Endpoint& endpoint, std::chrono::milliseconds timeout,
                               std::chrono::milliseconds grace = std::chrono::milliseconds(200));

}  // namespace fbcir::protocol
