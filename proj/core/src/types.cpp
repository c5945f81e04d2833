#include "fbcir/types.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "fbcir/error.hpp"

namespace fbcir {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::EmptyModality: return "EmptyModality";
        case ErrorCode::NonPositiveArea: return "NonPositiveArea";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::PoolMismatch: return "PoolMismatch";
        case ErrorCode::EmptyPool: return "EmptyPool";
        case ErrorCode::Transport: return "Transport";
        case ErrorCode::ProtocolViolation: return "ProtocolViolation";
        case ErrorCode::Timeout: return "Timeout";
        case ErrorCode::TooManyTokens: return "TooManyTokens";
        case ErrorCode::DegenerateState: return "DegenerateState";
        case ErrorCode::MissingPositive: return "MissingPositive";
        case ErrorCode::GenerationFailed: return "GenerationFailed";
        case ErrorCode::SourceExhausted: return "SourceExhausted";
        case ErrorCode::InsufficientNegatives: return "InsufficientNegatives";
        case ErrorCode::DivergedLoss: return "DivergedLoss";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::Parse: return "Parse";
        case ErrorCode::Backend: return "Backend";
    }
    return "Unknown";
}

std::string_view to_string(Modality modality) noexcept {
    return modality == Modality::Image ? "image" : "text";
}

TokenizedQuery::TokenizedQuery(std::vector<ImageToken> image_tokens, std::vector<TextToken> text_tokens)
    : image_tokens_(std::move(image_tokens)), text_tokens_(std::move(text_tokens)) {
    for (std::size_t i = 0; i < image_tokens_.size(); ++i) {
        if (image_tokens_[i].id != i) throw Error(ErrorCode::InvalidArgument, "image token ids must be 0..n_I-1");
        if (!(image_tokens_[i].area_weight > 0.0)) throw Error(ErrorCode::NonPositiveArea, "image token weight must be > 0");
    }
    for (std::size_t i = 0; i < text_tokens_.size(); ++i) {
        if (text_tokens_[i].id != i) throw Error(ErrorCode::InvalidArgument, "text token ids must be 0..n_T-1");
        if (text_tokens_[i].surface.empty()) throw Error(ErrorCode::InvalidArgument, "text token surface is empty");
    }
}

double TokenizedQuery::weight(std::size_t global_index) const {
    if (global_index < image_tokens_.size()) return image_tokens_[global_index].area_weight;
    if (global_index < total_count()) return 1.0 / static_cast<double>(text_tokens_.size());
    throw Error(ErrorCode::InvalidArgument, "token index out of range");
}

bool TokenizedQuery::has_inline_features() const noexcept {
    return std::all_of(image_tokens_.begin(), image_tokens_.end(), [](const auto& t) { return t.feature.has_value(); }) &&
           std::all_of(text_tokens_.begin(), text_tokens_.end(), [](const auto& t) { return t.feature.has_value(); });
}

TokenizedQuery normalize_query(std::span<const RawSegment> raw_segments, std::span<const RawToken> raw_tokens) {
    if (raw_segments.empty()) throw Error(ErrorCode::EmptyModality, "query has no image segments");
    if (raw_tokens.empty()) throw Error(ErrorCode::EmptyModality, "query has no text tokens");

    double total_area = 0.0;
    for (const auto& segment : raw_segments) {
        if (!(segment.area > 0.0)) throw Error(ErrorCode::NonPositiveArea, "segment area must be > 0");
        total_area += segment.area;
    }

    std::vector<ImageToken> image;
    image.reserve(raw_segments.size());
    for (std::size_t i = 0; i < raw_segments.size(); ++i) {
        image.push_back({i, raw_segments[i].area / total_area, raw_segments[i].feature, raw_segments[i].mask});
    }
    std::vector<TextToken> text;
    text.reserve(raw_tokens.size());
    for (std::size_t i = 0; i < raw_tokens.size(); ++i) {
        text.push_back({i, raw_tokens[i].surface, raw_tokens[i].feature});
    }
    return TokenizedQuery(std::move(image), std::move(text));
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) words.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return words;
}

std::size_t Ranking::position_of(CandidateId id) const {
    auto it = std::find(order.begin(), order.end(), id);
    if (it == order.end()) throw Error(ErrorCode::PoolMismatch, "candidate not in ranking");
    return static_cast<std::size_t>(it - order.begin());
}

Ranking make_ranking(std::span<const CandidateId> ids, std::span<const double> scores) {
    if (ids.size() != scores.size()) throw Error(ErrorCode::InvalidArgument, "ids and scores differ in length");
    std::vector<std::size_t> perm(ids.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return ids[a] < ids[b];
    });
    Ranking ranking;
    ranking.order.reserve(ids.size());
    ranking.scores.reserve(ids.size());
    for (auto p : perm) {
        ranking.order.push_back(ids[p]);
        ranking.scores.push_back(scores[p]);
    }
    return ranking;
}

std::string_view to_string(CandidateKind kind) noexcept {
    switch (kind) {
        case CandidateKind::Positive: return "positive";
        case CandidateKind::TextAugNegative: return "text_aug";
        case CandidateKind::ImageAugNegative: return "image_aug";
        case CandidateKind::IdentityNegative: return "identity";
        case CandidateKind::OriginalPositive: return "original_positive";
        case CandidateKind::Distractor: return "distractor";
    }
    return "distractor";
}

CandidateKind candidate_kind_from_string(std::string_view text) {
    for (auto kind : {CandidateKind::Positive, CandidateKind::TextAugNegative, CandidateKind::ImageAugNegative,
                      CandidateKind::IdentityNegative, CandidateKind::OriginalPositive, CandidateKind::Distractor}) {
        if (to_string(kind) == text) return kind;
    }
    throw Error(ErrorCode::Parse, "unknown candidate kind '" + std::string(text) + "'");
}

CandidateId AugmentedSample::positive_id() const {
    std::optional<CandidateId> found;
    for (const auto& c : candidates) {
        if (c.kind != CandidateKind::Positive) continue;
        if (found) throw Error(ErrorCode::MissingPositive, "sample " + sample_id + " has more than one positive");
        found = c.id;
    }
    if (!found) throw Error(ErrorCode::MissingPositive, "sample " + sample_id + " has no positive");
    return *found;
}

std::size_t AugmentedSample::count_kind(CandidateKind kind) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(candidates.begin(), candidates.end(), [kind](const Candidate& c) { return c.kind == kind; }));
}

}  // namespace fbcir
