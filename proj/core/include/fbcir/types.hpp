#pragma once

// Core vocabulary: tokenized queries, pruning states, rankings, candidates and samples.

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fbcir/token_mask.hpp"

namespace fbcir {

using FeatureVector = Eigen::VectorXd;
using CandidateId = int;

enum class Modality { Image, Text };

std::string_view to_string(Modality modality) noexcept;

struct ImageToken {
    std::size_t id = 0;
    double area_weight = 0.0;
    std::optional<FeatureVector> feature;
    std::string mask;  // opaque mask reference, adapter mode only
};

struct TextToken {
    std::size_t id = 0;
    std::string surface;
    std::optional<FeatureVector> feature;
};

// Raw inputs to normalize_query().
struct RawSegment {
    double area = 0.0;
    std::optional<FeatureVector> feature;
    std::string mask;
};

struct RawToken {
    std::string surface;
    std::optional<FeatureVector> feature;
};

/// Composed query split into weighted image segments and text tokens.
///
/// Global token indices put the image tokens first (0..n_I-1) and the text
/// tokens after them (n_I..n_I+n_T-1), so modality membership is a single
/// comparison.
class TokenizedQuery {
public:
    TokenizedQuery() = default;
    TokenizedQuery(std::vector<ImageToken> image_tokens, std::vector<TextToken> text_tokens);

    std::span<const ImageToken> image_tokens() const noexcept { return image_tokens_; }
    std::span<const TextToken> text_tokens() const noexcept { return text_tokens_; }

    std::size_t image_count() const noexcept { return image_tokens_.size(); }
    std::size_t text_count() const noexcept { return text_tokens_.size(); }
    std::size_t total_count() const noexcept { return image_tokens_.size() + text_tokens_.size(); }

    Modality modality_of(std::size_t global_index) const noexcept {
        return global_index < image_tokens_.size() ? Modality::Image : Modality::Text;
    }
    std::size_t text_global_index(std::size_t text_id) const noexcept { return image_tokens_.size() + text_id; }

    /// Importance weight of a token: segment area share for image tokens, 1/n_T for text tokens.
    double weight(std::size_t global_index) const;

    TokenMask full_mask() const { return TokenMask(total_count(), true); }

    /// True when every token carries an inline feature vector.
    bool has_inline_features() const noexcept;

private:
    std::vector<ImageToken> image_tokens_;
    std::vector<TextToken> text_tokens_;
};

/// Normalizes raw segment areas to sum to 1 and assigns uniform text weights.
/// Throws EmptyModality or NonPositiveArea.
TokenizedQuery normalize_query(std::span<const RawSegment> raw_segments, std::span<const RawToken> raw_tokens);

/// Splits text into word-level tokens on whitespace.
std::vector<std::string> split_words(std::string_view text);

struct PruneState {
    TokenMask preserved;

    std::size_t pruned_count() const noexcept { return preserved.size() - preserved.count(); }
    static PruneState initial(const TokenizedQuery& query) { return {query.full_mask()}; }

    friend bool operator==(const PruneState&, const PruneState&) = default;
};

/// Candidates ordered best first, with scores non-increasing and ties broken by ascending id.
struct Ranking {
    std::vector<CandidateId> order;
    std::vector<double> scores;

    CandidateId top() const { return order.front(); }
    /// Score gap between the winner and the runner-up; 0 for single-candidate pools.
    double margin() const noexcept { return scores.size() < 2 ? 0.0 : scores[0] - scores[1]; }
    std::size_t position_of(CandidateId id) const;

    friend bool operator==(const Ranking&, const Ranking&) = default;
};

/// Builds a Ranking from parallel id/score lists. Insertion order does not matter.
Ranking make_ranking(std::span<const CandidateId> ids, std::span<const double> scores);

enum class CandidateKind { Positive, TextAugNegative, ImageAugNegative, IdentityNegative, OriginalPositive, Distractor };

std::string_view to_string(CandidateKind kind) noexcept;
CandidateKind candidate_kind_from_string(std::string_view text);

struct Candidate {
    CandidateId id = 0;
    CandidateKind kind = CandidateKind::Distractor;
    std::optional<FeatureVector> feature;
    std::string asset;
};

struct AugmentedSample {
    std::string sample_id;
    TokenizedQuery query;
    std::string query_text;
    std::string query_image;  // asset reference of the query image
    std::vector<Candidate> candidates;
    std::string provenance;

    /// Id of the single Positive candidate; throws MissingPositive.
    CandidateId positive_id() const;
    std::size_t count_kind(CandidateKind kind) const noexcept;
};

struct FinalState {
    PruneState state;
    double margin = 0.0;
};

struct FinalStateSet {
    std::vector<FinalState> states;
};

struct StateFocus {
    PruneState state;
    double p_image = 0.0;
    double p_text = 0.0;
    double margin = 0.0;
};

struct FocusReport {
    std::vector<StateFocus> states;
    double r_image = 0.0;
    double r_text = 0.0;
    double imbalance = 0.0;
    std::size_t inference_count = 0;
};

}  // namespace fbcir
