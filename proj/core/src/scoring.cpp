#include "fbcir/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "fbcir/error.hpp"

namespace fbcir {

std::vector<double> Scorer::score(const ScoreRequest& request) {
    calls_.fetch_add(1);
    candidates_scored_.fetch_add(request.candidates.size());
    return do_score(request);
}

ToyScorerParams ToyScorerParams::identity(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return {Eigen::MatrixXd::Identity(d, d), Eigen::MatrixXd::Identity(d, d)};
}

void ToyScorerParams::validate() const {
    if (image_projection.rows() < 2 || image_projection.rows() != image_projection.cols() ||
        text_projection.rows() != image_projection.rows() || text_projection.cols() != image_projection.cols()) {
        throw Error(ErrorCode::InvalidArgument, "projections must be square d x d with d >= 2");
    }
    if (!image_projection.allFinite() || !text_projection.allFinite()) {
        throw Error(ErrorCode::InvalidArgument, "projection entries must be finite");
    }
}

namespace {

const FeatureVector& require_feature(const std::optional<FeatureVector>& feature, std::size_t dim, const char* what) {
    if (!feature) throw Error(ErrorCode::DimensionMismatch, std::string(what) + " has no inline feature vector");
    if (static_cast<std::size_t>(feature->size()) != dim) {
        throw Error(ErrorCode::DimensionMismatch, std::string(what) + " feature dimension differs from scorer");
    }
    return *feature;
}

}  // namespace

QueryEmbedding embed_query(const TokenizedQuery& query, const TokenMask& active, std::size_t dim) {
    if (active.size() != query.total_count()) {
        throw Error(ErrorCode::InvalidArgument, "active-flag vector length differs from token count");
    }
    const auto d = static_cast<Eigen::Index>(dim);
    QueryEmbedding out{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
    for (const auto& token : query.image_tokens()) {
        const auto& v = require_feature(token.feature, dim, "image token");
        if (active.test(token.id)) out.image.noalias() += token.area_weight * v;
    }
    std::size_t active_text = 0;
    for (const auto& token : query.text_tokens()) {
        const auto& v = require_feature(token.feature, dim, "text token");
        if (active.test(query.text_global_index(token.id))) {
            out.text += v;
            ++active_text;
        }
    }
    // Pruned text tokens leave the mean entirely.
    if (active_text > 0) out.text /= static_cast<double>(active_text);
    return out;
}

Eigen::VectorXd project_query(const ToyScorerParams& params, const QueryEmbedding& embedding) {
    Eigen::VectorXd q = params.image_projection * embedding.image + params.text_projection * embedding.text;
    const double norm = q.norm();
    if (norm == 0.0) return Eigen::VectorXd::Zero(q.size());
    return q / norm;
}

double toy_score(const ToyScorerParams& params, const TokenizedQuery& query, const TokenMask& active,
                 const Candidate& candidate) {
    const auto dim = params.dim();
    const auto& c = require_feature(candidate.feature, dim, "candidate");
    return project_query(params, embed_query(query, active, dim)).dot(c);
}

ToyScorer::ToyScorer(ToyScorerParams params) : params_(std::move(params)) { params_.validate(); }

std::vector<double> ToyScorer::do_score(const ScoreRequest& request) {
    const auto dim = params_.dim();
    const Eigen::VectorXd q = project_query(params_, embed_query(request.query, request.active, dim));
    std::vector<double> scores;
    scores.reserve(request.candidates.size());
    for (const auto& candidate : request.candidates) {
        scores.push_back(q.dot(require_feature(candidate.feature, dim, "candidate")));
    }
    return scores;
}

Ranking rank(Scorer& scorer, const AugmentedSample& sample, const TokenMask& active) {
    return rank(scorer, sample, active, sample.candidates);
}

Ranking rank(Scorer& scorer, const AugmentedSample& sample, const TokenMask& active,
             std::span<const Candidate> pool) {
    if (pool.empty()) throw Error(ErrorCode::EmptyPool, "sample " + sample.sample_id + " has an empty pool");
    const ScoreRequest request{sample.sample_id, sample.query, sample.query_image, active, pool};
    const auto scores = scorer.score(request);
    if (scores.size() != pool.size()) {
        throw Error(ErrorCode::ProtocolViolation, "scorer returned " + std::to_string(scores.size()) +
                                                      " scores for " + std::to_string(pool.size()) + " candidates");
    }
    std::vector<CandidateId> ids;
    ids.reserve(pool.size());
    for (const auto& c : pool) ids.push_back(c.id);
    return make_ranking(ids, scores);
}

std::string_view to_string(ValidityMode mode) noexcept { return mode == ValidityMode::Top1 ? "top1" : "full"; }

ValidityMode validity_mode_from_string(std::string_view text) {
    if (text == "top1") return ValidityMode::Top1;
    if (text == "full") return ValidityMode::FullOrder;
    throw Error(ErrorCode::Parse, "unknown validity mode '" + std::string(text) + "'");
}

bool retrieval_equal(const Ranking& a, const Ranking& b, ValidityMode mode) {
    auto sorted_a = a.order;
    auto sorted_b = b.order;
    std::sort(sorted_a.begin(), sorted_a.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    if (sorted_a != sorted_b) throw Error(ErrorCode::PoolMismatch, "rankings cover different candidate sets");
    if (a.order.empty()) return true;
    if (mode == ValidityMode::Top1) return a.order.front() == b.order.front();
    return a.order == b.order;
}

}  // namespace fbcir
