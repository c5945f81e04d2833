#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fbcir/types.hpp"

namespace fbcir {

/// One scoring call: the query with a pruning state applied, against a list of candidates.
struct ScoreRequest {
    const std::string& sample_id;
    const TokenizedQuery& query;
    const std::string& query_image;
    const TokenMask& active;
    std::span<const Candidate> candidates;
};

/// Scorer contract. Implementations must be callable concurrently and
/// deterministic for identical requests.
class Scorer {
public:
    virtual ~Scorer() = default;

    /// Scores every candidate of the request, in request order.
    std::vector<double> score(const ScoreRequest& request);

    /// Batched invocations so far.
    std::size_t calls() const noexcept { return calls_.load(); }
    /// Unit (per-candidate) score requests so far.
    std::size_t candidates_scored() const noexcept { return candidates_scored_.load(); }

protected:
    virtual std::vector<double> do_score(const ScoreRequest& request) = 0;

private:
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> candidates_scored_{0};
};

struct ToyScorerParams {
    Eigen::MatrixXd image_projection;
    Eigen::MatrixXd text_projection;

    std::size_t dim() const noexcept { return static_cast<std::size_t>(image_projection.rows()); }
    static ToyScorerParams identity(std::size_t dim);
    /// Throws InvalidArgument on non-square, mismatched, non-finite or d < 2 matrices.
    void validate() const;
};

/// Weighted image embedding and mean text embedding over the active tokens.
struct QueryEmbedding {
    Eigen::VectorXd image;
    Eigen::VectorXd text;
};

QueryEmbedding embed_query(const TokenizedQuery& query, const TokenMask& active, std::size_t dim);

/// Unit-normalized projected query; zero vector when the projection vanishes.
Eigen::VectorXd project_query(const ToyScorerParams& params, const QueryEmbedding& embedding);

/// dot(q_hat, candidate). Returns 0 when every token is pruned. Throws DimensionMismatch.
double toy_score(const ToyScorerParams& params, const TokenizedQuery& query, const TokenMask& active,
                 const Candidate& candidate);

class ToyScorer final : public Scorer {
public:
    explicit ToyScorer(ToyScorerParams params);
    const ToyScorerParams& params() const noexcept { return params_; }

protected:
    std::vector<double> do_score(const ScoreRequest& request) override;

private:
    ToyScorerParams params_;
};

/// Ranks the pool under the given pruning state with one batched scorer call. Throws EmptyPool.
Ranking rank(Scorer& scorer, const AugmentedSample& sample, const TokenMask& active);
Ranking rank(Scorer& scorer, const AugmentedSample& sample, const TokenMask& active,
             std::span<const Candidate> pool);

enum class ValidityMode { Top1, FullOrder };

std::string_view to_string(ValidityMode mode) noexcept;
ValidityMode validity_mode_from_string(std::string_view text);

/// Top1 compares winners; FullOrder compares whole permutations. Throws PoolMismatch.
bool retrieval_equal(const Ranking& a, const Ranking& b, ValidityMode mode = ValidityMode::Top1);

}  // namespace fbcir
