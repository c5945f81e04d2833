#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fbcir/scoring.hpp"
#include "fbcir/types.hpp"

namespace fbcir {

enum class BeamSelection {
    /// Descending retrieval margin, ties by lexicographically smallest preserved set.
    MarginDescending,
    /// Lexicographically smallest preserved set only.
    Lexicographic,
};

struct RefinementConfig {
    std::size_t beam_width = 5;
    ValidityMode mode = ValidityMode::Top1;
    std::optional<std::size_t> max_iterations;
    BeamSelection selection = BeamSelection::MarginDescending;
    /// Worker threads for the child validations of one iteration.
    std::size_t workers = 1;
};

struct RefinementTrace {
    /// Child states validated (one pool ranking each); excludes the baseline ranking of s0.
    std::size_t validations = 0;
    /// Batched scorer invocations including the baseline.
    std::size_t scorer_calls = 0;
    /// Beam contents after each iteration (the first entry is {s0}).
    std::vector<std::vector<TokenMask>> beams;
    /// True when max_iterations stopped the search before it converged.
    bool truncated = false;
};

struct RefinementResult {
    FinalStateSet finals;
    RefinementTrace trace;
    Ranking baseline;
};

/// Beam-searched iterative pruning. Returns every discovered state that keeps the
/// baseline retrieval result and has no valid one-token-smaller child.
///
/// States that preserve no token at all are never derived.
/// Throws InvalidArgument for empty modalities, pools smaller than 2 or zero beam width.
RefinementResult refine(const AugmentedSample& sample, Scorer& scorer, const RefinementConfig& config = {});

struct ExhaustiveResult {
    /// Valid, locally minimal states reachable from s0 through valid states (what an unbounded beam finds).
    FinalStateSet reachable_minimal;
    /// Valid, locally minimal states regardless of reachability.
    FinalStateSet all_minimal;
    /// Fewest preserved tokens over all valid non-empty states.
    std::size_t global_min_cardinality = 0;
    std::size_t validations = 0;
};

inline constexpr std::size_t kExhaustiveTokenLimit = 16;

/// Brute-force oracle over every non-empty mask. Throws TooManyTokens above 16 tokens.
ExhaustiveResult exhaustive_minimal_states(const AugmentedSample& sample, Scorer& scorer,
                                           ValidityMode mode = ValidityMode::Top1);

/// Worst-case validation count w * n (n + 1) / 2 with n = n_image + n_text.
std::uint64_t predicted_inference_budget(std::uint64_t n_image, std::uint64_t n_text, std::uint64_t beam_width);

}  // namespace fbcir
