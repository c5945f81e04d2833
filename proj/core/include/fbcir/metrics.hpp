#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbcir/refinement.hpp"
#include "fbcir/types.hpp"

namespace fbcir {

/// Sum of importance weights over preserved tokens of one modality; 0 when none are preserved.
double focus_token_proportion(const TokenMask& preserved, const TokenizedQuery& query, Modality modality);

struct BalanceRatios {
    double image = 0.0;
    double text = 0.0;
};

/// Mean relative focus proportion per modality over the final states.
/// Throws DegenerateState for an empty set or a state with p_I + p_T = 0.
BalanceRatios focus_balance_ratios(std::span<const PruneState> states, const TokenizedQuery& query);
BalanceRatios focus_balance_ratios(const FinalStateSet& finals, const TokenizedQuery& query);

/// |r_I - r_T|. Throws InvalidArgument unless r_I + r_T = 1 within 1e-9.
double focus_imbalance(double r_image, double r_text);

FocusReport make_focus_report(const RefinementResult& result, const TokenizedQuery& query);

/// Fraction of samples whose positive lands within the top k of its local ranking.
/// rankings[i] belongs to samples[i]. Throws MissingPositive or PoolMismatch.
double subset_recall_at_k(std::span<const AugmentedSample> samples, std::span<const Ranking> rankings, std::size_t k);

struct SampleEvaluation {
    std::string sample_id;
    std::size_t positive_rank = 0;  // 1-based
    std::map<std::size_t, bool> hits;
    std::optional<FocusReport> focus;
};

struct EvaluationReport {
    std::vector<SampleEvaluation> samples;
    std::map<std::size_t, double> recall_at;
    double mean_r_image = 0.0;
    double mean_r_text = 0.0;
    double imbalance = 0.0;
    std::size_t focus_samples = 0;
};

/// Aggregates per-sample results; the imbalance is |mean r_I - mean r_T| over samples with a focus report.
EvaluationReport aggregate_evaluation(std::vector<SampleEvaluation> samples, std::span<const std::size_t> ks);

/// Weighted mean of (value, weight) pairs. Throws InvalidArgument when weights sum to zero.
double weighted_average(std::span<const std::pair<double, double>> values);

}  // namespace fbcir
