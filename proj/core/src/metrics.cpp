#include "fbcir/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "fbcir/error.hpp"

namespace fbcir {

double focus_token_proportion(const TokenMask& preserved, const TokenizedQuery& query, Modality modality) {
    if (preserved.size() != query.total_count()) {
        throw Error(ErrorCode::InvalidArgument, "state size differs from query token count");
    }
    double p = 0.0;
    for (auto index : preserved.indices()) {
        if (query.modality_of(index) == modality) p += query.weight(index);
    }
    // Normalized weights can sum to 1 + ulp.
    return std::min(p, 1.0);
}

BalanceRatios focus_balance_ratios(std::span<const PruneState> states, const TokenizedQuery& query) {
    if (states.empty()) throw Error(ErrorCode::DegenerateState, "final state set is empty");
    BalanceRatios ratios;
    for (const auto& state : states) {
        const double p_image = focus_token_proportion(state.preserved, query, Modality::Image);
        const double p_text = focus_token_proportion(state.preserved, query, Modality::Text);
        const double total = p_image + p_text;
        if (!(total > 0.0)) throw Error(ErrorCode::DegenerateState, "state preserves no tokens");
        ratios.image += p_image / total;
        ratios.text += p_text / total;
    }
    const auto count = static_cast<double>(states.size());
    ratios.image /= count;
    ratios.text /= count;
    return ratios;
}

BalanceRatios focus_balance_ratios(const FinalStateSet& finals, const TokenizedQuery& query) {
    std::vector<PruneState> states;
    states.reserve(finals.states.size());
    for (const auto& f : finals.states) states.push_back(f.state);
    return focus_balance_ratios(states, query);
}

double focus_imbalance(double r_image, double r_text) {
    if (std::abs(r_image + r_text - 1.0) > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, "balance ratios must sum to 1");
    }
    return std::abs(r_image - r_text);
}

FocusReport make_focus_report(const RefinementResult& result, const TokenizedQuery& query) {
    FocusReport report;
    for (const auto& final_state : result.finals.states) {
        report.states.push_back({final_state.state,
                                 focus_token_proportion(final_state.state.preserved, query, Modality::Image),
                                 focus_token_proportion(final_state.state.preserved, query, Modality::Text),
                                 final_state.margin});
    }
    const auto ratios = focus_balance_ratios(result.finals, query);
    report.r_image = ratios.image;
    report.r_text = ratios.text;
    report.imbalance = focus_imbalance(ratios.image, ratios.text);
    report.inference_count = result.trace.validations;
    return report;
}

double subset_recall_at_k(std::span<const AugmentedSample> samples, std::span<const Ranking> rankings, std::size_t k) {
    if (samples.size() != rankings.size()) throw Error(ErrorCode::InvalidArgument, "one ranking per sample required");
    if (samples.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (rankings[i].order.size() != samples[i].candidates.size()) {
            throw Error(ErrorCode::PoolMismatch, "ranking does not cover the local pool of " + samples[i].sample_id);
        }
        if (rankings[i].position_of(samples[i].positive_id()) < k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(samples.size());
}

EvaluationReport aggregate_evaluation(std::vector<SampleEvaluation> samples, std::span<const std::size_t> ks) {
    EvaluationReport report;
    report.samples = std::move(samples);
    for (auto k : ks) {
        std::size_t hits = 0;
        for (auto& s : report.samples) {
            const bool hit = s.positive_rank >= 1 && s.positive_rank <= k;
            s.hits[k] = hit;
            hits += hit ? 1 : 0;
        }
        report.recall_at[k] =
            report.samples.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(report.samples.size());
    }
    for (const auto& s : report.samples) {
        if (!s.focus) continue;
        report.mean_r_image += s.focus->r_image;
        report.mean_r_text += s.focus->r_text;
        ++report.focus_samples;
    }
    if (report.focus_samples > 0) {
        report.mean_r_image /= static_cast<double>(report.focus_samples);
        report.mean_r_text /= static_cast<double>(report.focus_samples);
        report.imbalance = std::abs(report.mean_r_image - report.mean_r_text);
    }
    return report;
}

double weighted_average(std::span<const std::pair<double, double>> values) {
    double sum = 0.0;
    double weight = 0.0;
    for (const auto& [v, w] : values) {
        sum += v * w;
        weight += w;
    }
    if (weight == 0.0) throw Error(ErrorCode::InvalidArgument, "weights sum to zero");
    return sum / weight;
}

}  // namespace fbcir
