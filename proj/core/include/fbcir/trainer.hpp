#pragma once

// Trains the toy scorer's projections on the synthetic world with the weighted contrastive
// loss, the in-sample weight ramp and logit distillation towards the initial checkpoint.

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fbcir/losses.hpp"
#include "fbcir/scoring.hpp"
#include "fbcir/synthworld.hpp"

namespace fbcir {

struct TrainingConfig {
    std::size_t steps = 400;
    double learning_rate = 0.01;
    std::size_t batch_size = 64;
    double contrastive_temperature = 0.07;
    RampSchedule ramp;
    double distill_temperature = 2.0;
    double distill_weight = 1e3;
    KlOrder kl_order = KlOrder::StudentFirst;
    /// Fraction of each batch that receives in-sample hard negatives.
    double negative_ratio = 0.0;
    std::size_t in_sample_negatives = 3;
    bool cosine_schedule = false;

    std::size_t eval_interval = 100;
    std::size_t hard_eval_count = 500;
    std::size_t probe_count = 50;
    std::size_t probe_beam_width = 5;

    std::uint64_t seed = 0;
    std::uint64_t train_stream = 1;
    std::uint64_t eval_stream = 2;

    /// Throws InvalidArgument.
    void validate() const;
};

struct TrainingExample {
    WorldItem item;
    /// In-sample hard negatives drawn from item.hard; empty for non-augmented examples.
    std::vector<CandidateId> in_sample;
};

struct Batch {
    std::vector<TrainingExample> examples;
    double in_sample_weight = 1.0;
};

struct ParamGradient {
    Eigen::MatrixXd image;
    Eigen::MatrixXd text;
};

struct LossTerms {
    double total = 0.0;
    double contrastive = 0.0;
    double distillation = 0.0;
};

/// Deterministic batch for one step: exactly round(negative_ratio * batch_size) examples carry
/// in-sample negatives.
Batch make_batch(const SyntheticWorld& world, const TrainingConfig& config, std::size_t step);

/// Mean over the batch of contrastive + distill_weight * distillation.
LossTerms batch_loss(const ToyScorerParams& params, const ToyScorerParams& teacher, const Batch& batch,
                     const TrainingConfig& config);

/// Same loss with its analytic gradient with respect to both projections.
LossTerms batch_loss_and_gradient(const ToyScorerParams& params, const ToyScorerParams& teacher, const Batch& batch,
                                  const TrainingConfig& config, ParamGradient& gradient);

/// Max over parameters of |analytic - central difference| / max(|analytic|, |numeric|, floor).
double finite_difference_check(const ToyScorerParams& params, const ToyScorerParams& teacher, const Batch& batch,
                               const TrainingConfig& config, double step = 1e-5, double floor = 1e-6);

struct HardSetEvaluation {
    double rs_at_1 = 0.0;
    double mean_r_image = 0.0;
    double mean_r_text = 0.0;
    double imbalance = 0.0;
    /// Probes with at least one final state preserving a single modality.
    double single_modality_fraction = 0.0;
};

HardSetEvaluation evaluate_hard_set(const ToyScorerParams& params, std::span<const AugmentedSample> hard_set,
                                    std::size_t probe_count, std::size_t beam_width);

struct HistoryRecord {
    std::size_t step = 0;
    double loss = 0.0;
    double rs_at_1 = 0.0;
    double imbalance = 0.0;
};

struct TrainingResult {
    ToyScorerParams params;
    std::vector<HistoryRecord> history;
    HardSetEvaluation final_evaluation;
};

/// Adam on both projections, teacher = `init`. Throws DivergedLoss on a non-finite loss.
TrainingResult train_toy_scorer(const SyntheticWorld& world, const TrainingConfig& config,
                                const ToyScorerParams& init);

struct SweepConfig {
    WorldConfig world;
    /// Common-case pretraining producing the teacher checkpoint (ratio 0, no distillation).
    TrainingConfig pretrain;
    TrainingConfig finetune;
    std::vector<double> ratios{0.0, 0.25, 0.5, 0.75, 1.0};
};

struct SweepEntry {
    double ratio = 0.0;
    TrainingResult result;
};

struct SweepResult {
    TrainingResult pretrained;
    std::vector<SweepEntry> entries;
};

SweepConfig default_sweep_config();

SweepResult run_ratio_sweep(const SweepConfig& config);

}  // namespace fbcir
