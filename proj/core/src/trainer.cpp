#include "fbcir/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fbcir/augment.hpp"
#include "fbcir/error.hpp"
#include "fbcir/metrics.hpp"
#include "fbcir/refinement.hpp"

namespace fbcir {

void TrainingConfig::validate() const {
    if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
    if (!(learning_rate >= 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be >= 0");
    if (!(contrastive_temperature > 0.0) || !(distill_temperature > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "temperatures must be > 0");
    }
    if (!(ramp.fraction > 0.0 && ramp.fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "ramp fraction must lie in (0,1]");
    }
    if (!(negative_ratio >= 0.0 && negative_ratio <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "negative ratio must lie in [0,1]");
    }
    if (!(distill_weight >= 0.0)) throw Error(ErrorCode::InvalidArgument, "distillation weight must be >= 0");
    if (eval_interval < 1) throw Error(ErrorCode::InvalidArgument, "eval interval must be >= 1");
}

Batch make_batch(const SyntheticWorld& world, const TrainingConfig& config, std::size_t step) {
    Batch batch;
    batch.in_sample_weight = in_sample_weight(std::min(step, config.steps), config.steps, config.ramp);
    const auto step_seed = stable_hash("batch:" + std::to_string(step), config.seed);
    const auto augmented = select_augmented_indices(config.batch_size, config.negative_ratio, step_seed);
    std::vector<char> is_augmented(config.batch_size, 0);
    for (auto i : augmented) is_augmented[i] = 1;

    batch.examples.reserve(config.batch_size);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
        TrainingExample example{world.item(config.train_stream, step * config.batch_size + b), {}};
        if (is_augmented[b]) {
            example.in_sample =
                select_in_sample_negatives(example.item.hard, config.in_sample_negatives, step_seed + b + 1);
        }
        batch.examples.push_back(std::move(example));
    }
    return batch;
}

namespace {

// Candidate layout per example: positive, local common-case negatives, other examples'
// positives (in-batch), then in-sample hard negatives. Distillation covers everything but the
// in-sample negatives.
struct ExampleView {
    QueryEmbedding embedding;
    std::vector<const FeatureVector*> candidates;
    std::vector<double> weights;
    std::size_t distill_count = 0;
};

const FeatureVector& positive_feature(const AugmentedSample& sample) {
    const auto id = sample.positive_id();
    for (const auto& c : sample.candidates) {
        if (c.id == id) return *c.feature;
    }
    throw Error(ErrorCode::MissingPositive, sample.sample_id);
}

std::vector<ExampleView> build_views(const Batch& batch, std::size_t dim) {
    std::vector<ExampleView> views;
    views.reserve(batch.examples.size());
    for (std::size_t i = 0; i < batch.examples.size(); ++i) {
        const auto& example = batch.examples[i];
        const auto& common = example.item.common;
        ExampleView view;
        view.embedding = embed_query(common.query, common.query.full_mask(), dim);
        view.candidates.push_back(&positive_feature(common));
        view.weights.push_back(1.0);
        for (const auto& c : common.candidates) {
            if (c.kind == CandidateKind::Positive) continue;
            view.candidates.push_back(&*c.feature);
            view.weights.push_back(1.0);
        }
        for (std::size_t j = 0; j < batch.examples.size(); ++j) {
            if (j == i) continue;
            view.candidates.push_back(&positive_feature(batch.examples[j].item.common));
            view.weights.push_back(1.0);
        }
        view.distill_count = view.candidates.size();
        for (auto id : example.in_sample) {
            for (const auto& c : example.item.hard.candidates) {
                if (c.id != id) continue;
                view.candidates.push_back(&*c.feature);
                view.weights.push_back(batch.in_sample_weight);
            }
        }
        views.push_back(std::move(view));
    }
    return views;
}

LossTerms example_loss(const ToyScorerParams& params, const ToyScorerParams& teacher, const ExampleView& view,
                       const TrainingConfig& config, ParamGradient* gradient, double scale) {
    const Eigen::VectorXd q = params.image_projection * view.embedding.image +
                              params.text_projection * view.embedding.text;
    const double norm = q.norm();
    const auto count = view.candidates.size();
    const Eigen::VectorXd q_hat = norm > 0.0 ? Eigen::VectorXd(q / norm) : Eigen::VectorXd::Zero(q.size());

    std::vector<double> scores(count);
    for (std::size_t c = 0; c < count; ++c) scores[c] = q_hat.dot(*view.candidates[c]);

    const double temperature = config.contrastive_temperature;
    LossTerms terms;
    terms.contrastive = contrastive_loss(scores, 0, temperature, view.weights);
    std::vector<double> grad;
    if (gradient) grad = contrastive_loss_gradient(scores, 0, temperature, view.weights);

    if (config.distill_weight > 0.0) {
        const Eigen::VectorXd teacher_q = project_query(teacher, view.embedding);
        std::vector<double> student_logits(view.distill_count);
        std::vector<double> teacher_logits(view.distill_count);
        for (std::size_t c = 0; c < view.distill_count; ++c) {
            student_logits[c] = scores[c] / temperature;
            teacher_logits[c] = teacher_q.dot(*view.candidates[c]) / temperature;
        }
        terms.distillation =
            distillation_loss(student_logits, teacher_logits, config.distill_temperature, config.kl_order);
        if (gradient) {
            const auto g = distillation_loss_gradient(student_logits, teacher_logits, config.distill_temperature,
                                                      config.kl_order);
            for (std::size_t c = 0; c < view.distill_count; ++c) {
                grad[c] += config.distill_weight * g[c] / temperature;
            }
        }
    }
    terms.total = terms.contrastive + config.distill_weight * terms.distillation;

    if (gradient && norm > 0.0) {
        Eigen::VectorXd g_hat = Eigen::VectorXd::Zero(q.size());
        for (std::size_t c = 0; c < count; ++c) g_hat.noalias() += grad[c] * *view.candidates[c];
        // Through the normalization q_hat = q / |q|.
        const Eigen::VectorXd g_q = (g_hat - g_hat.dot(q_hat) * q_hat) / norm;
        gradient->image.noalias() += scale * g_q * view.embedding.image.transpose();
        gradient->text.noalias() += scale * g_q * view.embedding.text.transpose();
    }
    return terms;
}

LossTerms accumulate(const ToyScorerParams& params, const ToyScorerParams& teacher, const Batch& batch,
                     const TrainingConfig& config, ParamGradient* gradient) {
    if (batch.examples.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
    const auto views = build_views(batch, params.dim());
    const double scale = 1.0 / static_cast<double>(views.size());
    if (gradient) {
        gradient->image = Eigen::MatrixXd::Zero(params.image_projection.rows(), params.image_projection.cols());
        gradient->text = Eigen::MatrixXd::Zero(params.text_projection.rows(), params.text_projection.cols());
    }
    LossTerms total;
    for (const auto& view : views) {
        const auto t = example_loss(params, teacher, view, config, gradient, scale);
        total.total += scale * t.total;
        total.contrastive += scale * t.contrastive;
        total.distillation += scale * t.distillation;
    }
    return total;
}

}  // namespace

LossTerms batch_loss(const ToyScorerParams& params, const ToyScorerParams& teacher, const Batch& batch,
                     const TrainingConfig& config) {
    return accumulate(params, teacher, batch, config, nullptr);
}

LossTerms batch_loss_and_gradient(const ToyScorerParams& params, const ToyScorerParams& teacher, const Batch& batch,
                                  const TrainingConfig& config, ParamGradient& gradient) {
    return accumulate(params, teacher, batch, config, &gradient);
}

double finite_difference_check(const ToyScorerParams& params, const ToyScorerParams& teacher, const Batch& batch,
                               const TrainingConfig& config, double step, double floor) {
    ParamGradient analytic;
    batch_loss_and_gradient(params, teacher, batch, config, analytic);

    double worst = 0.0;
    auto probe = [&](bool image, Eigen::Index r, Eigen::Index c, double analytic_value) {
        ToyScorerParams shifted = params;
        auto& m = image ? shifted.image_projection : shifted.text_projection;
        const double original = m(r, c);
        m(r, c) = original + step;
        const double plus = batch_loss(shifted, teacher, batch, config).total;
        m(r, c) = original - step;
        const double minus = batch_loss(shifted, teacher, batch, config).total;
        const double numeric = (plus - minus) / (2.0 * step);
        const double denom = std::max({std::abs(analytic_value), std::abs(numeric), floor});
        worst = std::max(worst, std::abs(analytic_value - numeric) / denom);
    };
    for (Eigen::Index r = 0; r < analytic.image.rows(); ++r) {
        for (Eigen::Index c = 0; c < analytic.image.cols(); ++c) {
            probe(true, r, c, analytic.image(r, c));
            probe(false, r, c, analytic.text(r, c));
        }
    }
    return worst;
}

HardSetEvaluation evaluate_hard_set(const ToyScorerParams& params, std::span<const AugmentedSample> hard_set,
                                    std::size_t probe_count, std::size_t beam_width) {
    HardSetEvaluation out;
    if (hard_set.empty()) return out;
    ToyScorer scorer(params);
    std::size_t hits = 0;
    for (const auto& sample : hard_set) {
        const auto ranking = rank(scorer, sample, sample.query.full_mask());
        if (ranking.top() == sample.positive_id()) ++hits;
    }
    out.rs_at_1 = static_cast<double>(hits) / static_cast<double>(hard_set.size());

    const auto probes = std::min(probe_count, hard_set.size());
    if (probes == 0) return out;
    RefinementConfig refinement;
    refinement.beam_width = beam_width;
    std::size_t single_modality = 0;
    for (std::size_t i = 0; i < probes; ++i) {
        const auto result = refine(hard_set[i], scorer, refinement);
        const auto report = make_focus_report(result, hard_set[i].query);
        out.mean_r_image += report.r_image;
        out.mean_r_text += report.r_text;
        const bool single = std::any_of(report.states.begin(), report.states.end(),
                                        [](const StateFocus& s) { return s.p_image == 0.0 || s.p_text == 0.0; });
        if (single) ++single_modality;
    }
    out.mean_r_image /= static_cast<double>(probes);
    out.mean_r_text /= static_cast<double>(probes);
    out.imbalance = std::abs(out.mean_r_image - out.mean_r_text);
    out.single_modality_fraction = static_cast<double>(single_modality) / static_cast<double>(probes);
    return out;
}

TrainingResult train_toy_scorer(const SyntheticWorld& world, const TrainingConfig& config,
                                const ToyScorerParams& init) {
    config.validate();
    init.validate();
    if (init.dim() != world.config().dim) throw Error(ErrorCode::DimensionMismatch, "params and world differ in dim");

    const auto hard_set = world.hard_samples(config.eval_stream, config.hard_eval_count);
    const ToyScorerParams teacher = init;
    TrainingResult result{init, {}, {}};
    auto& params = result.params;

    const auto rows = params.image_projection.rows();
    const auto cols = params.image_projection.cols();
    Eigen::MatrixXd m_image = Eigen::MatrixXd::Zero(rows, cols), v_image = m_image;
    Eigen::MatrixXd m_text = m_image, v_text = m_image;
    constexpr double beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8;

    auto record = [&](std::size_t step, double loss) {
        const auto eval = evaluate_hard_set(params, hard_set, config.probe_count, config.probe_beam_width);
        result.history.push_back({step, loss, eval.rs_at_1, eval.imbalance});
        result.final_evaluation = eval;
    };

    if (config.steps == 0) {
        record(0, batch_loss(params, teacher, make_batch(world, config, 0), config).total);
        return result;
    }

    double interval_loss = 0.0;
    std::size_t interval_steps = 0;
    ParamGradient gradient;
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto batch = make_batch(world, config, step);
        const auto terms = batch_loss_and_gradient(params, teacher, batch, config, gradient);
        if (!std::isfinite(terms.total) || !gradient.image.allFinite() || !gradient.text.allFinite()) {
            throw Error(ErrorCode::DivergedLoss, "non-finite loss at step " + std::to_string(step));
        }
        if (step == 0) record(0, terms.total);
        interval_loss += terms.total;
        ++interval_steps;

        double lr = config.learning_rate;
        if (config.cosine_schedule) {
            lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(config.steps)));
        }
        const double t = static_cast<double>(step + 1);
        const double correction1 = 1.0 - std::pow(beta1, t);
        const double correction2 = 1.0 - std::pow(beta2, t);
        auto adam = [&](Eigen::MatrixXd& w, Eigen::MatrixXd& m, Eigen::MatrixXd& v, const Eigen::MatrixXd& g) {
            m = beta1 * m + (1.0 - beta1) * g;
            v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
            w.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + epsilon);
        };
        if (lr > 0.0) {
            adam(params.image_projection, m_image, v_image, gradient.image);
            adam(params.text_projection, m_text, v_text, gradient.text);
        }

        const auto done = step + 1;
        if (done % config.eval_interval == 0 || done == config.steps) {
            record(done, interval_loss / static_cast<double>(interval_steps));
            interval_loss = 0.0;
            interval_steps = 0;
        }
    }
    if (!params.image_projection.allFinite() || !params.text_projection.allFinite()) {
        throw Error(ErrorCode::DivergedLoss, "non-finite parameters after training");
    }
    return result;
}

SweepConfig default_sweep_config() {
    SweepConfig config;
    config.world.seed = 7;
    config.pretrain.steps = 600;
    config.pretrain.distill_weight = 0.0;
    config.pretrain.negative_ratio = 0.0;
    config.pretrain.seed = 7;
    config.pretrain.train_stream = 11;
    config.finetune.steps = 600;
    // 1e3 pins this 2x32x32 student to its teacher; see README (training notes).
    config.finetune.distill_weight = 10.0;
    config.finetune.seed = 7;
    config.finetune.train_stream = 12;
    return config;
}

SweepResult run_ratio_sweep(const SweepConfig& config) {
    const SyntheticWorld world(config.world);
    SweepResult result;
    result.pretrained = train_toy_scorer(world, config.pretrain, ToyScorerParams::identity(config.world.dim));
    for (double ratio : config.ratios) {
        auto finetune = config.finetune;
        finetune.negative_ratio = ratio;
        result.entries.push_back({ratio, train_toy_scorer(world, finetune, result.pretrained.params)});
    }
    return result;
}

}  // namespace fbcir
