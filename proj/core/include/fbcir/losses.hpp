#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fbcir {

/// Weighted InfoNCE: -log(exp(s+/T) / (exp(s+/T) + sum_j w_j exp(s_j/T))).
/// weights[positive_index] is ignored (the positive always has weight 1); zero weights drop a negative.
double contrastive_loss(std::span<const double> scores, std::size_t positive_index, double temperature,
                        std::span<const double> weights);

/// d(contrastive_loss)/d(scores).
std::vector<double> contrastive_loss_gradient(std::span<const double> scores, std::size_t positive_index,
                                              double temperature, std::span<const double> weights);

enum class KlOrder {
    /// tau^2 KL(softmax(student/tau) || softmax(teacher/tau)), argument order as published.
    StudentFirst,
    /// tau^2 KL(softmax(teacher/tau) || softmax(student/tau)), the usual distillation direction.
    TeacherFirst,
};

double distillation_loss(std::span<const double> student_logits, std::span<const double> teacher_logits, double tau,
                         KlOrder order = KlOrder::StudentFirst);

/// d(distillation_loss)/d(student_logits).
std::vector<double> distillation_loss_gradient(std::span<const double> student_logits,
                                               std::span<const double> teacher_logits, double tau,
                                               KlOrder order = KlOrder::StudentFirst);

struct RampSchedule {
    double start = 0.2;
    double end = 2.0;
    double fraction = 0.15;
};

/// Linear ramp from start (step 0) to end (fraction * total_steps), constant afterwards.
double in_sample_weight(std::size_t step, std::size_t total_steps, const RampSchedule& ramp = {});

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits, double temperature = 1.0);

}  // namespace fbcir
