#include "fbcir/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fbcir/error.hpp"

namespace fbcir {

namespace {

void check_contrastive(std::span<const double> scores, std::size_t positive_index, double temperature,
                       std::span<const double> weights) {
    if (scores.size() != weights.size()) throw Error(ErrorCode::InvalidArgument, "one weight per score required");
    if (positive_index >= scores.size()) throw Error(ErrorCode::InvalidArgument, "positive index out of range");
    if (!(temperature > 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be > 0");
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (j != positive_index && !(weights[j] >= 0.0)) throw Error(ErrorCode::InvalidArgument, "weights must be >= 0");
    }
}

// Terms log(w_j) + s_j / T, with the positive at weight 1; -inf for dropped negatives.
std::vector<double> log_terms(std::span<const double> scores, std::size_t positive_index, double temperature,
                              std::span<const double> weights) {
    std::vector<double> terms(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
        const double w = j == positive_index ? 1.0 : weights[j];
        terms[j] = w > 0.0 ? std::log(w) + scores[j] / temperature : -std::numeric_limits<double>::infinity();
    }
    return terms;
}

double log_sum_exp(std::span<const double> terms) {
    const double peak = *std::max_element(terms.begin(), terms.end());
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - peak);
    return peak + std::log(sum);
}

}  // namespace

double contrastive_loss(std::span<const double> scores, std::size_t positive_index, double temperature,
                        std::span<const double> weights) {
    check_contrastive(scores, positive_index, temperature, weights);
    const auto terms = log_terms(scores, positive_index, temperature, weights);
    return log_sum_exp(terms) - terms[positive_index];
}

std::vector<double> contrastive_loss_gradient(std::span<const double> scores, std::size_t positive_index,
                                              double temperature, std::span<const double> weights) {
    check_contrastive(scores, positive_index, temperature, weights);
    const auto terms = log_terms(scores, positive_index, temperature, weights);
    const double lse = log_sum_exp(terms);
    std::vector<double> grad(scores.size());
    for (std::size_t j = 0; j < scores.size(); ++j) {
        grad[j] = std::exp(terms[j] - lse) / temperature;
    }
    grad[positive_index] -= 1.0 / temperature;
    return grad;
}

std::vector<double> softmax(std::span<const double> logits, double temperature) {
    if (logits.empty()) return {};
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - peak) / temperature);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

namespace {

// log softmax, used for exact KL terms even when probabilities underflow.
std::vector<double> log_softmax(std::span<const double> logits, double temperature) {
    std::vector<double> scaled(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) scaled[i] = logits[i] / temperature;
    const double lse = log_sum_exp(scaled);
    for (auto& v : scaled) v -= lse;
    return scaled;
}

void check_distillation(std::span<const double> student, std::span<const double> teacher, double tau) {
    if (student.size() != teacher.size() || student.empty()) {
        throw Error(ErrorCode::InvalidArgument, "logit vectors must be non-empty and of equal length");
    }
    if (!(tau > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be > 0");
}

}  // namespace

double distillation_loss(std::span<const double> student_logits, std::span<const double> teacher_logits, double tau,
                         KlOrder order) {
    check_distillation(student_logits, teacher_logits, tau);
    auto log_a = log_softmax(student_logits, tau);
    auto log_b = log_softmax(teacher_logits, tau);
    if (order == KlOrder::TeacherFirst) std::swap(log_a, log_b);
    double kl = 0.0;
    for (std::size_t i = 0; i < log_a.size(); ++i) kl += std::exp(log_a[i]) * (log_a[i] - log_b[i]);
    return tau * tau * std::max(0.0, kl);
}

std::vector<double> distillation_loss_gradient(std::span<const double> student_logits,
                                               std::span<const double> teacher_logits, double tau, KlOrder order) {
    check_distillation(student_logits, teacher_logits, tau);
    const auto log_s = log_softmax(student_logits, tau);
    const auto log_t = log_softmax(teacher_logits, tau);
    std::vector<double> grad(student_logits.size());
    if (order == KlOrder::StudentFirst) {
        // d/dz_k [tau^2 KL(a||b)] = tau * a_k * (log a_k - log b_k - KL)
        double kl = 0.0;
        for (std::size_t i = 0; i < log_s.size(); ++i) kl += std::exp(log_s[i]) * (log_s[i] - log_t[i]);
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = tau * std::exp(log_s[k]) * (log_s[k] - log_t[k] - kl);
    } else {
        // d/dz_k [tau^2 KL(b||a)] = tau * (a_k - b_k)
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = tau * (std::exp(log_s[k]) - std::exp(log_t[k]));
    }
    return grad;
}

double in_sample_weight(std::size_t step, std::size_t total_steps, const RampSchedule& ramp) {
    if (!(ramp.fraction > 0.0 && ramp.fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "ramp fraction must lie in (0,1]");
    }
    if (step > total_steps) throw Error(ErrorCode::InvalidArgument, "step exceeds total steps");
    const double ramp_steps = ramp.fraction * static_cast<double>(total_steps);
    const auto s = static_cast<double>(step);
    if (ramp_steps <= 0.0 || s >= ramp_steps) return ramp.end;
    return ramp.start + (ramp.end - ramp.start) * s / ramp_steps;
}

}  // namespace fbcir
