#pragma once

// Synthetic composed-retrieval universe with inline feature vectors.
//
// Every query is a few weighted image segments (one concept each) plus a short text with
// one key concept word among filler words. The positive carries both the image content and
// the text concept. Common-case pools let one modality alone separate the positive: with
// probability `modality_bias` the negatives lack the image content (image shortcut), otherwise
// they lack the text concept (text shortcut). Hard pools carry the four augmented kinds.

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fbcir/types.hpp"

namespace fbcir {

struct WorldConfig {
    std::size_t dim = 32;
    std::size_t concept_count = 64;
    std::size_t filler_count = 6;
    std::size_t min_image_tokens = 2;
    std::size_t max_image_tokens = 4;
    std::size_t min_text_tokens = 2;
    std::size_t max_text_tokens = 4;
    std::size_t pool_size = 5;
    /// Probability that a common-case pool is separable by the image alone.
    double modality_bias = 1.0;
    /// Norm of the Gaussian perturbation added to token and candidate features.
    double feature_noise = 0.1;
    /// Weight of the text concept in image-augmented negatives. Above 1 they beat the positive
    /// under a text-only query, mirroring the identity negative under an image-only query.
    double text_emphasis = 1.3;
    /// Weight of the substituted concept in text-augmented negatives. Below 1 they stay closer to
    /// the query image than the positive does.
    double edit_strength = 0.5;
    std::uint64_t seed = 0;

    /// Throws InvalidArgument (dim < 4, pool_size < 2, empty ranges, bias outside [0,1], non-positive weights).
    void validate() const;
};

/// A query together with both of its candidate pools.
struct WorldItem {
    AugmentedSample common;  // Positive + easy negatives
    AugmentedSample hard;    // Positive, TextAug, ImageAug, Identity, Distractor(s)
};

class SyntheticWorld {
public:
    explicit SyntheticWorld(WorldConfig config);

    const WorldConfig& config() const noexcept { return config_; }

    /// Deterministic in (seed, stream, index).
    WorldItem item(std::uint64_t stream, std::size_t index) const;

    std::vector<AugmentedSample> hard_samples(std::uint64_t stream, std::size_t count) const;
    std::vector<AugmentedSample> common_samples(std::uint64_t stream, std::size_t count) const;

private:
    Eigen::VectorXd concept_vector(std::size_t concept_id) const { return concepts_.col(static_cast<Eigen::Index>(concept_id)); }

    WorldConfig config_;
    Eigen::MatrixXd concepts_;  // dim x concept_count, unit columns
    Eigen::MatrixXd fillers_;   // dim x filler_count, unit columns
};

/// Emits `count` samples: every other one is a hard sample when hard_fraction = 0.5, chosen
/// deterministically so that exactly round(hard_fraction * count) are hard.
std::vector<AugmentedSample> generate_world(const WorldConfig& config, std::size_t count, double hard_fraction = 0.5);

}  // namespace fbcir
