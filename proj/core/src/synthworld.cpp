#include "fbcir/synthworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "fbcir/error.hpp"

namespace fbcir {

void WorldConfig::validate() const {
    if (dim < 4) throw Error(ErrorCode::InvalidArgument, "world dimension must be >= 4");
    if (pool_size < 2) throw Error(ErrorCode::InvalidArgument, "pool size must be >= 2");
    if (min_image_tokens < 1 || min_image_tokens > max_image_tokens) {
        throw Error(ErrorCode::InvalidArgument, "invalid image token range");
    }
    if (min_text_tokens < 1 || min_text_tokens > max_text_tokens) {
        throw Error(ErrorCode::InvalidArgument, "invalid text token range");
    }
    if (!(modality_bias >= 0.0 && modality_bias <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "modality bias must lie in [0,1]");
    }
    if (!(text_emphasis > 0.0)) throw Error(ErrorCode::InvalidArgument, "text emphasis must be > 0");
    if (!(edit_strength > 0.0)) throw Error(ErrorCode::InvalidArgument, "edit strength must be > 0");
    if (!(feature_noise >= 0.0)) throw Error(ErrorCode::InvalidArgument, "feature noise must be >= 0");
    // Distinct concepts one item may draw: query image, key word, then the larger of the two pools.
    const auto common_draw = pool_size - 1;
    const auto hard_draw = 1 + max_image_tokens + (std::max<std::size_t>(5, pool_size) - 4) * (max_image_tokens + 1);
    if (concept_count < max_image_tokens + 1 + std::max(common_draw, hard_draw)) {
        throw Error(ErrorCode::InvalidArgument, "concept bank too small for the configured pools");
    }
    if (filler_count < 1) throw Error(ErrorCode::InvalidArgument, "filler bank must be non-empty");
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Eigen::MatrixXd unit_columns(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = normal(rng);
        m.col(c).normalize();
    }
    return m;
}

constexpr std::array<const char*, 8> kFillerWords{"with", "make", "the", "a", "into", "show", "it", "more"};

}  // namespace

SyntheticWorld::SyntheticWorld(WorldConfig config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(splitmix(config_.seed ^ 0xC0FFEEULL));
    concepts_ = unit_columns(config_.dim, config_.concept_count, rng);
    fillers_ = unit_columns(config_.dim, config_.filler_count, rng);
}

WorldItem SyntheticWorld::item(std::uint64_t stream, std::size_t index) const {
    std::mt19937_64 rng(splitmix(splitmix(config_.seed) ^ splitmix(stream + 0x51ULL) ^ splitmix(index * 2 + 1)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto dim = static_cast<Eigen::Index>(config_.dim);
    const double noise_scale = config_.feature_noise / std::sqrt(static_cast<double>(config_.dim));
    auto noise = [&] {
        Eigen::VectorXd v(dim);
        for (Eigen::Index i = 0; i < dim; ++i) v(i) = noise_scale * normal(rng);
        return v;
    };
    auto uniform_count = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
    };

    std::vector<std::size_t> concept_order(config_.concept_count);
    std::iota(concept_order.begin(), concept_order.end(), 0);
    std::shuffle(concept_order.begin(), concept_order.end(), rng);
    std::size_t next_concept = 0;
    std::size_t reserved = 0;  // concepts of the query itself, never reused once the bank runs out
    auto take_concept = [&] {
        if (next_concept < concept_order.size()) return concept_order[next_concept++];
        return concept_order[uniform_count(reserved, config_.concept_count - 1)];
    };

    // Query image: weighted segments.
    const auto n_image = uniform_count(config_.min_image_tokens, config_.max_image_tokens);
    std::vector<std::size_t> image_concepts(n_image);
    for (auto& c : image_concepts) c = take_concept();
    std::uniform_real_distribution<double> area_dist(0.5, 1.5);
    std::vector<RawSegment> segments;
    std::vector<double> areas;
    Eigen::VectorXd image_content = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd query_image_vector = Eigen::VectorXd::Zero(dim);
    for (auto c : image_concepts) {
        const double area = area_dist(rng);
        areas.push_back(area);
        Eigen::VectorXd feature = concept_vector(c) + noise();
        image_content += area * concept_vector(c);
        query_image_vector += area * feature;
        segments.push_back({area, std::move(feature), {}});
    }
    image_content.normalize();
    query_image_vector.normalize();

    // Query text: one key concept word among fillers.
    const auto n_text = uniform_count(config_.min_text_tokens, config_.max_text_tokens);
    const auto key_concept = take_concept();
    const auto key_position = uniform_count(0, n_text - 1);
    std::vector<RawToken> tokens;
    std::string query_text;
    for (std::size_t i = 0; i < n_text; ++i) {
        RawToken token;
        if (i == key_position) {
            token.surface = "c" + std::to_string(key_concept);
            token.feature = concept_vector(key_concept) + noise();
        } else {
            const auto f = uniform_count(0, config_.filler_count - 1);
            token.surface = kFillerWords[f % kFillerWords.size()];
            token.feature = Eigen::VectorXd(fillers_.col(static_cast<Eigen::Index>(f))) + noise();
        }
        if (!query_text.empty()) query_text.push_back(' ');
        query_text += token.surface;
        tokens.push_back(std::move(token));
    }
    const Eigen::VectorXd key_text = concept_vector(key_concept);
    reserved = next_concept;

    auto make_candidate = [&](const Eigen::VectorXd& image_part, const Eigen::VectorXd& text_part) {
        Eigen::VectorXd v = image_part.normalized() + text_part + noise();
        return Eigen::VectorXd(v.normalized());
    };
    auto fresh_image = [&] {
        const auto count = uniform_count(config_.min_image_tokens, config_.max_image_tokens);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
        for (std::size_t k = 0; k < count; ++k) v += area_dist(rng) * concept_vector(take_concept());
        return Eigen::VectorXd(v.normalized());
    };

    const std::string prefix = "synth://" + std::to_string(config_.seed) + "/" + std::to_string(stream) + "/" +
                               std::to_string(index) + "/";
    const std::string query_image = prefix + "query";

    auto finish = [&](std::vector<std::pair<CandidateKind, FeatureVector>> pool, const char* tag) {
        AugmentedSample sample;
        sample.sample_id = prefix.substr(8) + tag;
        sample.query = normalize_query(segments, tokens);
        sample.query_text = query_text;
        sample.query_image = query_image;
        sample.provenance = "synthworld";
        std::vector<CandidateId> ids(pool.size());
        std::iota(ids.begin(), ids.end(), 0);
        std::shuffle(ids.begin(), ids.end(), rng);
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const bool identity = pool[i].first == CandidateKind::IdentityNegative;
            sample.candidates.push_back({ids[i], pool[i].first, std::move(pool[i].second),
                                         identity ? query_image : prefix + tag + "/cand" + std::to_string(i)});
        }
        std::sort(sample.candidates.begin(), sample.candidates.end(),
                  [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
        return sample;
    };

    const Eigen::VectorXd positive = make_candidate(image_content, key_text);

    // Common-case pool.
    std::vector<std::pair<CandidateKind, FeatureVector>> common{{CandidateKind::Positive, positive}};
    const bool image_separable = std::bernoulli_distribution(config_.modality_bias)(rng);
    const auto pattern_start = next_concept;
    const double positive_image_score = query_image_vector.dot(positive);
    Eigen::VectorXd query_text_vector = Eigen::VectorXd::Zero(dim);
    for (const auto& token : tokens) query_text_vector += *token.feature;
    const double positive_text_score = query_text_vector.dot(positive);
    for (std::size_t k = 1; k < config_.pool_size; ++k) {
        if (image_separable) {
            // Same scene with one visual concept swapped out. A substitute that happens to align with
            // the query image is redrawn so that the image alone always separates the positive.
            const auto replaced = uniform_count(0, n_image - 1);
            auto substitute = take_concept();
            Eigen::VectorXd candidate;
            for (int attempt = 0;; ++attempt) {
                Eigen::VectorXd swapped = Eigen::VectorXd::Zero(dim);
                for (std::size_t i = 0; i < n_image; ++i) {
                    swapped += areas[i] * concept_vector(i == replaced ? substitute : image_concepts[i]);
                }
                candidate = make_candidate(swapped, key_text);
                if (query_image_vector.dot(candidate) < positive_image_score || attempt == 64) break;
                substitute = take_concept();
            }
            common.emplace_back(CandidateKind::Distractor, std::move(candidate));
        } else {
            auto other = take_concept();
            Eigen::VectorXd candidate;
            for (int attempt = 0;; ++attempt) {
                candidate = make_candidate(image_content, concept_vector(other));
                if (query_text_vector.dot(candidate) < positive_text_score || attempt == 64) break;
                other = take_concept();
            }
            common.emplace_back(CandidateKind::Distractor, std::move(candidate));
        }
    }
    // Hard pools reuse the concept budget from the same starting point.
    next_concept = pattern_start;

    std::vector<std::pair<CandidateKind, FeatureVector>> hard{{CandidateKind::Positive, positive}};
    // The edited reference keeps the query image closer than the positive does; redrawn like above.
    Eigen::VectorXd text_aug;
    auto edit = take_concept();
    for (int attempt = 0;; ++attempt) {
        text_aug = make_candidate(image_content, config_.edit_strength * concept_vector(edit));
        if (query_image_vector.dot(text_aug) > positive_image_score || attempt == 64) break;
        edit = take_concept();
    }
    hard.emplace_back(CandidateKind::TextAugNegative, std::move(text_aug));
    // A new scene carrying the requested concept; under the text alone it beats the positive.
    Eigen::VectorXd image_aug;
    for (int attempt = 0;; ++attempt) {
        image_aug = make_candidate(fresh_image(), config_.text_emphasis * key_text);
        if (query_text_vector.dot(image_aug) > positive_text_score || attempt == 64) break;
    }
    hard.emplace_back(CandidateKind::ImageAugNegative, std::move(image_aug));
    hard.emplace_back(CandidateKind::IdentityNegative, query_image_vector);
    while (hard.size() < std::max<std::size_t>(5, config_.pool_size)) {
        hard.emplace_back(CandidateKind::Distractor, make_candidate(fresh_image(), concept_vector(take_concept())));
    }

    WorldItem item;
    item.common = finish(std::move(common), "common");
    item.hard = finish(std::move(hard), "hard");
    return item;
}

std::vector<AugmentedSample> SyntheticWorld::hard_samples(std::uint64_t stream, std::size_t count) const {
    std::vector<AugmentedSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(item(stream, i).hard);
    return out;
}

std::vector<AugmentedSample> SyntheticWorld::common_samples(std::uint64_t stream, std::size_t count) const {
    std::vector<AugmentedSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(item(stream, i).common);
    return out;
}

std::vector<AugmentedSample> generate_world(const WorldConfig& config, std::size_t count, double hard_fraction) {
    if (!(hard_fraction >= 0.0 && hard_fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "hard fraction must lie in [0,1]");
    }
    SyntheticWorld world(config);
    std::vector<AugmentedSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const bool hard = std::floor(static_cast<double>(i + 1) * hard_fraction) >
                          std::floor(static_cast<double>(i) * hard_fraction);
        auto item = world.item(0, i);
        out.push_back(hard ? std::move(item.hard) : std::move(item.common));
    }
    return out;
}

}  // namespace fbcir
