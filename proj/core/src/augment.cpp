#include "fbcir/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <iterator>
#include <random>
#include <thread>

#include "fbcir/error.hpp"
#include "fbcir/protocol.hpp"

namespace fbcir {

std::uint64_t stable_hash(std::string_view text, std::uint64_t seed) noexcept {
    std::uint64_t h = 14695981039346656037ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string_view to_string(SourceKind kind) noexcept {
    return kind == SourceKind::SimilarityPaired ? "similarity_paired" : "editing_driven";
}

SourceKind source_kind_from_string(std::string_view text) {
    if (text == "similarity_paired") return SourceKind::SimilarityPaired;
    if (text == "editing_driven") return SourceKind::EditingDriven;
    throw Error(ErrorCode::Parse, "unknown source kind '" + std::string(text) + "'");
}

void validate_triplet(const SourceTriplet& triplet) {
    if (triplet.query_image.empty() || triplet.positive.empty()) {
        throw Error(ErrorCode::InvalidArgument, "triplet " + triplet.id + " has an empty image reference");
    }
    if (split_words(triplet.query_text).empty()) {
        throw Error(ErrorCode::InvalidArgument, "triplet " + triplet.id + " has an empty query text");
    }
}

namespace {

std::string hex(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string join_key(std::initializer_list<std::string_view> parts) {
    std::string key;
    for (auto p : parts) {
        key.append(p);
        key.push_back('\x1f');
    }
    return key;
}

}  // namespace

std::vector<std::string> MockGenerationClient::mutate_text(const std::string& sample_id,
                                                           const std::string& query_text, std::size_t count) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < count; ++k) {
        const auto h = stable_hash(join_key({"mutate_text", sample_id, query_text, std::to_string(k)}), seed_);
        out.push_back("not (" + query_text + ") #" + hex(h).substr(0, 8));
    }
    return out;
}

std::string MockGenerationClient::edit_image(const std::string& sample_id, const std::string& image_ref,
                                             const std::string& instruction) {
    return "mock://edit/" + hex(stable_hash(join_key({"edit_image", sample_id, image_ref, instruction}), seed_)) + ".png";
}

std::string MockGenerationClient::generate_image(const std::string& sample_id, const std::string& description,
                                                 const std::string& variant) {
    return "mock://gen/" + hex(stable_hash(join_key({"generate_image", sample_id, description, variant}), seed_)) +
           ".png";
}

std::string MockGenerationClient::describe(const std::string& sample_id, const std::string& image_ref,
                                           const std::string& query_text) {
    const auto h = stable_hash(join_key({"describe", sample_id, image_ref, query_text}), seed_);
    return "scene from " + image_ref + " where " + query_text + " #" + hex(h).substr(0, 8);
}

RemoteGenerationClient::RemoteGenerationClient(Endpoint endpoint, RemoteOptions options)
    : pool_(std::move(endpoint), options) {}

namespace {

std::string single_output(const std::vector<std::string>& outputs) {
    if (outputs.size() != 1) throw Error(ErrorCode::ProtocolViolation, "expected exactly one generated output");
    return outputs.front();
}

}  // namespace

std::vector<std::string> RemoteGenerationClient::mutate_text(const std::string& sample_id,
                                                             const std::string& query_text, std::size_t count) {
    const auto line = pool_.round_trip(protocol::encode_generate_request_line(
        sample_id, protocol::Capability::MutateText, {{"text", query_text}, {"count", count}}));
    return protocol::decode_generate_response(line, sample_id);
}

std::string RemoteGenerationClient::edit_image(const std::string& sample_id, const std::string& image_ref,
                                               const std::string& instruction) {
    const auto line = pool_.round_trip(protocol::encode_generate_request_line(
        sample_id, protocol::Capability::EditImage, {{"image", image_ref}, {"instruction", instruction}}));
    return single_output(protocol::decode_generate_response(line, sample_id));
}

std::string RemoteGenerationClient::generate_image(const std::string& sample_id, const std::string& description,
                                                   const std::string& variant) {
    const auto line = pool_.round_trip(protocol::encode_generate_request_line(
        sample_id, protocol::Capability::GenerateImage, {{"description", description}, {"variant", variant}}));
    return single_output(protocol::decode_generate_response(line, sample_id));
}

std::string RemoteGenerationClient::describe(const std::string& sample_id, const std::string& image_ref,
                                             const std::string& query_text) {
    const auto line = pool_.round_trip(protocol::encode_generate_request_line(
        sample_id, protocol::Capability::Describe, {{"image", image_ref}, {"text", query_text}}));
    return single_output(protocol::decode_generate_response(line, sample_id));
}

void AugmentPlan::validate() const {
    if (!(negative_ratio >= 0.0 && negative_ratio <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "negative_ratio must lie in [0,1]");
    }
}

namespace {

TokenizedQuery tokenize_triplet(const SourceTriplet& triplet) {
    std::vector<RawSegment> segments = triplet.segments;
    if (segments.empty()) segments.push_back({1.0, std::nullopt, triplet.query_image + "#full"});
    std::vector<RawToken> tokens;
    for (auto& word : split_words(triplet.query_text)) tokens.push_back({std::move(word), std::nullopt});
    return normalize_query(segments, tokens);
}

template <typename F>
auto stage(const std::string& sample_id, const char* name, F&& call) {
    try {
        return call();
    } catch (const std::exception& e) {
        throw Error(ErrorCode::GenerationFailed, "sample " + sample_id + " stage " + name + ": " + e.what());
    }
}

AugmentedSample base_sample(const SourceTriplet& triplet) {
    validate_triplet(triplet);
    AugmentedSample sample;
    sample.sample_id = triplet.id;
    sample.query = tokenize_triplet(triplet);
    sample.query_text = triplet.query_text;
    sample.query_image = triplet.query_image;
    sample.provenance = triplet.dataset;
    return sample;
}

}  // namespace

AugmentedSample passthrough_sample(const SourceTriplet& triplet) {
    auto sample = base_sample(triplet);
    sample.candidates.push_back({0, CandidateKind::Positive, std::nullopt, triplet.positive});
    return sample;
}

AugmentedSample plan_augmented_sample(const SourceTriplet& triplet, const AugmentPlan& plan, GenerationClient& client,
                                      std::span<const std::string> distractors) {
    plan.validate();
    auto sample = base_sample(triplet);
    const auto& id = triplet.id;
    std::vector<Candidate> pool;
    auto add = [&pool](CandidateKind kind, std::string asset) {
        pool.push_back({0, kind, std::nullopt, std::move(asset)});
    };

    const auto policy = plan.positive_policy.value_or(triplet.source == SourceKind::SimilarityPaired
                                                          ? PositivePolicy::SynthesizeReplacement
                                                          : PositivePolicy::KeepOriginal);
    const bool needs_description = plan.image_aug_count > 0 || policy == PositivePolicy::SynthesizeReplacement;
    std::string description;
    if (needs_description) {
        description = stage(id, "describe", [&] { return client.describe(id, triplet.query_image, triplet.query_text); });
    }

    if (policy == PositivePolicy::SynthesizeReplacement) {
        add(CandidateKind::Positive,
            stage(id, "positive.generate_image", [&] { return client.generate_image(id, description, "positive"); }));
        add(CandidateKind::OriginalPositive, triplet.positive);
    } else {
        add(CandidateKind::Positive, triplet.positive);
    }

    if (plan.text_aug_count > 0) {
        const auto texts = stage(id, "text_aug.mutate_text",
                                 [&] { return client.mutate_text(id, triplet.query_text, plan.text_aug_count); });
        if (texts.size() < plan.text_aug_count) {
            throw Error(ErrorCode::GenerationFailed, "sample " + id + " stage text_aug.mutate_text: too few texts");
        }
        for (std::size_t k = 0; k < plan.text_aug_count; ++k) {
            add(CandidateKind::TextAugNegative, stage(id, "text_aug.edit_image", [&] {
                    return client.edit_image(id, triplet.query_image, texts[k]);
                }));
        }
    }
    for (std::size_t k = 0; k < plan.image_aug_count; ++k) {
        add(CandidateKind::ImageAugNegative, stage(id, "image_aug.generate_image", [&] {
                return client.generate_image(id, description, "negative-" + std::to_string(k));
            }));
    }
    for (std::size_t k = 0; k < plan.identity_count; ++k) add(CandidateKind::IdentityNegative, triplet.query_image);
    for (std::size_t k = 0; k < distractors.size() && pool.size() < plan.local_pool_size; ++k) {
        add(CandidateKind::Distractor, distractors[k]);
    }

    // Candidate ids follow a per-sample seeded permutation so that id order carries no kind information.
    std::vector<CandidateId> ids(pool.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::mt19937_64 rng(stable_hash(id, plan.seed));
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i].id = ids[i];
    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
    sample.candidates = std::move(pool);
    return sample;
}

std::vector<std::size_t> select_augmented_indices(std::size_t count, double ratio, std::uint64_t seed) {
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw Error(ErrorCode::InvalidArgument, "ratio must lie in [0,1]");
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto take = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(count)));
    order.resize(std::min(take, count));
    std::sort(order.begin(), order.end());
    return order;
}

std::vector<AugmentedSample> plan_corpus(std::span<const SourceTriplet> triplets, const AugmentPlan& plan,
                                         GenerationClient& client) {
    plan.validate();
    const auto selected = select_augmented_indices(triplets.size(), plan.negative_ratio, plan.seed);
    std::vector<char> augment(triplets.size(), 0);
    for (auto i : selected) augment[i] = 1;

    auto build = [&](std::size_t i) {
        if (!augment[i]) return passthrough_sample(triplets[i]);
        std::vector<std::string> distractors;
        if (triplets.size() > 1) {
            std::mt19937_64 rng(stable_hash(triplets[i].id, plan.seed ^ 0xD15ULL));
            std::vector<std::size_t> others;
            for (std::size_t j = 0; j < triplets.size(); ++j) {
                if (j != i && triplets[j].positive != triplets[i].positive) others.push_back(j);
            }
            std::shuffle(others.begin(), others.end(), rng);
            for (std::size_t j = 0; j < others.size() && j < plan.local_pool_size; ++j) {
                distractors.push_back(triplets[others[j]].positive);
            }
        }
        return plan_augmented_sample(triplets[i], plan, client, distractors);
    };

    std::vector<std::optional<AugmentedSample>> out(triplets.size());
    const auto workers = std::min(std::max<std::size_t>(1, plan.max_in_flight), triplets.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < triplets.size(); ++i) out[i] = build(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        {
            std::vector<std::jthread> pool;
            for (std::size_t w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (auto i = next.fetch_add(1); i < triplets.size(); i = next.fetch_add(1)) {
                        try {
                            out[i] = build(i);
                        } catch (...) {
                            std::lock_guard lock(failure_mutex);
                            if (!failure) failure = std::current_exception();
                            next.store(triplets.size());
                        }
                    }
                });
            }
        }
        if (failure) std::rethrow_exception(failure);
    }

    std::vector<AugmentedSample> samples;
    samples.reserve(out.size());
    for (auto& s : out) samples.push_back(std::move(*s));
    return samples;
}

std::vector<SourceTriplet> mix_sources(std::vector<std::vector<SourceTriplet>> sources,
                                       std::span<const unsigned> ratio, std::uint64_t seed, ExhaustionPolicy policy) {
    if (sources.size() != ratio.size()) throw Error(ErrorCode::InvalidArgument, "one ratio entry per source required");
    if (sources.empty()) throw Error(ErrorCode::InvalidArgument, "no sources");
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (ratio[i] == 0) throw Error(ErrorCode::InvalidArgument, "ratio entries must be positive");
        if (sources[i].empty()) throw Error(ErrorCode::InvalidArgument, "source " + std::to_string(i) + " is empty");
    }

    // Tie order among sources; seed 0 keeps the natural order.
    std::vector<std::size_t> priority(sources.size());
    std::iota(priority.begin(), priority.end(), 0);
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        std::shuffle(priority.begin(), priority.end(), rng);
    }
    std::vector<std::size_t> rank_of(sources.size());
    for (std::size_t r = 0; r < priority.size(); ++r) rank_of[priority[r]] = r;

    std::vector<std::size_t> cursor(sources.size(), 0);
    std::vector<long long> current(sources.size(), 0);
    std::vector<char> alive(sources.size(), 1);
    std::vector<SourceTriplet> mixed;

    for (;;) {
        long long total = 0;
        for (std::size_t i = 0; i < sources.size(); ++i) {
            if (!alive[i]) continue;
            current[i] += ratio[i];
            total += ratio[i];
        }
        if (total == 0) break;
        std::optional<std::size_t> pick;
        for (std::size_t i = 0; i < sources.size(); ++i) {
            if (!alive[i]) continue;
            if (!pick || current[i] > current[*pick] || (current[i] == current[*pick] && rank_of[i] < rank_of[*pick])) {
                pick = i;
            }
        }
        current[*pick] -= total;
        mixed.push_back(std::move(sources[*pick][cursor[*pick]++]));

        if (cursor[*pick] == sources[*pick].size()) {
            bool others_remain = false;
            for (std::size_t i = 0; i < sources.size(); ++i) {
                if (i != *pick && alive[i] && cursor[i] < sources[i].size()) others_remain = true;
            }
            if (!others_remain) break;
            if (policy == ExhaustionPolicy::Raise) {
                throw Error(ErrorCode::SourceExhausted, "source " + std::to_string(*pick) + " exhausted");
            }
            if (policy == ExhaustionPolicy::Stop) break;
            alive[*pick] = 0;
            current[*pick] = 0;
        }
    }
    return mixed;
}

std::vector<CandidateId> select_in_sample_negatives(const AugmentedSample& sample, std::size_t count,
                                                    std::uint64_t seed) {
    std::vector<CandidateId> negatives;
    for (const auto& c : sample.candidates) {
        if (c.kind != CandidateKind::Positive) negatives.push_back(c.id);
    }
    if (negatives.size() < count) {
        throw Error(ErrorCode::InsufficientNegatives, "sample " + sample.sample_id + " has " +
                                                          std::to_string(negatives.size()) + " negatives, needs " +
                                                          std::to_string(count));
    }
    std::vector<CandidateId> chosen;
    chosen.reserve(count);
    std::mt19937_64 rng(seed);
    std::sample(negatives.begin(), negatives.end(), std::back_inserter(chosen), count, rng);
    return chosen;
}

}  // namespace fbcir
