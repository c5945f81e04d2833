#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fbcir/remote.hpp"
#include "fbcir/types.hpp"

namespace fbcir {

enum class SourceKind { SimilarityPaired, EditingDriven };

std::string_view to_string(SourceKind kind) noexcept;
SourceKind source_kind_from_string(std::string_view text);

struct SourceTriplet {
    std::string id;
    std::string query_image;
    std::string query_text;
    std::string positive;
    SourceKind source = SourceKind::EditingDriven;
    /// Dataset tag, used for mixing and carried into the sample provenance.
    std::string dataset;
    /// Optional precomputed segmentation; a single whole-image segment is used when empty.
    std::vector<RawSegment> segments;
};

/// Throws InvalidArgument when a reference or the query text is empty.
void validate_triplet(const SourceTriplet& triplet);

/// Content-creation capabilities used by the planner. Implementations must be thread-safe.
class GenerationClient {
public:
    virtual ~GenerationClient() = default;

    /// Semantically altered versions of the query text.
    virtual std::vector<std::string> mutate_text(const std::string& sample_id, const std::string& query_text,
                                                 std::size_t count) = 0;
    virtual std::string edit_image(const std::string& sample_id, const std::string& image_ref,
                                   const std::string& instruction) = 0;
    /// `variant` distinguishes repeated generations from one description.
    virtual std::string generate_image(const std::string& sample_id, const std::string& description,
                                       const std::string& variant) = 0;
    /// Comprehensive description integrating the query image and text.
    virtual std::string describe(const std::string& sample_id, const std::string& image_ref,
                                 const std::string& query_text) = 0;
};

/// Hash-derived pseudo-content; identical inputs and seed give identical outputs.
class MockGenerationClient final : public GenerationClient {
public:
    explicit MockGenerationClient(std::uint64_t seed) : seed_(seed) {}

    std::vector<std::string> mutate_text(const std::string& sample_id, const std::string& query_text,
                                         std::size_t count) override;
    std::string edit_image(const std::string& sample_id, const std::string& image_ref,
                           const std::string& instruction) override;
    std::string generate_image(const std::string& sample_id, const std::string& description,
                               const std::string& variant) override;
    std::string describe(const std::string& sample_id, const std::string& image_ref,
                         const std::string& query_text) override;

private:
    std::uint64_t seed_;
};

/// Generation client speaking the "generate" requests of the wire protocol.
class RemoteGenerationClient final : public GenerationClient {
public:
    RemoteGenerationClient(Endpoint endpoint, RemoteOptions options = {});

    std::vector<std::string> mutate_text(const std::string& sample_id, const std::string& query_text,
                                         std::size_t count) override;
    std::string edit_image(const std::string& sample_id, const std::string& image_ref,
                           const std::string& instruction) override;
    std::string generate_image(const std::string& sample_id, const std::string& description,
                               const std::string& variant) override;
    std::string describe(const std::string& sample_id, const std::string& image_ref,
                         const std::string& query_text) override;

private:
    ConnectionPool pool_;
};

enum class PositivePolicy { SynthesizeReplacement, KeepOriginal };

struct AugmentPlan {
    std::size_t text_aug_count = 1;
    std::size_t image_aug_count = 1;
    std::size_t identity_count = 1;
    /// Overrides the source-derived policy (similarity-paired: synthesize, editing-driven: keep).
    std::optional<PositivePolicy> positive_policy;
    /// Fraction of triplets that receive augmentation.
    double negative_ratio = 1.0;
    /// Augmented pools are padded with distractors up to this size.
    std::size_t local_pool_size = 5;
    std::uint64_t seed = 0;
    /// Concurrent triplets in flight during corpus planning.
    std::size_t max_in_flight = 1;

    /// Throws InvalidArgument on a ratio outside [0,1].
    void validate() const;
};

/// Builds the augmented sample for one triplet. `distractors` pad the pool up to local_pool_size.
/// Throws GenerationFailed naming the failing stage.
AugmentedSample plan_augmented_sample(const SourceTriplet& triplet, const AugmentPlan& plan, GenerationClient& client,
                                      std::span<const std::string> distractors = {});

/// Plain triplet: the query and its original positive only.
AugmentedSample passthrough_sample(const SourceTriplet& triplet);

/// Exactly round(ratio * count) indices, chosen by a seeded shuffle, returned ascending.
std::vector<std::size_t> select_augmented_indices(std::size_t count, double ratio, std::uint64_t seed);

/// Plans a whole corpus: ratio selection, distractors from other triplets' positives, input-order output.
std::vector<AugmentedSample> plan_corpus(std::span<const SourceTriplet> triplets, const AugmentPlan& plan,
                                         GenerationClient& client);

enum class ExhaustionPolicy {
    /// Continue with the remaining sources at their relative ratios.
    Rescale,
    /// End the mixed stream at the first exhausted source.
    Stop,
    /// Throw SourceExhausted.
    Raise,
};

/// Deterministic smooth weighted round-robin: every window of sum(ratio) items holds exactly
/// ratio[i] items of source i while all sources last. The seed only permutes tie order.
std::vector<SourceTriplet> mix_sources(std::vector<std::vector<SourceTriplet>> sources,
                                       std::span<const unsigned> ratio, std::uint64_t seed,
                                       ExhaustionPolicy policy = ExhaustionPolicy::Rescale);

/// Uniform sample without replacement from the non-positive candidates. Throws InsufficientNegatives.
std::vector<CandidateId> select_in_sample_negatives(const AugmentedSample& sample, std::size_t count,
                                                    std::uint64_t seed);

/// Stable 64-bit FNV-1a, used for hash-derived mock content and seed derivation.
std::uint64_t stable_hash(std::string_view text, std::uint64_t seed = 0) noexcept;

}  // namespace fbcir
