#include <doctest.h>

#include <sstream>

#include "fbcir/error.hpp"
#include "fbcir/formats.hpp"
#include "fbcir/scoring.hpp"
#include "fbcir/synthworld.hpp"

using namespace fbcir;

namespace {

TokenMask image_only(const TokenizedQuery& q) {
    TokenMask m(q.total_count());
    for (std::size_t i = 0; i < q.image_count(); ++i) m.set(i);
    return m;
}

TokenMask text_only(const TokenizedQuery& q) {
    TokenMask m(q.total_count());
    for (std::size_t i = q.image_count(); i < q.total_count(); ++i) m.set(i);
    return m;
}

CandidateKind kind_of(const AugmentedSample& s, CandidateId id) {
    for (const auto& c : s.candidates) {
        if (c.id == id) return c.kind;
    }
    return CandidateKind::Distractor;
}

}  // namespace

TEST_CASE("image-biased world: common pools are separable by the image alone") {
    WorldConfig config;
    config.seed = 4;
    SyntheticWorld world(config);
    ToyScorer scorer(ToyScorerParams::identity(config.dim));
    for (std::size_t i = 0; i < 200; ++i) {
        const auto item = world.item(1, i);
        const auto& s = item.common;
        REQUIRE(s.candidates.size() == config.pool_size);
        REQUIRE(rank(scorer, s, image_only(s.query)).top() == s.positive_id());
    }
}

TEST_CASE("hard pools trap single-modality queries") {
    WorldConfig config;
    config.seed = 4;
    SyntheticWorld world(config);
    ToyScorer scorer(ToyScorerParams::identity(config.dim));
    std::size_t full_hits = 0;
    std::size_t text_trapped = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        const auto s = world.item(2, i).hard;
        REQUIRE(s.count_kind(CandidateKind::Positive) == 1);
        REQUIRE(s.count_kind(CandidateKind::TextAugNegative) == 1);
        REQUIRE(s.count_kind(CandidateKind::ImageAugNegative) == 1);
        REQUIRE(s.count_kind(CandidateKind::IdentityNegative) == 1);
        REQUIRE(s.candidates.size() == config.pool_size);
        // The identity negative is the query image itself; the edited reference comes right after it.
        const auto by_image = rank(scorer, s, image_only(s.query));
        REQUIRE(kind_of(s, by_image.order[0]) == CandidateKind::IdentityNegative);
        REQUIRE(kind_of(s, by_image.order[1]) == CandidateKind::TextAugNegative);
        text_trapped += kind_of(s, rank(scorer, s, text_only(s.query)).top()) != CandidateKind::Positive ? 1 : 0;
        full_hits += rank(scorer, s, s.query.full_mask()).top() == s.positive_id() ? 1 : 0;
    }
    // The image-augmented negative wins under the text alone unless filler words dominate the text.
    CHECK(text_trapped >= 190);
    CHECK(full_hits > 0);
}

TEST_CASE("world generation is deterministic") {
    WorldConfig config;
    config.seed = 12;
    auto dump = [&] {
        std::ostringstream out;
        write_benchmark(out, generate_world(config, 20, 0.5));
        return out.str();
    };
    const auto a = dump();
    CHECK(a == dump());
    config.seed = 13;
    CHECK(a != dump());
}

TEST_CASE("hard fraction is exact") {
    WorldConfig config;
    const auto samples = generate_world(config, 10, 0.5);
    std::size_t hard = 0;
    for (const auto& s : samples) hard += s.count_kind(CandidateKind::TextAugNegative) > 0 ? 1 : 0;
    CHECK(hard == 5);
    std::size_t all_hard = 0;
    for (const auto& s : generate_world(config, 7, 1.0)) all_hard += s.count_kind(CandidateKind::TextAugNegative);
    CHECK(all_hard == 7);
}

TEST_CASE("world config validation") {
    WorldConfig config;
    config.dim = 3;
    CHECK_THROWS_AS(SyntheticWorld{config}, Error);
    config = {};
    config.modality_bias = 1.5;
    CHECK_THROWS_AS(config.validate(), Error);
    config = {};
    config.pool_size = 1;
    CHECK_THROWS_AS(config.validate(), Error);
    config = {};
    config.min_text_tokens = 5;
    CHECK_THROWS_AS(config.validate(), Error);
}

TEST_CASE("text-biased common pools are separable by the text alone") {
    WorldConfig config;
    config.modality_bias = 0.0;
    config.seed = 2;
    SyntheticWorld world(config);
    ToyScorer scorer(ToyScorerParams::identity(config.dim));
    for (std::size_t i = 0; i < 100; ++i) {
        const auto s = world.item(1, i).common;
        REQUIRE(rank(scorer, s, text_only(s.query)).top() == s.positive_id());
    }
}
