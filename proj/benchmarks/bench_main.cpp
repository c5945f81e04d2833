#include <benchmark/benchmark.h>

#include <random>

#include "fbcir/refinement.hpp"
#include "fbcir/synthworld.hpp"
#include "fbcir/trainer.hpp"

using namespace fbcir;

namespace {

AugmentedSample random_sample(std::size_t n_image, std::size_t n_text, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> area(0.05, 1.0);
    auto unit = [&] {
        Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
        for (auto& x : v) x = normal(rng);
        return Eigen::VectorXd(v / v.norm());
    };
    std::vector<RawSegment> segments;
    for (std::size_t i = 0; i < n_image; ++i) segments.push_back({area(rng), unit(), {}});
    std::vector<RawToken> tokens;
    for (std::size_t t = 0; t < n_text; ++t) tokens.push_back({"w" + std::to_string(t), unit()});
    AugmentedSample sample;
    sample.sample_id = "bench";
    sample.query = normalize_query(segments, tokens);
    for (std::size_t c = 0; c < 5; ++c) {
        sample.candidates.push_back({static_cast<CandidateId>(c),
                                     c == 0 ? CandidateKind::Positive : CandidateKind::Distractor, unit(), {}});
    }
    return sample;
}

void BM_ToyScore(benchmark::State& state) {
    const auto sample = random_sample(8, 8, static_cast<std::size_t>(state.range(0)), 1);
    const auto params = ToyScorerParams::identity(static_cast<std::size_t>(state.range(0)));
    const auto mask = sample.query.full_mask();
    for (auto _ : state) {
        benchmark::DoNotOptimize(toy_score(params, sample.query, mask, sample.candidates[0]));
    }
}
BENCHMARK(BM_ToyScore)->Arg(32)->Arg(256);

void BM_Refine(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto sample = random_sample(n, n, 32, 2);
    ToyScorer scorer(ToyScorerParams::identity(32));
    RefinementConfig config;
    config.beam_width = static_cast<std::size_t>(state.range(1));
    for (auto _ : state) benchmark::DoNotOptimize(refine(sample, scorer, config));
}
BENCHMARK(BM_Refine)->Args({4, 5})->Args({8, 5})->Args({13, 5})->Args({13, 1});

void BM_Exhaustive(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto sample = random_sample(n, n, 32, 3);
    ToyScorer scorer(ToyScorerParams::identity(32));
    for (auto _ : state) benchmark::DoNotOptimize(exhaustive_minimal_states(sample, scorer));
}
BENCHMARK(BM_Exhaustive)->Arg(3)->Arg(5);

void BM_BatchLossGradient(benchmark::State& state) {
    const SyntheticWorld world(WorldConfig{});
    TrainingConfig config;
    config.negative_ratio = 0.5;
    const auto batch = make_batch(world, config, 0);
    const auto params = ToyScorerParams::identity(world.config().dim);
    ParamGradient gradient;
    for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_gradient(params, params, batch, config, gradient));
}
BENCHMARK(BM_BatchLossGradient);

}  // namespace
BENCHMARK_MAIN();
