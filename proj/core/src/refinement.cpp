#include "fbcir/refinement.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "fbcir/error.hpp"

namespace fbcir {

namespace {

struct Validation {
    bool valid = false;
    double margin = 0.0;
};

void check_inputs(const AugmentedSample& sample) {
    if (sample.query.image_count() == 0 || sample.query.text_count() == 0) {
        throw Error(ErrorCode::EmptyModality, "sample " + sample.sample_id + " lacks image or text tokens");
    }
    if (sample.candidates.size() < 2) {
        throw Error(ErrorCode::InvalidArgument, "sample " + sample.sample_id + " needs at least 2 candidates");
    }
}

// Validates masks[i] for every i, possibly across worker threads. Output order equals input order.
std::vector<Validation> validate_all(const AugmentedSample& sample, Scorer& scorer, const Ranking& baseline,
                                     ValidityMode mode, const std::vector<TokenMask>& masks, std::size_t workers) {
    std::vector<Validation> out(masks.size());
    auto validate_one = [&](std::size_t i) {
        const auto ranking = rank(scorer, sample, masks[i]);
        out[i] = {retrieval_equal(ranking, baseline, mode), ranking.margin()};
    };

    workers = std::min(workers, masks.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < masks.size(); ++i) validate_one(i);
        return out;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < masks.size(); i = next.fetch_add(1)) {
                    try {
                        validate_one(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next.store(masks.size());
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace

RefinementResult refine(const AugmentedSample& sample, Scorer& scorer, const RefinementConfig& config) {
    check_inputs(sample);
    if (config.beam_width == 0) throw Error(ErrorCode::InvalidArgument, "beam width must be >= 1");

    RefinementResult result;
    const auto s0 = sample.query.full_mask();
    result.baseline = rank(scorer, sample, s0);
    result.trace.scorer_calls = 1;

    struct BeamEntry {
        TokenMask mask;
        double margin;
    };
    std::vector<BeamEntry> beam{{s0, result.baseline.margin()}};
    result.trace.beams.push_back({s0});

    std::size_t iteration = 0;
    while (!beam.empty()) {
        if (config.max_iterations && iteration >= *config.max_iterations) {
            for (auto& entry : beam) result.finals.states.push_back({{entry.mask}, entry.margin});
            result.trace.truncated = true;
            break;
        }
        ++iteration;

        // Children of all parents, deduplicated by preserved set.
        std::vector<TokenMask> children;
        std::unordered_map<TokenMask, std::size_t, TokenMaskHash> child_index;
        std::vector<std::vector<std::size_t>> parent_children(beam.size());
        for (std::size_t p = 0; p < beam.size(); ++p) {
            for (auto index : beam[p].mask.indices()) {
                auto child = beam[p].mask.without(index);
                if (child.none()) continue;
                auto [it, inserted] = child_index.try_emplace(child, children.size());
                if (inserted) children.push_back(std::move(child));
                parent_children[p].push_back(it->second);
            }
        }

        const auto validations =
            validate_all(sample, scorer, result.baseline, config.mode, children, config.workers);
        result.trace.validations += children.size();
        result.trace.scorer_calls += children.size();

        for (std::size_t p = 0; p < beam.size(); ++p) {
            const bool has_valid_child = std::any_of(parent_children[p].begin(), parent_children[p].end(),
                                                     [&](std::size_t c) { return validations[c].valid; });
            if (!has_valid_child) result.finals.states.push_back({{beam[p].mask}, beam[p].margin});
        }

        std::vector<std::size_t> valid;
        for (std::size_t c = 0; c < children.size(); ++c) {
            if (validations[c].valid) valid.push_back(c);
        }
        const auto by_rule = [&](std::size_t a, std::size_t b) {
            if (config.selection == BeamSelection::MarginDescending && validations[a].margin != validations[b].margin) {
                return validations[a].margin > validations[b].margin;
            }
            return children[a].lexicographically_less(children[b]);
        };
        const auto keep = std::min(config.beam_width, valid.size());
        std::partial_sort(valid.begin(), valid.begin() + static_cast<std::ptrdiff_t>(keep), valid.end(), by_rule);
        valid.resize(keep);

        std::vector<BeamEntry> next;
        next.reserve(keep);
        std::vector<TokenMask> snapshot;
        for (auto c : valid) {
            next.push_back({children[c], validations[c].margin});
            snapshot.push_back(children[c]);
        }
        if (!next.empty()) result.trace.beams.push_back(std::move(snapshot));
        beam = std::move(next);
    }
    return result;
}

ExhaustiveResult exhaustive_minimal_states(const AugmentedSample& sample, Scorer& scorer, ValidityMode mode) {
    check_inputs(sample);
    const auto n = sample.query.total_count();
    if (n > kExhaustiveTokenLimit) {
        throw Error(ErrorCode::TooManyTokens, std::to_string(n) + " tokens exceed the exhaustive limit of 16");
    }

    const std::uint32_t full = (std::uint32_t{1} << n) - 1;
    auto to_mask = [n](std::uint32_t bits) {
        TokenMask mask(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (bits & (std::uint32_t{1} << i)) mask.set(i);
        }
        return mask;
    };

    ExhaustiveResult result;
    const auto baseline = rank(scorer, sample, to_mask(full));
    std::vector<char> valid(std::size_t{full} + 1, 0);
    std::vector<double> margin(std::size_t{full} + 1, 0.0);
    valid[full] = 1;
    margin[full] = baseline.margin();
    for (std::uint32_t bits = 1; bits < full; ++bits) {
        const auto ranking = rank(scorer, sample, to_mask(bits));
        valid[bits] = retrieval_equal(ranking, baseline, mode) ? 1 : 0;
        margin[bits] = ranking.margin();
        ++result.validations;
    }

    // Reachability through valid supersets, processed from large to small.
    std::vector<char> reachable(std::size_t{full} + 1, 0);
    reachable[full] = 1;
    std::vector<std::uint32_t> by_size(full);
    for (std::uint32_t bits = 1; bits <= full; ++bits) by_size[bits - 1] = bits;
    std::stable_sort(by_size.begin(), by_size.end(),
                     [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) > std::popcount(b); });
    for (auto bits : by_size) {
        if (bits == full || !valid[bits]) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t parent = bits | (std::uint32_t{1} << i);
            if (parent != bits && reachable[parent]) {
                reachable[bits] = 1;
                break;
            }
        }
    }

    result.global_min_cardinality = n;
    for (auto bits : by_size) {
        if (!valid[bits]) continue;
        result.global_min_cardinality =
            std::min(result.global_min_cardinality, static_cast<std::size_t>(std::popcount(bits)));
        bool has_valid_child = false;
        for (std::size_t i = 0; i < n && !has_valid_child; ++i) {
            const std::uint32_t child = bits & ~(std::uint32_t{1} << i);
            if (child != bits && child != 0 && valid[child]) has_valid_child = true;
        }
        if (has_valid_child) continue;
        FinalState state{{to_mask(bits)}, margin[bits]};
        if (reachable[bits]) result.reachable_minimal.states.push_back(state);
        result.all_minimal.states.push_back(std::move(state));
    }
    return result;
}

std::uint64_t predicted_inference_budget(std::uint64_t n_image, std::uint64_t n_text, std::uint64_t beam_width) {
    const auto n = n_image + n_text;
    return beam_width * n * (n + 1) / 2;
}

}  // namespace fbcir
