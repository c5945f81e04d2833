#pragma once

// Random toy-scorer instances and a brute-force oracle that shares no code with the library's
// scorer or search: scores are recomputed from the raw feature vectors with plain loops.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fbcir/types.hpp"

namespace fbcir::testing {

inline Eigen::VectorXd random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
    for (auto& x : v) x = normal(rng);
    return v / v.norm();
}

struct InstanceShape {
    std::size_t n_image = 2;
    std::size_t n_text = 2;
    std::size_t pool = 4;
    std::size_t dim = 6;
};

inline AugmentedSample random_instance(std::mt19937_64& rng, const InstanceShape& shape, const std::string& id) {
    std::uniform_real_distribution<double> area(0.05, 1.0);
    std::vector<RawSegment> segments;
    for (std::size_t i = 0; i < shape.n_image; ++i) segments.push_back({area(rng), random_unit(rng, shape.dim), {}});
    std::vector<RawToken> tokens;
    for (std::size_t t = 0; t < shape.n_text; ++t) {
        tokens.push_back({"w" + std::to_string(t), random_unit(rng, shape.dim)});
    }
    AugmentedSample sample;
    sample.sample_id = id;
    sample.query = normalize_query(segments, tokens);
    for (std::size_t c = 0; c < shape.pool; ++c) {
        Candidate cand;
        cand.id = static_cast<CandidateId>(c);
        cand.kind = c == 0 ? CandidateKind::Positive : CandidateKind::Distractor;
        cand.feature = random_unit(rng, shape.dim);
        sample.candidates.push_back(cand);
    }
    return sample;
}

/// Identity-projection toy score with bit i of `bits` meaning global token i is kept.
inline double oracle_score(const AugmentedSample& s, std::uint32_t bits, const Eigen::VectorXd& cand) {
    const auto& q = s.query;
    const auto dim = cand.size();
    std::vector<double> img(static_cast<std::size_t>(dim), 0.0), txt(static_cast<std::size_t>(dim), 0.0);
    for (std::size_t i = 0; i < q.image_count(); ++i) {
        if (!(bits >> i & 1u)) continue;
        const auto& tok = q.image_tokens()[i];
        for (Eigen::Index k = 0; k < dim; ++k) img[static_cast<std::size_t>(k)] += tok.area_weight * (*tok.feature)[k];
    }
    std::size_t kept = 0;
    for (std::size_t t = 0; t < q.text_count(); ++t) {
        if (!(bits >> (q.image_count() + t) & 1u)) continue;
        ++kept;
        for (Eigen::Index k = 0; k < dim; ++k) txt[static_cast<std::size_t>(k)] += (*q.text_tokens()[t].feature)[k];
    }
    double norm2 = 0.0;
    std::vector<double> sum(static_cast<std::size_t>(dim));
    for (std::size_t k = 0; k < sum.size(); ++k) {
        sum[k] = img[k] + (kept ? txt[k] / static_cast<double>(kept) : 0.0);
        norm2 += sum[k] * sum[k];
    }
    if (norm2 == 0.0) return 0.0;
    double dot = 0.0;
    for (std::size_t k = 0; k < sum.size(); ++k) dot += sum[k] * cand[static_cast<Eigen::Index>(k)];
    return dot / std::sqrt(norm2);
}

/// Winner under the tie rule (highest score, then smallest id).
inline CandidateId oracle_top(const AugmentedSample& s, std::uint32_t bits) {
    CandidateId best = 0;
    double best_score = -INFINITY;
    for (const auto& c : s.candidates) {
        const double v = oracle_score(s, bits, *c.feature);
        if (v > best_score || (v == best_score && c.id < best)) {
            best = c.id;
            best_score = v;
        }
    }
    return best;
}

struct OracleFamily {
    std::set<std::uint32_t> reachable_minimal;
    std::set<std::uint32_t> all_minimal;
    std::size_t min_cardinality = 0;
};

/// Top-1 validity over every non-empty mask; reachability by flood fill from the full mask.
inline OracleFamily oracle_minimal_family(const AugmentedSample& s) {
    const auto n = s.query.total_count();
    const std::uint32_t full = (1u << n) - 1;
    const auto base = oracle_top(s, full);
    std::vector<char> valid(full + 1, 0);
    for (std::uint32_t m = 1; m <= full; ++m) valid[m] = oracle_top(s, m) == base;
    std::vector<char> reach(full + 1, 0);
    reach[full] = 1;
    for (std::uint32_t m = full; m >= 1; --m) {
        if (!reach[m]) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const auto child = m & ~(1u << i);
            if (child != m && child != 0 && valid[child]) reach[child] = 1;
        }
    }
    OracleFamily out;
    out.min_cardinality = n;
    for (std::uint32_t m = 1; m <= full; ++m) {
        if (!valid[m]) continue;
        out.min_cardinality = std::min<std::size_t>(out.min_cardinality, static_cast<std::size_t>(std::popcount(m)));
        bool minimal = true;
        for (std::size_t i = 0; i < n && minimal; ++i) {
            const auto child = m & ~(1u << i);
            if (child != m && child != 0 && valid[child]) minimal = false;
        }
        if (!minimal) continue;
        out.all_minimal.insert(m);
        if (reach[m]) out.reachable_minimal.insert(m);
    }
    return out;
}

inline std::uint32_t to_bits(const TokenMask& mask) {
    std::uint32_t bits = 0;
    for (auto i : mask.indices()) bits |= 1u << i;
    return bits;
}

inline std::set<std::uint32_t> to_bit_set(const FinalStateSet& finals) {
    std::set<std::uint32_t> out;
    for (const auto& f : finals.states) out.insert(to_bits(f.state.preserved));
    return out;
}

}  // namespace fbcir::testing
