#include "fbcir/token_mask.hpp"

#include <algorithm>
#include <bit>

#include "fbcir/error.hpp"

namespace fbcir {

namespace {
constexpr std::size_t kWordBits = 64;
}

TokenMask::TokenMask(std::size_t size, bool all_set)
    : size_(size), words_((size + kWordBits - 1) / kWordBits, 0) {
    if (all_set) {
        for (std::size_t i = 0; i < size; ++i) set(i);
    }
}

TokenMask TokenMask::from_indices(std::size_t size, std::span<const std::size_t> indices) {
    TokenMask mask(size);
    for (auto index : indices) mask.set(index);
    return mask;
}

std::size_t TokenMask::count() const noexcept {
    std::size_t total = 0;
    for (auto word : words_) total += static_cast<std::size_t>(std::popcount(word));
    return total;
}

bool TokenMask::test(std::size_t index) const {
    if (index >= size_) throw Error(ErrorCode::InvalidArgument, "token index out of range");
    return (words_[index / kWordBits] >> (index % kWordBits)) & 1U;
}

void TokenMask::set(std::size_t index) {
    if (index >= size_) throw Error(ErrorCode::InvalidArgument, "token index out of range");
    words_[index / kWordBits] |= std::uint64_t{1} << (index % kWordBits);
}

void TokenMask::reset(std::size_t index) {
    if (index >= size_) throw Error(ErrorCode::InvalidArgument, "token index out of range");
    words_[index / kWordBits] &= ~(std::uint64_t{1} << (index % kWordBits));
}

TokenMask TokenMask::without(std::size_t index) const {
    TokenMask copy = *this;
    copy.reset(index);
    return copy;
}

std::vector<std::size_t> TokenMask::indices() const {
    std::vector<std::size_t> out;
    out.reserve(count());
    for (std::size_t w = 0; w < words_.size(); ++w) {
        auto word = words_[w];
        while (word != 0) {
            const auto bit = static_cast<std::size_t>(std::countr_zero(word));
            out.push_back(w * kWordBits + bit);
            word &= word - 1;
        }
    }
    return out;
}

bool TokenMask::lexicographically_less(const TokenMask& other) const {
    const auto a = indices();
    const auto b = other.indices();
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

std::size_t TokenMask::hash() const noexcept {
    // FNV-1a over the words.
    std::uint64_t h = 1469598103934665603ULL ^ size_;
    for (auto word : words_) {
        h ^= word;
        h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
}

}  // namespace fbcir
