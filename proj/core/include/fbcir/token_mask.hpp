#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fbcir {

/// Fixed-size bit set over global token indices. Bit i set means token i is preserved.
class TokenMask {
public:
    TokenMask() = default;
    explicit TokenMask(std::size_t size, bool all_set = false);

    static TokenMask from_indices(std::size_t size, std::span<const std::size_t> indices);

    std::size_t size() const noexcept { return size_; }
    std::size_t count() const noexcept;
    bool none() const noexcept { return count() == 0; }

    bool test(std::size_t index) const;
    void set(std::size_t index);
    void reset(std::size_t index);
    TokenMask without(std::size_t index) const;

    std::vector<std::size_t> indices() const;

    /// Lexicographic order over the ascending preserved-index lists.
    bool lexicographically_less(const TokenMask& other) const;

    std::size_t hash() const noexcept;

    friend bool operator==(const TokenMask&, const TokenMask&) = default;

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

struct TokenMaskHash {
    std::size_t operator()(const TokenMask& mask) const noexcept { return mask.hash(); }
};

}  // namespace fbcir
