#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kfree/common.hpp"

namespace kfree {

// mu(n) for 1 <= n <= limit. Index 0 is unused and holds 0.
class MobiusTable {
public:
    MobiusTable() = default;
    explicit MobiusTable(std::vector<std::int8_t> values);

    u64 limit() const { return values_.empty() ? 0 : values_.size() - 1; }
    int operator()(u64 n) const { return values_[n]; }
    std::span<const std::int8_t> values() const { return values_; }

private:
    std::vector<std::int8_t> values_;
};

// Partial sums M(n) = sum_{j <= n} mu(j).
class MertensTable {
public:
    MertensTable() = default;
    explicit MertensTable(const MobiusTable& mobius);

    u64 limit() const { return sums_.empty() ? 0 : sums_.size() - 1; }
    i64 operator()(u64 n) const { return sums_[n]; }

private:
    std::vector<i64> sums_;
};

class PrimeTable {
public:
    PrimeTable() = default;
    // All primes p <= limit.
    explicit PrimeTable(u64 limit);

    u64 limit() const { return limit_; }
    std::span<const u32> primes() const { return primes_; }
    std::size_t size() const { return primes_.size(); }
    u32 operator[](std::size_t i) const { return primes_[i]; }

private:
    u64 limit_ = 0;
    std::vector<u32> primes_;
};

// Tables past this many entries are refused rather than attempted.
inline constexpr u64 kMaxTableLimit = u64{1} << 34;

MobiusTable sieve_mobius(u64 limit);

// M(x); throws UsageError when x lies outside the table.
i64 mertens(u64 x, const MertensTable& table);

// Largest r with r^k <= x, exact for the full 128-bit range.
u64 iroot(u128 x, unsigned k);

// base^exp, saturating at the maximum u128 value.
u128 saturating_pow(u128 base, unsigned exp);

}  // namespace kfree
