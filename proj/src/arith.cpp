#include "kfree/arith.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <new>
#include <string>

namespace kfree {

std::string to_string(u128 v)
{
    if (v == 0) return "0";
    std::string s;
    while (v != 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

std::string to_string(i128 v)
{
    if (v < 0) return "-" + to_string(static_cast<u128>(-(v + 1)) + 1);
    return to_string(static_cast<u128>(v));
}

MobiusTable::MobiusTable(std::vector<std::int8_t> values) : values_(std::move(values)) {}

MertensTable::MertensTable(const MobiusTable& mobius)
{
    auto mu = mobius.values();
    try {
        sums_.assign(mu.size(), 0);
    } catch (const std::bad_alloc&) {
        throw ResourceError("Mertens table of " + std::to_string(mu.size()) + " entries does not fit in memory");
    }
    i64 acc = 0;
    for (std::size_t n = 1; n < mu.size(); ++n) {
        acc += mu[n];
        sums_[n] = acc;
    }
}

PrimeTable::PrimeTable(u64 limit) : limit_(limit)
{
    if (limit > kMaxTableLimit) throw ResourceError("prime table limit too large");
    if (limit < 2) return;
    std::vector<bool> composite(limit + 1, false);
    for (u64 p = 2; p <= limit; ++p) {
        if (composite[p]) continue;
        primes_.push_back(static_cast<u32>(p));
        for (u64 m = p * p; m <= limit; m += p) composite[m] = true;
    }
}

MobiusTable sieve_mobius(u64 limit)
{
    if (limit < 1) throw UsageError("sieve_mobius: limit must be >= 1");
    if (limit > kMaxTableLimit) {
        throw ResourceError("sieve_mobius: limit " + std::to_string(limit) + " exceeds table capacity");
    }
    std::vector<std::int8_t> mu;
    std::vector<bool> composite;
    try {
        mu.assign(limit + 1, 1);
        composite.assign(limit + 1, false);
    } catch (const std::bad_alloc&) {
        throw ResourceError("sieve_mobius: table of " + std::to_string(limit) + " entries does not fit in memory");
    }
    mu[0] = 0;
    for (u64 p = 2; p <= limit; ++p) {
        if (composite[p]) continue;
        for (u64 m = p; m <= limit; m += p) {
            if (m != p) composite[m] = true;
            mu[m] = static_cast<std::int8_t>(-mu[m]);
        }
        if (p <= limit / p) {
            const u64 sq = p * p;
            for (u64 m = sq; m <= limit; m += sq) mu[m] = 0;
        }
    }
    return MobiusTable(std::move(mu));
}

i64 mertens(u64 x, const MertensTable& table)
{
    if (x > table.limit()) {
        throw UsageError("mertens: x=" + std::to_string(x) + " beyond table limit " + std::to_string(table.limit()));
    }
    return table(x);
}

u128 saturating_pow(u128 base, unsigned exp)
{
    constexpr u128 kMax = ~u128{0};
    u128 r = 1;
    for (unsigned i = 0; i < exp; ++i) {
        if (base != 0 && r > kMax / base) return kMax;
        r *= base;
    }
    return r;
}

u64 iroot(u128 x, unsigned k)
{
    if (k == 0) throw UsageError("iroot: k must be >= 1");
    if (k == 1) {
        if (x > std::numeric_limits<u64>::max()) throw UsageError("iroot: result exceeds 64 bits");
        return static_cast<u64>(x);
    }
    if (x < 2) return static_cast<u64>(x);
    // Floating estimate, then exact correction in both directions.
    const long double xf = static_cast<long double>(x);
    long double est = std::pow(xf, 1.0L / static_cast<long double>(k));
    u64 r = est >= 1.8446744073709551615e19L ? std::numeric_limits<u64>::max() : static_cast<u64>(est);
    while (r > 0 && saturating_pow(r, k) > x) --r;
    while (r < std::numeric_limits<u64>::max() && saturating_pow(u128{r} + 1, k) <= x) ++r;
    return r;
}

}  // namespace kfree
