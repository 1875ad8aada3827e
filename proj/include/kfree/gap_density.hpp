#pragma once

#include <vector>

#include "kfree/common.hpp"
#include "kfree/hifloat.hpp"

namespace kfree {

inline constexpr unsigned kDefaultDensityDigits = 200;

// Strictly increasing nonnegative offsets.
using OffsetSet = std::vector<u64>;

// Distinct residues of h modulo p^k.
unsigned nu(u64 p, unsigned k, const OffsetSet& h);

// Value with an absolute error bound.
struct BoundedValue {
    HiFloat value;
    HiFloat error;
};

// prod_{p > P} (1 - l/p^k). P = 1 takes every prime. Requires l <= q^k for
// the first prime q > P (the product is 0 when equality holds).
BoundedValue tail_product(u64 l, unsigned k, u64 P, unsigned digits);

struct CorrelationConstant {
    OffsetSet h;
    unsigned k = 2;
    // Largest prime with p^k <= max(h) - min(h) (1 if none); beyond it every
    // offset occupies its own class.
    u64 cutoff = 1;
    // prod_{p <= cutoff} (p^k - nu(p)) and prod_{p <= cutoff} p^k.
    mpz_class finite_part;
    mpz_class modulus;
    u64 l = 0;  // |h|, the tail cardinality
    HiFloat value;
    HiFloat error;
};

CorrelationConstant a_k(const OffsetSet& h, unsigned k, unsigned digits);

struct DensityOptions {
    unsigned digits = kDefaultDensityDigits;
    // Largest g attempted; enumeration visits 2^(g-1) subsets.
    unsigned max_g_k2 = 22;
    unsigned max_g_other = 16;
    unsigned threads = 1;
    // Evaluate every subset's constant separately instead of summing finite
    // parts per cardinality first. Only useful as a cross-check.
    bool ungrouped = false;
};

struct DensityResult {
    unsigned g = 0;
    unsigned k = 2;
    HiFloat value;
    HiFloat truncation_error_bound;
    unsigned working_precision = 0;  // decimal digits used internally
    // Digits lost to cancellation in the alternating sum.
    double cancellation_digits = 0.0;
};

DensityResult d_k(unsigned g, unsigned k, const DensityOptions& options = {});

// log D_k(g) / (g log g).
double grimmett_ratio(unsigned g, unsigned k, const DensityOptions& options = {});

// Limits of the ratio: -6/pi^2 for k = 2, -2/zeta(3) for k = 3.
double grimmett_asymptote(unsigned k);

}  // namespace kfree
