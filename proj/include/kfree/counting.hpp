#pragma once

#include "kfree/arith.hpp"
#include "kfree/common.hpp"

namespace kfree {

// U/V, a rational stand-in for 1/zeta(k) used by the exact error tracker.
struct RationalDensity {
    unsigned k = 2;
    u64 U = 0;
    u64 V = 1;
    // Bound on |U/V - 1/zeta(k)|, established when the constant is built.
    double error_bound = 0.0;
    bool operator==(const RationalDensity&) const = default;
};

// Which side of a point of increase Q is read from. Minima use the count
// just before the jump (Q(x - eps)), maxima the count after it (Q(x)).
enum class Side : std::uint8_t { Min = 0, Max = 1 };

const char* to_string(Side side);

struct ScaledError {
    u64 x = 0;
    u64 q = 0;
    // V*Q - U*x, exact.
    i64 tracker = 0;
    // tracker / (V * x^(1/(2k))), double precision.
    double scaled = 0.0;
};

// Convergent/verbatim constants. k = 2, 3 return the published pair; larger k
// take the last continued-fraction convergent of 1/zeta(k) with V <= 2^50.
// The error bound is checked against 1e-28 on construction.
RationalDensity rational_inv_zeta(unsigned k);

// sum_{a <= x^(1/k)} mu(a) floor(x / a^k). The table must reach iroot(x, k).
u64 qk_direct(u64 x, unsigned k, const MobiusTable& mobius);
// Builds its own Mobius table.
u64 qk_direct(u64 x, unsigned k);

// Q_2(x) through the Mertens-accelerated split at x_n = floor(sqrt(x/n)).
// Requires n == 1 or 4 n^3 <= x; tables must reach floor(sqrt(x)).
u64 q2_mertens(u64 x, u64 n, const MobiusTable& mobius, const MertensTable& mertens);
u64 q2_mertens(u64 x, u64 n);

// max(1, floor(0.05 * x^(1/3))).
u64 default_n(u64 x);

// x^(1/(2k)) in double precision.
double root_2k(u64 x, unsigned k);

// Evaluate the scaled error from an exact count. Throws EnvelopeError if the
// tracker leaves the signed 64-bit range.
ScaledError scaled_error(u64 x, u64 q, const RationalDensity& density);

// Same as scaled_error(...).scaled for an already known tracker.
inline double scaled_value(i64 tracker, u64 x, const RationalDensity& density)
{
    return static_cast<double>(tracker) / (static_cast<double>(density.V) * root_2k(x, density.k));
}

// Sign of t1/x1^(1/2k) - t2/x2^(1/2k), decided in exact integer arithmetic.
int compare_scaled_exact(i64 t1, u64 x1, i64 t2, u64 x2, unsigned k);

}  // namespace kfree
