#include "kfree/counting.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "kfree/hifloat.hpp"

namespace kfree {

const char* to_string(Side side) { return side == Side::Min ? "min" : "max"; }

namespace {

constexpr double kDensityErrorLimit = 1e-28;

// |U/V - 1/zeta(k)|, rounded up to a double.
double density_error(unsigned k, u64 U, u64 V)
{
    ScopedDigits digits(80);
    HiFloat inv;
    mpfr_zeta_ui(inv.backend().data(), k, MPFR_RNDN);
    inv = 1 / inv;
    HiFloat diff = abs(HiFloat(U) / HiFloat(V) - inv);
    return std::nextafter(diff.convert_to<double>(), std::numeric_limits<double>::infinity());
}

RationalDensity convergent_density(unsigned k)
{
    ScopedDigits digits(80);
    HiFloat zk;
    mpfr_zeta_ui(zk.backend().data(), k, MPFR_RNDN);
    HiFloat y = 1 / zk;
    // Convergents h_n/q_n = (a_n h_{n-1} + h_{n-2}) / (a_n q_{n-1} + q_{n-2}).
    const mpz_class limit = mpz_class(1) << 50;
    mpz_class h2 = 0, h1 = 1, q2 = 1, q1 = 0;
    mpz_class best_h = 0, best_q = 1;
    for (int iter = 0; iter < 200; ++iter) {
        HiFloat fl = floor(y);
        const mpz_class a = round_to_mpz(fl);
        const mpz_class h = a * h1 + h2;
        const mpz_class q = a * q1 + q2;
        if (q > limit) break;
        best_h = h;
        best_q = q;
        h2 = h1;
        h1 = h;
        q2 = q1;
        q1 = q;
        HiFloat frac = y - fl;
        if (frac == 0) break;
        y = 1 / frac;
    }
    RationalDensity d;
    d.k = k;
    d.U = best_h.get_ui();
    d.V = best_q.get_ui();
    return d;
}

}  // namespace

RationalDensity rational_inv_zeta(unsigned k)
{
    if (k < 2) throw UsageError("rational_inv_zeta: k must be >= 2");
    RationalDensity d;
    if (k == 2) {
        d = {2, 4391'12660'01254ULL, 7223'11373'63897ULL, 0.0};
    } else if (k == 3) {
        d = {3, 9372'16458'26352ULL, 11265'87513'41045ULL, 0.0};
    } else {
        d = convergent_density(k);
    }
    d.error_bound = density_error(k, d.U, d.V);
    if (!(d.error_bound < kDensityErrorLimit)) {
        throw EnvelopeError("rational_inv_zeta: no admissible approximation for k=" + std::to_string(k));
    }
    return d;
}

u64 qk_direct(u64 x, unsigned k, const MobiusTable& mobius)
{
    if (k < 2) throw UsageError("qk_direct: k must be >= 2");
    if (x == 0) return 0;
    const u64 r = iroot(x, k);
    if (r > mobius.limit()) {
        throw UsageError("qk_direct: Mobius table reaches " + std::to_string(mobius.limit()) + ", need " +
                         std::to_string(r));
    }
    i128 acc = 0;
    for (u64 a = 1; a <= r; ++a) {
        const int mu = mobius(a);
        if (mu == 0) continue;
        const u64 ak = static_cast<u64>(saturating_pow(a, k));
        const i128 term = static_cast<i128>(x / ak);
        acc += mu > 0 ? term : -term;
    }
    return static_cast<u64>(acc);
}

u64 qk_direct(u64 x, unsigned k)
{
    const u64 r = iroot(x, k);
    return qk_direct(x, k, sieve_mobius(r < 1 ? 1 : r));
}

u64 q2_mertens(u64 x, u64 n, const MobiusTable& mobius, const MertensTable& mertens_table)
{
    if (n < 1) throw UsageError("q2_mertens: n must be >= 1");
    if (n > 1 && static_cast<u128>(n) * n * n * 4 > x) {
        throw UsageError("q2_mertens: n=" + std::to_string(n) + " violates n <= (x/4)^(1/3) for x=" +
                         std::to_string(x));
    }
    if (x == 0) return 0;
    const u64 x1 = iroot(x, 2);
    if (x1 > mertens_table.limit() || x1 > mobius.limit()) {
        throw UsageError("q2_mertens: tables must reach floor(sqrt(x)) = " + std::to_string(x1));
    }
    const u64 xn = iroot(x / n, 2);
    i128 acc = 0;
    for (u64 a = 1; a <= xn; ++a) {
        const int mu = mobius(a);
        if (mu == 0) continue;
        const i128 term = static_cast<i128>(x / (a * a));
        acc += mu > 0 ? term : -term;
    }
    for (u64 j = 1; j < n; ++j) acc += mertens(iroot(x / j, 2), mertens_table);
    acc -= static_cast<i128>(n - 1) * mertens(xn, mertens_table);
    return static_cast<u64>(acc);
}

u64 q2_mertens(u64 x, u64 n)
{
    const u64 x1 = iroot(x, 2);
    MobiusTable mobius = sieve_mobius(x1 < 1 ? 1 : x1);
    MertensTable table(mobius);
    return q2_mertens(x, n, mobius, table);
}

u64 default_n(u64 x)
{
    const u64 n = iroot(x, 3) / 20;
    return n < 1 ? 1 : n;
}

double root_2k(u64 x, unsigned k)
{
    const double xf = static_cast<double>(x);
    switch (k) {
    case 2: return std::sqrt(std::sqrt(xf));
    case 3: return std::cbrt(std::sqrt(xf));
    default: return std::pow(xf, 1.0 / (2.0 * k));
    }
}

ScaledError scaled_error(u64 x, u64 q, const RationalDensity& density)
{
    if (x == 0) throw UsageError("scaled_error: x must be positive");
    const i128 t = static_cast<i128>(density.V) * q - static_cast<i128>(density.U) * x;
    if (t > std::numeric_limits<i64>::max() || t < std::numeric_limits<i64>::min()) {
        throw EnvelopeError("scaled_error: tracker V*Q - U*x overflows 64 bits at x=" + std::to_string(x));
    }
    ScaledError e;
    e.x = x;
    e.q = q;
    e.tracker = static_cast<i64>(t);
    e.scaled = scaled_value(e.tracker, x, density);
    return e;
}

int compare_scaled_exact(i64 t1, u64 x1, i64 t2, u64 x2, unsigned k)
{
    const int s1 = (t1 > 0) - (t1 < 0);
    const int s2 = (t2 > 0) - (t2 < 0);
    if (s1 != s2) return s1 < s2 ? -1 : 1;
    if (s1 == 0) return 0;
    const mpz_class a = abs(mpz_class(std::to_string(t1)));
    const mpz_class b = abs(mpz_class(std::to_string(t2)));
    mpz_class lhs, rhs;
    mpz_pow_ui(lhs.get_mpz_t(), a.get_mpz_t(), 2 * k);
    mpz_pow_ui(rhs.get_mpz_t(), b.get_mpz_t(), 2 * k);
    lhs *= mpz_class(std::to_string(x2));
    rhs *= mpz_class(std::to_string(x1));
    const int c = cmp(lhs, rhs);
    const int mag = (c > 0) - (c < 0);
    return s1 > 0 ? mag : -mag;
}

}  // namespace kfree
