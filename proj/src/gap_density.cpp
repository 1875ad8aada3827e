#include "kfree/gap_density.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <functional>
#include <map>
#include <thread>

#include "kfree/arith.hpp"

namespace kfree {

namespace {

mpz_class to_mpz(u128 v) { return mpz_class(to_string(v)); }

u64 first_prime_above(u64 P)
{
    for (u64 n = P + 1;; ++n) {
        bool prime = n >= 2;
        for (u64 d = 2; d * d <= n && prime; ++d) prime = n % d != 0;
        if (prime) return n;
    }
}

HiFloat pow_int(const HiFloat& base, unsigned e)
{
    HiFloat r;
    mpfr_pow_ui(r.backend().data(), base.backend().data(), e, MPFR_RNDN);
    return r;
}

HiFloat ten_pow_neg(unsigned digits)
{
    HiFloat r = 10;
    return 1 / pow_int(r, digits);
}

// zeta(n) - 1 for integer n >= 2, cached at the current precision.
class ZetaMinusOne {
public:
    const HiFloat& operator()(unsigned long n)
    {
        auto it = cache_.find(n);
        if (it != cache_.end()) return it->second;
        HiFloat z;
        mpfr_zeta_ui(z.backend().data(), n, MPFR_RNDN);
        return cache_.emplace(n, z - 1).first->second;
    }

private:
    std::map<unsigned long, HiFloat> cache_;
};

}  // namespace

unsigned nu(u64 p, unsigned k, const OffsetSet& h)
{
    const u128 m = saturating_pow(p, k);
    std::vector<u128> res;
    res.reserve(h.size());
    for (u64 x : h) res.push_back(x % m);
    std::sort(res.begin(), res.end());
    return static_cast<unsigned>(std::unique(res.begin(), res.end()) - res.begin());
}

BoundedValue tail_product(u64 l, unsigned k, u64 P, unsigned digits)
{
    if (k < 2) throw UsageError("tail_product: k must be >= 2");
    if (l == 0) return {HiFloat(1), HiFloat(0)};
    const u64 q0 = first_prime_above(P);
    if (static_cast<u128>(l) > saturating_pow(q0, k)) {
        throw UsageError("tail_product: l=" + std::to_string(l) + " exceeds " + std::to_string(q0) + "^" +
                         std::to_string(k) + "; the product does not converge to a density");
    }

    // Explicit factors up to Q, then a log series whose ratio l/Q^k <= 1e-6.
    u64 Q = std::max<u64>(P, 2);
    while (saturating_pow(Q, k) < static_cast<u128>(l) * 1000000) ++Q;
    const double log10_r = std::log10(static_cast<double>(l)) - k * std::log10(static_cast<double>(Q));
    const unsigned target = digits + 10;
    const unsigned J = static_cast<unsigned>(std::ceil(target / -log10_r)) + 1;
    const unsigned W = target + 10 + static_cast<unsigned>(std::ceil(J * std::log10(static_cast<double>(l))));
    ScopedDigits scope(W);

    const PrimeTable primes(Q);
    HiFloat E = 1;
    std::size_t explicit_count = 0;
    for (u32 p : primes.primes()) {
        if (p <= P) continue;
        const HiFloat pk = pow_int(HiFloat(p), k);
        const HiFloat factor = 1 - HiFloat(l) / pk;
        if (factor == 0) return {HiFloat(0), HiFloat(0)};
        E *= factor;
        ++explicit_count;
    }

    // sum_j l^j/j * sum_{p > Q} p^(-jk), each inner tail as
    // sum_m mu(m)/m log zeta(m s) - sum_{p <= Q} p^(-s).
    const MobiusTable mu = sieve_mobius(std::max<u64>(1, 4 * W));
    ZetaMinusOne zm1;
    HiFloat series = 0, trunc = 0, rounding = 0;
    HiFloat lj = 1;
    const HiFloat ulp = ten_pow_neg(W - 1);
    for (unsigned j = 1; j <= J; ++j) {
        lj *= l;
        const unsigned long s = static_cast<unsigned long>(j) * k;
        // Mobius tail: |sum_{m > M}| <= 6 * 2^(-(M+1)s); need it below eps / l^j.
        const double need_bits = (target + j * std::log10(static_cast<double>(l))) * 3.3219280948873623 + 3;
        const unsigned long M = static_cast<unsigned long>(std::ceil(need_bits / s));
        if (M > mu.limit()) throw EnvelopeError("tail_product: Mobius series longer than table");
        HiFloat ps = 0;
        for (unsigned long m = 1; m <= M; ++m) {
            const int mum = mu(m);
            if (mum == 0) continue;
            const HiFloat lz = log1p(zm1(m * s)) / m;
            ps += mum > 0 ? lz : HiFloat(-lz);
        }
        for (u32 p : primes.primes()) ps -= 1 / pow_int(HiFloat(p), static_cast<unsigned>(s));
        series += lj / j * ps;
        trunc += lj / j * 6 / pow_int(HiFloat(2), static_cast<unsigned>((M + 1) * s));
        rounding += lj / j * (M + primes.size() + 4) * ulp;
    }
    const HiFloat r = HiFloat(l) / pow_int(HiFloat(Q), k);
    trunc += Q * pow_int(r, J + 1) / (1 - r);
    rounding += (explicit_count + J + 4) * ulp;

    BoundedValue out;
    out.value = E * exp(-series);
    const HiFloat delta = trunc + rounding;
    out.error = out.value * expm1(delta) + ulp;
    return out;
}

CorrelationConstant a_k(const OffsetSet& h, unsigned k, unsigned digits)
{
    if (k < 2) throw UsageError("a_k: k must be >= 2");
    if (digits < 30) throw UsageError("a_k: precision must be at least 30 digits");
    for (std::size_t i = 1; i < h.size(); ++i) {
        if (h[i] <= h[i - 1]) throw UsageError("a_k: offsets must be strictly increasing");
    }
    CorrelationConstant c;
    c.h = h;
    c.k = k;
    c.l = h.size();
    c.finite_part = 1;
    c.modulus = 1;
    const u64 span = h.empty() ? 0 : h.back() - h.front();
    for (u64 p = 2; saturating_pow(p, k) <= span; ++p) {
        bool prime = true;
        for (u64 d = 2; d * d <= p && prime; ++d) prime = p % d != 0;
        if (!prime) continue;
        const u64 m = static_cast<u64>(saturating_pow(p, k));
        c.cutoff = p;
        c.finite_part *= static_cast<unsigned long>(m - nu(p, k, h));
        c.modulus *= static_cast<unsigned long>(m);
    }
    ScopedDigits scope(digits + 10);
    const BoundedValue t = tail_product(c.l, k, c.cutoff, digits);
    const HiFloat ratio = to_hifloat(mpq_class(c.finite_part, c.modulus));
    c.value = ratio * t.value;
    c.error = ratio * t.error;
    return c;
}

namespace {

struct Enumeration {
    std::vector<u64> moduli;
    mpz_class modulus = 1;
    u64 cutoff = 1;
    // sums[l] = sum of finite parts over subsets of cardinality l.
    std::vector<u128> sums;
};

// Visits every h = {0, g} u S, S subset of {1..g-1}, via a Gray code on the
// low bits of each chunk (the chunk index fixes the high bits).
void enumerate_chunk(unsigned g, const std::vector<u64>& moduli, unsigned high_bits, u64 chunk,
                     std::vector<u128>& sums, const std::function<void(const std::vector<u64>&, u64)>* visit)
{
    const unsigned nbits = g - 1;
    const unsigned low = nbits - high_bits;
    std::vector<std::vector<unsigned>> cnt(moduli.size());
    std::vector<u64> nus(moduli.size(), 0);
    for (std::size_t i = 0; i < moduli.size(); ++i) cnt[i].assign(moduli[i], 0);
    std::vector<u64> members;
    unsigned l = 0;
    auto add = [&](u64 e) {
        ++l;
        for (std::size_t i = 0; i < moduli.size(); ++i) {
            if (cnt[i][e % moduli[i]]++ == 0) ++nus[i];
        }
    };
    auto remove = [&](u64 e) {
        --l;
        for (std::size_t i = 0; i < moduli.size(); ++i) {
            if (--cnt[i][e % moduli[i]] == 0) --nus[i];
        }
    };
    add(0);
    add(g);
    for (unsigned b = 0; b < high_bits; ++b) {
        if ((chunk >> b) & 1U) add(low + b + 1);
    }
    u64 mask = 0;
    const u64 count = u64{1} << low;
    for (u64 i = 0;; ++i) {
        u64 c = 1;
        for (std::size_t m = 0; m < moduli.size(); ++m) c *= moduli[m] - nus[m];
        sums[l] += c;
        if (visit != nullptr) {
            members.clear();
            members.push_back(0);
            for (unsigned b = 0; b < low; ++b) {
                if ((mask >> b) & 1U) members.push_back(b + 1);
            }
            for (unsigned b = 0; b < high_bits; ++b) {
                if ((chunk >> b) & 1U) members.push_back(low + b + 1);
            }
            members.push_back(g);
            (*visit)(members, c);
        }
        if (i + 1 == count) break;
        const unsigned flip = static_cast<unsigned>(std::countr_zero(i + 1));
        mask ^= u64{1} << flip;
        if ((mask >> flip) & 1U) {
            add(flip + 1);
        } else {
            remove(flip + 1);
        }
    }
}

Enumeration enumerate_subsets(unsigned g, unsigned k, unsigned threads)
{
    Enumeration en;
    for (u64 p = 2; saturating_pow(p, k) <= g; ++p) {
        bool prime = true;
        for (u64 d = 2; d * d <= p && prime; ++d) prime = p % d != 0;
        if (!prime) continue;
        en.moduli.push_back(static_cast<u64>(saturating_pow(p, k)));
        en.modulus *= static_cast<unsigned long>(en.moduli.back());
        en.cutoff = p;
    }
    const unsigned nbits = g - 1;
    unsigned high_bits = 0;
    if (threads > 1) high_bits = std::min(nbits, static_cast<unsigned>(std::bit_width(threads - 1)) + 2);
    const u64 chunks = u64{1} << high_bits;
    std::vector<std::vector<u128>> partial(chunks, std::vector<u128>(g + 2, 0));
    if (threads <= 1) {
        enumerate_chunk(g, en.moduli, 0, 0, partial[0], nullptr);
    } else {
        std::atomic<u64> next{0};
        auto worker = [&] {
            for (u64 c = next++; c < chunks; c = next++) enumerate_chunk(g, en.moduli, high_bits, c, partial[c], nullptr);
        };
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    en.sums.assign(g + 2, 0);
    for (const auto& p : partial) {
        for (std::size_t l = 0; l < p.size(); ++l) en.sums[l] += p[l];
    }
    return en;
}

struct Evaluated {
    HiFloat value;
    HiFloat error;
    HiFloat max_term;
};

Evaluated evaluate(unsigned g, unsigned k, const Enumeration& en, unsigned W, bool ungrouped)
{
    ScopedDigits scope(W);
    std::vector<BoundedValue> tails(g + 2);
    for (unsigned l = 2; l <= g + 1; ++l) {
        if (en.sums[l] != 0 || ungrouped) tails[l] = tail_product(l, k, en.cutoff, W);
    }
    const HiFloat modulus = to_hifloat(en.modulus);
    Evaluated out{HiFloat(0), HiFloat(0), HiFloat(0)};
    std::size_t terms = 0;
    if (!ungrouped) {
        for (unsigned l = 2; l <= g + 1; ++l) {
            if (en.sums[l] == 0) continue;
            const HiFloat weight = to_hifloat(to_mpz(en.sums[l])) / modulus;
            const HiFloat term = weight * tails[l].value;
            out.value += l % 2 == 0 ? term : HiFloat(-term);
            out.error += weight * tails[l].error;
            out.max_term = std::max(out.max_term, HiFloat(abs(term)));
            ++terms;
        }
    } else {
        std::vector<u128> scratch(g + 2, 0);
        const std::function<void(const std::vector<u64>&, u64)> visit = [&](const std::vector<u64>& h, u64 c) {
            if (c == 0) return;
            const std::size_t l = h.size();
            const HiFloat term = HiFloat(c) / modulus * tails[l].value;
            out.value += l % 2 == 0 ? term : HiFloat(-term);
            out.error += HiFloat(c) / modulus * tails[l].error;
            out.max_term = std::max(out.max_term, HiFloat(abs(term)));
            ++terms;
        };
        enumerate_chunk(g, en.moduli, 0, 0, scratch, &visit);
    }
    out.error += (terms + 2) * out.max_term * ten_pow_neg(W - 1);
    return out;
}

}  // namespace

DensityResult d_k(unsigned g, unsigned k, const DensityOptions& options)
{
    if (g < 1) throw UsageError("d_k: g must be >= 1");
    if (k < 2) throw UsageError("d_k: k must be >= 2");
    const unsigned max_g = k == 2 ? options.max_g_k2 : options.max_g_other;
    if (g > max_g) {
        throw EnvelopeError("d_k: g=" + std::to_string(g) + " needs 2^" + std::to_string(g - 1) +
                            " subsets, beyond the configured limit g <= " + std::to_string(max_g));
    }
    const unsigned digits = std::max(30U, options.digits);
    const Enumeration en = enumerate_subsets(g, k, std::max(1U, options.threads));

    // Start with room for the largest term, then widen if cancellation ate more.
    double guard = 20 + std::log10(static_cast<double>(g) + 2) + g * std::log10(2.0);
    for (int attempt = 0; attempt < 3; ++attempt) {
        const unsigned W = digits + static_cast<unsigned>(std::ceil(guard));
        Evaluated ev = evaluate(g, k, en, W, options.ungrouped);
        ScopedDigits scope(W);
        const HiFloat mag = abs(ev.value);
        double lost = 0;
        if (mag > 0) lost = std::max(0.0, (log10(ev.max_term) - log10(mag)).convert_to<double>());
        if (ev.value < 0 || ev.value == 0 || lost + 10 > guard) {
            guard = lost + 30;
            continue;
        }
        DensityResult r;
        r.g = g;
        r.k = k;
        r.value = ev.value;
        r.truncation_error_bound = ev.error;
        r.working_precision = W;
        r.cancellation_digits = lost;
        return r;
    }
    throw EnvelopeError("d_k: cancellation exceeds working precision for g=" + std::to_string(g));
}

double grimmett_ratio(unsigned g, unsigned k, const DensityOptions& options)
{
    if (g < 2) throw UsageError("grimmett_ratio: g must be >= 2");
    const DensityResult r = d_k(g, k, options);
    ScopedDigits scope(r.working_precision);
    const HiFloat gg(g);
    return (log(r.value) / (gg * log(gg))).convert_to<double>();
}

double grimmett_asymptote(unsigned k)
{
    ScopedDigits scope(40);
    HiFloat z;
    switch (k) {
    case 2:
        mpfr_zeta_ui(z.backend().data(), 2, MPFR_RNDN);
        return (-1 / z).convert_to<double>();
    case 3:
        mpfr_zeta_ui(z.backend().data(), 3, MPFR_RNDN);
        return (-2 / z).convert_to<double>();
    default: throw UsageError("grimmett_asymptote: known for k = 2 and 3 only");
    }
}

}  // namespace kfree
