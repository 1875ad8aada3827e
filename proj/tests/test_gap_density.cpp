#include "doctest.h"

#include <cmath>
#include <string>

#include "kfree/arith.hpp"
#include "kfree/gap_density.hpp"
#include "kfree/sieve_scan.hpp"
#include "reference_values.hpp"

using namespace kfree;
using namespace kfree::reference;

namespace {

HiFloat zeta2() { return boost::math::constants::pi<HiFloat>() * boost::math::constants::pi<HiFloat>() / 6; }

}  // namespace

TEST_CASE("nu counts residue classes")
{
    CHECK(nu(2, 2, {0, 1, 2, 3}) == 4);
    CHECK(nu(2, 2, {0, 4}) == 1);
    OffsetSet all27;
    for (u64 i = 0; i < 27; ++i) all27.push_back(i);
    CHECK(nu(3, 3, all27) == 27);
    CHECK(nu(5, 2, {0, 25, 50, 3}) == 2);
}

TEST_CASE("tail products against Euler-product identities")
{
    ScopedDigits scope(80);
    const BoundedValue one = tail_product(0, 2, 7, 60);
    CHECK(one.value == 1);
    CHECK(one.error == 0);

    // l = 1: prod_{p > 7} (1 - p^-2) = 1 / (zeta(2) prod_{p <= 7} (1 - p^-2)).
    const BoundedValue t1 = tail_product(1, 2, 7, 60);
    HiFloat finite = 1;
    for (int p : {2, 3, 5, 7}) finite *= 1 - HiFloat(1) / (p * p);
    const HiFloat expect = 1 / (zeta2() * finite);
    CHECK(abs(t1.value - expect) < HiFloat("1e-60"));
    CHECK(t1.error < HiFloat("1e-60"));
    CHECK(abs(t1.value - expect) <= t1.error + HiFloat("1e-75"));

    // Over all primes with l = 1 this is 1/zeta(2).
    const BoundedValue all = tail_product(1, 2, 1, 60);
    CHECK(abs(all.value - 1 / zeta2()) < HiFloat("1e-60"));
}

TEST_CASE("l = 2 tail product against a factored prime product")
{
    // 1 - 2/p^2 = (1 - 1/p^2)^2 (1 - 1/(p^2 - 1)^2); the second factor converges
    // like p^-4, so a direct product to 1e7 is good to about 22 digits.
    ScopedDigits scope(40);
    const PrimeTable primes(10000000);
    HiFloat fast = 1, slow_finite = 1;
    for (u32 p : primes.primes()) {
        const HiFloat p2 = HiFloat(p) * p;
        if (p > 7) fast *= 1 - 1 / ((p2 - 1) * (p2 - 1));
        if (p <= 7) slow_finite *= 1 - 1 / p2;
    }
    const HiFloat base = 1 / (zeta2() * slow_finite);
    const HiFloat oracle = base * base * fast;
    const BoundedValue t2 = tail_product(2, 2, 7, 40);
    CHECK(abs(t2.value - oracle) / oracle < HiFloat("1e-20"));
}

TEST_CASE("correlation constants")
{
    ScopedDigits scope(80);
    const CorrelationConstant c0 = a_k({0}, 2, 60);
    CHECK(abs(c0.value - 1 / zeta2()) < HiFloat("1e-58"));

    const CorrelationConstant c01 = a_k({0, 1}, 2, 60);
    CHECK(c01.finite_part == 1);
    CHECK(c01.l == 2);
    CHECK(abs(c01.value - table_value("0.32263 40989 39245", 0)) <= last_unit(0));

    const CorrelationConstant c04 = a_k({0, 4}, 2, 60);
    CHECK(c04.cutoff == 2);
    CHECK(c04.finite_part == 3);
    CHECK(c04.modulus == 4);
    CHECK(c04.l == 2);
    const BoundedValue t = tail_product(2, 2, 2, 60);
    CHECK(abs(c04.value - 3 * t.value / 4) < HiFloat("1e-58"));

    // {0,1,2,3} covers every class mod 4; p = 2 sits in the tail, whose factor 1 - 4/4 vanishes.
    const CorrelationConstant full = a_k({0, 1, 2, 3}, 2, 60);
    CHECK(full.cutoff == 1);
    CHECK(full.value == 0);
    CHECK_THROWS_AS(a_k({0, 1}, 2, 10), UsageError);
    CHECK_THROWS_AS(a_k({1, 0}, 2, 60), UsageError);
}

TEST_CASE("square-free gap densities")
{
    for (const Golden& gd : kSquarefreeGapDensities) {
        CAPTURE(gd.g);
        const DensityResult r = d_k(gd.g, 2);
        ScopedDigits scope(r.working_precision);
        CHECK(r.value > 0);
        CHECK(r.truncation_error_bound < HiFloat("1e-190") * r.value);
        CHECK(abs(r.value - table_value(gd.mantissa, gd.exp10)) <= last_unit(gd.exp10));
    }
}

TEST_CASE("cube-free gap densities")
{
    for (const Golden& gd : kCubefreeGapDensities) {
        CAPTURE(gd.g);
        const DensityResult r = d_k(gd.g, 3);
        ScopedDigits scope(r.working_precision);
        CHECK(r.value > 0);
        CHECK(abs(r.value - table_value(gd.mantissa, gd.exp10)) <= last_unit(gd.exp10));
    }
}

TEST_CASE("densities stay positive through the desk range and sum below 1/zeta(k)")
{
    for (unsigned k : {2u, 3u}) {
        const unsigned gmax = k == 2 ? 22 : 16;
        DensityOptions opt;
        opt.digits = 120;
        ScopedDigits scope(200);
        HiFloat sum = 0, last = 0;
        for (unsigned g = 1; g <= gmax; ++g) {
            const DensityResult r = d_k(g, k, opt);
            CHECK(r.value > 0);
            sum += r.value;
            last = r.value;
        }
        HiFloat z;
        mpfr_zeta_ui(z.backend().data(), k, MPFR_RNDN);
        const HiFloat deficit = 1 / z - sum;
        CAPTURE(deficit);
        CHECK(deficit > 0);
        CHECK(deficit < 10 * last);
    }
}

TEST_CASE("grouped and ungrouped sums agree")
{
    DensityOptions plain, per_subset;
    plain.digits = per_subset.digits = 80;
    per_subset.ungrouped = true;
    for (unsigned k : {2u, 3u}) {
        for (unsigned g = 1; g <= 10; ++g) {
            const DensityResult a = d_k(g, k, plain);
            const DensityResult b = d_k(g, k, per_subset);
            ScopedDigits scope(120);
            CHECK(abs(a.value - b.value) <= (a.truncation_error_bound + b.truncation_error_bound) * 2);
            CHECK(abs(a.value - b.value) < HiFloat("1e-78") * a.value);
        }
    }
}

TEST_CASE("threaded enumeration gives identical values")
{
    DensityOptions one, many;
    one.digits = many.digits = 60;
    many.threads = 3;
    for (unsigned g : {5u, 12u, 17u}) {
        const DensityResult a = d_k(g, 2, one);
        const DensityResult b = d_k(g, 2, many);
        CHECK(a.value == b.value);
    }
}

TEST_CASE("empirical gap frequencies match the densities")
{
    const u64 hi = 100000000;
    const PrimeTable primes(20000);
    ScannerState s = make_state(2, 0, 0);
    scan_range(s, hi, primes);
    DensityOptions opt;
    opt.digits = 40;
    for (unsigned g = 1; g < s.gaps.counts.size(); ++g) {
        if (s.gaps.counts[g] < 10000) continue;
        CAPTURE(g);
        const double d = d_k(g, 2, opt).value.convert_to<double>();
        const double freq = static_cast<double>(s.gaps.counts[g]) / static_cast<double>(hi);
        CHECK(std::abs(freq - d) / d < 0.05);
        if (g <= 6) CHECK(std::abs(freq - d) / d < 1e-3);
    }
}

TEST_CASE("budget and argument checks")
{
    CHECK_THROWS_AS(d_k(23, 2), EnvelopeError);
    CHECK_THROWS_AS(d_k(17, 3), EnvelopeError);
    CHECK_THROWS_AS(d_k(0, 2), UsageError);
    CHECK_THROWS_AS(tail_product(5, 2, 1, 40), UsageError);
    CHECK_THROWS_AS(grimmett_ratio(1, 2), UsageError);
}

TEST_CASE("growth ratio")
{
    DensityOptions opt;
    opt.digits = 40;
    const double expect = std::log(0.6400767602849550e-7) / (10 * std::log(10.0));
    CHECK(grimmett_ratio(10, 2, opt) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(grimmett_asymptote(2) == doctest::Approx(-6 / (M_PI * M_PI)).epsilon(1e-15));
    CHECK(grimmett_asymptote(3) == doctest::Approx(-1.6638).epsilon(1e-4));
}
