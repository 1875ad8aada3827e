#include "doctest.h"

#include <cmath>
#include <random>
#include <string>

#include "kfree/counting.hpp"
#include "kfree/hifloat.hpp"

using namespace kfree;

namespace {

bool kfree_oracle(u64 n, unsigned k)
{
    for (u64 d = 2; saturating_pow(d, k) <= n; ++d) {
        if (n % static_cast<u64>(saturating_pow(d, k)) == 0) return false;
    }
    return true;
}

// zeta(2) = pi^2/6 and zeta(3) = (5/2) sum (-1)^(n+1) / (n^3 C(2n,n)),
// both independent of the library zeta.
HiFloat zeta_oracle(unsigned k)
{
    if (k == 2) {
        const HiFloat pi = boost::math::constants::pi<HiFloat>();
        return pi * pi / 6;
    }
    HiFloat sum = 0;
    mpz_class binom = 1;  // C(2n, n)
    for (unsigned n = 1; n <= 120; ++n) {
        binom = binom * (2 * n) * (2 * n - 1) / (n * n);
        const HiFloat term = 1 / (HiFloat(n) * n * n * to_hifloat(binom));
        sum += n % 2 == 1 ? term : -term;
    }
    return sum * 5 / 2;
}

// Parses "1549533137384 09"-style digit groups.
u64 digits(const std::string& s)
{
    u64 v = 0;
    for (char c : s) {
        if (c >= '0' && c <= '9') v = v * 10 + static_cast<u64>(c - '0');
    }
    return v;
}

}  // namespace

TEST_CASE("published density constants")
{
    const RationalDensity d2 = rational_inv_zeta(2);
    CHECK(d2.U == 43911266001254ULL);
    CHECK(d2.V == 72231137363897ULL);
    const RationalDensity d3 = rational_inv_zeta(3);
    CHECK(d3.U == 93721645826352ULL);
    CHECK(d3.V == 112658751341045ULL);

    ScopedDigits digits(60);
    for (const RationalDensity& d : {d2, d3}) {
        const HiFloat err = abs(HiFloat(d.U) / HiFloat(d.V) - 1 / zeta_oracle(d.k));
        const double e = err.convert_to<double>();
        CHECK(e < 1e-28);
        CHECK(d.error_bound >= e);
        CHECK(d.error_bound <= e * (1 + 1e-12));
    }
    CHECK(d2.error_bound == doctest::Approx(3.06e-29).epsilon(0.01));
    CHECK(d3.error_bound == doctest::Approx(3.86e-29).epsilon(0.01));
}

TEST_CASE("convergent constants for larger k")
{
    for (unsigned k = 4; k <= 12; ++k) {
        const RationalDensity d = rational_inv_zeta(k);
        CHECK(d.k == k);
        CHECK(d.V <= (u64{1} << 50));
        CHECK(d.error_bound < 1e-28);
        CHECK(d.U < d.V);
    }
    CHECK_THROWS_AS(rational_inv_zeta(1), UsageError);
}

TEST_CASE("qk_direct small values")
{
    CHECK(qk_direct(43, 2) == 29);
    CHECK(qk_direct(239, 3) == 202);
    CHECK(qk_direct(0, 2) == 0);
    CHECK(qk_direct(1, 2) == 1);
    for (unsigned k = 2; k <= 5; ++k) {
        u64 count = 0;
        for (u64 x = 1; x <= 20000; ++x) {
            count += kfree_oracle(x, k);
            if (x % 97 == 0 || x < 300) REQUIRE(qk_direct(x, k) == count);
        }
    }
}

TEST_CASE("qk_direct refuses a short table")
{
    const MobiusTable mu = sieve_mobius(10);
    CHECK_THROWS_AS(qk_direct(1000, 2, mu), UsageError);
}

TEST_CASE("q2_mertens agrees with the direct formula")
{
    const MobiusTable mu = sieve_mobius(1000000);
    const MertensTable m(mu);
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        const u64 x = 1 + rng() % 1000000000000ULL;
        const u64 nmax = std::max<u64>(1, iroot(x / 4, 3));
        const u64 n = 1 + rng() % nmax;
        REQUIRE(q2_mertens(x, n, mu, m) == qk_direct(x, 2, mu));
        REQUIRE(q2_mertens(x, default_n(x), mu, m) == qk_direct(x, 2, mu));
    }
    CHECK(default_n(100) == 1);
    CHECK(default_n(8000000) == 10);
}

TEST_CASE("q2_mertens rejects inadmissible n")
{
    const MobiusTable mu = sieve_mobius(1000);
    const MertensTable m(mu);
    CHECK_THROWS_AS(q2_mertens(1000, 7, mu, m), UsageError);
    CHECK(q2_mertens(1000, 6, mu, m) == qk_direct(1000, 2, mu));
    CHECK_THROWS_AS(q2_mertens(1000, 0, mu, m), UsageError);
}

TEST_CASE("large square-free extremum row")
{
    const u64 x = digits("15495 33137 38409");
    const u64 q = q2_mertens(x, default_n(x));
    CHECK(q == digits("9420 03189 39699"));
    CHECK(q == qk_direct(x, 2));
    // Minimum convention: the count just before the jump at x.
    const ScaledError e = scaled_error(x, q - 1, rational_inv_zeta(2));
    CHECK(std::abs(e.scaled + 1.1254291388) < 6e-11);
}

TEST_CASE("small extrema scaled values")
{
    const ScaledError e2 = scaled_error(43, 29, rational_inv_zeta(2));
    CHECK(std::abs(e2.scaled - 1.1165225284) < 6e-11);
    const ScaledError e3 = scaled_error(239, 202, rational_inv_zeta(3));
    CHECK(std::abs(e3.scaled - 1.2741663981) < 6e-11);
}

TEST_CASE("cube-free table rows reproduce")
{
    struct Row {
        const char* x;
        const char* q;  // nullptr where the printed column is ambiguous
        double scaled;
        Side side;
    };
    const Row rows[] = {
        {"37 25506 68027 64753", "30 99276 47392 06106", -1.1395113865, Side::Min},
        {"100 67232 71273", "83 75005 11408", -1.1344947648, Side::Min},
        {"247 61514", "205 99269", -1.0574256106, Side::Min},
        {"36 88026 73969 44881", "30 68096 63502 65741", -1.0460423031, Side::Min},
        {"43307 31505", "36027 67427", -1.0322938850, Side::Min},
        {"46 61835 65920 74881", "38 78215 45465 42909", -1.0170212628, Side::Min},
        {"1230 68914 90897", "1023 81937 64677", -1.0002780893, Side::Min},
        {"239", "202", 1.2741663981, Side::Max},
        {"3 58443 58111", nullptr, 1.2719409798, Side::Max},
        {"3 53865 20351", nullptr, 1.2046812652, Side::Max},
        {"34590 90473 40623", nullptr, 1.1955711640, Side::Max},
        {"3 63353 32103", nullptr, 1.1354370876, Side::Max},
        {"34787 05944 82109", nullptr, 1.1310374620, Side::Max},
        {"33814 05939 98087", nullptr, 1.1240997343, Side::Max},
        {"3 41744 07247", nullptr, 1.0821364423, Side::Max},
        {"69306 16294 63231", nullptr, 1.0745615853, Side::Max},
        {"3 74709 97111", nullptr, 1.0615670536, Side::Max},
        {"26 92790 56984 79471", nullptr, 1.0574466414, Side::Max},
        {"3 88688 68031", nullptr, 1.0505675620, Side::Max},
        {"164 33636 91245", nullptr, 1.0387329148, Side::Max},
        {"160 58877 68357", nullptr, 1.0223421754, Side::Max},
        {"29 93414 17864 74199", nullptr, 1.0018640000, Side::Max},
        {"317521 82599", nullptr, 1.0016105574, Side::Max},
    };
    const RationalDensity d = rational_inv_zeta(3);
    const MobiusTable mu = sieve_mobius(1000000);
    for (const Row& r : rows) {
        CAPTURE(r.x);
        const u64 x = digits(r.x);
        const u64 q = qk_direct(x, 3, mu);
        REQUIRE(kfree_oracle(x, 3));
        if (r.q != nullptr) CHECK(q == digits(r.q));
        const u64 qc = r.side == Side::Min ? q - 1 : q;
        CHECK(std::abs(scaled_error(x, qc, d).scaled - r.scaled) < 6e-11);
    }
}

TEST_CASE("scaled_error overflow is reported")
{
    const RationalDensity d = rational_inv_zeta(2);
    CHECK_THROWS_AS(scaled_error(1000000, 0, d), EnvelopeError);
    CHECK_THROWS_AS(scaled_error(0, 0, d), UsageError);
}

TEST_CASE("exact comparison agrees with well separated doubles")
{
    const RationalDensity d = rational_inv_zeta(2);
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        const u64 x1 = 1 + rng() % 1000000000000ULL, x2 = 1 + rng() % 1000000000000ULL;
        const i64 t1 = static_cast<i64>(rng() % 2000000000000000000ULL) - 1000000000000000000LL;
        const i64 t2 = static_cast<i64>(rng() % 2000000000000000000ULL) - 1000000000000000000LL;
        const double a = scaled_value(t1, x1, d), b = scaled_value(t2, x2, d);
        if (std::abs(a - b) < 1e-9 * (std::abs(a) + std::abs(b))) continue;
        REQUIRE(compare_scaled_exact(t1, x1, t2, x2, 2) == (a < b ? -1 : 1));
    }
    CHECK(compare_scaled_exact(5, 16, 10, 256, 2) == 0);
    CHECK(compare_scaled_exact(-5, 16, -10, 256, 2) == 0);
    CHECK(compare_scaled_exact(-1, 1, 0, 1, 2) == -1);
}
