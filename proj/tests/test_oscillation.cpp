#include "doctest.h"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "kfree/oscillation.hpp"

using namespace kfree;

namespace {

const std::vector<ZetaZero>& zeros()
{
    static const std::vector<ZetaZero> z = load_zeros_file(default_zeros_path(), 3600);
    return z;
}

const std::vector<ZeroDerivative>& derivs(std::size_t count)
{
    static std::vector<ZeroDerivative> d;
    if (d.size() < count) d = derivatives_at_zeros(zeros(), count, 2);
    return d;
}

std::vector<ResidueTerm> residues_k(unsigned k, std::size_t count)
{
    std::vector<ZeroDerivative> d(derivs(count).begin(), derivs(count).begin() + static_cast<long>(count));
    return residues(zeros(), d, k, 2);
}

}  // namespace

TEST_CASE("kernel shape")
{
    const KernelSpec jp{10.0, KernelKind::JurkatPeyerimhoff};
    CHECK(kernel_eval(0.0, jp) == 1.0);
    CHECK(kernel_eval(10.0, jp) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(std::abs(kernel_eval(10.0, jp)) < 1e-15);
    CHECK(kernel_eval(5.0, jp) == doctest::Approx(1.0 / std::numbers::pi).epsilon(1e-15));
    CHECK(kernel_eval(10.0001, jp) == 0.0);
    const KernelSpec fe{10.0, KernelKind::Fejer};
    CHECK(kernel_eval(0.0, fe) == 1.0);
    CHECK(kernel_eval(2.5, fe) == 0.75);
    CHECK(kernel_eval(-11.0, fe) == 0.0);
    CHECK(kernel_eval(1e6, KernelSpec{1.0, KernelKind::Flat}) == 1.0);
    CHECK_FALSE(KernelSpec{1.0, KernelKind::Flat}.admissible());
    CHECK(parse_kernel("fejer") == KernelKind::Fejer);
    CHECK_THROWS_AS(parse_kernel("gauss"), UsageError);

    for (const KernelSpec& spec : {jp, fe}) {
        for (int i = 0; i <= 100000; ++i) {
            const double t = -12.0 + 24.0 * i / 100000.0;
            const double v = kernel_eval(t, spec);
            REQUIRE(v >= 0.0);
            REQUIRE(v == kernel_eval(-t, spec));
            if (std::abs(t) > spec.T) REQUIRE(v == 0.0);
        }
    }
}

TEST_CASE("kernel scale identity and nonnegative transform")
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> t_dist(-3000.0, 3000.0);
    for (int i = 0; i < 10000; ++i) {
        const double t = t_dist(rng);
        for (unsigned k : {2u, 3u, 5u, 8u}) {
            const double T = 2516.0;
            const double a = kernel_eval(t / k, KernelSpec{T / k, KernelKind::JurkatPeyerimhoff});
            const double b = kernel_eval(t, KernelSpec{T, KernelKind::JurkatPeyerimhoff});
            REQUIRE(std::abs(a - b) < 1e-15);
        }
    }
    // int_{-1}^{1} kappa_1(t) cos(w t) dt >= 0, by Simpson's rule.
    const KernelSpec spec{1.0, KernelKind::JurkatPeyerimhoff};
    const int steps = 20000;
    for (double w = 0.0; w <= 200.0; w += 0.37) {
        double acc = 0.0;
        for (int i = 0; i <= steps; ++i) {
            const double t = -1.0 + 2.0 * i / steps;
            const double c = (i == 0 || i == steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            acc += c * kernel_eval(t, spec) * std::cos(w * t);
        }
        acc *= 2.0 / steps / 3.0;
        CAPTURE(w);
        CHECK(acc > -1e-9);
    }
}

TEST_CASE("Stark bounds")
{
    const double expect[] = {0.0657, 0.0388, 0.0297, 0.0261};
    for (unsigned k = 2; k <= 5; ++k) {
        CAPTURE(k);
        CHECK(truncate_places(stark_bound(k, zeros()), 4) == doctest::Approx(expect[k - 2]).epsilon(1e-12));
    }
    // Approach to the k -> infinity limit built from zeta(0).
    const ResidueTerm lim = residue(zeros()[0], derivs(1)[0], kLimitK);
    const double limit = 2 * (1 - static_cast<double>(zeros()[0].gamma / zeros()[1].gamma)) * lim.abs;
    const double b50 = stark_bound(50, zeros()), b100 = stark_bound(100, zeros());
    CHECK(std::abs(b100 - limit) < std::abs(b50 - limit));
    CHECK(std::abs(b100 - limit) / limit < 0.02);
    CHECK(stark_bound(1000, zeros()) == doctest::Approx(limit).epsilon(2e-3));
}

TEST_CASE("cutoff placement")
{
    const double T = cutoff_below(zeros(), 10);
    CHECK(static_cast<double>(zeros()[9].gamma) < T);
    CHECK(T < static_cast<double>(zeros()[10].gamma));
    CHECK_THROWS_AS(cutoff_below(zeros(), static_cast<u32>(zeros().size())), UsageError);
    CHECK_THROWS_AS(cutoff_below(zeros(), 10, 100.0), UsageError);
}

TEST_CASE("explicit sums")
{
    const auto res = residues_k(2, 300);
    const std::vector<double> u = log_grid(1e8, 1e12, 20);
    REQUIRE(u.size() == 81);
    CHECK(u.front() == doctest::Approx(std::log(1e8)).epsilon(1e-15));

    ExplicitSumSpec spec;
    spec.m = 0;
    for (double v : explicit_sum(u, spec, zeros(), res)) CHECK(v == 0.0);
    spec.pole_terms = 3;
    const auto poles = explicit_sum(u, spec, zeros(), res);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(poles[i] == -pole_sum(u[i], 2, 3));

    // Finer grids contain the coarse points and agree there.
    spec.m = 300;
    spec.pole_terms = 0;
    spec.T = cutoff_below(zeros(), 300);
    const auto coarse = explicit_sum(u, spec, zeros(), res);
    const std::vector<double> u2 = log_grid(1e8, 1e12, 40);
    const auto fine = explicit_sum(u2, spec, zeros(), res);
    for (std::size_t i = 0; i < u.size(); ++i) {
        CHECK(u2[2 * i] == doctest::Approx(u[i]).epsilon(1e-15));
        CHECK(fine[2 * i] == doctest::Approx(coarse[i]).epsilon(1e-12).scale(1.0));
    }

    // Linearity over a split of the zeros.
    for (KernelKind kind : {KernelKind::Flat, KernelKind::JurkatPeyerimhoff, KernelKind::Fejer}) {
        spec.kernel = kind;
        auto lowpart = res, highpart = res;
        for (u32 n = 1; n <= 300; ++n) (n % 3 == 0 ? lowpart : highpart)[n - 1].value = 0.0;
        const auto whole = explicit_sum(u, spec, zeros(), res);
        const auto a = explicit_sum(u, spec, zeros(), lowpart);
        const auto b = explicit_sum(u, spec, zeros(), highpart);
        for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(whole[i] - a[i] - b[i]) < 1e-13);
    }
    spec.m = 400;
    CHECK_THROWS_AS(explicit_sum(u, spec, zeros(), res), UsageError);
}

TEST_CASE("explicit sum follows the scaled error near a large minimum")
{
    // The largest square-free deficit below 10^15 occurs just before x = 154953313738409.
    const auto res = residues_k(2, 2000);
    ExplicitSumSpec spec;
    spec.m = 2000;
    spec.T = cutoff_below(zeros(), 2000);
    const auto v = explicit_sum({std::log(154953313738409.0), std::log(183141684519.0)}, spec, zeros(), res);
    CHECK(v[0] < -0.9);
    CHECK(v[1] > 0.8);
}

TEST_CASE("trivial-zero terms decay")
{
    const double u8 = std::log(1e8);
    CHECK(std::abs(pole_sum(u8, 2, 20)) < 1e-6);
    CHECK(std::abs(pole_sum(u8, 3, 20)) < 1e-6);
    for (unsigned k = 2; k <= 5; ++k) {
        CAPTURE(k);
        // Dominated by j = 1: ratio exp(-5/(2k)) per unit of u.
        const double u = 60.0;
        const double r = pole_sum(u + 1, k, 20) / pole_sum(u, k, 20);
        CHECK(r == doctest::Approx(std::exp(-5.0 / (2.0 * k))).epsilon(1e-3));
        CHECK(std::abs(pole_sum(u8, k, 20)) < 1e-3);
    }
}

TEST_CASE("independence bound properties")
{
    const auto res = residues_k(2, 300);
    const double T = cutoff_below(zeros(), 300);
    std::vector<u32> subset = {1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233};
    double last = 0.0;
    for (u64 N : {1ULL, 2ULL, 5ULL, 100ULL, 100000ULL}) {
        const double b = independence_bound(subset, N, T, 2, zeros(), res);
        CHECK(b >= last);
        last = b;
    }
    const double base = independence_bound(subset, 50, T, 2, zeros(), res);
    for (u32 extra : {4u, 100u, 299u}) {
        auto bigger = subset;
        bigger.push_back(extra);
        CHECK(independence_bound(bigger, 50, T, 2, zeros(), res) >= base);
    }
    // Order of the subset does not matter.
    auto shuffled = subset;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(independence_bound(shuffled, 50, T, 2, zeros(), res) == base);
    // N -> infinity doubles the weighted sum.
    double direct = 0.0;
    for (u32 n : subset) direct += kernel_eval(static_cast<double>(zeros()[n - 1].gamma), {T}) * res[n - 1].abs;
    CHECK(independence_bound(subset, 1000000000000ULL, T, 2, zeros(), res) == doctest::Approx(2 * direct).epsilon(1e-11));

    CHECK_THROWS_AS(independence_bound({301}, 5, T, 2, zeros(), res), UsageError);
    CHECK_THROWS_AS(independence_bound({1}, 5, 10.0, 2, zeros(), res), UsageError);
    CHECK_THROWS_AS(independence_bound({1}, 0, T, 2, zeros(), res), UsageError);
    CHECK_THROWS_AS(independence_bound({1}, 5, T, 2, zeros(), res, KernelKind::Flat), UsageError);
    CHECK_THROWS_AS(independence_bound({1}, 5, T, 3, zeros(), res), UsageError);
    CHECK_THROWS_AS(independence_bound({1, 1}, 5, T, 2, zeros(), res), UsageError);
}

TEST_CASE("subset selection")
{
    const auto res = residues_k(2, 300);
    const double T = cutoff_below(zeros(), 300);
    std::vector<u32> all(300);
    for (u32 i = 0; i < 300; ++i) all[i] = i + 1;
    CHECK(select_subset(zeros(), res, T, 300) == all);

    const double small_T = cutoff_below(zeros(), 20);
    u32 best = 1;
    double best_score = -1.0;
    for (u32 n = 1; n <= 20; ++n) {
        const double score = kernel_eval(static_cast<double>(zeros()[n - 1].gamma), {small_T}) * res[n - 1].abs;
        if (score > best_score) {
            best_score = score;
            best = n;
        }
    }
    CHECK(select_subset(zeros(), res, small_T, 1) == std::vector<u32>{best});
    CHECK(best == 1);

    // Equal scores go to the smaller index.
    auto flat = res;
    for (auto& r : flat) r.abs = 1.0;
    const double t10 = cutoff_below(zeros(), 10);
    const auto pick = select_subset(zeros(), flat, t10, 3, KernelKind::Fejer);
    CHECK(pick == std::vector<u32>{1, 2, 3});
    CHECK_THROWS_AS(select_subset(zeros(), res, small_T, 21), UsageError);
}

TEST_CASE("bundled independence results reproduce the oscillation constants")
{
    const IndependenceData d2 = load_independence(default_independence_path(2));
    CHECK(d2.subset.size() == 320);
    CHECK(d2.N == 1630);
    CHECK(d2.m == 3560);
    const OscillationReport c2 = oscillation_bound(d2, 2, zeros(), 2);
    CHECK(truncate_places(c2.value, 5) == doctest::Approx(3.00119).epsilon(1e-12));
    const OscillationReport c6 = oscillation_bound(d2, 6, zeros(), 2);
    CHECK(truncate_places(c6.value, 5) == doctest::Approx(2.59030).epsilon(1e-12));

    const nlohmann::json j = nlohmann::json::parse(to_json(c2));
    CHECK(j["k"] == 2);
    CHECK(j["N"] == 1630);
    CHECK(j["subset"].size() == 320);
    CHECK(j["C_k_truncated"].get<double>() == doctest::Approx(3.00119).epsilon(1e-12));
    CHECK(nlohmann::json::parse(to_json(oscillation_bound(d2, kLimitK, zeros(), 2)))["k"] == "inf");

    CHECK_THROWS_AS(load_independence("/nonexistent.json"), IoError);
    const std::string bad = "/tmp/kfree_bad_independence.json";
    std::ofstream(bad) << "{\"subset\": [1, 2]}";
    CHECK_THROWS_AS(load_independence(bad), IoError);
}

TEST_CASE("selection by weighted residue reproduces the bundled subsets")
{
    for (unsigned k : {2u, 3u, 5u}) {
        CAPTURE(k);
        const IndependenceData d = load_independence(default_independence_path(k));
        const auto res = residues_k(k, d.m);
        const double T = cutoff_below(zeros(), d.m, d.epsilon);
        CHECK(select_subset(zeros(), res, T, d.subset.size()) == d.subset);
    }
}
