#include "kfree/zeta.hpp"

#include <boost/math/constants/constants.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <type_traits>

#include "kfree/parallel.hpp"

namespace kfree {

namespace {

// Euler-Maclaurin correction terms B_2 .. B_30.
constexpr unsigned kCorrections = 15;

template <class T>
T pi_t()
{
    return boost::math::constants::pi<T>();
}

// B_2j / (2j)! = (-1)^(j+1) 2 zeta(2j) / (2 pi)^(2j), at the current HiFloat precision.
HiFloat bernoulli_ratio_hi(unsigned j)
{
    HiFloat z;
    mpfr_zeta_ui(z.backend().data(), 2 * j, MPFR_RNDN);
    HiFloat r = 2 * z / pow(2 * pi_t<HiFloat>(), 2 * j);
    return j % 2 == 1 ? r : HiFloat(-r);
}

template <class T>
T bernoulli_ratio(unsigned j)
{
    if constexpr (std::is_same_v<T, Quad>) {
        constexpr unsigned kTable = 80;
        static const std::vector<Quad> table = [] {
            ScopedDigits scope(50);
            std::vector<Quad> t(kTable + 1);
            for (unsigned i = 1; i <= kTable; ++i) t[i] = Quad(bernoulli_ratio_hi(i).str(45, std::ios::scientific));
            return t;
        }();
        if (j > kTable) throw EnvelopeError("Bernoulli table exhausted");
        return table[j];
    } else {
        return bernoulli_ratio_hi(j);
    }
}

// Significant decimal digits of the working type (MPFR reports INT_MAX statically).
template <class T>
unsigned working_digits()
{
    if constexpr (std::is_same_v<T, Quad>) {
        return std::numeric_limits<Quad>::digits10;
    } else {
        return HiFloat::default_precision();
    }
}

template <class T>
struct EmPass {
    ZetaEval<T> eval;
    T truncation = 0;
    T derivative_truncation = 0;
};

template <class T>
EmPass<T> em_pass(const Cx<T>& s, unsigned N, bool with_derivative)
{
    using std::abs;
    using std::cos;
    using std::exp;
    using std::log;
    using std::sin;
    using std::sqrt;
    const T eps = std::numeric_limits<T>::epsilon();
    const T t_abs = abs(s.im);
    const double t_d = static_cast<double>(t_abs), sigma_d = static_cast<double>(s.re);

    // n^-s is completely multiplicative: evaluate at primes, multiply out
    // composites via their smallest prime factor.
    std::vector<u32> spf(N, 0);
    for (u32 p = 2; p < N; ++p) {
        if (spf[p] != 0) continue;
        for (u64 q = p; q < N; q += p) {
            if (spf[q] == 0) spf[q] = p;
        }
    }
    std::vector<Cx<T>> pw(N);
    std::vector<T> lg(N);

    // Main sum; phase errors grow like |t| log n per term, accumulated as a
    // root sum of squares.
    Cx<T> sum(T(1)), dsum;
    double round_sq = 0, dround_sq = 0;
    for (u32 n = 2; n < N; ++n) {
        const u32 p = spf[n];
        if (p == n) {
            lg[n] = log(T(n));
            const T mag = exp(-s.re * lg[n]);
            const T ph = s.im * lg[n];
            pw[n] = Cx<T>(T(mag * cos(ph)), T(-mag * sin(ph)));
        } else {
            pw[n] = pw[p] * pw[n / p];
            lg[n] = lg[p] + lg[n / p];
        }
        sum += pw[n];
        const double ln = std::log(static_cast<double>(n));
        const double e = std::exp(-sigma_d * ln) * (t_d * ln + 4);
        round_sq += e * e;
        if (with_derivative) {
            dsum -= pw[n] * lg[n];
            dround_sq += e * e * ln * ln;
        }
    }

    const T NN(N);
    const T lnN = log(NN);
    const Cx<T> a = cx_exp(Cx<T>(T(-s.re * lnN), T(-s.im * lnN)));  // N^-s
    const Cx<T> inv = Cx<T>(T(1)) / (s - Cx<T>(T(1)));
    Cx<T> v = sum + a * inv * NN + a / T(2);
    Cx<T> d;
    if (with_derivative) {
        d = dsum + a * NN * (-(inv * lnN) - inv * inv) - a * lnN / T(2);
    }

    // P = s (s+1) ... (s+2j-2), D = P', w = N^(1-2j).
    Cx<T> P = s, D(T(1));
    T w = 1 / NN;
    const T inv_n2 = 1 / (NN * NN);
    for (unsigned j = 1; j <= kCorrections; ++j) {
        const T c = bernoulli_ratio<T>(j);
        const Cx<T> aw = a * T(c * w);
        v += aw * P;
        if (with_derivative) d += aw * (D - P * lnN);
        const Cx<T> f1 = s + Cx<T>(T(2 * j - 1)), f2 = s + Cx<T>(T(2 * j));
        D = D * f1 * f2 + P * (f1 + f2);
        P = P * f1 * f2;
        w *= inv_n2;
    }

    // |R| <= |s (s+1) ... (s+2M+1) B_{2M+2} N^(-sigma-2M-1)| / ((2M+2)! (sigma+2M+1)).
    const T tail_sigma = s.re + 2 * kCorrections + 1;
    if (tail_sigma <= 0) throw UsageError("zeta_em: real part too negative");
    const Cx<T> last = s + Cx<T>(T(2 * kCorrections + 1));
    const T trunc = cx_abs(P) * cx_abs(last) / tail_sigma * abs(bernoulli_ratio<T>(kCorrections + 1)) * cx_abs(a) * w;

    EmPass<T> out;
    out.eval.value = v;
    out.eval.terms = N;
    out.truncation = trunc;
    out.eval.error = trunc + eps * (T(std::sqrt(round_sq)) + 16 * (cx_abs(sum) + 1));
    if (with_derivative) {
        T spread = lnN;
        for (unsigned i = 0; i <= 2 * kCorrections + 1; ++i) spread += 1 / cx_abs(s + Cx<T>(T(i)));
        out.derivative_truncation = trunc * spread;
        out.eval.derivative = d;
        out.eval.derivative_error = out.derivative_truncation + eps * (T(std::sqrt(dround_sq)) + 16 * (cx_abs(dsum) + 1));
    }
    return out;
}

}  // namespace

template <class T>
T default_zeta_target()
{
    using std::pow;
    if constexpr (std::is_same_v<T, Quad>) {
        return T("1e-30");
    } else {
        return pow(T(10), -static_cast<int>(working_digits<T>()) + 4);
    }
}

template <class T>
ZetaEval<T> zeta_em(const Cx<T>& s, const T& target, bool with_derivative)
{
    using std::abs;
    using std::ceil;
    if (s.re == 1 && s.im == 0) throw UsageError("zeta has a pole at s = 1");
    const T t_abs = abs(s.im);
    unsigned N = 20;
    if (t_abs > 20) N = static_cast<unsigned>(std::min<double>(static_cast<double>(ceil(t_abs)), kMaxZetaTerms));
    for (;;) {
        const EmPass<T> pass = em_pass(s, N, with_derivative);
        if (pass.truncation <= target && (!with_derivative || pass.derivative_truncation <= target)) {
            return pass.eval;
        }
        if (N >= kMaxZetaTerms / 2) throw EnvelopeError("zeta_em: term budget exhausted before reaching target");
        N *= 2;
    }
}

template <class T>
Cx<T> log_gamma(const Cx<T>& z_in)
{
    using std::abs;
    using std::log;
    if (z_in.re <= 0) throw UsageError("log_gamma requires Re(z) > 0");
    const T eps = std::numeric_limits<T>::epsilon();
    const T R = T(working_digits<T>()) / 2 + 5;
    Cx<T> z = z_in, acc;
    while (cx_abs(z) < R) {
        acc -= cx_log(z);
        z += Cx<T>(T(1));
    }
    const Cx<T> lz = cx_log(z);
    const T half = T(1) / 2;
    acc += (z - Cx<T>(half)) * lz - z + Cx<T>(T(log(2 * pi_t<T>()) / 2));
    // B_2j / (2j (2j-1) z^(2j-1)) = ratio_j (2j-2)! / z^(2j-1).
    const Cx<T> inv = Cx<T>(T(1)) / z, inv2 = inv * inv;
    Cx<T> zp = inv;
    T fact = 1;  // (2j-2)!
    const T scale = cx_abs(acc) + 1;
    for (unsigned j = 1; j <= 80; ++j) {
        if (j > 1) fact *= T((2 * j - 2) * (2 * j - 3));
        const Cx<T> term = zp * T(bernoulli_ratio<T>(j) * fact);
        acc += term;
        if (cx_abs(term) < eps * scale) return acc;
        zp *= inv2;
    }
    throw EnvelopeError("log_gamma: Stirling series did not converge");
}

template <class T>
Cx<T> chi(const Cx<T>& s)
{
    using std::log;
    if (s.re >= 1) throw UsageError("chi requires Re(s) < 1");
    const T pi = pi_t<T>();
    const Cx<T> one(T(1));
    const Cx<T> L = s * T(log(T(2))) + (s - one) * T(log(pi)) + log_gamma(one - s);
    return cx_exp(L) * cx_sin(s * T(pi / 2));
}

template <class T>
ZetaEval<T> zeta_complex(const Cx<T>& s, const T& target)
{
    if (s.re >= 0) return zeta_em(s, target);
    const Cx<T> c = chi(s);
    const T scale = cx_abs(c);
    ZetaEval<T> r = zeta_em(Cx<T>(T(1)) - s, scale > 1 ? T(target / scale) : target);
    r.value = c * r.value;
    r.error = r.error * scale + std::numeric_limits<T>::epsilon() * 64 * cx_abs(r.value);
    return r;
}

template <class T>
T zeta_deriv_neg_even(unsigned j)
{
    using std::pow;
    if (j == 0) throw UsageError("zeta_deriv_neg_even requires j >= 1");
    T fact = 1;
    for (unsigned i = 2; i <= 2 * j; ++i) fact *= i;
    const T z = zeta_complex(Cx<T>(T(2 * j + 1)), default_zeta_target<T>()).value.re;
    const T v = fact * z / (2 * pow(2 * pi_t<T>(), 2 * j));
    return j % 2 == 1 ? T(-v) : v;
}

template ZetaEval<Quad> zeta_em(const Cx<Quad>&, const Quad&, bool);
template ZetaEval<HiFloat> zeta_em(const Cx<HiFloat>&, const HiFloat&, bool);
template ZetaEval<Quad> zeta_complex(const Cx<Quad>&, const Quad&);
template ZetaEval<HiFloat> zeta_complex(const Cx<HiFloat>&, const HiFloat&);
template Cx<Quad> log_gamma(const Cx<Quad>&);
template Cx<HiFloat> log_gamma(const Cx<HiFloat>&);
template Cx<Quad> chi(const Cx<Quad>&);
template Cx<HiFloat> chi(const Cx<HiFloat>&);
template Quad zeta_deriv_neg_even(unsigned);
template HiFloat zeta_deriv_neg_even(unsigned);
template Quad default_zeta_target();
template HiFloat default_zeta_target();

// ---------------------------------------------------------------------------
// Zeros

std::vector<ZetaZero> load_zeros(std::istream& in, std::size_t max_count)
{
    std::vector<ZetaZero> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = line.find_last_not_of(" \t\r");
        const std::string text = line.substr(b, e - b + 1);
        const auto dot = text.find('.');
        const bool digits_ok = std::all_of(text.begin(), text.end(), [](char c) { return (c >= '0' && c <= '9') || c == '.'; });
        if (!digits_ok || dot == std::string::npos || dot == 0 || text.find('.', dot + 1) != std::string::npos) {
            throw IoError("zeros: malformed line " + std::to_string(line_no));
        }
        ZetaZero z;
        z.n = static_cast<u32>(out.size() + 1);
        z.text = text;
        z.decimals = static_cast<unsigned>(text.size() - dot - 1);
        if (z.decimals < kMinZeroDecimals) {
            throw IoError("zeros: line " + std::to_string(line_no) + " has fewer than " +
                          std::to_string(kMinZeroDecimals) + " decimals");
        }
        z.gamma = Quad(text);
        if (!out.empty() && !(out.back().gamma < z.gamma)) {
            throw IoError("zeros: ordinates not increasing at line " + std::to_string(line_no));
        }
        if (out.empty() && !(z.gamma > 14 && z.gamma < 15)) throw IoError("zeros: first ordinate is not gamma_1");
        out.push_back(std::move(z));
        if (max_count != 0 && out.size() == max_count) break;
    }
    if (out.empty()) throw IoError("zeros: no ordinates");
    return out;
}

std::vector<ZetaZero> load_zeros_file(const std::string& path, std::size_t max_count)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open zeros file " + path);
    return load_zeros(in, max_count);
}

std::string default_zeros_path(bool high_precision)
{
    const char* env = std::getenv(high_precision ? "KFREE_ZEROS_HP" : "KFREE_ZEROS");
    if (env != nullptr && *env != '\0') return env;
    return std::string(KFREE_DATA_DIR) + (high_precision ? "/zeros_hp.txt" : "/zeros.txt");
}

ZeroDerivative zeta_deriv_at_zero(const ZetaZero& zero)
{
    using std::pow;
    const Cx<Quad> rho(Quad(0.5), zero.gamma);
    const ZetaEval<Quad> ev = zeta_em(rho, default_zeta_target<Quad>(), true);
    ZeroDerivative out;
    out.n = zero.n;
    out.value = ev.derivative;
    out.error = ev.derivative_error;
    out.zeta_at_zero = cx_abs(ev.value);
    // Quad carries about 33 significant digits, a few of them in the integer part.
    const unsigned d = std::min(zero.decimals, 28U);
    const Quad gate = std::max(Quad(1), cx_abs(ev.derivative)) * pow(Quad(10), -static_cast<int>(d) + 2) + ev.error;
    if (out.zeta_at_zero > gate) {
        throw EnvelopeError("zero " + std::to_string(zero.n) + ": |zeta(rho)| too large for the ordinate precision");
    }
    return out;
}

std::vector<ZeroDerivative> derivatives_at_zeros(const std::vector<ZetaZero>& zeros, std::size_t count,
                                                 unsigned threads)
{
    if (count == 0) count = zeros.size();
    if (count > zeros.size()) throw UsageError("derivatives_at_zeros: not enough zeros loaded");
    std::vector<ZeroDerivative> out(count);
    parallel_for(count, threads, [&](std::size_t i) { out[i] = zeta_deriv_at_zero(zeros[i]); });
    return out;
}

ResidueTerm residue(const ZetaZero& zero, const ZeroDerivative& derivative, unsigned k)
{
    if (zero.n != derivative.n) throw UsageError("residue: zero and derivative indices differ");
    if (k == 1) throw UsageError("residue: k must be at least 2");
    const Cx<Quad> rho(Quad(0.5), zero.gamma);
    const Cx<Quad> at = k == kLimitK ? Cx<Quad>() : rho / Quad(k);
    const ZetaEval<Quad> num = zeta_em(at, default_zeta_target<Quad>());
    const Cx<Quad> den = rho * derivative.value;
    const Cx<Quad> v = num.value / den;
    const Quad mag = cx_abs(v);
    ResidueTerm r;
    r.n = zero.n;
    r.k = k;
    r.value = to_complex_double(v);
    r.abs = static_cast<double>(mag);
    const Quad rel = num.error / cx_abs(num.value) + derivative.error / cx_abs(derivative.value);
    r.precision_estimate = static_cast<double>(mag * rel) + 1.2e-16 * r.abs;  // double rounding
    return r;
}

std::vector<ResidueTerm> residues(const std::vector<ZetaZero>& zeros, const std::vector<ZeroDerivative>& derivs,
                                  unsigned k, unsigned threads)
{
    if (derivs.size() > zeros.size()) throw UsageError("residues: more derivatives than zeros");
    std::vector<ResidueTerm> out(derivs.size());
    parallel_for(derivs.size(), threads, [&](std::size_t i) { out[i] = residue(zeros[i], derivs[i], k); });
    return out;
}

}  // namespace kfree
