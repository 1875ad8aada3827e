#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include "kfree/common.hpp"
#include "kfree/hifloat.hpp"

namespace kfree {

// Minimal complex type over Quad or HiFloat (std::complex is unspecified for them).
template <class T>
struct Cx {
    T re = 0;
    T im = 0;

    Cx() = default;
    Cx(T r, T i = T(0)) : re(std::move(r)), im(std::move(i)) {}

    Cx& operator+=(const Cx& o)
    {
        re += o.re;
        im += o.im;
        return *this;
    }
    Cx& operator-=(const Cx& o)
    {
        re -= o.re;
        im -= o.im;
        return *this;
    }
    Cx& operator*=(const Cx& o)
    {
        T r = re * o.re - im * o.im;
        im = re * o.im + im * o.re;
        re = std::move(r);
        return *this;
    }
    Cx& operator*=(const T& x)
    {
        re *= x;
        im *= x;
        return *this;
    }

    friend Cx operator+(Cx a, const Cx& b) { return a += b; }
    friend Cx operator-(Cx a, const Cx& b) { return a -= b; }
    friend Cx operator*(Cx a, const Cx& b) { return a *= b; }
    friend Cx operator*(Cx a, const T& x) { return a *= x; }
    friend Cx operator*(const T& x, Cx a) { return a *= x; }
    friend Cx operator/(Cx a, const T& x)
    {
        a.re /= x;
        a.im /= x;
        return a;
    }
    friend Cx operator/(const Cx& a, const Cx& b)
    {
        const T d = b.re * b.re + b.im * b.im;
        return {T((a.re * b.re + a.im * b.im) / d), T((a.im * b.re - a.re * b.im) / d)};
    }
    friend Cx operator-(const Cx& a) { return {T(-a.re), T(-a.im)}; }
};

template <class T>
T cx_abs(const Cx<T>& z)
{
    using std::sqrt;
    return sqrt(z.re * z.re + z.im * z.im);
}

template <class T>
Cx<T> cx_exp(const Cx<T>& z)
{
    using std::cos;
    using std::exp;
    using std::sin;
    const T e = exp(z.re);
    return {T(e * cos(z.im)), T(e * sin(z.im))};
}

// Principal branch.
template <class T>
Cx<T> cx_log(const Cx<T>& z)
{
    using std::atan2;
    using std::log;
    return {T(log(cx_abs(z))), T(atan2(z.im, z.re))};
}

template <class T>
Cx<T> cx_sin(const Cx<T>& z)
{
    using std::cos;
    using std::cosh;
    using std::sin;
    using std::sinh;
    return {T(sin(z.re) * cosh(z.im)), T(cos(z.re) * sinh(z.im))};
}

template <class T>
std::complex<double> to_complex_double(const Cx<T>& z)
{
    return {static_cast<double>(z.re), static_cast<double>(z.im)};
}

template <class T>
struct ZetaEval {
    Cx<T> value;
    Cx<T> derivative;  // zero unless requested
    // Truncation bound plus a rounding estimate.
    T error = 0;
    T derivative_error = 0;
    unsigned terms = 0;  // Euler-Maclaurin cutoff N
};

// Largest Euler-Maclaurin cutoff tried before giving up.
inline constexpr unsigned kMaxZetaTerms = 1u << 24;

// Euler-Maclaurin summation with corrections through B_30, valid for every
// s != 1. The cutoff starts at max(20, |Im s|) and doubles until the
// remainder bound drops below target (absolute).
template <class T>
ZetaEval<T> zeta_em(const Cx<T>& s, const T& target, bool with_derivative = false);

// zeta(s); Re(s) < 0 goes through the functional equation.
template <class T>
ZetaEval<T> zeta_complex(const Cx<T>& s, const T& target);

// A logarithm of Gamma(z) for Re(z) > 0. The branch is not the principal
// one; only exp of the result is meaningful.
template <class T>
Cx<T> log_gamma(const Cx<T>& z);

// chi(s) = 2^s pi^(s-1) sin(pi s/2) Gamma(1-s), so zeta(s) = chi(s) zeta(1-s).
// Requires Re(s) < 1.
template <class T>
Cx<T> chi(const Cx<T>& s);

// zeta'(-2j) = (-1)^j (2j)! zeta(2j+1) / (2 (2 pi)^(2j)).
template <class T>
T zeta_deriv_neg_even(unsigned j);

// Default absolute target for each working type.
template <class T>
T default_zeta_target();

struct ZetaZero {
    u32 n = 0;
    Quad gamma = 0;
    std::string text;  // ordinate as written in the source
    unsigned decimals = 0;  // digits after the decimal point

    // Ordinate at the current HiFloat precision.
    HiFloat gamma_hi() const { return HiFloat(text); }
};

// One ordinate per line, ascending, at least kMinZeroDecimals after the point.
// max_count = 0 reads everything.
inline constexpr unsigned kMinZeroDecimals = 9;
std::vector<ZetaZero> load_zeros(std::istream& in, std::size_t max_count = 0);
std::vector<ZetaZero> load_zeros_file(const std::string& path, std::size_t max_count = 0);

// $KFREE_ZEROS (or $KFREE_ZEROS_HP) when set, otherwise the bundled tables.
std::string default_zeros_path(bool high_precision = false);

struct ZeroDerivative {
    u32 n = 0;
    Cx<Quad> value;  // zeta'(rho_n)
    Quad error = 0;
    Quad zeta_at_zero = 0;  // |zeta(rho_n)|, the quality-gate statistic
};

// zeta'(1/2 + i gamma). Throws EnvelopeError when |zeta(rho)| exceeds
// max(1, |zeta'|) 10^-(d-2) plus the evaluation error, with d the ordinate's
// decimals capped at the working precision.
ZeroDerivative zeta_deriv_at_zero(const ZetaZero& zero);

// First count zeros (all when count = 0), computed in parallel.
std::vector<ZeroDerivative> derivatives_at_zeros(const std::vector<ZetaZero>& zeros, std::size_t count = 0,
                                                 unsigned threads = 1);

// k = kLimitK selects the k -> infinity limit zeta(0)/(rho zeta'(rho)).
inline constexpr unsigned kLimitK = 0;

struct ResidueTerm {
    u32 n = 0;
    unsigned k = 2;
    std::complex<double> value;  // zeta(rho_n/k) / (rho_n zeta'(rho_n))
    double abs = 0.0;
    double precision_estimate = 0.0;  // absolute
};

ResidueTerm residue(const ZetaZero& zero, const ZeroDerivative& derivative, unsigned k);

// residue(n, k) for every zero in derivs (index i holds zero n = i + 1).
std::vector<ResidueTerm> residues(const std::vector<ZetaZero>& zeros, const std::vector<ZeroDerivative>& derivs,
                                  unsigned k, unsigned threads = 1);

}  // namespace kfree
