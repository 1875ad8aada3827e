#pragma once

#include <boost/multiprecision/float128.hpp>
#include <boost/multiprecision/mpfr.hpp>
#include <gmpxx.h>

#include <string>

namespace kfree {

// Quad precision (113-bit significand) for the zeta pipeline.
using Quad = boost::multiprecision::float128;
// Variable precision MPFR float; precision follows the thread default.
using HiFloat = boost::multiprecision::mpfr_float;

// Sets the thread's default MPFR precision (decimal digits) for its lifetime.
class ScopedDigits {
public:
    explicit ScopedDigits(unsigned digits) : saved_(HiFloat::default_precision())
    {
        HiFloat::default_precision(digits);
    }
    ~ScopedDigits() { HiFloat::default_precision(saved_); }
    ScopedDigits(const ScopedDigits&) = delete;
    ScopedDigits& operator=(const ScopedDigits&) = delete;

private:
    unsigned saved_;
};

inline HiFloat to_hifloat(const mpz_class& z)
{
    HiFloat r;
    mpfr_set_z(r.backend().data(), z.get_mpz_t(), MPFR_RNDN);
    return r;
}

inline HiFloat to_hifloat(const mpq_class& q)
{
    HiFloat r;
    mpfr_set_q(r.backend().data(), q.get_mpq_t(), MPFR_RNDN);
    return r;
}

// Nearest integer (ties away from zero).
inline mpz_class round_to_mpz(const HiFloat& x)
{
    mpz_class z;
    HiFloat r = round(x);
    mpfr_get_z(z.get_mpz_t(), r.backend().data(), MPFR_RNDN);
    return z;
}

// Scientific notation with the given number of significant digits.
std::string format_sig(const HiFloat& x, unsigned sig_digits);

}  // namespace kfree
