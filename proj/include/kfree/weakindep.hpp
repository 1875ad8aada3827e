#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kfree/common.hpp"
#include "kfree/hifloat.hpp"
#include "kfree/zeta.hpp"

namespace kfree {

using IntVec = std::vector<mpz_class>;
// Lattice basis stored as column vectors: basis[i] is the i-th generator.
using Basis = std::vector<IntVec>;

enum class JobKind { M0, Mj };

struct LatticeJob {
    u32 j = 0;  // 0 for M_0
    u32 gamma_star = 0;  // zero index of the extra ordinate (M_j only)
    JobKind kind = JobKind::M0;
    unsigned n = 0;
    unsigned b = 0;
    double delta = 0.99;
    Basis basis;
};

// Ordinates must carry at least b + 64 bits after the binary point.
inline constexpr unsigned kOrdinateGuardBits = 64;

// Nearest integer to 2^b gamma (ties away from zero).
mpz_class scaled_ordinate(const ZetaZero& zero, unsigned b);

// I_n with the extra row round(2^b gamma_{i_1}) ... round(2^b gamma_{i_n}).
LatticeJob build_m0(const std::vector<ZetaZero>& subset, unsigned b);

// I_{n+1} with the extra row ending in round(2^b gamma*).
LatticeJob build_mj(const std::vector<ZetaZero>& subset, const ZetaZero& star, unsigned b, u32 j);

// delta-LLL reduction (size-reduction parameter 0.51) by unimodular integer
// column operations. Gram-Schmidt data are floating hints recomputed from the
// exact Gram matrix; precision doubles when the hints stall.
Basis lll_reduce(Basis basis, double delta);

// Determinant of the Gram matrix (exact).
mpz_class gram_determinant(const Basis& basis);

// Squared Gram-Schmidt norms, exact: D_i / D_{i-1} from leading Gram minors.
std::vector<mpq_class> gram_schmidt_norms_sq(const Basis& basis);

// min_i |b_i*|^2, a lower bound on |v|^2 for every nonzero lattice vector.
mpq_class gs_min_norm_sq(const Basis& basis);

// sqrt of gs_min_norm_sq rounded down, at the current HiFloat precision.
HiFloat gs_min_norm(const Basis& basis);

// Largest N (0 if none) with
//   M_0: (n^2/4 + n) N^2 < L^2
//   M_j: n N^2 + 1 + (n N + 1)^2 / 4 < L^2
// The M_j form bounds the violation vector (c_1..c_n, -1, sum c_i r_i - r*)
// with |c_i| <= N and per-entry rounding at most 1/2. Saturates at 2^64 - 1.
u64 derive_n(const mpq_class& min_norm_sq, unsigned n, JobKind kind);

struct JobResult {
    u32 j = 0;
    u32 gamma_star = 0;
    mpq_class min_norm_sq;
    u64 N = 0;
};

JobResult run_job(const LatticeJob& job);

struct CertifyOptions {
    unsigned b = 0;  // 0 selects 30 n
    double delta = 0.99;
    unsigned threads = 1;
    // When set, each finished job is stored here and reused on a rerun with
    // identical inputs.
    std::string job_dir;
};

struct Certificate {
    std::vector<u32> subset;  // zero indices, ascending
    u32 m = 0;  // zeros below T
    unsigned n = 0;
    unsigned b = 0;
    double delta = 0.99;
    std::vector<JobResult> jobs;  // ordered by j; j = 0 is M_0
    // min(N_0 - 1, min_{j>0} N_j); the M_0 level is lowered by one so that
    // condition (b) with gamma* inside the subset is covered too.
    u64 N = 0;
    std::optional<u32> failing_job;
    // Residue order the subset was chosen for, when known.
    std::optional<unsigned> k;
};

// Certifies the subset (zero indices into zeros) inside the first m zeros.
Certificate certify(const std::vector<ZetaZero>& zeros, u32 m, const std::vector<u32>& subset,
                    const CertifyOptions& options = {});

// Rebuilds and reruns one job; true when it reproduces the recorded bound and N.
bool verify_job(const Certificate& cert, std::size_t job_index, const std::vector<ZetaZero>& zeros);

std::string to_json(const Certificate& cert);
Certificate certificate_from_json(const std::string& text);

}  // namespace kfree
