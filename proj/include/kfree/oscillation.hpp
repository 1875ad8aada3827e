#pragma once

#include <string>
#include <vector>

#include "kfree/common.hpp"
#include "kfree/zeta.hpp"

namespace kfree {

enum class KernelKind { JurkatPeyerimhoff, Fejer, Flat };

// Flat (kappa = 1) is not admissible; it exists only for explicit-sum plots.
struct KernelSpec {
    double T = 1.0;
    KernelKind kind = KernelKind::JurkatPeyerimhoff;

    bool admissible() const { return kind != KernelKind::Flat; }
};

KernelKind parse_kernel(const std::string& name);  // "jp", "fejer", "flat"
const char* kernel_name(KernelKind kind);

// Jurkat-Peyerimhoff: (1 - |t|/T) cos(pi t/T) + sin(pi |t|/T)/pi; Fejer: 1 - |t|/T;
// both vanish for |t| > T.
double kernel_eval(double t, const KernelSpec& spec);

inline constexpr double kCutoffEpsilon = 1e-10;

// T = gamma_{m+1} - epsilon, so exactly m zeros lie below it.
double cutoff_below(const std::vector<ZetaZero>& zeros, u32 m, double epsilon = kCutoffEpsilon);

// 2 (1 - gamma_1/gamma_2) |zeta(rho_1/k) / (rho_1 zeta'(rho_1))|.
double stark_bound(unsigned k, const std::vector<ZetaZero>& zeros);

// Positive values truncated (toward zero) to the given number of decimals.
double truncate_places(double v, unsigned places);

struct ExplicitSumSpec {
    unsigned k = 2;
    u32 m = 0;  // zeros used
    double T = 0.0;  // kernel cutoff; gamma_m < T
    KernelKind kernel = KernelKind::Flat;
    unsigned pole_terms = 0;  // trivial-zero terms subtracted
};

// 2 Re sum_{n<=m} res_n kappa_{T/k}(gamma_n/k) e^(i gamma_n u/k) minus pole_sum(u).
std::vector<double> explicit_sum(const std::vector<double>& u_grid, const ExplicitSumSpec& spec,
                                 const std::vector<ZetaZero>& zeros, const std::vector<ResidueTerm>& residues);

// sum_{j<=J} zeta(-2j/k) / (2j zeta'(-2j)) e^(-u (4j+1)/(2k)).
double pole_sum(double u, unsigned k, unsigned J);

// log x at x = 10^(i/per_decade) for x_lo <= x <= x_hi.
std::vector<double> log_grid(double x_lo, double x_hi, unsigned per_decade);

// (2N/(N+1)) sum_j kappa_T(gamma_{i_j}) |res_{i_j}|, summed in ascending
// ordinate order with compensation. residues[n-1] belongs to zero n and all
// carry the same k (kLimitK gives the k -> infinity limit).
double independence_bound(const std::vector<u32>& subset, u64 N, double T, unsigned k,
                          const std::vector<ZetaZero>& zeros, const std::vector<ResidueTerm>& residues,
                          KernelKind kernel = KernelKind::JurkatPeyerimhoff);

// The n zeros below T with the largest kappa_T(gamma) |res|, ties to the
// smaller index; returned in ascending index order.
std::vector<u32> select_subset(const std::vector<ZetaZero>& zeros, const std::vector<ResidueTerm>& residues, double T,
                               std::size_t n, KernelKind kernel = KernelKind::JurkatPeyerimhoff);

// Subset, level N and cutoff of an established weak-independence result.
struct IndependenceData {
    unsigned k = 2;  // the k it was tuned for
    std::vector<u32> subset;
    u64 N = 0;
    u32 m = 0;  // T = gamma_{m+1} - epsilon
    double epsilon = kCutoffEpsilon;
    unsigned b = 0;
    double delta = 0.99;
};

// Reads the JSON written by the certifier (or a bundled result table).
IndependenceData load_independence(const std::string& path);

// Bundled result for k = 2, 3 or 5.
std::string default_independence_path(unsigned k);

struct OscillationReport {
    unsigned k = 2;  // target k (kLimitK for the limit)
    unsigned source_k = 2;
    std::size_t n = 0;
    u32 m = 0;
    unsigned b = 0;
    u64 N = 0;
    double T = 0.0;
    double value = 0.0;
    std::vector<u32> subset;
};

// Evaluates the bound for target k over the data's subset. Residues are
// computed for the subset only, with `threads` workers.
OscillationReport oscillation_bound(const IndependenceData& data, unsigned k, const std::vector<ZetaZero>& zeros,
                                    unsigned threads = 1);

std::string to_json(const OscillationReport& report);

}  // namespace kfree
