#include "kfree/oscillation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "kfree/parallel.hpp"

namespace kfree {

namespace {

// Neumaier's compensated sum.
class CompensatedSum {
public:
    void add(double x)
    {
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double gamma_of(const std::vector<ZetaZero>& zeros, u32 n) { return static_cast<double>(zeros[n - 1].gamma); }

const ResidueTerm& residue_for(const std::vector<ResidueTerm>& residues, u32 n, unsigned k)
{
    if (n == 0 || n > residues.size() || residues[n - 1].n != n) {
        throw UsageError("no residue for zero " + std::to_string(n));
    }
    const ResidueTerm& r = residues[n - 1];
    if (r.k != k) throw UsageError("residue for zero " + std::to_string(n) + " has the wrong k");
    return r;
}

}  // namespace

KernelKind parse_kernel(const std::string& name)
{
    if (name == "jp" || name == "jurkat-peyerimhoff") return KernelKind::JurkatPeyerimhoff;
    if (name == "fejer") return KernelKind::Fejer;
    if (name == "flat") return KernelKind::Flat;
    throw UsageError("unknown kernel '" + name + "' (jp, fejer, flat)");
}

const char* kernel_name(KernelKind kind)
{
    switch (kind) {
    case KernelKind::JurkatPeyerimhoff: return "jp";
    case KernelKind::Fejer: return "fejer";
    case KernelKind::Flat: return "flat";
    }
    return "?";
}

double kernel_eval(double t, const KernelSpec& spec)
{
    if (spec.kind == KernelKind::Flat) return 1.0;
    const double r = std::abs(t) / spec.T;
    if (r > 1.0) return 0.0;
    if (spec.kind == KernelKind::Fejer) return 1.0 - r;
    constexpr double pi = std::numbers::pi;
    return (1.0 - r) * std::cos(pi * r) + std::sin(pi * r) / pi;
}

double cutoff_below(const std::vector<ZetaZero>& zeros, u32 m, double epsilon)
{
    if (m >= zeros.size()) throw UsageError("cutoff needs zero " + std::to_string(m + 1) + " loaded");
    const double T = gamma_of(zeros, m + 1) - epsilon;
    if (m > 0 && !(gamma_of(zeros, m) < T)) throw UsageError("epsilon too large for the zero spacing");
    return T;
}

double stark_bound(unsigned k, const std::vector<ZetaZero>& zeros)
{
    if (zeros.size() < 2) throw UsageError("stark_bound needs two zeros");
    const ResidueTerm r = residue(zeros[0], zeta_deriv_at_zero(zeros[0]), k);
    const Quad ratio = zeros[0].gamma / zeros[1].gamma;
    return 2.0 * static_cast<double>(1 - ratio) * r.abs;
}

double truncate_places(double v, unsigned places)
{
    const double scale = std::pow(10.0, places);
    return std::trunc(v * scale) / scale;
}

double pole_sum(double u, unsigned k, unsigned J)
{
    double total = 0.0;
    for (unsigned j = 1; j <= J; ++j) {
        const Cx<Quad> s(Quad(-2.0 * j) / k);
        const Quad num = zeta_complex(s, default_zeta_target<Quad>()).value.re;
        const Quad coeff = num / (2 * j * zeta_deriv_neg_even<Quad>(j));
        total += static_cast<double>(coeff) * std::exp(-u * (4.0 * j + 1.0) / (2.0 * k));
    }
    return total;
}

std::vector<double> explicit_sum(const std::vector<double>& u_grid, const ExplicitSumSpec& spec,
                                 const std::vector<ZetaZero>& zeros, const std::vector<ResidueTerm>& residues)
{
    if (spec.k < 2) throw UsageError("explicit_sum: k must be at least 2");
    if (spec.m > zeros.size() || spec.m > residues.size()) throw UsageError("explicit_sum: m exceeds loaded zeros");
    if (spec.m > 0 && spec.kernel != KernelKind::Flat && !(gamma_of(zeros, spec.m) < spec.T)) {
        throw UsageError("explicit_sum: gamma_m must lie below T");
    }
    // kappa_{T/k}(gamma/k) = kappa_T(gamma).
    const KernelSpec kernel{spec.T, spec.kernel};
    std::vector<std::complex<double>> weight(spec.m);
    std::vector<double> freq(spec.m);
    for (u32 n = 1; n <= spec.m; ++n) {
        const double g = gamma_of(zeros, n);
        weight[n - 1] = residue_for(residues, n, spec.k).value * kernel_eval(g, kernel);
        freq[n - 1] = g / spec.k;
    }
    std::vector<double> out(u_grid.size());
    for (std::size_t i = 0; i < u_grid.size(); ++i) {
        const double u = u_grid[i];
        CompensatedSum acc;
        for (u32 n = 0; n < spec.m; ++n) {
            const double ph = freq[n] * u;
            acc.add(weight[n].real() * std::cos(ph) - weight[n].imag() * std::sin(ph));
        }
        out[i] = 2.0 * acc.value();
        if (spec.pole_terms > 0) out[i] -= pole_sum(u, spec.k, spec.pole_terms);
    }
    return out;
}

std::vector<double> log_grid(double x_lo, double x_hi, unsigned per_decade)
{
    if (!(x_lo > 0) || !(x_hi >= x_lo) || per_decade == 0) throw UsageError("log_grid: bad range");
    const double a = std::log10(x_lo), b = std::log10(x_hi);
    const long first = static_cast<long>(std::ceil(a * per_decade - 1e-9));
    const long last = static_cast<long>(std::floor(b * per_decade + 1e-9));
    std::vector<double> u;
    for (long i = first; i <= last; ++i) u.push_back(std::log(10.0) * static_cast<double>(i) / per_decade);
    return u;
}

double independence_bound(const std::vector<u32>& subset, u64 N, double T, unsigned k,
                          const std::vector<ZetaZero>& zeros, const std::vector<ResidueTerm>& residues,
                          KernelKind kernel)
{
    if (N == 0) throw UsageError("independence_bound: N must be at least 1");
    if (kernel == KernelKind::Flat) throw UsageError("independence_bound: the flat kernel is not admissible");
    std::vector<u32> order = subset;
    std::sort(order.begin(), order.end());
    if (std::adjacent_find(order.begin(), order.end()) != order.end()) throw UsageError("subset has duplicates");
    const KernelSpec spec{T, kernel};
    CompensatedSum acc;
    for (u32 n : order) {
        if (n == 0 || n > zeros.size()) throw UsageError("subset index " + std::to_string(n) + " beyond loaded zeros");
        const double g = gamma_of(zeros, n);
        if (!(g < T)) throw UsageError("subset zero " + std::to_string(n) + " lies above T");
        acc.add(kernel_eval(g, spec) * residue_for(residues, n, k).abs);
    }
    const double n = static_cast<double>(N);
    return 2.0 * n / (n + 1.0) * acc.value();
}

std::vector<u32> select_subset(const std::vector<ZetaZero>& zeros, const std::vector<ResidueTerm>& residues, double T,
                               std::size_t n, KernelKind kernel)
{
    if (kernel == KernelKind::Flat) throw UsageError("select_subset: the flat kernel is not admissible");
    const KernelSpec spec{T, kernel};
    std::vector<std::pair<double, u32>> score;
    for (u32 i = 1; i <= zeros.size() && gamma_of(zeros, i) < T; ++i) {
        if (i > residues.size()) throw UsageError("select_subset: residues missing below T");
        score.emplace_back(kernel_eval(gamma_of(zeros, i), spec) * residues[i - 1].abs, i);
    }
    if (n > score.size()) throw UsageError("select_subset: fewer than n zeros below T");
    std::stable_sort(score.begin(), score.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<u32> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(score[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

IndependenceData load_independence(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
        IndependenceData d;
        d.k = j.value("k", 2U);
        d.subset = j.at("subset").get<std::vector<u32>>();
        d.N = j.at("N").get<u64>();
        d.m = j.at("m").get<u32>();
        d.epsilon = j.value("epsilon", kCutoffEpsilon);
        d.b = j.value("b", 0U);
        d.delta = j.value("delta", 0.99);
        if (d.subset.empty()) throw UsageError(path + ": empty subset");
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
}

std::string default_independence_path(unsigned k)
{
    return std::string(KFREE_DATA_DIR) + "/independence-k" + std::to_string(k) + ".json";
}

OscillationReport oscillation_bound(const IndependenceData& data, unsigned k, const std::vector<ZetaZero>& zeros,
                                    unsigned threads)
{
    const double T = cutoff_below(zeros, data.m, data.epsilon);
    const u32 top = *std::max_element(data.subset.begin(), data.subset.end());
    if (top > data.m) throw UsageError("subset index beyond m");
    std::vector<ResidueTerm> res(top);
    parallel_for(data.subset.size(), threads, [&](std::size_t i) {
        const u32 n = data.subset[i];
        res[n - 1] = residue(zeros[n - 1], zeta_deriv_at_zero(zeros[n - 1]), k);
    });
    OscillationReport r;
    r.k = k;
    r.source_k = data.k;
    r.n = data.subset.size();
    r.m = data.m;
    r.b = data.b;
    r.N = data.N;
    r.T = T;
    r.subset = data.subset;
    r.value = independence_bound(data.subset, data.N, T, k, zeros, res);
    return r;
}

std::string to_json(const OscillationReport& report)
{
    nlohmann::json j;
    j["k"] = report.k == kLimitK ? nlohmann::json("inf") : nlohmann::json(report.k);
    j["source_k"] = report.source_k;
    j["n"] = report.n;
    j["m"] = report.m;
    j["b"] = report.b;
    j["N"] = report.N;
    j["T"] = report.T;
    j["C_k"] = report.value;
    j["C_k_truncated"] = truncate_places(report.value, 5);
    j["subset"] = report.subset;
    return j.dump(2);
}

}  // namespace kfree
