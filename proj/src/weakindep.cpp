#include "kfree/weakindep.hpp"

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "kfree/oscillation.hpp"
#include "kfree/parallel.hpp"

namespace kfree {

namespace {

constexpr double kSizeReduction = 0.51;
constexpr unsigned kMaxReductionPasses = 1000;
constexpr unsigned kMaxLllBits = 1U << 16;

struct PrecisionStall {};

mpz_class dot(const IntVec& a, const IntVec& b)
{
    mpz_class s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) mpz_addmul(s.get_mpz_t(), a[i].get_mpz_t(), b[i].get_mpz_t());
    return s;
}

void check_shape(const Basis& basis)
{
    if (basis.empty()) throw UsageError("empty lattice basis");
    const std::size_t rows = basis.front().size();
    if (rows < basis.size()) throw UsageError("lattice basis has more generators than coordinates");
    for (const IntVec& v : basis) {
        if (v.size() != rows) throw UsageError("lattice basis vectors differ in length");
    }
}

// Leading principal minors D_1..D_d of the Gram matrix by Bareiss elimination.
std::vector<mpz_class> leading_gram_minors(const Basis& basis)
{
    check_shape(basis);
    const std::size_t d = basis.size();
    std::vector<std::vector<mpz_class>> a(d, std::vector<mpz_class>(d));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) a[i][j] = a[j][i] = dot(basis[i], basis[j]);
    }
    std::vector<mpz_class> minors(d);
    mpz_class prev = 1;
    for (std::size_t k = 0; k < d; ++k) {
        minors[k] = a[k][k];
        if (a[k][k] == 0) {
            // Gram matrices are positive semidefinite: later minors vanish too.
            for (std::size_t t = k; t < d; ++t) minors[t] = 0;
            break;
        }
        for (std::size_t i = k + 1; i < d; ++i) {
            for (std::size_t j = k + 1; j < d; ++j) {
                a[i][j] = a[i][j] * a[k][k] - a[i][k] * a[k][j];
                mpz_divexact(a[i][j].get_mpz_t(), a[i][j].get_mpz_t(), prev.get_mpz_t());
            }
        }
        prev = a[k][k];
    }
    return minors;
}

void lll_attempt(Basis& B, double delta, unsigned bits)
{
    const std::size_t d = B.size();
    ScopedDigits scope(static_cast<unsigned>(bits * 0.30103) + 2);
    std::vector<std::vector<mpz_class>> G(d, std::vector<mpz_class>(d));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) G[i][j] = G[j][i] = dot(B[i], B[j]);
    }
    std::vector<std::vector<HiFloat>> r(d, std::vector<HiFloat>(d)), mu(d, std::vector<HiFloat>(d));
    const HiFloat eta = kSizeReduction;
    const HiFloat dl = delta;
    r[0][0] = to_hifloat(G[0][0]);
    std::size_t k = 1;
    while (k < d) {
        // Size-reduce b_k against b_0..b_{k-1}, recomputing the hints each pass.
        for (unsigned pass = 0;; ++pass) {
            HiFloat worst = 0;
            for (std::size_t j = 0; j < k; ++j) {
                r[k][j] = to_hifloat(G[k][j]);
                for (std::size_t i = 0; i < j; ++i) r[k][j] -= mu[j][i] * r[k][i];
                mu[k][j] = r[k][j] / r[j][j];
                worst = std::max(worst, HiFloat(abs(mu[k][j])));
            }
            if (worst <= eta) break;
            if (pass >= kMaxReductionPasses) throw PrecisionStall{};
            for (std::size_t j = k; j-- > 0;) {
                const HiFloat x = round(mu[k][j]);
                if (x == 0) continue;
                const mpz_class X = round_to_mpz(x);
                for (std::size_t t = 0; t < B[k].size(); ++t) {
                    mpz_submul(B[k][t].get_mpz_t(), X.get_mpz_t(), B[j][t].get_mpz_t());
                }
                G[k][k] += X * X * G[j][j] - 2 * X * G[k][j];
                for (std::size_t i = 0; i < d; ++i) {
                    if (i == k) continue;
                    G[k][i] -= X * G[j][i];
                    G[i][k] = G[k][i];
                }
                for (std::size_t i = 0; i < j; ++i) mu[k][i] -= x * mu[j][i];
                mu[k][j] -= x;
            }
        }
        HiFloat rkk = to_hifloat(G[k][k]);
        for (std::size_t j = 0; j < k; ++j) rkk -= mu[k][j] * r[k][j];
        if (!(rkk > 0)) throw PrecisionStall{};
        const HiFloat m = mu[k][k - 1];
        if (dl * r[k - 1][k - 1] <= rkk + m * m * r[k - 1][k - 1]) {
            r[k][k] = rkk;
            ++k;
            continue;
        }
        std::swap(B[k], B[k - 1]);
        std::swap(G[k], G[k - 1]);
        for (std::size_t i = 0; i < d; ++i) std::swap(G[i][k], G[i][k - 1]);
        if (k == 1) {
            r[0][0] = to_hifloat(G[0][0]);
        } else {
            --k;
        }
    }
}

std::string job_key(const LatticeJob& job, const std::vector<ZetaZero>& subset, const ZetaZero* star)
{
    std::ostringstream key;
    key.precision(17);
    key << (job.kind == JobKind::M0 ? "M0" : "Mj") << ';' << job.j << ';' << job.n << ';' << job.b << ';'
        << job.delta;
    for (const ZetaZero& z : subset) key << ';' << z.text;
    if (star) key << ";*" << star->text;
    const std::string s = key.str();
    const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size()));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%08lx-%zu", static_cast<unsigned long>(crc), s.size());
    return buf;
}

std::filesystem::path job_path(const std::string& dir, u32 j)
{
    char name[32];
    std::snprintf(name, sizeof name, "job-%06u.json", j);
    return std::filesystem::path(dir) / name;
}

bool load_cached_job(const std::filesystem::path& path, const std::string& key, JobResult& out)
{
    std::ifstream in(path);
    if (!in) return false;
    try {
        nlohmann::json j;
        in >> j;
        if (j.at("key").get<std::string>() != key) return false;
        out.j = j.at("j").get<u32>();
        out.gamma_star = j.at("gamma_star").get<u32>();
        out.min_norm_sq = mpq_class(j.at("min_norm_sq").get<std::string>());
        out.min_norm_sq.canonicalize();
        out.N = j.at("N").get<u64>();
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

void store_job(const std::filesystem::path& path, const std::string& key, const JobResult& r)
{
    nlohmann::json j;
    j["key"] = key;
    j["j"] = r.j;
    j["gamma_star"] = r.gamma_star;
    j["min_norm_sq"] = r.min_norm_sq.get_str();
    j["N"] = r.N;
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << j.dump(2) << '\n';
        if (!out) throw IoError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<ZetaZero> pick(const std::vector<ZetaZero>& zeros, const std::vector<u32>& indices)
{
    std::vector<ZetaZero> out;
    for (u32 i : indices) out.push_back(zeros.at(i - 1));
    return out;
}

// (n^2 + 4n) N^2 for M_0, 4n N^2 + 4 + (nN + 1)^2 for M_j: four times the
// squared length bound of a violation vector.
mpz_class violation_bound_x4(const mpz_class& N, unsigned n, JobKind kind)
{
    if (kind == JobKind::M0) return mpz_class(n * n + 4 * n) * N * N;
    const mpz_class nN1 = n * N + 1;
    return 4 * n * N * N + 4 + nN1 * nN1;
}

}  // namespace

mpz_class scaled_ordinate(const ZetaZero& zero, unsigned b)
{
    const double available = std::floor(zero.decimals * std::log2(10.0));
    if (available < static_cast<double>(b) + kOrdinateGuardBits) {
        throw UsageError("zero " + std::to_string(zero.n) + " has " + std::to_string(zero.decimals) +
                         " decimals; b = " + std::to_string(b) + " needs " +
                         std::to_string(static_cast<unsigned>(
                             std::ceil((b + kOrdinateGuardBits) / std::log2(10.0)))));
    }
    ScopedDigits scope(static_cast<unsigned>(zero.text.size()) + 20);
    HiFloat g(zero.text);
    mpfr_mul_2ui(g.backend().data(), g.backend().data(), b, MPFR_RNDN);
    return round_to_mpz(g);
}

LatticeJob build_m0(const std::vector<ZetaZero>& subset, unsigned b)
{
    const std::size_t n = subset.size();
    if (n == 0) throw UsageError("build_m0: empty subset");
    LatticeJob job;
    job.kind = JobKind::M0;
    job.n = static_cast<unsigned>(n);
    job.b = b;
    job.basis.assign(n, IntVec(n + 1, 0));
    for (std::size_t i = 0; i < n; ++i) {
        job.basis[i][i] = 1;
        job.basis[i][n] = scaled_ordinate(subset[i], b);
    }
    return job;
}

LatticeJob build_mj(const std::vector<ZetaZero>& subset, const ZetaZero& star, unsigned b, u32 j)
{
    const std::size_t n = subset.size();
    if (n == 0) throw UsageError("build_mj: empty subset");
    for (const ZetaZero& z : subset) {
        if (z.text == star.text) throw UsageError("build_mj: gamma* duplicates a subset ordinate");
    }
    LatticeJob job;
    job.kind = JobKind::Mj;
    job.j = j;
    job.gamma_star = star.n;
    job.n = static_cast<unsigned>(n);
    job.b = b;
    job.basis.assign(n + 1, IntVec(n + 2, 0));
    for (std::size_t i = 0; i < n; ++i) {
        job.basis[i][i] = 1;
        job.basis[i][n + 1] = scaled_ordinate(subset[i], b);
    }
    job.basis[n][n] = 1;
    job.basis[n][n + 1] = scaled_ordinate(star, b);
    return job;
}

Basis lll_reduce(Basis basis, double delta)
{
    if (!(delta > 0.25 && delta < 1.0)) throw UsageError("LLL delta must lie in (1/4, 1)");
    check_shape(basis);
    if (gram_determinant(basis) == 0) throw UsageError("lattice basis is rank deficient");
    if (basis.size() == 1) return basis;
    std::size_t entry_bits = 1;
    for (const IntVec& v : basis) {
        for (const mpz_class& x : v) entry_bits = std::max(entry_bits, mpz_sizeinbase(x.get_mpz_t(), 2));
    }
    unsigned bits = static_cast<unsigned>(2 * basis.size() + 120);
    for (;;) {
        try {
            lll_attempt(basis, delta, bits);
            return basis;
        } catch (const PrecisionStall&) {
            // The basis keeps every unimodular step taken so far.
            if (bits >= kMaxLllBits) throw EnvelopeError("LLL did not converge within the precision budget");
            bits = std::min<unsigned>(kMaxLllBits, std::max<unsigned>(2 * bits, static_cast<unsigned>(entry_bits)));
        }
    }
}

mpz_class gram_determinant(const Basis& basis) { return leading_gram_minors(basis).back(); }

std::vector<mpq_class> gram_schmidt_norms_sq(const Basis& basis)
{
    const std::vector<mpz_class> minors = leading_gram_minors(basis);
    if (minors.back() == 0) throw UsageError("lattice basis is rank deficient");
    std::vector<mpq_class> out(minors.size());
    mpz_class prev = 1;
    for (std::size_t i = 0; i < minors.size(); ++i) {
        out[i] = mpq_class(minors[i], prev);
        out[i].canonicalize();
        prev = minors[i];
    }
    return out;
}

mpq_class gs_min_norm_sq(const Basis& basis)
{
    const std::vector<mpq_class> norms = gram_schmidt_norms_sq(basis);
    return *std::min_element(norms.begin(), norms.end());
}

HiFloat gs_min_norm(const Basis& basis)
{
    const mpq_class q = gs_min_norm_sq(basis);
    HiFloat r;
    mpfr_set_q(r.backend().data(), q.get_mpq_t(), MPFR_RNDD);
    mpfr_sqrt(r.backend().data(), r.backend().data(), MPFR_RNDD);
    return r;
}

u64 derive_n(const mpq_class& min_norm_sq, unsigned n, JobKind kind)
{
    if (n == 0) throw UsageError("derive_n: n must be positive");
    if (min_norm_sq <= 0) return 0;
    // f(N) * q < 4 p with L^2 = p / q.
    const mpz_class p4 = 4 * min_norm_sq.get_num();
    const mpz_class& q = min_norm_sq.get_den();
    auto ok = [&](const mpz_class& N) { return violation_bound_x4(N, n, kind) * q < p4; };
    if (!ok(1)) return 0;
    mpz_class lo = 1, hi = 2;
    while (ok(hi)) {
        lo = hi;
        hi *= 2;
    }
    while (hi - lo > 1) {
        const mpz_class mid = (lo + hi) / 2;
        (ok(mid) ? lo : hi) = mid;
    }
    if (lo > mpz_class(std::to_string(std::numeric_limits<u64>::max()))) return std::numeric_limits<u64>::max();
    return std::stoull(lo.get_str());
}

JobResult run_job(const LatticeJob& job)
{
    JobResult r;
    r.j = job.j;
    r.gamma_star = job.gamma_star;
    const Basis reduced = lll_reduce(job.basis, job.delta);
    r.min_norm_sq = gs_min_norm_sq(reduced);
    r.N = derive_n(r.min_norm_sq, job.n, job.kind);
    return r;
}

Certificate certify(const std::vector<ZetaZero>& zeros, u32 m, const std::vector<u32>& subset,
                    const CertifyOptions& options)
{
    if (!(options.delta > 0.25 && options.delta < 1.0)) throw UsageError("certify: delta must lie in (1/4, 1)");
    if (m == 0 || m > zeros.size()) throw UsageError("certify: m must be between 1 and the zeros loaded");
    if (subset.empty()) throw UsageError("certify: empty subset");
    std::vector<u32> order = subset;
    std::sort(order.begin(), order.end());
    if (std::adjacent_find(order.begin(), order.end()) != order.end()) throw UsageError("certify: duplicate subset index");
    if (order.front() == 0 || order.back() > m) throw UsageError("certify: subset index outside 1..m");

    Certificate cert;
    cert.subset = order;
    cert.m = m;
    cert.n = static_cast<unsigned>(order.size());
    cert.b = options.b != 0 ? options.b : 30 * cert.n;
    cert.delta = options.delta;

    const std::vector<ZetaZero> chosen = pick(zeros, order);
    std::vector<u32> stars;
    for (u32 i = 1, s = 0; i <= m; ++i) {
        if (s < order.size() && order[s] == i) {
            ++s;
        } else {
            stars.push_back(i);
        }
    }
    // Build all lattices up front so precision errors surface before any work.
    std::vector<LatticeJob> jobs;
    jobs.push_back(build_m0(chosen, cert.b));
    for (std::size_t t = 0; t < stars.size(); ++t) {
        jobs.push_back(build_mj(chosen, zeros[stars[t] - 1], cert.b, static_cast<u32>(t + 1)));
        jobs.back().gamma_star = stars[t];
    }
    for (LatticeJob& job : jobs) job.delta = cert.delta;

    if (!options.job_dir.empty()) std::filesystem::create_directories(options.job_dir);
    cert.jobs.resize(jobs.size());
    parallel_for(jobs.size(), options.threads, [&](std::size_t i) {
        const LatticeJob& job = jobs[i];
        const ZetaZero* star = job.kind == JobKind::Mj ? &zeros[job.gamma_star - 1] : nullptr;
        if (options.job_dir.empty()) {
            cert.jobs[i] = run_job(job);
            return;
        }
        const std::string key = job_key(job, chosen, star);
        const std::filesystem::path path = job_path(options.job_dir, job.j);
        if (load_cached_job(path, key, cert.jobs[i]) && cert.jobs[i].j == job.j) return;
        cert.jobs[i] = run_job(job);
        store_job(path, key, cert.jobs[i]);
    });

    const u64 n0 = cert.jobs[0].N;
    cert.N = n0 > 0 ? n0 - 1 : 0;
    u32 weakest = 0;
    for (std::size_t i = 1; i < cert.jobs.size(); ++i) {
        if (cert.jobs[i].N < cert.N) {
            cert.N = cert.jobs[i].N;
            weakest = cert.jobs[i].j;
        }
    }
    if (cert.N == 0) cert.failing_job = weakest;
    return cert;
}

bool verify_job(const Certificate& cert, std::size_t job_index, const std::vector<ZetaZero>& zeros)
{
    const JobResult& rec = cert.jobs.at(job_index);
    const std::vector<ZetaZero> chosen = pick(zeros, cert.subset);
    LatticeJob job = rec.j == 0 ? build_m0(chosen, cert.b) : build_mj(chosen, zeros.at(rec.gamma_star - 1), cert.b, rec.j);
    job.gamma_star = rec.gamma_star;
    job.delta = cert.delta;
    const JobResult again = run_job(job);
    return again.min_norm_sq == rec.min_norm_sq && again.N == rec.N;
}

std::string to_json(const Certificate& cert)
{
    nlohmann::json j;
    if (cert.k) j["k"] = *cert.k;
    j["n"] = cert.n;
    j["m"] = cert.m;
    j["b"] = cert.b;
    j["delta"] = cert.delta;
    j["epsilon"] = kCutoffEpsilon;
    j["N"] = cert.N;
    j["subset"] = cert.subset;
    j["failing_job"] = cert.failing_job ? nlohmann::json(*cert.failing_job) : nlohmann::json(nullptr);
    nlohmann::json jobs = nlohmann::json::array();
    for (const JobResult& r : cert.jobs) {
        nlohmann::json o;
        o["j"] = r.j;
        o["gamma_star"] = r.gamma_star;
        o["min_norm_sq"] = r.min_norm_sq.get_str();
        o["L"] = std::sqrt(r.min_norm_sq.get_d());
        o["N"] = r.N;
        jobs.push_back(o);
    }
    j["jobs"] = jobs;
    return j.dump(2);
}

Certificate certificate_from_json(const std::string& text)
{
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        Certificate c;
        if (j.contains("k")) c.k = j["k"].get<unsigned>();
        c.n = j.at("n").get<unsigned>();
        c.m = j.at("m").get<u32>();
        c.b = j.at("b").get<unsigned>();
        c.delta = j.at("delta").get<double>();
        c.N = j.at("N").get<u64>();
        c.subset = j.at("subset").get<std::vector<u32>>();
        if (j.contains("failing_job") && !j["failing_job"].is_null()) c.failing_job = j["failing_job"].get<u32>();
        for (const nlohmann::json& o : j.at("jobs")) {
            JobResult r;
            r.j = o.at("j").get<u32>();
            r.gamma_star = o.at("gamma_star").get<u32>();
            r.min_norm_sq = mpq_class(o.at("min_norm_sq").get<std::string>());
            r.min_norm_sq.canonicalize();
            r.N = o.at("N").get<u64>();
            c.jobs.push_back(r);
        }
        if (c.subset.size() != c.n) throw IoError("certificate: subset size differs from n");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("certificate: ") + e.what());
    }
}

}  // namespace kfree
