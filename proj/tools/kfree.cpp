#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "kfree/counting.hpp"
#include "kfree/gap_density.hpp"
#include "kfree/oscillation.hpp"
#include "kfree/sieve_scan.hpp"
#include "kfree/weakindep.hpp"
#include "kfree/zeta.hpp"

using namespace kfree;

namespace {

// Nonnegative integer written as digits or as <digits>[.<digits>]e<exp>
// with an exact integer value.
u64 parse_count(const std::string& text, const std::string& flag)
{
    const auto bad = [&] { return UsageError(flag + ": expected a nonnegative integer, got '" + text + "'"); };
    const std::size_t e = text.find_first_of("eE");
    std::string mant = text.substr(0, e);
    int exp = 0;
    if (e != std::string::npos) {
        const std::string tail = text.substr(e + 1);
        if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos || tail.size() > 2) throw bad();
        exp = std::stoi(tail);
    }
    const std::size_t dot = mant.find('.');
    if (dot != std::string::npos) {
        const std::string frac = mant.substr(dot + 1);
        mant = mant.substr(0, dot) + frac;
        exp -= static_cast<int>(frac.size());
    }
    if (mant.empty() || mant.find_first_not_of("0123456789") != std::string::npos) throw bad();
    while (exp < 0) {
        if (mant.back() != '0') throw bad();
        mant.pop_back();
        ++exp;
    }
    mant.append(static_cast<std::size_t>(exp), '0');
    const mpz_class v(mant);
    if (v > mpz_class(std::to_string(~u64{0}))) throw bad();
    return std::stoull(mant);
}

double parse_real(const std::string& text, const std::string& flag)
{
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != text.size() || !std::isfinite(v)) throw UsageError(flag + ": expected a number, got '" + text + "'");
    return v;
}

class Output {
public:
    explicit Output(const std::string& path)
    {
        if (path.empty() || path == "-") return;
        file_.open(path);
        if (!file_) throw IoError("cannot write " + path);
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
    void finish()
    {
        stream().flush();
        if (!stream()) throw IoError("write failed");
    }

private:
    std::ofstream file_;
};

std::string checkpoint_dir()
{
    const char* dir = std::getenv("KFREE_CHECKPOINT_DIR");
    return dir ? dir : "";
}

void require_k(unsigned k)
{
    if (k < 2) throw UsageError("--k must be at least 2");
}

std::vector<ZetaZero> zeros_from(const std::string& path, std::size_t count, bool high_precision)
{
    return load_zeros_file(path.empty() ? default_zeros_path(high_precision) : path, count);
}

// ---------------------------------------------------------------------------

struct CountArgs {
    unsigned k = 2;
    std::string x;
    std::string method = "auto";
    u64 n = 0;
    std::string format = "csv";
    unsigned sig = 12;
    std::string out;
};

void run_count(const CountArgs& a)
{
    require_k(a.k);
    const u64 x = parse_count(a.x, "--x");
    if (x == 0) throw UsageError("--x must be at least 1");
    std::string method = a.method;
    if (method == "auto") method = a.k == 2 ? "mertens" : "direct";
    u64 q = 0;
    if (method == "mertens") {
        if (a.k != 2) throw UsageError("--method mertens applies to k = 2 only");
        q = q2_mertens(x, a.n != 0 ? a.n : default_n(x));
    } else if (method == "direct") {
        q = qk_direct(x, a.k);
    } else {
        throw UsageError("--method must be direct, mertens or auto");
    }
    // (Q - x / zeta(k)) / x^(1/(2k)) at 60 digits.
    ScopedDigits scope(60);
    HiFloat inv_zeta;
    mpfr_zeta_ui(inv_zeta.backend().data(), a.k, MPFR_RNDN);
    inv_zeta = 1 / inv_zeta;
    const HiFloat hx = to_hifloat(mpz_class(std::to_string(x)));
    const HiFloat scaled = (to_hifloat(mpz_class(std::to_string(q))) - hx * inv_zeta) / pow(hx, HiFloat(1) / (2 * a.k));

    Output out(a.out);
    if (a.format == "json") {
        nlohmann::json j;
        j["k"] = a.k;
        j["x"] = x;
        j["Q"] = q;
        j["scaled"] = format_sig(scaled, a.sig);
        j["method"] = method;
        out.stream() << j.dump(2) << '\n';
    } else if (a.format == "csv") {
        out.stream() << "k,x,Q,scaled\n" << a.k << ',' << x << ',' << q << ',' << format_sig(scaled, a.sig) << '\n';
    } else {
        throw UsageError("--format must be csv or json");
    }
    out.finish();
}

// ---------------------------------------------------------------------------

struct ScanArgs {
    unsigned k = 2;
    std::string lo = "0";
    std::string hi;
    std::string segment = "1048576";
    unsigned threads = 1;
    std::string checkpoint;
    std::string every = "1e9";
    u64 stop_after = 0;
    bool no_fast_path = false;
    unsigned sig = 12;
    std::string out;
};

void run_scan(const ScanArgs& a)
{
    require_k(a.k);
    const u64 lo = parse_count(a.lo, "--lo");
    const u64 hi = parse_count(a.hi, "--hi");
    const u64 every = parse_count(a.every, "--checkpoint-every");
    ScanOptions opt;
    opt.segment_size = parse_count(a.segment, "--segment");
    opt.fast_path = !a.no_fast_path;
    if (hi <= lo) throw UsageError("--hi must exceed --lo");
    if (every == 0) throw UsageError("--checkpoint-every must be positive");
    if (opt.segment_size < 64 || opt.segment_size % 64 != 0) throw UsageError("--segment must be a positive multiple of 64");
    if (a.threads == 0) throw UsageError("--threads must be positive");

    std::string ckpt = a.checkpoint;
    if (ckpt.empty() && !checkpoint_dir().empty()) {
        ckpt = (std::filesystem::path(checkpoint_dir()) /
                ("scan-k" + std::to_string(a.k) + "-" + std::to_string(lo) + "-" + std::to_string(hi) + ".ckpt"))
                   .string();
    }

    const u64 root = iroot(hi, a.k) + 1;
    const PrimeTable primes(root);
    const MobiusTable mobius = sieve_mobius(root);
    ScannerState state;
    if (!ckpt.empty() && std::filesystem::exists(ckpt)) {
        state = read_checkpoint_file(ckpt);
        if (state.k != a.k || state.start != lo || state.position > hi) {
            throw UsageError("checkpoint " + ckpt + " does not match --k/--lo/--hi");
        }
    } else {
        state = seed_state(a.k, lo, mobius);
    }

    u64 chunks = 0;
    while (state.position < hi) {
        const u64 chunk_hi = hi - state.position > every ? state.position + every : hi;
        state = scan_partitioned(std::move(state), chunk_hi, primes, mobius, a.threads, a.threads, opt);
        if (!ckpt.empty()) write_checkpoint_file(ckpt, state);
        if (a.stop_after != 0 && ++chunks >= a.stop_after && state.position < hi) {
            std::cerr << "stopped at " << state.position << "\n";
            return;
        }
    }
    Output out(a.out);
    write_scan_csv(out.stream(), state, a.sig);
    out.finish();
}

// ---------------------------------------------------------------------------

struct DensityArgs {
    unsigned k = 2;
    unsigned gmax = 0;
    unsigned precision = kDefaultDensityDigits;
    unsigned threads = 1;
    unsigned sig = 12;
    std::string out;
};

void run_density(const DensityArgs& a)
{
    require_k(a.k);
    if (a.gmax == 0) throw UsageError("--gmax must be at least 1");
    if (a.precision < 20) throw UsageError("--precision must be at least 20 digits");
    DensityOptions opt;
    opt.digits = a.precision;
    opt.threads = a.threads;
    Output out(a.out);
    out.stream() << "k,g,density,truncation_error\n";
    for (unsigned g = 1; g <= a.gmax; ++g) {
        const DensityResult r = d_k(g, a.k, opt);
        out.stream() << a.k << ',' << g << ',' << format_sig(r.value, a.sig) << ','
                     << format_sig(r.truncation_error_bound, 3) << '\n';
    }
    out.finish();
}

// ---------------------------------------------------------------------------

struct BoundArgs {
    std::string kind;
    std::string k = "2";
    std::string cert;
    std::string zeros;
    unsigned threads = 1;
    std::string out;
};

unsigned parse_k_or_inf(const std::string& text)
{
    if (text == "inf" || text == "infinity") return kLimitK;
    const u64 k = parse_count(text, "--k");
    if (k < 2 || k > 100000) throw UsageError("--k must be an integer in [2, 100000] or 'inf'");
    return static_cast<unsigned>(k);
}

void run_bound(const BoundArgs& a)
{
    const unsigned k = parse_k_or_inf(a.k);
    Output out(a.out);
    if (a.kind == "stark") {
        if (k == kLimitK) throw UsageError("stark bound needs a finite --k");
        const double b = stark_bound(k, zeros_from(a.zeros, 2, false));
        nlohmann::json j;
        j["k"] = k;
        j["B_k"] = b;
        j["B_k_truncated"] = truncate_places(b, 4);
        out.stream() << j.dump(2) << '\n';
    } else if (a.kind == "independence" || a.kind == "cross") {
        std::string path = a.cert;
        if (path.empty()) path = default_independence_path(a.kind == "independence" && k != kLimitK ? k : 2);
        const IndependenceData data = load_independence(path);
        if (a.kind == "independence" && k != data.k) {
            throw UsageError("certificate was built for k = " + std::to_string(data.k) + "; use 'bound cross' for other k");
        }
        const std::vector<ZetaZero> zeros = zeros_from(a.zeros, data.m + 1, false);
        out.stream() << to_json(oscillation_bound(data, k, zeros, a.threads)) << '\n';
    } else {
        throw UsageError("bound kind must be stark, independence or cross");
    }
    out.finish();
}

// ---------------------------------------------------------------------------

struct ExplicitArgs {
    unsigned k = 2;
    u32 m = 2000;
    std::string kernel = "flat";
    std::string lo = "10";
    std::string hi = "1e28";
    unsigned per_decade = 200;
    unsigned poles = 0;
    std::string zeros;
    unsigned threads = 1;
    unsigned sig = 12;
    std::string out;
};

void run_explicit_sum(const ExplicitArgs& a)
{
    require_k(a.k);
    const double lo = parse_real(a.lo, "--lo");
    const double hi = parse_real(a.hi, "--hi");
    ExplicitSumSpec spec;
    spec.k = a.k;
    spec.m = a.m;
    spec.kernel = parse_kernel(a.kernel);
    spec.pole_terms = a.poles;
    const std::vector<double> u = log_grid(lo, hi, a.per_decade);

    std::vector<ZetaZero> zeros;
    std::vector<ResidueTerm> res;
    if (a.m > 0) {
        zeros = zeros_from(a.zeros, a.m + (spec.kernel == KernelKind::Flat ? 0 : 1), false);
        if (zeros.size() < a.m) throw UsageError("--m exceeds the zeros in the file");
        spec.T = spec.kernel == KernelKind::Flat ? static_cast<double>(zeros[a.m - 1].gamma) + 1.0
                                                 : cutoff_below(zeros, a.m, kCutoffEpsilon);
        res = residues(zeros, derivatives_at_zeros(zeros, a.m, a.threads), a.k, a.threads);
    }
    const std::vector<double> v = explicit_sum(u, spec, zeros, res);
    Output out(a.out);
    std::ostringstream num;
    num.precision(static_cast<int>(a.sig));
    out.stream() << "x,value\n";
    for (std::size_t i = 0; i < u.size(); ++i) {
        num.str("");
        num << std::exp(u[i]) << ',' << v[i];
        out.stream() << num.str() << '\n';
    }
    out.finish();
}

// ---------------------------------------------------------------------------

struct CertifyArgs {
    unsigned n = 0;
    u32 m = 0;
    unsigned b = 0;
    double delta = 0.99;
    unsigned k = 2;
    std::vector<u32> subset;
    std::string zeros;
    std::string job_dir;
    unsigned threads = 1;
    std::string out;
};

void run_certify(const CertifyArgs& a)
{
    require_k(a.k);
    if (!(a.delta > 0.25 && a.delta < 1.0)) throw UsageError("--delta must lie in (1/4, 1)");
    if (a.n == 0 || a.m == 0) throw UsageError("--n and --m must be positive");
    if (a.n > a.m) throw UsageError("--n cannot exceed --m");
    const std::vector<ZetaZero> zeros = zeros_from(a.zeros, a.m + 1, true);
    std::vector<u32> subset = a.subset;
    if (subset.empty()) {
        // Largest kernel-weighted residues below T.
        const double T = cutoff_below(zeros, a.m, kCutoffEpsilon);
        const std::vector<ResidueTerm> res = residues(zeros, derivatives_at_zeros(zeros, a.m, a.threads), a.k, a.threads);
        subset = select_subset(zeros, res, T, a.n, KernelKind::JurkatPeyerimhoff);
    } else if (subset.size() != a.n) {
        throw UsageError("--subset must list exactly --n indices");
    }
    CertifyOptions opt;
    opt.b = a.b;
    opt.delta = a.delta;
    opt.threads = a.threads;
    opt.job_dir = a.job_dir;
    if (opt.job_dir.empty() && !checkpoint_dir().empty()) {
        opt.job_dir = (std::filesystem::path(checkpoint_dir()) /
                       ("certify-n" + std::to_string(a.n) + "-m" + std::to_string(a.m)))
                          .string();
    }
    Certificate cert = certify(zeros, a.m, subset, opt);
    cert.k = a.k;
    if (cert.failing_job) std::cerr << "no N >= 1 certified; weakest job " << *cert.failing_job << "\n";
    Output out(a.out);
    out.stream() << to_json(cert) << '\n';
    out.finish();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Counts, scans and gap densities of k-free integers; oscillation bounds from zeta zeros."};
    app.require_subcommand(1);

    CountArgs count;
    CLI::App* c = app.add_subcommand("count", "Q_k(x) and the scaled error (Q_k(x) - x/zeta(k)) / x^(1/(2k))");
    c->add_option("--k", count.k, "k")->capture_default_str();
    c->add_option("--x", count.x, "x (integer, scientific notation allowed)")->required();
    c->add_option("--method", count.method, "auto, direct or mertens")->capture_default_str();
    c->add_option("--n", count.n, "Mertens split parameter (0 = default)");
    c->add_option("--format", count.format, "csv or json")->capture_default_str();
    c->add_option("--digits", count.sig, "significant digits printed")->capture_default_str();
    c->add_option("--out", count.out, "output file (default stdout)");

    ScanArgs scan;
    CLI::App* s = app.add_subcommand("scan", "Extrema, close calls and gap statistics over (lo, hi]");
    s->add_option("--k", scan.k, "k")->capture_default_str();
    s->add_option("--lo", scan.lo, "exclusive lower end")->capture_default_str();
    s->add_option("--hi", scan.hi, "inclusive upper end")->required();
    s->add_option("--segment", scan.segment, "sieve segment length")->capture_default_str();
    s->add_option("--threads", scan.threads, "worker threads")->capture_default_str();
    s->add_option("--checkpoint", scan.checkpoint, "checkpoint file; resumed when present");
    s->add_option("--checkpoint-every", scan.every, "integers between checkpoints")->capture_default_str();
    s->add_option("--stop-after", scan.stop_after, "stop after this many checkpoint intervals")->group("");
    s->add_flag("--no-fast-path", scan.no_fast_path, "inspect every integer");
    s->add_option("--digits", scan.sig, "significant digits printed")->capture_default_str();
    s->add_option("--out", scan.out, "output CSV (default stdout)");

    DensityArgs density;
    CLI::App* d = app.add_subcommand("density", "Gap densities D_k(1..gmax)");
    d->add_option("--k", density.k, "k")->capture_default_str();
    d->add_option("--gmax", density.gmax, "largest gap")->required();
    d->add_option("--precision", density.precision, "working decimal digits")->capture_default_str();
    d->add_option("--digits", density.sig, "significant digits printed")->capture_default_str();
    d->add_option("--threads", density.threads, "worker threads")->capture_default_str();
    d->add_option("--out", density.out, "output CSV (default stdout)");

    BoundArgs bound;
    CLI::App* b = app.add_subcommand("bound", "Oscillation bounds: stark, independence or cross");
    b->add_option("kind", bound.kind, "stark, independence or cross")->required();
    b->add_option("--k", bound.k, "k, or 'inf' for the limit")->capture_default_str();
    b->add_option("--cert", bound.cert, "independence data or certificate JSON");
    b->add_option("--zeros", bound.zeros, "zeros file");
    b->add_option("--threads", bound.threads, "worker threads")->capture_default_str();
    b->add_option("--out", bound.out, "output JSON (default stdout)");

    ExplicitArgs ex;
    CLI::App* e = app.add_subcommand("explicit-sum", "Truncated explicit-formula sum on a log-spaced x grid");
    e->add_option("--k", ex.k, "k")->capture_default_str();
    e->add_option("--m", ex.m, "zeros used")->capture_default_str();
    e->add_option("--kernel", ex.kernel, "flat, jp or fejer")->capture_default_str();
    e->add_option("--lo", ex.lo, "smallest x")->capture_default_str();
    e->add_option("--hi", ex.hi, "largest x")->capture_default_str();
    e->add_option("--per-decade", ex.per_decade, "grid points per decade")->capture_default_str();
    e->add_option("--poles", ex.poles, "trivial-zero terms subtracted")->capture_default_str();
    e->add_option("--zeros", ex.zeros, "zeros file");
    e->add_option("--threads", ex.threads, "worker threads")->capture_default_str();
    e->add_option("--digits", ex.sig, "significant digits printed")->capture_default_str();
    e->add_option("--out", ex.out, "output CSV (default stdout)");

    CertifyArgs cert;
    CLI::App* w = app.add_subcommand("certify", "Certify N-independence of a subset of zero ordinates");
    w->add_option("--n", cert.n, "subset size")->required();
    w->add_option("--m", cert.m, "zeros below T")->required();
    w->add_option("--b", cert.b, "scaling bits (0 = 30 n)")->capture_default_str();
    w->add_option("--delta", cert.delta, "LLL parameter in (1/4, 1)")->capture_default_str();
    w->add_option("--k", cert.k, "k used to choose the subset")->capture_default_str();
    w->add_option("--subset", cert.subset, "explicit zero indices")->delimiter(',');
    w->add_option("--zeros", cert.zeros, "zeros file (default: high-precision table)");
    w->add_option("--job-dir", cert.job_dir, "directory for per-job results");
    w->add_option("--threads", cert.threads, "worker threads")->capture_default_str();
    w->add_option("--out", cert.out, "output JSON (default stdout)");

    try {
        app.parse(argc, argv);
        if (c->parsed()) run_count(count);
        if (s->parsed()) run_scan(scan);
        if (d->parsed()) run_density(density);
        if (b->parsed()) run_bound(bound);
        if (e->parsed()) run_explicit_sum(ex);
        if (w->parsed()) run_certify(cert);
        return 0;
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return err.exit_code();
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
}
