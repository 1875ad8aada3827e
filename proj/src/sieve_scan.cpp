#include "kfree/sieve_scan.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace kfree {

namespace {

constexpr i64 kI64Max = std::numeric_limits<i64>::max();
constexpr i64 kI64Min = std::numeric_limits<i64>::min();

i64 checked_tracker(const RationalDensity& d, u64 q, u64 x)
{
    const i128 t = static_cast<i128>(d.V) * q - static_cast<i128>(d.U) * x;
    if (t > kI64Max || t < kI64Min) {
        throw EnvelopeError("tracker V*Q - U*x overflows 64 bits at x=" + std::to_string(x));
    }
    return static_cast<i64>(t);
}

[[noreturn]] void tracker_overflow(u64 x)
{
    throw EnvelopeError("tracker overflow during scan near x=" + std::to_string(x));
}

}  // namespace

// ---------------------------------------------------------------------------
// Bitmap and sieve

bool SegmentBitmap::test(u64 n) const
{
    if (n < lo || n > hi) return false;
    const u64 off = n - base;
    return (words[off / 64] >> (off % 64)) & 1U;
}

u64 SegmentBitmap::count_through(u64 x) const
{
    if (x < lo) return 0;
    if (x > hi) x = hi;
    const u64 off = x - base;
    const u64 full = off / 64;
    u64 c = 0;
    for (u64 w = 0; w < full; ++w) c += std::popcount(words[w]);
    const unsigned rem = static_cast<unsigned>(off % 64) + 1;
    const u64 mask = rem == 64 ? ~u64{0} : (u64{1} << rem) - 1;
    return c + std::popcount(words[full] & mask);
}

KFreeSieve::KFreeSieve(unsigned k, u64 lo, u64 hi, const PrimeTable& primes, u64 segment_size)
    : k_(k), lo_(lo), hi_(hi), cursor_(lo), segment_size_(segment_size), done_(hi < lo)
{
    if (k < 2) throw UsageError("sieve: k must be >= 2");
    if (lo < 1) throw UsageError("sieve: lo must be >= 1");
    if (segment_size < 64) throw UsageError("sieve: segment size must be >= 64");
    if (hi < lo) return;
    const u64 need = iroot(hi, k);
    if (primes.limit() < need) {
        throw UsageError("sieve: prime table reaches " + std::to_string(primes.limit()) + ", need " +
                         std::to_string(need));
    }
    for (u32 p : primes.primes()) {
        if (p > need) break;
        const u64 m = static_cast<u64>(saturating_pow(p, k));
        if (m <= 64) {
            Pattern pat{m, std::vector<u64>(m)};
            for (u64 r = 0; r < m; ++r) {
                u64 kill = 0;
                for (u64 j = (m - r) % m; j < 64; j += m) kill |= u64{1} << j;
                pat.masks[r] = ~kill;
            }
            patterns_.push_back(std::move(pat));
        } else if (m <= segment_size) {
            strided_.push_back(m);
        } else {
            const u64 first = (lo + m - 1) / m * m;
            if (first >= lo && first <= hi) heap_.push({first, m});
        }
    }
}

bool KFreeSieve::next(SegmentBitmap& out)
{
    if (done_) return false;
    const u64 seg_lo = cursor_;
    const u64 seg_hi = hi_ - seg_lo < segment_size_ - 1 ? hi_ : seg_lo + segment_size_ - 1;
    out.lo = seg_lo;
    out.hi = seg_hi;
    out.base = seg_lo - (seg_lo - 1) % 64;
    const u64 nwords = (seg_hi - out.base) / 64 + 1;
    out.words.assign(nwords, ~u64{0});

    for (const Pattern& pat : patterns_) {
        const u64 m = pat.modulus;
        const u64 step = 64 % m;
        u64 r = out.base % m;
        for (u64 w = 0; w < nwords; ++w) {
            out.words[w] &= pat.masks[r];
            r += step;
            if (r >= m) r -= m;
        }
    }
    for (u64 m : strided_) {
        for (u64 v = (seg_lo + m - 1) / m * m; v <= seg_hi; v += m) {
            const u64 off = v - out.base;
            out.words[off / 64] &= ~(u64{1} << (off % 64));
        }
    }
    while (!heap_.empty() && heap_.top().next <= seg_hi) {
        Pending e = heap_.top();
        heap_.pop();
        const u64 off = e.next - out.base;
        out.words[off / 64] &= ~(u64{1} << (off % 64));
        if (e.next <= hi_ - e.modulus) heap_.push({e.next + e.modulus, e.modulus});
    }

    const unsigned head = static_cast<unsigned>(seg_lo - out.base);
    if (head != 0) out.words[0] &= ~((u64{1} << head) - 1);
    const unsigned tail = static_cast<unsigned>((seg_hi - out.base) % 64) + 1;
    if (tail != 64) out.words[nwords - 1] &= (u64{1} << tail) - 1;

    if (seg_hi == hi_) {
        done_ = true;
    } else {
        cursor_ = seg_hi + 1;
    }
    return true;
}

SegmentBitmap sieve_segment(u64 lo, u64 hi, unsigned k, const PrimeTable& primes)
{
    if (hi < lo) throw UsageError("sieve_segment: empty range");
    const u64 len = hi - lo + 1;
    KFreeSieve sieve(k, lo, hi, primes, std::max<u64>(64, len));
    SegmentBitmap out;
    sieve.next(out);
    return out;
}

// ---------------------------------------------------------------------------
// Gaps

void GapStats::add(u64 gap, u64 at, u64 times)
{
    if (gap >= counts.size()) {
        counts.resize(gap + 1, 0);
        first_occurrence.resize(gap + 1, 0);
    }
    counts[gap] += times;
    if (first_occurrence[gap] == 0 || at < first_occurrence[gap]) first_occurrence[gap] = at;
}

u64 GapStats::total() const
{
    u64 t = 0;
    for (u64 c : counts) t += c;
    return t;
}

void count_gaps_in_words(std::span<const u64> words, u64 base, u64& last_kfree, GapStats& stats)
{
    for (std::size_t w = 0; w < words.size(); ++w) {
        const u64 word = words[w];
        if (word == 0) continue;
        const u64 wbase = base + 64 * w;
        const u64 first = wbase + std::countr_zero(word);
        if (last_kfree != 0) stats.add(first - last_kfree, last_kfree);
        // open: set bits whose successor inside the word is not yet located.
        const unsigned top = 63 - std::countl_zero(word);
        u64 open = word & ~(u64{1} << top);
        for (unsigned g = 1; open != 0; ++g) {
            const u64 hits = open & (word >> g);
            if (hits != 0) {
                stats.add(g, wbase + std::countr_zero(hits), std::popcount(hits));
                open &= ~hits;
            }
        }
        last_kfree = wbase + top;
    }
}

// ---------------------------------------------------------------------------
// State

ScannerState make_state(unsigned k, u64 position, u64 q_at_position, u64 last_kfree)
{
    ScannerState s;
    s.k = k;
    s.density = rational_inv_zeta(k);
    s.start = position;
    s.start_q = q_at_position;
    s.entry_last_kfree = last_kfree;
    s.position = position;
    s.q = q_at_position;
    s.tracker = checked_tracker(s.density, q_at_position, position);
    s.last_kfree = last_kfree;
    return s;
}

ScannerState seed_state(unsigned k, u64 position, const MobiusTable& mobius)
{
    return make_state(k, position, position == 0 ? 0 : qk_direct(position, k, mobius));
}

WordBounds word_bounds(const RationalDensity& density)
{
    std::vector<u64> moduli;
    u64 period = 1;
    for (u64 p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61}) {
        const u128 m = saturating_pow(p, density.k);
        if (m > 64) continue;
        moduli.push_back(static_cast<u64>(m));
        period *= static_cast<u64>(m);
    }
    WordBounds b;
    for (u64 s = 0; s < period; ++s) {
        unsigned c = 0;
        for (unsigned j = 1; j <= 64; ++j) {
            const u64 n = s + j;
            bool free = true;
            for (u64 m : moduli) free = free && n % m != 0;
            c += free;
            b.c_max[j] = std::max(b.c_max[j], c);
        }
    }
    i128 gain = kI64Min;
    for (unsigned j = 1; j <= 64; ++j) {
        gain = std::max(gain, static_cast<i128>(density.V) * b.c_max[j] - static_cast<i128>(density.U) * j);
    }
    b.max_gain = static_cast<i64>(gain);
    b.max_drop = static_cast<i64>(static_cast<i128>(density.U) * 64);
    return b;
}

FastPathLimits fast_path_limits(const ScannerState& state, const Thresholds& thresholds, const WordBounds& bounds,
                                u64 x_lo, double band)
{
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // Slack for rounding in the double product and the root.
    constexpr long double kShrink = 1.0L - 1e-12L;
    const long double scale = static_cast<long double>(state.density.V) * root_2k(std::max<u64>(x_lo, 1), state.k);

    double bar_max = state.max_rec.valid ? state.max_rec.scaled : -kInf;
    if (thresholds.max_est) bar_max = std::max(bar_max, *thresholds.max_est);
    double bar_min = state.min_rec.valid ? state.min_rec.scaled : kInf;
    if (thresholds.min_est) bar_min = std::min(bar_min, *thresholds.min_est);

    auto clamp = [](long double v) { return v >= 9.2e18L ? kI64Max : v <= -9.2e18L ? kI64Min : static_cast<i64>(v); };
    FastPathLimits lim{kI64Min, kI64Max, kI64Min, kI64Max};
    if (bar_max - band > 0) {
        const long double thr = std::floor((bar_max - band) * scale * kShrink);
        lim.max_threshold = clamp(thr);
        lim.max_limit = clamp(thr - bounds.max_gain);
    }
    if (bar_min + band < 0) {
        const long double thr = std::ceil((bar_min + band) * scale * kShrink);
        lim.min_threshold = clamp(thr);
        lim.min_limit = clamp(thr + bounds.max_drop);
    }
    return lim;
}

WordExcursion::WordExcursion(const RationalDensity& density)
{
    const i64 U = static_cast<i64>(density.U);
    const i64 V = static_cast<i64>(density.V);
    for (unsigned b = 0; b < 256; ++b) {
        i64 hi = kI64Min, lo = kI64Max, c = 0;
        for (unsigned i = 0; i < 8; ++i) {
            if (!((b >> i) & 1U)) continue;
            lo = std::min(lo, V * c - U * (i + 1));
            ++c;
            hi = std::max(hi, V * c - U * (i + 1));
        }
        hi_[b] = hi;
        lo_[b] = lo;
        total_[b] = V * c - U * 8;
    }
}

std::pair<i64, i64> WordExcursion::extremes(u64 word) const
{
    i64 hi = kI64Min, lo = kI64Max, off = 0;
    for (unsigned i = 0; i < 8; ++i, word >>= 8) {
        const unsigned b = static_cast<unsigned>(word & 0xFF);
        if (b != 0) {
            hi = std::max(hi, off + hi_[b]);
            lo = std::min(lo, off + lo_[b]);
        }
        off += total_[b];
    }
    return {hi, lo};
}

bool fast_path_check(const ScannerState& state, const Thresholds& thresholds, const WordBounds& bounds, double band)
{
    return fast_path_limits(state, thresholds, bounds, state.position + 1, band).allows(state.tracker);
}

// ---------------------------------------------------------------------------
// Scanning

namespace {

bool better(Side side, double a, double b) { return side == Side::Max ? a > b : a < b; }

CloseCall as_close_call(const ExtremaRecord& r) { return {r.x, r.q, r.tracker, r.scaled, r.side}; }

class Scanner {
public:
    Scanner(ScannerState& st, const Thresholds& th, const ScanOptions& opt)
        : st_(st), th_(th), opt_(opt), bounds_(word_bounds(st.density)), excursion_(st.density)
    {
    }

    void run(u64 hi, const PrimeTable& primes)
    {
        if (hi <= st_.position) return;
        KFreeSieve sieve(st_.k, st_.position + 1, hi, primes, opt_.segment_size);
        SegmentBitmap seg;
        const i64 U = static_cast<i64>(st_.density.U);
        const i64 V = static_cast<i64>(st_.density.V);
        while (sieve.next(seg)) {
            refresh_limits(seg.lo);
            for (std::size_t w = 0; w < seg.words.size(); ++w) {
                const u64 word = seg.words[w];
                const u64 wbase = seg.base + 64 * w;
                const u64 last = std::min(wbase + 63, seg.hi);
                if (limits_.allows(st_.tracker) || quiet(word, wbase)) {
                    const i64 pop = std::popcount(word);
                    const i64 n = static_cast<i64>(last - st_.position);
                    i64 t;
                    if (__builtin_add_overflow(st_.tracker, V * pop - U * n, &t)) tracker_overflow(last);
                    st_.tracker = t;
                    st_.q += static_cast<u64>(pop);
                } else {
                    bool changed = false;
                    for (u64 bits = word; bits != 0; bits &= bits - 1) {
                        const u64 x = wbase + std::countr_zero(bits);
                        i64 before;
                        if (__builtin_sub_overflow(st_.tracker, U * static_cast<i64>(x - st_.position), &before)) {
                            tracker_overflow(x);
                        }
                        changed |= consider(Side::Min, x, st_.q, before);
                        st_.q += 1;
                        if (__builtin_add_overflow(before, V, &st_.tracker)) tracker_overflow(x);
                        st_.position = x;
                        changed |= consider(Side::Max, x, st_.q, st_.tracker);
                    }
                    if (__builtin_sub_overflow(st_.tracker, U * static_cast<i64>(last - st_.position), &st_.tracker)) {
                        tracker_overflow(last);
                    }
                    if (changed) refresh_limits(seg.lo);
                }
                st_.position = last;
            }
            if (st_.first_kfree == 0) {
                for (std::size_t w = 0; w < seg.words.size(); ++w) {
                    if (seg.words[w] != 0) {
                        st_.first_kfree = seg.base + 64 * w + std::countr_zero(seg.words[w]);
                        break;
                    }
                }
            }
            count_gaps_in_words(seg.words, seg.base, st_.last_kfree, st_.gaps);
        }
    }

private:
    void refresh_limits(u64 x_lo)
    {
        limits_ = opt_.fast_path ? fast_path_limits(st_, th_, bounds_, x_lo, opt_.close_call_band)
                                 : FastPathLimits{kI64Min, kI64Max, kI64Min, kI64Max};
    }

    // Returns true when the side's record moved.
    bool consider(Side side, u64 x, u64 q, i64 t)
    {
        const double s = scaled_value(t, x, st_.density);
        ExtremaRecord& rec = side == Side::Min ? st_.min_rec : st_.max_rec;
        const double band = opt_.close_call_band;
        if (!rec.valid) {
            rec = {true, x, q, t, s, side};
            return true;
        }
        if (better(side, s, rec.scaled)) {
            if (std::abs(rec.scaled - s) <= band) st_.close_calls.push_back(as_close_call(rec));
            rec = {true, x, q, t, s, side};
            std::erase_if(st_.close_calls,
                          [&](const CloseCall& c) { return c.side == side && std::abs(c.scaled - s) > band; });
            return true;
        }
        if (std::abs(s - rec.scaled) <= band) st_.close_calls.push_back({x, q, t, s, side});
        return false;
    }

    ScannerState& st_;
    const Thresholds& th_;
    const ScanOptions& opt_;
    WordBounds bounds_;
    // Every candidate in a word whose position is directly before it stays
    // strictly inside both raw thresholds.
    bool quiet(u64 word, u64 wbase) const
    {
        if (!opt_.fast_path || st_.position + 1 != wbase) return false;
        if (word == 0) return true;
        const auto [hi, lo] = excursion_.extremes(word);
        const i128 t = st_.tracker;
        return t + hi < limits_.max_threshold && t + lo > limits_.min_threshold;
    }

    FastPathLimits limits_{kI64Min, kI64Max, kI64Min, kI64Max};
    WordExcursion excursion_;
};

}  // namespace

void scan_range(ScannerState& state, u64 hi, const PrimeTable& primes, const Thresholds& thresholds,
                const ScanOptions& options)
{
    if (hi <= state.position) return;
    Thresholds th = thresholds;
    const bool has_est = th.min_est.has_value() || th.max_est.has_value();
    ScannerState saved;
    if (has_est && options.fast_path) saved = state;

    Scanner(state, th, options).run(hi, primes);

    if (has_est && options.fast_path) {
        const bool miss_max = th.max_est && !(state.max_rec.valid && state.max_rec.scaled >= *th.max_est);
        const bool miss_min = th.min_est && !(state.min_rec.valid && state.min_rec.scaled <= *th.min_est);
        if (miss_max || miss_min) {
            if (miss_max) th.max_est.reset();
            if (miss_min) th.min_est.reset();
            state = std::move(saved);
            Scanner(state, th, options).run(hi, primes);
        }
    }
    resolve_close_calls(state, options.close_call_band);
}

void resolve_close_calls(ScannerState& state, double band)
{
    std::vector<CloseCall> kept;
    for (Side side : {Side::Min, Side::Max}) {
        ExtremaRecord& rec = side == Side::Min ? state.min_rec : state.max_rec;
        std::vector<CloseCall> pool;
        if (rec.valid) pool.push_back(as_close_call(rec));
        for (const CloseCall& c : state.close_calls) {
            if (c.side == side) pool.push_back(c);
        }
        if (pool.empty()) continue;
        std::size_t best = 0;
        for (std::size_t i = 1; i < pool.size(); ++i) {
            int c = compare_scaled_exact(pool[i].tracker, pool[i].x, pool[best].tracker, pool[best].x, state.k);
            if (side == Side::Min) c = -c;
            if (c > 0 || (c == 0 && pool[i].x < pool[best].x)) best = i;
        }
        const CloseCall& b = pool[best];
        rec = {true, b.x, b.q, b.tracker, b.scaled, side};
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (i == best || pool[i].x == b.x) continue;
            if (std::abs(pool[i].scaled - b.scaled) <= band) kept.push_back(pool[i]);
        }
    }
    std::sort(kept.begin(), kept.end(), [](const CloseCall& a, const CloseCall& b) {
        return a.side != b.side ? a.side < b.side : a.x < b.x;
    });
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    state.close_calls = std::move(kept);
}

ScannerState merge_partitions(std::span<const ScannerState> parts, double band)
{
    if (parts.empty()) throw UsageError("merge_partitions: no partitions");
    ScannerState acc = parts[0];
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const ScannerState& b = parts[i];
        if (b.k != acc.k || b.density.U != acc.density.U || b.density.V != acc.density.V) {
            throw UsageError("merge_partitions: partitions use different k");
        }
        if (b.start != acc.position || b.start_q != acc.q) {
            throw UsageError("merge_partitions: partition " + std::to_string(i) + " starts at " +
                             std::to_string(b.start) + " but predecessor ends at " + std::to_string(acc.position));
        }
        if (b.entry_last_kfree != 0 && b.entry_last_kfree != acc.last_kfree) {
            throw UsageError("merge_partitions: gap carry mismatch at partition " + std::to_string(i));
        }
        if (b.entry_last_kfree == 0 && acc.last_kfree != 0 && b.first_kfree != 0) {
            acc.gaps.add(b.first_kfree - acc.last_kfree, acc.last_kfree);
        }
        for (std::size_t g = 1; g < b.gaps.counts.size(); ++g) {
            if (b.gaps.counts[g] != 0) acc.gaps.add(g, b.gaps.first_occurrence[g], b.gaps.counts[g]);
        }
        if (acc.first_kfree == 0) acc.first_kfree = b.first_kfree;
        if (b.last_kfree != 0) acc.last_kfree = b.last_kfree;
        if (b.min_rec.valid) acc.close_calls.push_back(as_close_call(b.min_rec));
        if (b.max_rec.valid) acc.close_calls.push_back(as_close_call(b.max_rec));
        acc.close_calls.insert(acc.close_calls.end(), b.close_calls.begin(), b.close_calls.end());
        acc.position = b.position;
        acc.q = b.q;
        acc.tracker = b.tracker;
    }
    if (parts.size() > 1) resolve_close_calls(acc, band);
    return acc;
}

Thresholds estimate_thresholds(u64 lo, u64 hi, unsigned k, const MobiusTable& mobius, unsigned points_per_decade)
{
    Thresholds th;
    if (hi <= lo + 128 || points_per_decade == 0) return th;
    const RationalDensity d = rational_inv_zeta(k);
    const u64 a = lo + 64;
    const u64 b = hi - 64;
    const double step = 1.0 / points_per_decade;
    double e = std::floor(std::log10(static_cast<double>(a)) * points_per_decade) * step;
    u64 prev = 0;
    for (;; e += step) {
        const double xf = std::round(std::pow(10.0, e));
        if (xf > static_cast<double>(b)) break;
        const u64 x = static_cast<u64>(xf);
        if (x < a || x == prev) continue;
        prev = x;
        const ScaledError se = scaled_error(x, qk_direct(x, k, mobius), d);
        // Positive values bound the max record from below and negative ones the
        // min record from above; shrink toward zero to absorb rounding.
        const double v = se.scaled * (1.0 - 1e-9);
        if (v > 0 && (!th.max_est || v > *th.max_est)) th.max_est = v;
        if (v < 0 && (!th.min_est || v < *th.min_est)) th.min_est = v;
    }
    return th;
}

ScannerState scan_partitioned(ScannerState entry, u64 hi, const PrimeTable& primes, const MobiusTable& mobius,
                              unsigned partitions, unsigned threads, const ScanOptions& options, bool use_estimates)
{
    const u64 lo = entry.position;
    if (hi <= lo) return entry;
    const u64 parts = std::clamp<u64>(partitions, 1, hi - lo);
    std::vector<u64> cut(parts + 1);
    for (u64 i = 0; i <= parts; ++i) cut[i] = lo + static_cast<u64>(static_cast<u128>(hi - lo) * i / parts);

    std::vector<ScannerState> states(parts);
    std::vector<Thresholds> th(parts);
    states[0] = std::move(entry);
    for (u64 i = 0; i < parts; ++i) {
        if (i > 0) states[i] = make_state(states[0].k, cut[i], qk_direct(cut[i], states[0].k, mobius));
        if (use_estimates && options.fast_path) th[i] = estimate_thresholds(cut[i], cut[i + 1], states[0].k, mobius);
    }

    std::atomic<u64> next{0};
    std::vector<std::exception_ptr> errors(parts);
    auto worker = [&] {
        for (u64 i = next++; i < parts; i = next++) {
            try {
                scan_range(states[i], cut[i + 1], primes, th[i], options);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned nthreads = static_cast<unsigned>(std::clamp<u64>(threads, 1, parts));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return merge_partitions(states, options.close_call_band);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'K', 'F', 'R', 'E', 'E', 'S', 'C', 'N'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64v(u64 v) { put(v, 8); }
    void i64v(i64 v) { put(static_cast<u64>(v), 8); }
    void f64(double v) { put(std::bit_cast<u64>(v), 8); }
    void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    std::vector<std::uint8_t>& bytes() { return buf_; }

private:
    void put(u64 v, int n)
    {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    u64 u64v() { return get(8); }
    i64 i64v() { return static_cast<i64>(get(8)); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::size_t remaining() const { return b_.size() - pos_; }

private:
    u64 get(int n)
    {
        if (remaining() < static_cast<std::size_t>(n)) throw CorruptCheckpoint("checkpoint truncated");
        u64 v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<u64>(b_[pos_++]) << (8 * i);
        return v;
    }
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

void write_record(Writer& w, const ExtremaRecord& r)
{
    w.u8(r.valid ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(r.side));
    w.u64v(r.x);
    w.u64v(r.q);
    w.i64v(r.tracker);
    w.f64(r.scaled);
}

Side read_side(Reader& r)
{
    const std::uint8_t s = r.u8();
    if (s > 1) throw CorruptCheckpoint("checkpoint: bad side tag");
    return static_cast<Side>(s);
}

ExtremaRecord read_record(Reader& r)
{
    ExtremaRecord rec;
    const std::uint8_t valid = r.u8();
    if (valid > 1) throw CorruptCheckpoint("checkpoint: bad record flag");
    rec.valid = valid == 1;
    rec.side = read_side(r);
    rec.x = r.u64v();
    rec.q = r.u64v();
    rec.tracker = r.i64v();
    rec.scaled = r.f64();
    return rec;
}

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths.
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1U << 30));
        crc = crc32(crc, p, chunk);
        p += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> checkpoint(const ScannerState& s)
{
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.u32(s.k);
    w.u64v(s.density.U);
    w.u64v(s.density.V);
    w.f64(s.density.error_bound);
    w.u64v(s.start);
    w.u64v(s.start_q);
    w.u64v(s.entry_last_kfree);
    w.u64v(s.position);
    w.u64v(s.q);
    w.i64v(s.tracker);
    write_record(w, s.min_rec);
    write_record(w, s.max_rec);
    w.u64v(s.close_calls.size());
    for (const CloseCall& c : s.close_calls) {
        w.u8(static_cast<std::uint8_t>(c.side));
        w.u64v(c.x);
        w.u64v(c.q);
        w.i64v(c.tracker);
        w.f64(c.scaled);
    }
    w.u64v(s.first_kfree);
    w.u64v(s.last_kfree);
    w.u64v(s.gaps.counts.size());
    for (u64 c : s.gaps.counts) w.u64v(c);
    for (u64 f : s.gaps.first_occurrence) w.u64v(f);
    auto& bytes = w.bytes();
    const std::uint32_t crc = crc_of(bytes.data(), bytes.size());
    w.u32(crc);
    return std::move(bytes);
}

ScannerState restore(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < sizeof kMagic + 8) throw CorruptCheckpoint("checkpoint truncated");
    if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) throw CorruptCheckpoint("checkpoint: bad magic");
    const std::size_t body = bytes.size() - 4;
    Reader tail(bytes.subspan(body));
    if (tail.u32() != crc_of(bytes.data(), body)) throw CorruptCheckpoint("checkpoint: CRC mismatch");

    Reader r(bytes.subspan(sizeof kMagic, body - sizeof kMagic));
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw CorruptCheckpoint("checkpoint: version " + std::to_string(version) + ", expected " +
                                std::to_string(kVersion));
    }
    ScannerState s;
    s.k = r.u32();
    s.density.k = s.k;
    s.density.U = r.u64v();
    s.density.V = r.u64v();
    s.density.error_bound = r.f64();
    s.start = r.u64v();
    s.start_q = r.u64v();
    s.entry_last_kfree = r.u64v();
    s.position = r.u64v();
    s.q = r.u64v();
    s.tracker = r.i64v();
    s.min_rec = read_record(r);
    s.max_rec = read_record(r);
    const u64 ncc = r.u64v();
    if (ncc > r.remaining() / 33) throw CorruptCheckpoint("checkpoint: close-call count out of range");
    s.close_calls.resize(ncc);
    for (CloseCall& c : s.close_calls) {
        c.side = read_side(r);
        c.x = r.u64v();
        c.q = r.u64v();
        c.tracker = r.i64v();
        c.scaled = r.f64();
    }
    s.first_kfree = r.u64v();
    s.last_kfree = r.u64v();
    const u64 ng = r.u64v();
    if (ng > r.remaining() / 16) throw CorruptCheckpoint("checkpoint: gap table size out of range");
    s.gaps.counts.resize(ng);
    s.gaps.first_occurrence.resize(ng);
    for (u64& c : s.gaps.counts) c = r.u64v();
    for (u64& f : s.gaps.first_occurrence) f = r.u64v();
    if (r.remaining() != 0) throw CorruptCheckpoint("checkpoint: trailing bytes");

    const RationalDensity expect = rational_inv_zeta(s.k);
    if (expect.U != s.density.U || expect.V != s.density.V) {
        throw CorruptCheckpoint("checkpoint: density constant does not match k=" + std::to_string(s.k));
    }
    const i128 t = static_cast<i128>(s.density.V) * s.q - static_cast<i128>(s.density.U) * s.position;
    if (t != s.tracker) throw CorruptCheckpoint("checkpoint: tracker inconsistent with (Q, position)");
    return s;
}

void write_checkpoint_file(const std::string& path, const ScannerState& state)
{
    const auto bytes = checkpoint(state);
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path + ": " + ec.message());
}

ScannerState read_checkpoint_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return restore(bytes);
}

// ---------------------------------------------------------------------------
// CSV

void write_scan_csv(std::ostream& out, const ScannerState& s, unsigned digits)
{
    out << "kind,side,x,Q,scaled,g,count,first_occurrence\n";
    std::ostringstream num;
    auto fmt = [&](double v) {
        num.str("");
        num << std::setprecision(static_cast<int>(digits)) << v;
        return num.str();
    };
    for (const ExtremaRecord* r : {&s.min_rec, &s.max_rec}) {
        if (!r->valid) continue;
        out << "extremum," << to_string(r->side) << ',' << r->x << ',' << r->q << ',' << fmt(r->scaled) << ",,,\n";
    }
    for (const CloseCall& c : s.close_calls) {
        out << "close_call," << to_string(c.side) << ',' << c.x << ',' << c.q << ',' << fmt(c.scaled) << ",,,\n";
    }
    for (std::size_t g = 1; g < s.gaps.counts.size(); ++g) {
        if (s.gaps.counts[g] == 0) continue;
        out << "gap,,,,," << g << ',' << s.gaps.counts[g] << ',' << s.gaps.first_occurrence[g] << '\n';
    }
}

}  // namespace kfree
