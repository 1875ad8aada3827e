#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kfree/arith.hpp"
#include "kfree/common.hpp"
#include "kfree/counting.hpp"

namespace kfree {

inline constexpr u64 kDefaultSegmentSize = u64{1} << 20;
inline constexpr double kCloseCallBand = 1e-6;

// One bit per integer. Bit j of words[w] stands for base + 64*w + j and is
// set iff that integer is k-free and lies in [lo, hi].
struct SegmentBitmap {
    u64 base = 1;
    u64 lo = 1;
    u64 hi = 0;
    std::vector<u64> words;

    bool test(u64 n) const;
    // Number of set bits for integers <= x (x clamped to [lo - 1, hi]).
    u64 count_through(u64 x) const;
};

// Streaming segmented sieve over [lo, hi]. Prime powers up to 64 are applied
// as periodic word masks, those up to the segment length by striding, and the
// rest through a min-heap keyed on their next multiple.
class KFreeSieve {
public:
    KFreeSieve(unsigned k, u64 lo, u64 hi, const PrimeTable& primes, u64 segment_size = kDefaultSegmentSize);

    // Fills the next segment; false once the range is exhausted.
    bool next(SegmentBitmap& out);

private:
    struct Pending {
        u64 next;
        u64 modulus;
        bool operator>(const Pending& o) const { return next > o.next; }
    };
    struct Pattern {
        u64 modulus;
        std::vector<u64> masks;  // masks[r] for (first integer of word) % modulus == r
    };

    unsigned k_;
    u64 lo_;
    u64 hi_;
    u64 cursor_;
    u64 segment_size_;
    bool done_;
    std::vector<Pattern> patterns_;
    std::vector<u64> strided_;
    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> heap_;
};

SegmentBitmap sieve_segment(u64 lo, u64 hi, unsigned k, const PrimeTable& primes);

struct GapStats {
    // counts[g], first_occurrence[g]; index 0 unused. first_occurrence 0 = never seen.
    std::vector<u64> counts;
    std::vector<u64> first_occurrence;

    void add(u64 gap, u64 at, u64 times = 1);
    u64 total() const;
    bool operator==(const GapStats&) const = default;
};

// Gap counting over bitmap words. `last_kfree` carries the most recent k-free
// integer seen before `base` (0 = none) and is advanced through the words.
void count_gaps_in_words(std::span<const u64> words, u64 base, u64& last_kfree, GapStats& stats);

struct ExtremaRecord {
    bool valid = false;
    u64 x = 0;
    u64 q = 0;  // Q at the side's convention
    i64 tracker = 0;
    double scaled = 0.0;
    Side side = Side::Max;
    bool operator==(const ExtremaRecord&) const = default;
};

struct CloseCall {
    u64 x = 0;
    u64 q = 0;
    i64 tracker = 0;
    double scaled = 0.0;
    Side side = Side::Max;
    bool operator==(const CloseCall&) const = default;
};

struct ScannerState {
    unsigned k = 2;
    RationalDensity density;
    u64 start = 0;             // scanned range is (start, position]
    u64 start_q = 0;           // Q(start)
    u64 entry_last_kfree = 0;  // gap carry supplied at start, 0 = none
    u64 position = 0;
    u64 q = 0;
    i64 tracker = 0;  // V*q - U*position
    ExtremaRecord min_rec{false, 0, 0, 0, 0.0, Side::Min};
    ExtremaRecord max_rec{false, 0, 0, 0, 0.0, Side::Max};
    std::vector<CloseCall> close_calls;
    u64 first_kfree = 0;  // first k-free integer in (start, position], 0 = none
    u64 last_kfree = 0;   // gap state: last k-free integer <= position, 0 = none
    GapStats gaps;

    bool operator==(const ScannerState&) const = default;
};

// Fresh state positioned at `position` with Q = q_at_position. A scan from
// zero uses (k, 0, 0).
ScannerState make_state(unsigned k, u64 position, u64 q_at_position, u64 last_kfree = 0);
// Same, with Q(position) computed from the direct formula.
ScannerState seed_state(unsigned k, u64 position, const MobiusTable& mobius);

struct Thresholds {
    std::optional<double> min_est;
    std::optional<double> max_est;
};

struct ScanOptions {
    u64 segment_size = kDefaultSegmentSize;
    bool fast_path = true;
    double close_call_band = kCloseCallBand;
};

// Worst-case tracker movement across one 64-integer word.
struct WordBounds {
    // max_{1<=j<=64} (V*c_max(j) - U*j): upper bound on the max-side tracker.
    i64 max_gain = 0;
    // 64*U: bound on how far the min-side tracker can drop.
    i64 max_drop = 0;
    // c_max[j]: most k-free integers possible among j consecutive integers.
    std::array<unsigned, 65> c_max{};
};

WordBounds word_bounds(const RationalDensity& density);

// Tracker limits derived from the current records, estimates and the
// smallest x the next words can reach.
struct FastPathLimits {
    i64 max_limit;  // fast only if tracker < max_limit
    i64 min_limit;  // and tracker > min_limit
    // Raw tracker thresholds before the worst-case word allowance.
    i64 max_threshold;
    i64 min_threshold;
    bool allows(i64 tracker) const { return tracker < max_limit && tracker > min_limit; }
};

// Exact tracker excursions inside one 64-bit word, assembled from per-byte
// tables. Used when the worst-case test fails but the word's actual bits
// still keep every candidate clear of both thresholds.
class WordExcursion {
public:
    explicit WordExcursion(const RationalDensity& density);

    // Over the set bits j of `word` (integer position+1+j), the largest
    // max-side and smallest min-side tracker offset from the tracker at
    // `position`. Empty words yield (INT64_MIN, INT64_MAX).
    std::pair<i64, i64> extremes(u64 word) const;

private:
    std::array<i64, 256> hi_{};
    std::array<i64, 256> lo_{};
    std::array<i64, 256> total_{};
};

FastPathLimits fast_path_limits(const ScannerState& state, const Thresholds& thresholds, const WordBounds& bounds,
                                u64 x_lo, double band);

// True only when no point in the next 64 integers after state.position can set
// a new extremum or fall within the close-call band.
bool fast_path_check(const ScannerState& state, const Thresholds& thresholds, const WordBounds& bounds,
                     double band = kCloseCallBand);

// Advance state over (state.position, hi]. Estimates only steer the fast path;
// if a final record fails to reach its estimate the range is rescanned without it.
void scan_range(ScannerState& state, u64 hi, const PrimeTable& primes, const Thresholds& thresholds = {},
                const ScanOptions& options = {});

// Re-rank each side's record against its close calls in exact arithmetic and
// keep only close calls within the band of the final record.
void resolve_close_calls(ScannerState& state, double band = kCloseCallBand);

// Concatenate contiguous partitions (ordered by range).
ScannerState merge_partitions(std::span<const ScannerState> parts, double band = kCloseCallBand);

// Sparse pre-pass: scaled error at a geometric grid (points_per_decade) inside
// (lo, hi], away from the ends.
Thresholds estimate_thresholds(u64 lo, u64 hi, unsigned k, const MobiusTable& mobius,
                               unsigned points_per_decade = 100);

// Split (lo, hi] into `partitions` pieces, scan them on up to `threads`
// threads and merge. `entry` supplies the state at lo.
ScannerState scan_partitioned(ScannerState entry, u64 hi, const PrimeTable& primes, const MobiusTable& mobius,
                              unsigned partitions, unsigned threads, const ScanOptions& options = {},
                              bool use_estimates = true);

// Versioned little-endian checkpoint image with a trailing CRC-32.
std::vector<std::uint8_t> checkpoint(const ScannerState& state);
ScannerState restore(std::span<const std::uint8_t> bytes);
void write_checkpoint_file(const std::string& path, const ScannerState& state);
ScannerState read_checkpoint_file(const std::string& path);

// CSV: kind,side,x,Q,scaled,g,count,first_occurrence
void write_scan_csv(std::ostream& out, const ScannerState& state, unsigned digits = 12);

}  // namespace kfree
