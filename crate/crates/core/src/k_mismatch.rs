//! Reduction from k mismatches to 1 mismatch via random prime partitions,
//! with a pluggable 2-approximate distance filter.
//!
//! `floor(log2 m)` random primes are drawn from `[k log^2 m, 34 k log^2 m]`.
//! For each prime `p` the pattern is partitioned into `p` equispaced
//! subpatterns `P[j] P[p+j] P[2p+j] ...` and the text into `p` equispaced
//! substreams. At an alignment accepted by the filter, every mismatch that is
//! the only one between some subpattern and its aligned substream
//! (an *isolated* mismatch) is retrieved with its symbols; with the default
//! interval the primes exceed the pattern length, every mismatch is isolated
//! under every prime, and the assembled set is the complete correction list.
//!
//! Per (subpattern, substream) pair the 1-mismatch detection runs against a
//! ring buffer holding the last `ceil(m/p)` substream symbols. At this scale
//! the ring is smaller than a sketch-based matcher and exact; the substream
//! routing, alignment bookkeeping and isolated-mismatch assembly are
//! unchanged.

use crate::error::Error;
use crate::field;
use crate::one_mismatch::Correction;
use crate::Result;
use rand_core::{RngCore, SeedableRng};
use std::collections::BTreeMap;
use std::collections::VecDeque;

/// Distance filter implementations.
///
/// `ExactWindow` retains the last `m` text symbols and computes the Hamming
/// distance exactly; it certifies reports but is not a small-space streaming
/// algorithm. `ResidueCount` counts, per prime, the residue classes whose
/// aligned lane currently mismatches; the count never exceeds the true
/// distance, so no alignment with distance at most `k` is refused, but
/// alignments above `2k` may be admitted and their reports are uncertified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    ExactWindow,
    ResidueCount,
}

impl std::str::FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-window" => Ok(FilterKind::ExactWindow),
            "residue-count" => Ok(FilterKind::ResidueCount),
            other => Err(Error::Config(format!("unknown filter kind `{other}`"))),
        }
    }
}

/// Optional overrides of the prime-selection interval, for test-scale runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct KmOptions {
    pub prime_lo: Option<u64>,
    pub prime_hi: Option<u64>,
}

/// Near-occurrence with its full correction list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KMatchReport {
    pub end: u64,
    pub distance: usize,
    /// Sorted by pattern position; one entry per mismatch.
    pub corrections: Vec<Correction>,
    /// True when the exact filter confirmed the distance and the correction
    /// list is complete.
    pub certified: bool,
}

/// Per-alignment view used by instrumentation tests.
#[derive(Debug, Clone)]
pub struct AlignmentTrace {
    pub end: u64,
    pub filter_yes: bool,
    /// The assembled isolated-mismatch set for this alignment.
    pub isolated: Vec<Correction>,
}

/// Last `capacity` symbols of one substream.
#[derive(Debug, Clone)]
struct Ring {
    capacity: usize,
    newest_pos: u64,
    data: VecDeque<u8>,
}

impl Ring {
    fn new(capacity: usize) -> Self {
        Ring {
            capacity,
            newest_pos: 0,
            data: VecDeque::with_capacity(capacity),
        }
    }

    fn push(&mut self, sym: u8, pos: u64) {
        if self.data.len() == self.capacity {
            self.data.pop_front();
        }
        self.data.push_back(sym);
        self.newest_pos = pos;
    }

    /// Symbol at text position `pos`, which must be a class member.
    fn get(&self, pos: u64, prime: u64) -> Option<u8> {
        if self.newest_pos < pos || (self.newest_pos - pos) % prime != 0 {
            return None;
        }
        let steps = ((self.newest_pos - pos) / prime) as usize;
        if steps >= self.data.len() {
            return None;
        }
        Some(self.data[self.data.len() - 1 - steps])
    }
}

#[derive(Debug, Clone)]
struct PrimePartition {
    prime: u64,
    rings: Vec<Ring>,
}

#[derive(Debug, Clone)]
enum Filter {
    Exact { window: VecDeque<u8> },
    Residue,
}

/// Streaming k-mismatch-with-error-correcting matcher.
#[derive(Debug, Clone)]
pub struct KMismatchMatcher {
    pattern: Vec<u8>,
    k: usize,
    partitions: Vec<PrimePartition>,
    filter: Filter,
    time: u64,
    interval: (u64, u64),
    default_interval: bool,
    seed: u64,
    dropped: u64,
}

impl KMismatchMatcher {
    /// `1 <= k < |pattern|`. Selects `floor(log2 m)` distinct primes
    /// uniformly from the configured interval under `seed`.
    pub fn new(
        pattern: &[u8],
        k: usize,
        seed: u64,
        filter: FilterKind,
        options: KmOptions,
    ) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        let m = pattern.len() as u64;
        if k == 0 || (k as u64) >= m {
            return Err(Error::Config(format!(
                "k = {k} must satisfy 1 <= k < pattern length {m}"
            )));
        }
        let lsq = (field::ceil_log2(m) as u64).pow(2).max(1);
        let default_lo = (k as u64 * lsq).max(2);
        let default_hi = 34 * k as u64 * lsq;
        let lo = options.prime_lo.unwrap_or(default_lo);
        let hi = options.prime_hi.unwrap_or(default_hi);
        let default_interval = options.prime_lo.is_none() && options.prime_hi.is_none();
        if lo < 2 || hi < lo {
            return Err(Error::Config(format!("bad prime interval [{lo}, {hi}]")));
        }
        if hi > 10_000_000 {
            return Err(Error::Config(format!(
                "prime interval upper bound {hi} too large; override with a smaller interval"
            )));
        }
        let count = field::floor_log2(m).max(1) as usize;
        let pool = field::primes_in(lo, hi);
        if pool.len() < count {
            return Err(Error::Config(format!(
                "interval [{lo}, {hi}] contains only {} primes but {count} are needed; widen it",
                pool.len()
            )));
        }
        let primes = select_distinct(&pool, count, seed);
        let partitions = primes
            .iter()
            .map(|&prime| {
                let cap = m.div_ceil(prime).max(1) as usize;
                PrimePartition {
                    prime,
                    rings: (0..prime).map(|_| Ring::new(cap)).collect(),
                }
            })
            .collect();
        let filter = match filter {
            FilterKind::ExactWindow => Filter::Exact {
                window: VecDeque::with_capacity(pattern.len()),
            },
            FilterKind::ResidueCount => Filter::Residue,
        };
        Ok(KMismatchMatcher {
            pattern: pattern.to_vec(),
            k,
            partitions,
            filter,
            time: 0,
            interval: (lo, hi),
            default_interval,
            seed,
            dropped: 0,
        })
    }

    pub fn primes(&self) -> Vec<u64> {
        self.partitions.iter().map(|p| p.prime).collect()
    }

    pub fn interval(&self) -> (u64, u64) {
        self.interval
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `Some(note)` when a non-default prime interval is in use; such runs
    /// lose the guarantee that every prime exceeds the pattern length.
    pub fn interval_warning(&self) -> Option<String> {
        if self.default_interval {
            None
        } else {
            let (lo, hi) = self.interval;
            Some(format!(
                "non-default prime interval [{lo}, {hi}]: isolated-mismatch capture is heuristic"
            ))
        }
    }

    /// Alignments dropped because recovered symbols disagreed across primes.
    pub fn dropped_alignments(&self) -> u64 {
        self.dropped
    }

    pub fn push(&mut self, sym: u8) -> Vec<KMatchReport> {
        self.push_detailed(sym).0
    }

    /// Feeds one symbol; also returns the per-alignment trace once the first
    /// full window is available.
    pub fn push_detailed(&mut self, sym: u8) -> (Vec<KMatchReport>, Option<AlignmentTrace>) {
        let q = self.time + 1;
        self.time = q;
        for part in &mut self.partitions {
            let c = ((q - 1) % part.prime) as usize;
            part.rings[c].push(sym, q);
        }
        let m = self.pattern.len();
        if let Filter::Exact { window } = &mut self.filter {
            if window.len() == m {
                window.pop_front();
            }
            window.push_back(sym);
        }
        if (q as usize) < m {
            return (Vec::new(), None);
        }

        let exact_h = match &self.filter {
            Filter::Exact { window } => Some(
                window
                    .iter()
                    .zip(&self.pattern)
                    .filter(|(a, b)| a != b)
                    .count(),
            ),
            Filter::Residue => None,
        };
        let filter_yes = match exact_h {
            Some(h) => h <= self.k,
            None => {
                let worst = self
                    .partitions
                    .iter()
                    .map(|part| self.mismatching_lane_count(part, q))
                    .max()
                    .unwrap_or(0);
                worst <= 2 * self.k
            }
        };
        if !filter_yes {
            return (
                Vec::new(),
                Some(AlignmentTrace {
                    end: q,
                    filter_yes,
                    isolated: Vec::new(),
                }),
            );
        }

        let isolated = match self.assemble_isolated(q) {
            Some(set) => set,
            None => {
                self.dropped += 1;
                return (
                    Vec::new(),
                    Some(AlignmentTrace {
                        end: q,
                        filter_yes,
                        isolated: Vec::new(),
                    }),
                );
            }
        };
        let trace = AlignmentTrace {
            end: q,
            filter_yes,
            isolated: isolated.clone(),
        };
        let mut reports = Vec::new();
        if isolated.len() <= self.k {
            match exact_h {
                Some(h) => {
                    // Certified: the exact filter pins the distance, and the
                    // isolated set can only be complete when it has h entries.
                    if h <= self.k && isolated.len() == h {
                        reports.push(KMatchReport {
                            end: q,
                            distance: h,
                            corrections: isolated,
                            certified: true,
                        });
                    }
                }
                None => reports.push(KMatchReport {
                    end: q,
                    distance: isolated.len(),
                    corrections: isolated,
                    certified: false,
                }),
            }
        }
        (reports, Some(trace))
    }

    /// Number of subpattern lanes of `part` that currently mismatch their
    /// aligned substream window. At most the true Hamming distance.
    fn mismatching_lane_count(&self, part: &PrimePartition, q: u64) -> usize {
        let m = self.pattern.len() as u64;
        let p = part.prime;
        let mut count = 0usize;
        for j1 in 1..=p.min(m) {
            let lane_len = (m - j1) / p + 1;
            let first_tp = q - m + j1;
            let c = ((first_tp - 1) % p) as usize;
            let ring = &part.rings[c];
            for t in 0..lane_len {
                let tp = first_tp + p * t;
                let pat = self.pattern[(j1 + p * t) as usize - 1];
                match ring.get(tp, p) {
                    Some(txt) if txt == pat => {}
                    _ => {
                        count += 1;
                        break;
                    }
                }
            }
        }
        count
    }

    /// Assembles the isolated-mismatch set for the alignment ending at `q`:
    /// every (prime, subpattern) pair whose aligned lane has exactly one
    /// mismatch contributes that mismatch. Returns `None` when two witnesses
    /// disagree about a position (impossible with exact ring comparison,
    /// kept as the documented drop rule).
    fn assemble_isolated(&self, q: u64) -> Option<Vec<Correction>> {
        let m = self.pattern.len() as u64;
        let mut set: BTreeMap<u64, (u8, u8)> = BTreeMap::new();
        for part in &self.partitions {
            let p = part.prime;
            for j1 in 1..=p.min(m) {
                let lane_len = (m - j1) / p + 1;
                let first_tp = q - m + j1;
                let c = ((first_tp - 1) % p) as usize;
                let ring = &part.rings[c];
                let mut only: Option<(u64, u8, u8)> = None;
                let mut count = 0u32;
                for t in 0..lane_len {
                    let tp = first_tp + p * t;
                    let pos = j1 + p * t;
                    let pat = self.pattern[pos as usize - 1];
                    let txt = ring.get(tp, p).expect("ring retains a full lane");
                    if txt != pat {
                        count += 1;
                        if count > 1 {
                            break;
                        }
                        only = Some((pos, pat, txt));
                    }
                }
                if count == 1 {
                    let (pos, pat, txt) = only.expect("counted one");
                    match set.insert(pos, (pat, txt)) {
                        Some(prev) if prev != (pat, txt) => return None,
                        _ => {}
                    }
                }
            }
        }
        Some(
            set.into_iter()
                .map(|(pos, (pattern_sym, text_sym))| Correction {
                    pos,
                    pattern_sym,
                    text_sym,
                })
                .collect(),
        )
    }
}

/// `count` distinct elements of `pool` chosen uniformly under `seed`,
/// returned ascending.
fn select_distinct(pool: &[u64], count: usize, seed: u64) -> Vec<u64> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pool = pool.to_vec();
    let n = pool.len();
    for i in 0..count {
        let span = (n - i) as u64;
        let bound = u64::MAX - u64::MAX % span;
        let off = loop {
            let x = rng.next_u64();
            if x < bound {
                break (x % span) as usize;
            }
        };
        pool.swap(i, i + off);
    }
    let mut chosen = pool[..count].to_vec();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::naive_hamming_scan;

    #[test]
    fn rejects_bad_k() {
        assert!(KMismatchMatcher::new(b"abcd", 4, 0, FilterKind::ExactWindow, KmOptions::default()).is_err());
        assert!(KMismatchMatcher::new(b"abcd", 0, 0, FilterKind::ExactWindow, KmOptions::default()).is_err());
    }

    #[test]
    fn default_interval_and_prime_selection() {
        // m = 128: log^2 m = 49, so k = 2 gives [98, 3332] and 7 primes.
        let pat = vec![b'a'; 128];
        let m = KMismatchMatcher::new(&pat, 2, 42, FilterKind::ExactWindow, KmOptions::default())
            .unwrap();
        assert_eq!(m.interval(), (98, 3332));
        let primes = m.primes();
        assert_eq!(primes.len(), 7);
        let sieve = field::primes_in(98, 3332);
        for p in &primes {
            assert!(sieve.contains(p), "{p} not a prime in the interval");
        }
        let mut sorted = primes.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 7, "primes must be distinct");
        // Deterministic under the seed.
        let m2 = KMismatchMatcher::new(&pat, 2, 42, FilterKind::ExactWindow, KmOptions::default())
            .unwrap();
        assert_eq!(m2.primes(), primes);
        assert!(m.interval_warning().is_none());
    }

    #[test]
    fn narrow_interval_is_a_config_error() {
        let pat = vec![b'a'; 128];
        let opts = KmOptions {
            prime_lo: Some(5),
            prime_hi: Some(7),
        };
        assert!(KMismatchMatcher::new(&pat, 2, 0, FilterKind::ExactWindow, opts).is_err());
    }

    #[test]
    fn override_interval_is_accepted_with_warning() {
        let pat = vec![b'a'; 64];
        let opts = KmOptions {
            prime_lo: Some(5),
            prime_hi: Some(50),
        };
        let m = KMismatchMatcher::new(&pat, 2, 1, FilterKind::ExactWindow, opts).unwrap();
        assert!(m.interval_warning().is_some());
    }

    fn run(pat: &[u8], text: &[u8], k: usize, filter: FilterKind) -> Vec<KMatchReport> {
        let mut m = KMismatchMatcher::new(pat, k, 7, filter, KmOptions::default()).unwrap();
        let mut out = Vec::new();
        for &b in text {
            out.extend(m.push(b));
        }
        out
    }

    #[test]
    fn exact_window_matches_oracle_small() {
        let mut state = 0x123456789abcdefu64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let pat: Vec<u8> = (0..24).map(|_| b'a' + (next() % 4) as u8).collect();
        let text: Vec<u8> = (0..600).map(|_| b'a' + (next() % 4) as u8).collect();
        for k in [2usize, 4] {
            let got = run(&pat, &text, k, FilterKind::ExactWindow);
            let want: Vec<KMatchReport> = naive_hamming_scan(&pat, &text, k)
                .into_iter()
                .map(|(end, distance, corrections)| KMatchReport {
                    end,
                    distance,
                    corrections,
                    certified: true,
                })
                .collect();
            assert_eq!(got, want, "k = {k}");
        }
    }

    #[test]
    fn planted_mismatches_are_all_recovered() {
        let pat: Vec<u8> = (0..32).map(|i| b'a' + (i % 4) as u8).collect();
        let mut text = vec![b'd'; 40];
        text[8..40].copy_from_slice(&pat);
        text[13] = b'z';
        text[20] = b'y';
        text[30] = b'x';
        let got = run(&pat, &text, 4, FilterKind::ExactWindow);
        assert_eq!(got.len(), 1);
        let rep = &got[0];
        assert_eq!(rep.end, 40);
        assert_eq!(rep.distance, 3);
        let positions: Vec<u64> = rep.corrections.iter().map(|c| c.pos).collect();
        assert_eq!(positions, vec![6, 13, 23]);
        for c in &rep.corrections {
            assert_eq!(c.pattern_sym, pat[c.pos as usize - 1]);
            assert_eq!(c.text_sym, text[8 + c.pos as usize - 1]);
        }
    }

    #[test]
    fn residue_filter_never_misses_close_windows() {
        let mut state = 0xdeadbeefu64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let pat: Vec<u8> = (0..16).map(|_| b'a' + (next() % 2) as u8).collect();
        let text: Vec<u8> = (0..400).map(|_| b'a' + (next() % 2) as u8).collect();
        let k = 3;
        let mut m =
            KMismatchMatcher::new(&pat, k, 11, FilterKind::ResidueCount, KmOptions::default())
                .unwrap();
        let oracle = naive_hamming_scan(&pat, &text, k);
        let mut yes_at = Vec::new();
        for (i, &b) in text.iter().enumerate() {
            let (_, trace) = m.push_detailed(b);
            if let Some(t) = trace {
                if t.filter_yes {
                    yes_at.push((i + 1) as u64);
                }
            }
        }
        for (end, _, _) in &oracle {
            assert!(yes_at.contains(end), "filter refused close window at {end}");
        }
    }
}
