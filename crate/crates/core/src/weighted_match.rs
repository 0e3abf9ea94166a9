//! Weighted (uncertain) pattern matching in three variants: weighted pattern
//! against plain text, plain pattern against weighted text, and both
//! weighted. Each variant offers two candidate-finding methods — one built
//! on (dictionary) exact matching of the strings generated from the weighted
//! pattern, one built on the k-mismatch matcher over heavy strings.
//!
//! A weighted string assigns every position a probability distribution over
//! the alphabet; a plain string matches it with the product of the per-
//! position probabilities of its letters. With threshold `1/z`, at most `z`
//! plain strings can match the weighted pattern, the heavy string (the
//! per-position argmax) disagrees with any matching window in at most
//! `log2 z` positions, and the text side maintains at most `2z` maximal
//! matching suffix streams whose last-`m` products are approximated by
//! sliding-window product instances.

use crate::error::Error;
use crate::fingerprint::FingerprintParams;
use crate::k_mismatch::{FilterKind, KMismatchMatcher, KmOptions};
use crate::stream_match::{DictMatcher, ExactMatcher};
use crate::window_product::{Answer, WindowProduct};
use crate::Result;
use std::collections::{BTreeMap, VecDeque};

/// Relative tolerance for probability-threshold comparisons (log domain).
const TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Weighted strings.

/// Parses one weighted position: whitespace-separated `LETTER:PROB` tokens.
/// Omitted letters have probability 0; the probabilities must sum to 1
/// within 1e-9. Returns `(letter, probability)` sorted by letter, zero
/// entries dropped.
pub fn parse_position(line: &str, lineno: usize) -> Result<Vec<(u8, f64)>> {
    let mut row: Vec<(u8, f64)> = Vec::new();
    for token in line.split_whitespace() {
        let (letter, prob) = token.split_once(':').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("token `{token}` is not LETTER:PROB"),
        })?;
        if letter.len() != 1 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("letter `{letter}` must be a single character"),
            });
        }
        let b = letter.as_bytes()[0];
        let p: f64 = prob.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad probability `{prob}`"),
        })?;
        if !(0.0..=1.0 + TOL).contains(&p) || p.is_nan() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("probability {p} outside [0, 1]"),
            });
        }
        if row.iter().any(|&(l, _)| l == b) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate letter `{letter}`"),
            });
        }
        row.push((b, p.min(1.0)));
    }
    let sum: f64 = row.iter().map(|&(_, p)| p).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("probabilities sum to {sum}, expected 1"),
        });
    }
    row.retain(|&(_, p)| p > 0.0);
    row.sort_unstable_by_key(|&(l, _)| l);
    Ok(row)
}

/// Sequence of per-position probability distributions, stored as
/// log-probabilities; letters with probability zero are simply absent.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedString {
    positions: Vec<Vec<(u8, f64)>>,
}

impl WeightedString {
    /// Builds from linear-probability rows, validating each.
    pub fn from_rows(rows: Vec<Vec<(u8, f64)>>) -> Result<Self> {
        let mut positions = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            positions.push(validate_row(&row, i + 1)?);
        }
        Ok(WeightedString { positions })
    }

    /// Parses the line format: one position per line, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut positions = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let row = parse_position(t, i + 1)?;
            positions.push(row.iter().map(|&(l, p)| (l, p.ln())).collect());
        }
        Ok(WeightedString { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(letter, log probability)` pairs of one position, ascending letters.
    pub fn position(&self, i: usize) -> &[(u8, f64)] {
        &self.positions[i]
    }

    /// Log probability that position `i` equals `letter`; negative infinity
    /// when the letter has probability zero.
    pub fn log_prob(&self, i: usize, letter: u8) -> f64 {
        self.positions[i]
            .iter()
            .find(|&&(l, _)| l == letter)
            .map_or(f64::NEG_INFINITY, |&(_, lp)| lp)
    }

    /// The heavy string: at each position the most probable letter,
    /// lexicographically smallest on ties.
    pub fn heavy(&self) -> HeavyString {
        let mut letters = Vec::with_capacity(self.len());
        let mut max_log = Vec::with_capacity(self.len());
        for row in &self.positions {
            let mut best = (0u8, f64::NEG_INFINITY);
            for &(l, lp) in row {
                if lp > best.1 {
                    best = (l, lp);
                }
            }
            letters.push(best.0);
            max_log.push(best.1);
        }
        HeavyString { letters, max_log }
    }
}

/// Validates a linear-probability row and converts it to sorted log form.
fn validate_row(row: &[(u8, f64)], lineno: usize) -> Result<Vec<(u8, f64)>> {
    let sum: f64 = row.iter().map(|&(_, p)| p).sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("probabilities sum to {sum}, expected 1"),
        });
    }
    let mut out: Vec<(u8, f64)> = Vec::with_capacity(row.len());
    for &(l, p) in row {
        if !(0.0..=1.0 + TOL).contains(&p) || p.is_nan() {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("probability {p} outside [0, 1]"),
            });
        }
        if out.iter().any(|&(b, _)| b == l) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate letter {}", l as char),
            });
        }
        if p > 0.0 {
            out.push((l, p.min(1.0).ln()));
        }
    }
    out.sort_unstable_by_key(|&(l, _)| l);
    Ok(out)
}

/// Plain string taking the most probable letter at each position.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyString {
    pub letters: Vec<u8>,
    pub max_log: Vec<f64>,
}

impl HeavyString {
    pub fn total_log(&self) -> f64 {
        self.max_log.iter().sum()
    }
}

// ---------------------------------------------------------------------------
// Generated strings and the mismatch table.

/// The plain strings matching a weighted pattern with probability at least
/// `1/z`, with their log probabilities. At most `z` strings exist.
#[derive(Debug, Clone)]
pub struct GeneratedSet {
    entries: Vec<(Vec<u8>, f64)>,
}

impl GeneratedSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn strings(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.iter().map(|(s, _)| s.as_slice())
    }

    pub fn entry(&self, i: usize) -> (&[u8], f64) {
        (&self.entries[i].0, self.entries[i].1)
    }
}

/// Enumerates exactly the strings matching `pattern` with probability at
/// least `1/z`, by extending every surviving prefix with every supported
/// letter. Prefix pruning is lossless: a full string above the threshold has
/// all its prefixes above it.
pub fn enumerate_matching(pattern: &WeightedString, z: f64) -> Result<GeneratedSet> {
    if !(z > 1.0) || !z.is_finite() {
        return Err(Error::OutOfRange {
            what: "threshold parameter z",
            value: z,
        });
    }
    let thr = -z.ln() - TOL;
    let mut set: Vec<(Vec<u8>, f64)> = vec![(Vec::new(), 0.0)];
    for i in 0..pattern.len() {
        let mut next = Vec::new();
        for (s, lp) in &set {
            for &(letter, l) in pattern.position(i) {
                let nlp = lp + l;
                if nlp >= thr {
                    let mut ns = s.clone();
                    ns.push(letter);
                    next.push((ns, nlp));
                }
            }
        }
        set = next;
        debug_assert!(set.len() as f64 <= z + 1e-6, "probability mass bound");
    }
    set.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    Ok(GeneratedSet { entries: set })
}

/// Mismatch table `M'`: for pairs `(position, letter)` with the letter
/// different from the heavy string's, the log ratio
/// `ln(Pr[P[i]=a] / Pr[P[i]=heavy(P)[i]])`. Trimmed to the `floor(z)`
/// largest ratios, which keeps every mismatch of every generated string.
#[derive(Debug, Clone)]
pub struct MismatchTable {
    by_pos: BTreeMap<(usize, u8), f64>,
    by_ratio: Vec<((usize, u8), f64)>,
}

impl MismatchTable {
    pub fn build(pattern: &WeightedString, heavy: &HeavyString, z: f64) -> Self {
        let mut all: Vec<((usize, u8), f64)> = Vec::new();
        for i in 0..pattern.len() {
            for &(a, lp) in pattern.position(i) {
                if a != heavy.letters[i] {
                    all.push(((i, a), lp - heavy.max_log[i]));
                }
            }
        }
        all.sort_unstable_by(|x, y| {
            y.1.partial_cmp(&x.1)
                .expect("finite ratios")
                .then(x.0.cmp(&y.0))
        });
        all.truncate(z.floor() as usize);
        let by_pos = all.iter().copied().collect();
        MismatchTable {
            by_pos,
            by_ratio: all,
        }
    }

    pub fn len(&self) -> usize {
        self.by_pos.len()
    }

    /// Log ratio for `(0-based position, letter)`, if retained.
    pub fn ratio(&self, pos: usize, letter: u8) -> Option<f64> {
        self.by_pos.get(&(pos, letter)).copied()
    }

    /// Entries ordered by descending ratio.
    pub fn by_ratio(&self) -> &[((usize, u8), f64)] {
        &self.by_ratio
    }
}

// ---------------------------------------------------------------------------
// Maximal matching suffix streams (weighted text side).

#[derive(Debug, Clone)]
struct IndexEntry {
    pos: u64,
    letter: u8,
    /// Log product of the stream values strictly to the right of `pos`.
    tail_log: f64,
}

/// Per-method detection state carried by each stream.
#[derive(Debug, Clone)]
enum Det {
    None,
    Exact(ExactMatcher),
    Dict(DictMatcher),
}

#[derive(Debug, Clone)]
struct Stream {
    /// First text position this stream has consumed.
    first_pos: u64,
    index: VecDeque<IndexEntry>,
    swp: WindowProduct,
    det: Det,
    /// Sliding-window answer produced by the current arrival.
    last_answer: Option<Answer>,
    /// Pattern ids matched at the current arrival (exact: id 0).
    matched: Vec<usize>,
}

/// The set of live maximal-matching-suffix streams of a weighted text.
#[derive(Debug, Clone)]
struct StreamSet {
    m: u64,
    z: f64,
    eps: f64,
    /// `ln(1/(2z))`: letter admission and index trim cutoff.
    ln_cut: f64,
    det_proto: Det,
    streams: BTreeMap<Vec<(u64, u8)>, Stream>,
}

impl StreamSet {
    fn new(m: u64, z: f64, eps: f64, det_proto: Det) -> Result<Self> {
        let mut set = StreamSet {
            m,
            z,
            eps,
            ln_cut: -(2.0 * z).ln(),
            det_proto,
            streams: BTreeMap::new(),
        };
        set.streams.insert(Vec::new(), set.fresh_stream(1)?);
        Ok(set)
    }

    fn fresh_stream(&self, first_pos: u64) -> Result<Stream> {
        Ok(Stream {
            first_pos,
            index: VecDeque::new(),
            swp: WindowProduct::new(self.m, self.z, self.eps)?,
            det: self.det_proto.clone(),
            last_answer: None,
            matched: Vec::new(),
        })
    }

    fn live(&self) -> usize {
        self.streams.len()
    }

    /// Forks every stream with every admissible letter of the arriving
    /// position, updates indexes and window products, runs the per-stream
    /// detector, and deduplicates streams sharing an index.
    fn push(
        &mut self,
        row: &[(u8, f64)],
        heavy: u8,
        q: u64,
        params: &FingerprintParams,
    ) -> Result<()> {
        let admissible: Vec<(u8, f64)> = row
            .iter()
            .copied()
            .filter(|&(_, lp)| lp >= self.ln_cut - TOL)
            .collect();
        let old = std::mem::take(&mut self.streams);
        if admissible.is_empty() {
            // No letter keeps any suffix above the cutoff; all suffixes
            // through this position die and tracking restarts afresh.
            self.streams.insert(Vec::new(), self.fresh_stream(q + 1)?);
            return Ok(());
        }
        for (_, stream) in old {
            for &(b, lp) in &admissible {
                let mut s = stream.clone();
                s.last_answer = Some(s.swp.push(lp.exp())?);
                for e in &mut s.index {
                    e.tail_log += lp;
                }
                if b != heavy {
                    s.index.push_back(IndexEntry {
                        pos: q,
                        letter: b,
                        tail_log: 0.0,
                    });
                }
                while let Some(front) = s.index.front() {
                    if front.tail_log <= self.ln_cut + TOL {
                        s.index.pop_front();
                    } else {
                        break;
                    }
                }
                debug_assert!(
                    s.index.len() as f64 <= (2.0 * self.z).log2() + 1.5,
                    "indexed mismatch positions exceed log z + 1"
                );
                s.matched.clear();
                match &mut s.det {
                    Det::None => {}
                    Det::Exact(matcher) => {
                        if !matcher.push(b, params)?.is_empty() {
                            s.matched.push(0);
                        }
                    }
                    Det::Dict(dict) => {
                        for (id, _) in dict.push(b, params)? {
                            s.matched.push(id);
                        }
                    }
                }
                let key: Vec<(u64, u8)> = s.index.iter().map(|e| (e.pos, e.letter)).collect();
                self.streams.entry(key).or_insert(s);
            }
        }
        debug_assert!(
            self.streams.len() as f64 <= 2.0 * self.z + 1e-6,
            "live streams exceed 2z"
        );
        Ok(())
    }

    /// The index entries inside the window ending at `q`, for streams old
    /// enough to cover it.
    fn window_key(&self, s: &Stream, q: u64) -> Option<Vec<(u64, u8)>> {
        if s.first_pos > q + 1 - self.m {
            return None;
        }
        Some(
            s.index
                .iter()
                .filter(|e| e.pos + self.m > q)
                .map(|e| (e.pos, e.letter))
                .collect(),
        )
    }

    fn streams(&self) -> impl Iterator<Item = &Stream> {
        self.streams.values()
    }
}

/// Answer of the approximate weighted matchers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WpmAnswer {
    /// Log of the approximate probability (within a `(1 - eps)` factor).
    Yes(f64),
    No,
}

// ---------------------------------------------------------------------------
// Variant 1: weighted pattern, plain text.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpstMethod {
    Dictionary,
    KMismatch,
}

#[derive(Debug)]
enum WpstInner {
    Dictionary {
        dict: DictMatcher,
        log_probs: Vec<f64>,
    },
    KMismatch {
        km: KMismatchMatcher,
        heavy: HeavyString,
        heavy_total: f64,
        table: MismatchTable,
    },
}

/// Streaming matcher for a weighted pattern over a plain text: emits the
/// exact match probability wherever it is at least `1/z`.
#[derive(Debug)]
pub struct WpstMatcher {
    thr: f64,
    inner: WpstInner,
    time: u64,
}

impl WpstMatcher {
    pub fn new(
        pattern: &WeightedString,
        z: f64,
        method: WpstMethod,
        seed: u64,
        params: &FingerprintParams,
    ) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        if !(z > 1.0) || !z.is_finite() {
            return Err(Error::OutOfRange {
                what: "threshold parameter z",
                value: z,
            });
        }
        let m = pattern.len();
        let inner = match method {
            WpstMethod::Dictionary => {
                let generated = enumerate_matching(pattern, z)?;
                let strings: Vec<Vec<u8>> = generated.strings().map(|s| s.to_vec()).collect();
                let log_probs = (0..generated.len()).map(|i| generated.entry(i).1).collect();
                WpstInner::Dictionary {
                    dict: DictMatcher::new(&strings, params)?,
                    log_probs,
                }
            }
            WpstMethod::KMismatch => {
                let k = mismatch_budget(z, m)?;
                let heavy = pattern.heavy();
                let heavy_total = heavy.total_log();
                let table = MismatchTable::build(pattern, &heavy, z);
                let km = KMismatchMatcher::new(
                    &heavy.letters,
                    k,
                    seed,
                    FilterKind::ExactWindow,
                    KmOptions::default(),
                )?;
                WpstInner::KMismatch {
                    km,
                    heavy,
                    heavy_total,
                    table,
                }
            }
        };
        Ok(WpstMatcher {
            thr: -z.ln() - TOL,
            inner,
            time: 0,
        })
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Feeds one plain text symbol; `Some(log probability)` when the window
    /// ending here matches the pattern with probability at least `1/z`.
    pub fn push(&mut self, sym: u8, params: &FingerprintParams) -> Result<Option<f64>> {
        self.time += 1;
        match &mut self.inner {
            WpstInner::Dictionary { dict, log_probs } => {
                // Distinct equal-length strings cannot end at the same
                // position, so at most one id fires.
                Ok(dict.push(sym, params)?.first().map(|&(id, _)| log_probs[id]))
            }
            WpstInner::KMismatch {
                km,
                heavy,
                heavy_total,
                table,
            } => {
                for report in km.push(sym) {
                    if !report.certified {
                        continue;
                    }
                    let mut lp = *heavy_total;
                    let mut ok = true;
                    for c in &report.corrections {
                        debug_assert_eq!(heavy.letters[c.pos as usize - 1], c.pattern_sym);
                        match table.ratio(c.pos as usize - 1, c.text_sym) {
                            Some(r) => lp += r,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok && lp >= self.thr {
                        return Ok(Some(lp));
                    }
                }
                Ok(None)
            }
        }
    }
}

/// `k = floor(log2 z)` mismatches suffice between the heavy string and any
/// window matching above `1/z`; every mismatch costs a factor of at least 2.
fn mismatch_budget(z: f64, m: usize) -> Result<usize> {
    let k = (z.log2().floor() as usize).max(1);
    if k >= m {
        return Err(Error::Config(format!(
            "z = {z} needs a mismatch budget of {k}, too large for pattern length {m}"
        )));
    }
    Ok(k)
}

// ---------------------------------------------------------------------------
// Variant 2: plain pattern, weighted text.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpwtMethod {
    ExactPm,
    KMismatch,
}

/// Streaming `(1 - eps)`-approximate matcher for a plain pattern over a
/// weighted text. Answers `Yes` with an approximation of the match
/// probability whenever the true probability is at least `1/z`, `No`
/// whenever it is below `(1 - eps)/z`, and either in between.
#[derive(Debug)]
pub struct SpwtMatcher {
    pattern: Vec<u8>,
    m: u64,
    ln_yes: f64,
    streams: StreamSet,
    km: Option<KMismatchMatcher>,
    time: u64,
}

impl SpwtMatcher {
    pub fn new(
        pattern: &[u8],
        z: f64,
        eps: f64,
        method: SpwtMethod,
        seed: u64,
        params: &FingerprintParams,
    ) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        if !(z > 1.0) || !z.is_finite() {
            return Err(Error::OutOfRange {
                what: "threshold parameter z",
                value: z,
            });
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::OutOfRange {
                what: "epsilon",
                value: eps,
            });
        }
        let m = pattern.len() as u64;
        let (det, km) = match method {
            SpwtMethod::ExactPm => (Det::Exact(ExactMatcher::new(pattern, params)?), None),
            SpwtMethod::KMismatch => {
                let k = mismatch_budget(z, pattern.len())?;
                (
                    Det::None,
                    Some(KMismatchMatcher::new(
                        pattern,
                        k,
                        seed,
                        FilterKind::ExactWindow,
                        KmOptions::default(),
                    )?),
                )
            }
        };
        Ok(SpwtMatcher {
            pattern: pattern.to_vec(),
            m,
            ln_yes: ((1.0 - eps) / z).ln() - TOL,
            streams: StreamSet::new(m, z, eps, det)?,
            km,
            time: 0,
        })
    }

    pub fn live_streams(&self) -> usize {
        self.streams.live()
    }

    /// Feeds one weighted text position as `(letter, probability)` pairs.
    pub fn push(&mut self, row: &[(u8, f64)], params: &FingerprintParams) -> Result<WpmAnswer> {
        let q = self.time + 1;
        self.time = q;
        let row = validate_row(row, q as usize)?;
        let heavy = heavy_letter(&row);
        self.streams.push(&row, heavy, q, params)?;

        let mut best = f64::NEG_INFINITY;
        match &mut self.km {
            None => {
                for s in self.streams.streams() {
                    if !s.matched.is_empty() {
                        if let Some(Answer::Product(lp)) = s.last_answer {
                            best = best.max(lp);
                        }
                    }
                }
            }
            Some(km) => {
                let mut expected: Vec<Vec<(u64, u8)>> = Vec::new();
                for report in km.push(heavy) {
                    if !report.certified {
                        continue;
                    }
                    expected.push(
                        report
                            .corrections
                            .iter()
                            .map(|c| (q - self.m + c.pos, self.pattern[c.pos as usize - 1]))
                            .collect(),
                    );
                }
                if !expected.is_empty() {
                    for s in self.streams.streams() {
                        let Some(key) = self.streams.window_key(s, q) else {
                            continue;
                        };
                        if expected.contains(&key) {
                            if let Some(Answer::Product(lp)) = s.last_answer {
                                best = best.max(lp);
                            }
                        }
                    }
                }
            }
        }
        if best >= self.ln_yes {
            Ok(WpmAnswer::Yes(best))
        } else {
            Ok(WpmAnswer::No)
        }
    }
}

fn heavy_letter(row: &[(u8, f64)]) -> u8 {
    let mut best = (0u8, f64::NEG_INFINITY);
    for &(l, lp) in row {
        if lp > best.1 {
            best = (l, lp);
        }
    }
    best.0
}

// ---------------------------------------------------------------------------
// Variant 3: both weighted.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WpwtMethod {
    Dictionary,
    KMismatch,
}

/// Streaming `(1 - eps)`-approximate matcher for a weighted pattern over a
/// weighted text. Answers `Yes` whenever some plain string matches the
/// pattern and the window with a joint probability of at least `1/z`
/// (pattern-side probability times text-side probability), `No` whenever no
/// string reaches `(1 - eps)/z`.
#[derive(Debug)]
pub struct WpwtMatcher {
    m: u64,
    ln_yes: f64,
    gen_strings: Vec<Vec<u8>>,
    gen_logs: Vec<f64>,
    streams: StreamSet,
    kms: Vec<KMismatchMatcher>,
    time: u64,
}

impl WpwtMatcher {
    pub fn new(
        pattern: &WeightedString,
        z: f64,
        eps: f64,
        method: WpwtMethod,
        seed: u64,
        params: &FingerprintParams,
    ) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::OutOfRange {
                what: "epsilon",
                value: eps,
            });
        }
        let generated = enumerate_matching(pattern, z)?;
        let gen_strings: Vec<Vec<u8>> = generated.strings().map(|s| s.to_vec()).collect();
        let gen_logs: Vec<f64> = (0..generated.len()).map(|i| generated.entry(i).1).collect();
        let m = pattern.len() as u64;
        let (det, kms) = match method {
            WpwtMethod::Dictionary => (Det::Dict(DictMatcher::new(&gen_strings, params)?), Vec::new()),
            WpwtMethod::KMismatch => {
                let k = mismatch_budget(z, pattern.len())?;
                let kms = gen_strings
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        KMismatchMatcher::new(
                            s,
                            k,
                            seed.wrapping_add(i as u64),
                            FilterKind::ExactWindow,
                            KmOptions::default(),
                        )
                    })
                    .collect::<Result<_>>()?;
                (Det::None, kms)
            }
        };
        Ok(WpwtMatcher {
            m,
            ln_yes: ((1.0 - eps) / z).ln() - TOL,
            gen_strings,
            gen_logs,
            streams: StreamSet::new(m, z, eps, det)?,
            kms,
            time: 0,
        })
    }

    pub fn live_streams(&self) -> usize {
        self.streams.live()
    }

    pub fn generated_count(&self) -> usize {
        self.gen_strings.len()
    }

    pub fn push(&mut self, row: &[(u8, f64)], params: &FingerprintParams) -> Result<WpmAnswer> {
        let q = self.time + 1;
        self.time = q;
        let row = validate_row(row, q as usize)?;
        let heavy = heavy_letter(&row);
        self.streams.push(&row, heavy, q, params)?;

        let mut best = f64::NEG_INFINITY;
        if self.kms.is_empty() {
            for s in self.streams.streams() {
                if let Some(Answer::Product(lp)) = s.last_answer {
                    for &id in &s.matched {
                        best = best.max(self.gen_logs[id] + lp);
                    }
                }
            }
        } else {
            // Per generated string, the expected window index of a stream
            // ending with it; keep the best pattern-side probability per key.
            let mut expected: BTreeMap<Vec<(u64, u8)>, f64> = BTreeMap::new();
            for (t, km) in self.kms.iter_mut().enumerate() {
                let g = &self.gen_strings[t];
                for report in km.push(heavy) {
                    if !report.certified {
                        continue;
                    }
                    let key: Vec<(u64, u8)> = report
                        .corrections
                        .iter()
                        .map(|c| (q - self.m + c.pos, g[c.pos as usize - 1]))
                        .collect();
                    let e = expected.entry(key).or_insert(f64::NEG_INFINITY);
                    *e = e.max(self.gen_logs[t]);
                }
            }
            if !expected.is_empty() {
                for s in self.streams.streams() {
                    let Some(key) = self.streams.window_key(s, q) else {
                        continue;
                    };
                    if let Some(&glp) = expected.get(&key) {
                        if let Some(Answer::Product(lp)) = s.last_answer {
                            best = best.max(glp + lp);
                        }
                    }
                }
            }
        }
        if best >= self.ln_yes {
            Ok(WpmAnswer::Yes(best))
        } else {
            Ok(WpmAnswer::No)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> FingerprintParams {
        FingerprintParams::new(1 << 14, 5)
    }

    fn ws(rows: &[&[(u8, f64)]]) -> WeightedString {
        WeightedString::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn parse_and_heavy() {
        let w = WeightedString::parse(
            "# a motif\nA:0.9 C:0.1\nA:0.25 C:0.25 G:0.25 T:0.25\nT:1.0\n",
        )
        .unwrap();
        assert_eq!(w.len(), 3);
        let h = w.heavy();
        assert_eq!(h.letters, b"AAT");
        assert!((w.log_prob(0, b'A').exp() - 0.9).abs() < 1e-12);
        assert_eq!(w.log_prob(0, b'G'), f64::NEG_INFINITY);
    }

    #[test]
    fn parse_rejects_bad_rows() {
        assert!(WeightedString::parse("A:0.5 C:0.6").is_err());
        assert!(WeightedString::parse("A:0.5 A:0.5").is_err());
        assert!(WeightedString::parse("AB:1.0").is_err());
        assert!(WeightedString::parse("A:1.2").is_err());
    }

    #[test]
    fn enumerate_examples() {
        let half = [(b'A', 0.5), (b'B', 0.5)];
        let p = ws(&[&half, &half]);
        let g4 = enumerate_matching(&p, 4.0).unwrap();
        assert_eq!(g4.len(), 4);
        for i in 0..4 {
            assert!((g4.entry(i).1.exp() - 0.25).abs() < 1e-12);
        }
        let g3 = enumerate_matching(&p, 3.0).unwrap();
        assert!(g3.is_empty());
        let det = ws(&[&[(b'X', 1.0)], &[(b'Y', 1.0)]]);
        let g = enumerate_matching(&det, 10.0).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.entry(0).0, b"XY");
        assert!((g.entry(0).1).abs() < 1e-12);
    }

    #[test]
    fn mismatch_table_keeps_generated_mismatches() {
        let p = ws(&[
            &[(b'A', 0.6), (b'C', 0.4)],
            &[(b'A', 0.7), (b'G', 0.3)],
            &[(b'T', 1.0)],
        ]);
        let heavy = p.heavy();
        let z = 4.0;
        let table = MismatchTable::build(&p, &heavy, z);
        assert!(table.len() <= 4);
        // Every mismatch of every generated string is present.
        let gen = enumerate_matching(&p, z).unwrap();
        for s in gen.strings() {
            for (i, (&a, &h)) in s.iter().zip(&heavy.letters).enumerate() {
                if a != h {
                    assert!(table.ratio(i, a).is_some(), "missing ({i}, {})", a as char);
                }
            }
        }
    }

    #[test]
    fn wpst_dictionary_and_kmismatch_basic() {
        let params = params();
        let p = ws(&[
            &[(b'A', 0.5), (b'C', 0.5)],
            &[(b'A', 1.0)],
            &[(b'G', 0.8), (b'T', 0.2)],
        ]);
        let text = b"CAGAATXAAG";
        for method in [WpstMethod::Dictionary, WpstMethod::KMismatch] {
            let mut m = WpstMatcher::new(&p, 4.0, method, 3, &params).unwrap();
            let mut hits = Vec::new();
            for &b in text {
                if let Some(lp) = m.push(b, &params).unwrap() {
                    hits.push((m.time(), lp.exp()));
                }
            }
            // Windows "CAG" (0.5*1*0.8 = 0.4) at end 3 and "AAG" at ends 10;
            // "AAT" has probability 0.1 < 1/4 and must not fire.
            assert_eq!(hits.len(), 2, "{method:?}: {hits:?}");
            assert_eq!(hits[0].0, 3);
            assert!((hits[0].1 - 0.4).abs() < 1e-9);
            assert_eq!(hits[1].0, 10);
            assert!((hits[1].1 - 0.4).abs() < 1e-9);
        }
    }

    #[test]
    fn spwt_deterministic_text() {
        let params = params();
        let pattern = b"ACA";
        let rows: Vec<Vec<(u8, f64)>> = vec![
            vec![(b'A', 1.0)],
            vec![(b'C', 1.0)],
            vec![(b'A', 1.0)],
            vec![(b'C', 1.0)],
            vec![(b'A', 1.0)],
        ];
        for method in [SpwtMethod::ExactPm, SpwtMethod::KMismatch] {
            let mut m = SpwtMatcher::new(pattern, 4.0, 0.1, method, 0, &params).unwrap();
            let mut answers = Vec::new();
            for row in &rows {
                answers.push(m.push(row, &params).unwrap());
            }
            assert_eq!(answers[0], WpmAnswer::No);
            assert_eq!(answers[1], WpmAnswer::No);
            match answers[2] {
                WpmAnswer::Yes(lp) => assert!(lp.abs() < 1e-9),
                WpmAnswer::No => panic!("{method:?}: exact match refused"),
            }
            assert_eq!(answers[3], WpmAnswer::No);
            assert!(matches!(answers[4], WpmAnswer::Yes(_)));
        }
    }

    #[test]
    fn wpwt_deterministic_equal() {
        let params = params();
        let p = ws(&[&[(b'A', 1.0)], &[(b'C', 1.0)], &[(b'G', 1.0)]]);
        let rows: Vec<Vec<(u8, f64)>> = vec![
            vec![(b'A', 1.0)],
            vec![(b'C', 1.0)],
            vec![(b'G', 1.0)],
        ];
        for method in [WpwtMethod::Dictionary, WpwtMethod::KMismatch] {
            let mut m = WpwtMatcher::new(&p, 4.0, 0.1, method, 0, &params).unwrap();
            let mut answers = Vec::new();
            for row in &rows {
                answers.push(m.push(row, &params).unwrap());
            }
            assert_eq!(answers[0], WpmAnswer::No);
            assert_eq!(answers[1], WpmAnswer::No);
            assert!(matches!(answers[2], WpmAnswer::Yes(_)), "{method:?}");
        }
    }
}
