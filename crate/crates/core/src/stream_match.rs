//! Level-based streaming exact pattern matching with arithmetic-progression
//! compression, plus a multi-pattern wrapper.
//!
//! Storage level `j` holds the start positions of occurrences of the pattern
//! prefix of length `min(2^j, m)` within the last `2^(j+1)` text symbols,
//! together with the fingerprint of the text before each position. The
//! leftmost position of a level is examined exactly when the next prefix
//! length has fully streamed past it; the fingerprint check promotes it one
//! level up or discards it. Three or more positions in one level always form
//! an arithmetic progression with difference equal to the minimal period of
//! the level's prefix and are stored as a single descriptor.

use crate::error::Error;
use crate::field;
use crate::fingerprint::{Fingerprint, FingerprintParams};
use crate::Result;
use std::sync::Arc;

/// Minimal periods of every prefix of `pattern`, via the failure function.
/// `periods[i]` is the minimal period of `pattern[..=i]`.
pub(crate) fn prefix_periods(pattern: &[u8]) -> Vec<u64> {
    let m = pattern.len();
    let mut lps = vec![0usize; m];
    let mut k = 0usize;
    for i in 1..m {
        while k > 0 && pattern[k] != pattern[i] {
            k = lps[k - 1];
        }
        if pattern[k] == pattern[i] {
            k += 1;
        }
        lps[i] = k;
    }
    (0..m).map(|i| (i + 1 - lps[i]) as u64).collect()
}

/// What happened inside the tracker during one push.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Event {
    /// A new position entered level 0.
    Inserted { pos: u64 },
    /// `pos` was verified as an occurrence of the next prefix and moved from
    /// level `from` to `from + 1`.
    Promoted { from: usize, pos: u64 },
    /// `pos` failed the next-prefix check and left level `level`.
    #[allow(dead_code)]
    Discarded { level: usize, pos: u64 },
    /// `pos` was verified as an occurrence of the whole pattern, ending at
    /// text position `end` (the current time).
    Occurrence { pos: u64, end: u64 },
}

/// Positions stored at one level: at most two explicit entries, or one
/// arithmetic progression whose difference is the level prefix's minimal
/// period.
#[derive(Debug, Clone)]
enum Slot {
    Few(Vec<(u64, Fingerprint)>),
    Prog {
        first: u64,
        first_fp: Fingerprint,
        diff: u64,
        count: u64,
    },
}

/// Pattern preprocessing shared by clones of one matcher.
#[derive(Debug)]
struct Shape {
    pattern: Vec<u8>,
    /// `min(2^j, m)` for levels `j = 0..=top`.
    plen: Vec<u64>,
    /// Fingerprint of the pattern prefix of length `plen[j]`.
    prefix_fp: Vec<Fingerprint>,
    /// Minimal period of the prefix at each storage level.
    period: Vec<u64>,
    /// Fingerprint of `pattern[..period[j]]`, the progression step block.
    period_fp: Vec<Fingerprint>,
}

/// The level structure over one pattern. [`ExactMatcher`] is its public face;
/// the 1-mismatch machinery drives it directly to observe promotions.
#[derive(Debug, Clone)]
pub(crate) struct Tracker {
    shape: Arc<Shape>,
    levels: Vec<Slot>,
    text_fp: Fingerprint,
    time: u64,
}

impl Tracker {
    pub(crate) fn new(pattern: &[u8], params: &FingerprintParams) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        let m = pattern.len() as u64;
        let top = field::ceil_log2(m) as usize;
        let plen: Vec<u64> = (0..=top).map(|j| (1u64 << j).min(m)).collect();
        let mut prefix_fp = Vec::with_capacity(top + 1);
        for &l in &plen {
            prefix_fp.push(params.fingerprint(&pattern[..l as usize])?);
        }
        let periods = prefix_periods(pattern);
        let mut period = Vec::with_capacity(top);
        let mut period_fp = Vec::with_capacity(top);
        for j in 0..top {
            let d = periods[plen[j] as usize - 1];
            period.push(d);
            period_fp.push(params.fingerprint(&pattern[..d as usize])?);
        }
        Ok(Tracker {
            shape: Arc::new(Shape {
                pattern: pattern.to_vec(),
                plen,
                prefix_fp,
                period,
                period_fp,
            }),
            levels: vec![Slot::Few(Vec::new()); top],
            text_fp: Fingerprint::EMPTY,
            time: 0,
        })
    }

    pub(crate) fn pattern(&self) -> &[u8] {
        &self.shape.pattern
    }

    pub(crate) fn time(&self) -> u64 {
        self.time
    }

    /// Number of levels, counting the top (emission) level.
    pub(crate) fn level_count(&self) -> usize {
        self.levels.len() + 1
    }

    pub(crate) fn push(
        &mut self,
        sym: u8,
        params: &FingerprintParams,
        events: &mut Vec<Event>,
    ) -> Result<()> {
        let code = params.alphabet().encode(sym)?;
        let q = self.time + 1;
        let prev_fp = self.text_fp;
        self.text_fp = params.append_code(&self.text_fp, code);
        self.time = q;
        let top = self.levels.len();
        for j in (0..top).rev() {
            let next_len = self.shape.plen[j + 1];
            let due = match self.leftmost(j) {
                Some((pos, _)) => {
                    debug_assert!(pos + next_len - 1 >= q, "stored position overdue");
                    pos + next_len - 1 == q
                }
                None => false,
            };
            if !due {
                continue;
            }
            let (pos, pfp) = self.pop_leftmost(j, params);
            let win = params
                .cut_prefix(&self.text_fp, &pfp)
                .expect("prefix no longer than text");
            if win == self.shape.prefix_fp[j + 1] {
                if j + 1 == top {
                    events.push(Event::Occurrence { pos, end: q });
                } else {
                    self.insert(j + 1, pos, pfp);
                    events.push(Event::Promoted { from: j, pos });
                }
            } else {
                events.push(Event::Discarded { level: j, pos });
            }
        }
        if sym == self.shape.pattern[0] {
            if top == 0 {
                events.push(Event::Occurrence { pos: q, end: q });
            } else {
                self.insert(0, q, prev_fp);
                events.push(Event::Inserted { pos: q });
            }
        }
        Ok(())
    }

    fn leftmost(&self, j: usize) -> Option<(u64, Fingerprint)> {
        match &self.levels[j] {
            Slot::Few(v) => v.first().copied(),
            Slot::Prog { first, first_fp, .. } => Some((*first, *first_fp)),
        }
    }

    fn pop_leftmost(&mut self, j: usize, params: &FingerprintParams) -> (u64, Fingerprint) {
        let block = self.shape.period_fp.get(j).copied();
        match &mut self.levels[j] {
            Slot::Few(v) => v.remove(0),
            Slot::Prog {
                first,
                first_fp,
                diff,
                count,
            } => {
                let out = (*first, *first_fp);
                let block = block.expect("storage level has a period block");
                *first += *diff;
                *first_fp = params.concat(first_fp, &block);
                *count -= 1;
                if *count == 2 {
                    let e1 = (*first, *first_fp);
                    let e2 = (*first + *diff, params.concat(first_fp, &block));
                    self.levels[j] = Slot::Few(vec![e1, e2]);
                }
                out
            }
        }
    }

    fn insert(&mut self, j: usize, pos: u64, pfp: Fingerprint) {
        match &mut self.levels[j] {
            Slot::Few(v) if v.len() < 2 => {
                debug_assert!(v.last().map_or(true, |&(p, _)| p < pos));
                v.push((pos, pfp));
            }
            Slot::Few(v) => {
                let d = v[1].0 - v[0].0;
                if d == self.shape.period[j] && pos - v[1].0 == d {
                    self.levels[j] = Slot::Prog {
                        first: v[0].0,
                        first_fp: v[0].1,
                        diff: d,
                        count: 3,
                    };
                } else {
                    // Only reachable through a fingerprint collision: three
                    // coexisting occurrences must form a period progression.
                    debug_assert!(false, "non-periodic triple at level {j}");
                    v.remove(0);
                    v.push((pos, pfp));
                }
            }
            Slot::Prog {
                first, diff, count, ..
            } => {
                if pos == *first + *diff * *count {
                    *count += 1;
                } else {
                    debug_assert!(false, "position does not extend progression at level {j}");
                }
            }
        }
    }

    /// Fingerprint of `T[1, pos-1]` for a currently stored position.
    /// Progression-interior positions are reconstructed from the progression
    /// head and a power of the period block.
    pub(crate) fn prefix_fp_of(&self, pos: u64, params: &FingerprintParams) -> Option<Fingerprint> {
        for (j, slot) in self.levels.iter().enumerate() {
            match slot {
                Slot::Few(v) => {
                    if let Some(&(_, fp)) = v.iter().find(|&&(p, _)| p == pos) {
                        return Some(fp);
                    }
                }
                Slot::Prog {
                    first,
                    first_fp,
                    diff,
                    count,
                } => {
                    if pos >= *first && (pos - first) % diff == 0 {
                        let t = (pos - first) / diff;
                        if t < *count {
                            let jump = params.power(&self.shape.period_fp[j], t);
                            return Some(params.concat(first_fp, &jump));
                        }
                    }
                }
            }
        }
        None
    }

    /// Stored positions of one level, oldest first. Test instrumentation.
    pub(crate) fn positions_at(&self, j: usize) -> Vec<u64> {
        match &self.levels[j] {
            Slot::Few(v) => v.iter().map(|&(p, _)| p).collect(),
            Slot::Prog {
                first, diff, count, ..
            } => (0..*count).map(|t| first + t * diff).collect(),
        }
    }

    /// `(explicit entries, has progression)` for one level. Test
    /// instrumentation for the space-shape invariant.
    pub(crate) fn level_shape(&self, j: usize) -> (usize, bool) {
        match &self.levels[j] {
            Slot::Few(v) => (v.len(), false),
            Slot::Prog { .. } => (0, true),
        }
    }

    pub(crate) fn storage_levels(&self) -> usize {
        self.levels.len()
    }
}

/// Streaming matcher reporting the end position of every exact occurrence of
/// a single pattern, as it occurs.
#[derive(Debug, Clone)]
pub struct ExactMatcher {
    tracker: Tracker,
}

impl ExactMatcher {
    pub fn new(pattern: &[u8], params: &FingerprintParams) -> Result<Self> {
        Ok(ExactMatcher {
            tracker: Tracker::new(pattern, params)?,
        })
    }

    pub fn pattern(&self) -> &[u8] {
        self.tracker.pattern()
    }

    /// Text positions consumed so far.
    pub fn time(&self) -> u64 {
        self.tracker.time()
    }

    /// Number of levels, counting the top.
    pub fn level_count(&self) -> usize {
        self.tracker.level_count()
    }

    /// Feeds one text symbol; returns the end positions of occurrences
    /// completed by it (0 or 1 for a single pattern).
    pub fn push(&mut self, sym: u8, params: &FingerprintParams) -> Result<Vec<u64>> {
        let mut events = Vec::new();
        self.tracker.push(sym, params, &mut events)?;
        Ok(events
            .iter()
            .filter_map(|e| match e {
                Event::Occurrence { end, .. } => Some(*end),
                _ => None,
            })
            .collect())
    }

    /// `phi(T[1, pos-1])` for a position currently stored at some level.
    pub fn prefix_fingerprint_at(
        &self,
        pos: u64,
        params: &FingerprintParams,
    ) -> Result<Fingerprint> {
        self.tracker
            .prefix_fp_of(pos, params)
            .ok_or(Error::PositionNotStored(pos))
    }

    #[doc(hidden)]
    pub fn positions_at_level(&self, j: usize) -> Vec<u64> {
        self.tracker.positions_at(j)
    }

    #[doc(hidden)]
    pub fn level_shape(&self, j: usize) -> (usize, bool) {
        self.tracker.level_shape(j)
    }

    #[doc(hidden)]
    pub fn storage_levels(&self) -> usize {
        self.tracker.storage_levels()
    }
}

/// Dictionary matching as independent parallel single-pattern matchers:
/// `O(sum log |D_i|)` space, `O(|D|)` matcher steps per symbol.
#[derive(Debug, Clone)]
pub struct DictMatcher {
    matchers: Vec<ExactMatcher>,
}

impl DictMatcher {
    pub fn new<P: AsRef<[u8]>>(patterns: &[P], params: &FingerprintParams) -> Result<Self> {
        let matchers = patterns
            .iter()
            .map(|p| ExactMatcher::new(p.as_ref(), params))
            .collect::<Result<_>>()?;
        Ok(DictMatcher { matchers })
    }

    pub fn len(&self) -> usize {
        self.matchers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matchers.is_empty()
    }

    /// Feeds one symbol to every pattern; returns `(pattern id, end)` pairs.
    pub fn push(&mut self, sym: u8, params: &FingerprintParams) -> Result<Vec<(usize, u64)>> {
        let mut out = Vec::new();
        for (id, m) in self.matchers.iter_mut().enumerate() {
            for end in m.push(sym, params)? {
                out.push((id, end));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> FingerprintParams {
        FingerprintParams::new(1 << 17, 42)
    }

    fn naive_ends(pattern: &[u8], text: &[u8]) -> Vec<u64> {
        if pattern.len() > text.len() {
            return Vec::new();
        }
        (0..=text.len() - pattern.len())
            .filter(|&i| &text[i..i + pattern.len()] == pattern)
            .map(|i| (i + pattern.len()) as u64)
            .collect()
    }

    fn run(pattern: &[u8], text: &[u8]) -> Vec<u64> {
        let params = params();
        let mut m = ExactMatcher::new(pattern, &params).unwrap();
        let mut out = Vec::new();
        for &b in text {
            out.extend(m.push(b, &params).unwrap());
        }
        out
    }

    #[test]
    fn level_counts() {
        let params = params();
        assert_eq!(ExactMatcher::new(b"a", &params).unwrap().level_count(), 1);
        assert_eq!(
            ExactMatcher::new(b"abcdefgh", &params).unwrap().level_count(),
            4
        );
        assert_eq!(ExactMatcher::new(b"abcde", &params).unwrap().level_count(), 4);
        assert!(ExactMatcher::new(b"", &params).is_err());
    }

    #[test]
    fn prefix_periods_match_failure_function() {
        assert_eq!(prefix_periods(b"abababab"), vec![1, 2, 2, 2, 2, 2, 2, 2]);
        assert_eq!(prefix_periods(b"aaaa"), vec![1, 1, 1, 1]);
        assert_eq!(prefix_periods(b"abca"), vec![1, 2, 3, 3]);
    }

    #[test]
    fn simple_emissions() {
        assert_eq!(run(b"ab", b"abab"), vec![2, 4]);
        assert_eq!(run(b"aaa", b"aaaa"), vec![3, 4]);
        assert_eq!(run(b"a", b"bab"), vec![2]);
        assert_eq!(run(b"abc", b"ab"), Vec::<u64>::new());
    }

    #[test]
    fn matches_naive_on_random_streams() {
        let params = params();
        for seed in 0..6u64 {
            let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state
            };
            let sigma = if seed % 2 == 0 { 2 } else { 4 };
            let text: Vec<u8> = (0..3000).map(|_| b'a' + (next() % sigma) as u8).collect();
            let plen = [3usize, 8, 17][seed as usize % 3];
            let pat: Vec<u8> = (0..plen).map(|_| b'a' + (next() % sigma) as u8).collect();
            let mut m = ExactMatcher::new(&pat, &params).unwrap();
            let mut got = Vec::new();
            for &b in &text {
                got.extend(m.push(b, &params).unwrap());
            }
            assert_eq!(got, naive_ends(&pat, &text), "seed {seed}");
        }
    }

    #[test]
    fn periodic_pattern_uses_progressions() {
        let params = params();
        let pat: Vec<u8> = b"ab".repeat(16);
        let text: Vec<u8> = b"ab".repeat(200);
        let mut m = ExactMatcher::new(&pat, &params).unwrap();
        let mut got = Vec::new();
        let mut saw_progression = false;
        for &b in &text {
            got.extend(m.push(b, &params).unwrap());
            for j in 0..m.storage_levels() {
                let (explicit, prog) = m.level_shape(j);
                assert!(explicit <= 2, "level {j} holds {explicit} explicit entries");
                saw_progression |= prog;
                if prog {
                    let pos = m.positions_at_level(j);
                    for w in pos.windows(2) {
                        assert_eq!(w[1] - w[0], 2, "progression step is the period");
                    }
                }
            }
        }
        assert!(saw_progression, "periodic instance never compressed");
        assert_eq!(got, naive_ends(&pat, &text));
    }

    #[test]
    fn prefix_fingerprints_are_retrievable() {
        let params = params();
        let pat: Vec<u8> = b"aa".to_vec();
        let text: Vec<u8> = b"aaaaaaaa".to_vec();
        let mut m = ExactMatcher::new(&pat, &params).unwrap();
        for (i, &b) in text.iter().enumerate() {
            m.push(b, &params).unwrap();
            let q = (i + 1) as u64;
            // Every stored position's prefix fingerprint equals a direct
            // computation over the retained text copy.
            for j in 0..m.storage_levels() {
                for pos in m.positions_at_level(j) {
                    let direct = params.fingerprint(&text[..(pos - 1) as usize]).unwrap();
                    assert_eq!(
                        m.prefix_fingerprint_at(pos, &params).unwrap(),
                        direct,
                        "pos {pos} at time {q}"
                    );
                }
            }
        }
        assert!(m.prefix_fingerprint_at(9999, &params).is_err());
    }

    #[test]
    fn dictionary_reports_all_patterns() {
        let params = params();
        let mut dm = DictMatcher::new(&[b"ab".as_slice(), b"ba"], &params).unwrap();
        let mut got = Vec::new();
        for &b in b"aba" {
            got.extend(dm.push(b, &params).unwrap());
        }
        assert_eq!(got, vec![(0, 2), (1, 3)]);

        // Duplicate strings are reported under both ids.
        let mut dm = DictMatcher::new(&[b"aa".as_slice(), b"aa"], &params).unwrap();
        let mut got = Vec::new();
        for &b in b"aaa" {
            got.extend(dm.push(b, &params).unwrap());
        }
        assert_eq!(got, vec![(0, 2), (1, 2), (0, 3), (1, 3)]);

        let mut dm = DictMatcher::new(&[b"xy".as_slice()], &params).unwrap();
        for &b in b"aaa" {
            assert!(dm.push(b, &params).unwrap().is_empty());
        }
    }
}
