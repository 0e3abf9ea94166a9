//! Streaming 1-mismatch matching with error correcting.
//!
//! For every text window at Hamming distance at most 1 from the pattern, the
//! matcher reports the distance and, for distance-1 windows, the mismatch
//! position together with the pattern and text symbols there — without ever
//! storing the text.
//!
//! The pattern is split into `ceil(log m) + 1` partitions `P = P_i S_i` with
//! `|P_i| = min(2^i, m)`. Every 1-mismatch occurrence of `P` is a right-half
//! 1-mismatch occurrence of exactly one `P_i` followed by an exact occurrence
//! of `S_i`. Per partition, a first process detects right-half 1-mismatch
//! occurrences of `P_i` (one exact lane matcher per prime, subpattern lane
//! and substream class; a window mismatches in exactly one lane per prime iff
//! its distance is 1, and the lane indices CRT-combine to the position). A
//! second process runs the level matcher over `S_i` and transports 1-mismatch
//! sketches of the text prefixes across levels through anchor positions and
//! period powers, so the final report can recover the mismatched symbol from
//! sketches alone. Exact occurrences of `P` are found by one additional
//! plain matcher and merged in.

use crate::error::Error;
use crate::field;
use crate::fingerprint::{Fingerprint, FingerprintParams};
use crate::mismatch_sketch::{locate_single_mismatch, MismatchVerdict, PrimeSet, SketchFamily};
use crate::stream_match::{prefix_periods, Event, ExactMatcher, Tracker};
use crate::Result;

/// One corrected position of a near-occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Correction {
    /// 1-based position in the pattern.
    pub pos: u64,
    pub pattern_sym: u8,
    pub text_sym: u8,
}

/// Occurrence record: end position, Hamming distance, and the correction for
/// distance-1 windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchReport {
    pub end: u64,
    pub distance: usize,
    pub correction: Option<Correction>,
}

/// Internal observations surfaced for verification; only recorded by
/// matchers built with [`OneMismatchMatcher::with_trace`].
#[derive(Debug, Clone)]
pub enum TraceEvent {
    /// The first process of partition `partition` saw a right-half
    /// 1-mismatch occurrence of `P_i` ending at `end` and reconstructed the
    /// window's sketch family.
    RightHalf {
        partition: usize,
        end: u64,
        mismatch_pos: u64,
        window_family: SketchFamily,
    },
    /// `verify_position` classified `pos` (stored at `level` of `S_i`'s
    /// matcher) as preceded by a right-half occurrence and produced the
    /// sketch families of `T[1, pos - 2^i - 1]` and `T[1, pos - 1]`.
    Verified {
        partition: usize,
        level: usize,
        pos: u64,
        before_family: SketchFamily,
        through_family: SketchFamily,
    },
    /// A report was emitted through partition `partition` (`None` for the
    /// exact-match path).
    Emitted {
        partition: Option<usize>,
        end: u64,
        distance: usize,
    },
}

/// Right-half detection passed from the first to the second process. A
/// detection with end position `q` flags text position `q + 1` when it enters
/// level 0 of the suffix matcher on the following arrival.
#[derive(Debug, Clone)]
struct Detection {
    end: u64,
    mismatch_pos: u64,
    text_sym: u8,
    /// Family of `T[1, end - |P_i|]`.
    before: SketchFamily,
    /// Family of `T[1, end]`.
    through: SketchFamily,
}

// ---------------------------------------------------------------------------
// First process: right-half 1-mismatch occurrences of P_i.

/// One exact matcher per (subpattern lane, substream class), with the text
/// end position of its most recent occurrence. The next class symbol always
/// arrives after the alignment that consumes a record, so one slot per cell
/// suffices.
#[derive(Debug, Clone)]
struct Cell {
    matcher: ExactMatcher,
    last_end: Option<u64>,
}

#[derive(Debug, Clone)]
struct LaneRow {
    /// Number of symbols in this subpattern lane.
    len: u64,
    cells: Vec<Cell>,
}

#[derive(Debug, Clone)]
struct Grid {
    prime: u64,
    rows: Vec<LaneRow>,
}

#[derive(Debug, Clone)]
struct FirstProcess {
    w: u64,
    grids: Vec<Grid>,
}

impl FirstProcess {
    fn new(pi: &[u8], primes: &PrimeSet, params: &FingerprintParams) -> Result<Self> {
        let w = pi.len() as u64;
        let mut grids = Vec::with_capacity(primes.primes().len());
        for &prime in primes.primes() {
            let lanes = (prime.min(w)) as usize;
            let mut rows = Vec::with_capacity(lanes);
            for j0 in 0..lanes {
                let sub: Vec<u8> = pi.iter().copied().skip(j0).step_by(prime as usize).collect();
                let proto = ExactMatcher::new(&sub, params)?;
                let cells = (0..prime)
                    .map(|_| Cell {
                        matcher: proto.clone(),
                        last_end: None,
                    })
                    .collect();
                rows.push(LaneRow {
                    len: sub.len() as u64,
                    cells,
                });
            }
            grids.push(Grid { prime, rows });
        }
        Ok(FirstProcess { w, grids })
    }

    /// Routes the arriving symbol (text position `q`) to its substream class
    /// of every prime and advances the lane matchers of that class.
    fn push(&mut self, sym: u8, q: u64, params: &FingerprintParams) -> Result<()> {
        for grid in &mut self.grids {
            let c = ((q - 1) % grid.prime) as usize;
            for row in &mut grid.rows {
                let cell = &mut row.cells[c];
                if !cell.matcher.push(sym, params)?.is_empty() {
                    cell.last_end = Some(q);
                }
            }
        }
        Ok(())
    }

    /// Whether the window `T[q-w+1, q]` differs from `P_i` in exactly one
    /// position; returns that position (1-based in `P_i`). Requires `q >= w`.
    fn detect(&self, q: u64) -> Option<u64> {
        let w = self.w;
        let mut residues = Vec::with_capacity(self.grids.len());
        for grid in &self.grids {
            let mut failing = None;
            let mut fail_count = 0u32;
            for (j0, row) in grid.rows.iter().enumerate() {
                let j = j0 as u64 + 1;
                let tp = q - w + j + grid.prime * (row.len - 1);
                let c = ((tp - 1) % grid.prime) as usize;
                if row.cells[c].last_end != Some(tp) {
                    fail_count += 1;
                    if fail_count > 1 {
                        return None;
                    }
                    failing = Some(j0 as u64);
                }
            }
            match failing {
                Some(j0) => residues.push((j0, grid.prime)),
                None => return None, // exact in this prime: distance 0 or inconsistent
            }
        }
        let pos0 = match field::crt(&residues) {
            Some(x) if x < w as u128 => x as u64,
            _ => return None,
        };
        Some(pos0 + 1)
    }
}

// ---------------------------------------------------------------------------
// Second process: exact occurrences of S_i with sketch transport.

/// Anchors of one progression run at one level: the first flagged position
/// (with both prefix families) and up to three later flagged positions (the
/// leftmost of each quarter-window after the head).
#[derive(Debug, Clone)]
struct RunAnchors {
    start_pos: u64,
    head: Option<AnchorHead>,
    more: Vec<AnchorEntry>,
}

#[derive(Debug, Clone)]
struct AnchorHead {
    pos: u64,
    before: SketchFamily,
    through: SketchFamily,
}

#[derive(Debug, Clone)]
struct AnchorEntry {
    slot: u64,
    pos: u64,
    before: SketchFamily,
    /// Stored only in the collapsed small-`i` regime, where every anchor is
    /// consulted by exact position.
    through: Option<SketchFamily>,
}

#[derive(Debug, Clone)]
struct VerifyOutcome {
    before: SketchFamily,
    through: SketchFamily,
    mismatch_pos: u64,
    text_sym: u8,
}

#[derive(Debug, Clone)]
struct SuffixMachine {
    tracker: Tracker,
    /// Minimal period of `S_i[1, min(2^j, |S_i|)]` per storage level.
    rho: Vec<u64>,
    rho_family: Vec<SketchFamily>,
    /// `(-2^i) mod rho_j` per storage level.
    delta: Vec<u64>,
    delta_family: Vec<SketchFamily>,
    /// Live progression runs per storage level, oldest first (at most two
    /// runs can have stored positions at once).
    runs: Vec<Vec<RunAnchors>>,
    last_inserted: Vec<Option<u64>>,
    events: Vec<Event>,
}

impl SuffixMachine {
    fn new(suffix: &[u8], wi: u64, primes: &PrimeSet, params: &FingerprintParams) -> Result<Self> {
        let tracker = Tracker::new(suffix, params)?;
        let storage = tracker.storage_levels();
        let periods = prefix_periods(suffix);
        let mut rho = Vec::with_capacity(storage);
        let mut rho_family = Vec::with_capacity(storage);
        let mut delta = Vec::with_capacity(storage);
        let mut delta_family = Vec::with_capacity(storage);
        for j in 0..storage {
            let plen = (1u64 << j).min(suffix.len() as u64);
            let r = periods[plen as usize - 1];
            rho.push(r);
            rho_family.push(SketchFamily::build(&suffix[..r as usize], primes, params)?);
            let d = (r - wi % r) % r;
            delta.push(d);
            delta_family.push(SketchFamily::build(&suffix[..d as usize], primes, params)?);
        }
        Ok(SuffixMachine {
            tracker,
            rho,
            rho_family,
            delta,
            delta_family,
            runs: vec![Vec::new(); storage],
            last_inserted: vec![None; storage],
            events: Vec::new(),
        })
    }

    /// A new long progression starts when the gap between consecutive
    /// insertions exceeds the level's period; its anchors start empty.
    fn on_insert(&mut self, level: usize, pos: u64) {
        let fresh = match self.last_inserted[level] {
            Some(prev) => pos - prev > self.rho[level],
            None => true,
        };
        self.last_inserted[level] = Some(pos);
        if fresh {
            let runs = &mut self.runs[level];
            runs.push(RunAnchors {
                start_pos: pos,
                head: None,
                more: Vec::new(),
            });
            // Positions of at most two runs can be stored at one level.
            if runs.len() > 2 {
                runs.remove(0);
            }
        }
    }

    fn run_for(&self, level: usize, pos: u64) -> Option<&RunAnchors> {
        self.runs[level]
            .iter()
            .rev()
            .find(|r| r.start_pos <= pos)
    }

    fn run_for_mut(&mut self, level: usize, pos: u64) -> Option<&mut RunAnchors> {
        self.runs[level]
            .iter_mut()
            .rev()
            .find(|r| r.start_pos <= pos)
    }

    /// Records `pos` (flagged as preceded by a right-half occurrence, with
    /// its prefix families) in the anchor set of its run at `level`.
    fn anchor_update(
        &mut self,
        level: usize,
        pos: u64,
        wi: u64,
        before: SketchFamily,
        through: SketchFamily,
    ) {
        let small = wi < 4;
        let Some(run) = self.run_for_mut(level, pos) else {
            return;
        };
        match &run.head {
            None => {
                run.head = Some(AnchorHead {
                    pos,
                    before,
                    through,
                });
            }
            Some(h) => {
                let off = pos - h.pos;
                if off >= wi {
                    return; // beyond the anchor range; period transport covers it
                }
                if small {
                    if run.more.iter().all(|e| e.pos != pos) && run.more.len() < 3 {
                        run.more.push(AnchorEntry {
                            slot: off,
                            pos,
                            before,
                            through: Some(through),
                        });
                    }
                } else {
                    let aw = wi / 4;
                    let slot = off / aw; // 0 = head's own window
                    if slot >= 1 && run.more.iter().all(|e| e.slot != slot) {
                        run.more.push(AnchorEntry {
                            slot,
                            pos,
                            before,
                            through: None,
                        });
                    }
                }
            }
        }
        debug_assert!(self.runs[level].iter().all(|r| r.more.len() <= 3));
    }

    /// Decides whether `pos` (stored at `level`, about to be promoted) is
    /// preceded by a right-half 1-mismatch occurrence of `P_i`, and if so
    /// returns the sketch families of `T[1, pos - 2^i - 1]` and
    /// `T[1, pos - 1]` together with the recovered mismatch.
    ///
    /// Case 1: `pos` outside every anchor window — no. Case 2: `pos` within
    /// a quarter-window of an anchor — extend the anchor's families by a
    /// power of the minimal period of `P_i[1, 2^(i-1)]` (the two left-half
    /// occurrences overlap by at least `2^(i-2)`, so the gap is a period
    /// power) and the head's by a power of the level period. Case 3: `pos`
    /// at least `2^i` past the head — the window lies inside the level-period
    /// power region, so it is a period power with a `delta_j`-prefix cut.
    #[allow(clippy::too_many_arguments)]
    fn verify(
        &self,
        level: usize,
        pos: u64,
        wi: u64,
        half_period: u64,
        half_period_family: Option<&SketchFamily>,
        pi_family: &SketchFamily,
        pi_codes: &[u64],
        params: &FingerprintParams,
    ) -> Option<VerifyOutcome> {
        let run = self.run_for(level, pos)?;
        let head = run.head.as_ref()?;
        if pos < head.pos {
            return None;
        }
        let off = pos - head.pos;
        let small = wi < 4;
        let rho = self.rho[level];

        let case2 = |apos: u64, abefore: &SketchFamily| -> Option<(SketchFamily, SketchFamily)> {
            let e = pos - apos;
            let before = if e == 0 {
                abefore.clone()
            } else {
                let hp = half_period_family?;
                if e % half_period != 0 {
                    return None;
                }
                abefore
                    .concat(&hp.power(e / half_period, params), params)
                    .ok()?
            };
            let e1 = pos - head.pos;
            if e1 % rho != 0 {
                return None;
            }
            let through = head
                .through
                .concat(&self.rho_family[level].power(e1 / rho, params), params)
                .ok()?;
            Some((before, through))
        };

        let fams = if small {
            if pos == head.pos {
                Some((head.before.clone(), head.through.clone()))
            } else if let Some(e) = run.more.iter().find(|e| e.pos == pos) {
                Some((e.before.clone(), e.through.clone().expect("small-i anchors keep both")))
            } else if off >= wi {
                self.case3(level, pos, wi, head, params)
            } else {
                None
            }
        } else if off < wi / 4 {
            case2(head.pos, &head.before)
        } else if off >= wi {
            self.case3(level, pos, wi, head, params)
        } else {
            let aw = wi / 4;
            let slot = off / aw;
            match run.more.iter().find(|e| e.slot == slot && pos >= e.pos && pos - e.pos < aw) {
                Some(e) => case2(e.pos, &e.before),
                None => None,
            }
        };

        let (before, through) = fams?;
        debug_assert_eq!(through.len() - before.len(), wi);
        let window = SketchFamily::cut_prefix(&through, &before, params).ok()?;
        self.confirm(window, before, through, wi, pi_family, pi_codes, params)
    }

    /// Case 3 prefix families: the window is a suffix of the period-power
    /// region that starts at the head.
    fn case3(
        &self,
        level: usize,
        pos: u64,
        wi: u64,
        head: &AnchorHead,
        params: &FingerprintParams,
    ) -> Option<(SketchFamily, SketchFamily)> {
        let rho = self.rho[level];
        let e1 = pos - head.pos;
        if e1 % rho != 0 {
            return None;
        }
        let through = head
            .through
            .concat(&self.rho_family[level].power(e1 / rho, params), params)
            .ok()?;
        let t = (wi + self.delta[level]) / rho;
        debug_assert_eq!((wi + self.delta[level]) % rho, 0);
        let power = self.rho_family[level].power(t, params);
        let window = SketchFamily::cut_prefix(&power, &self.delta_family[level], params).ok()?;
        let before = SketchFamily::cut_suffix(&through, &window, params).ok()?;
        Some((before, through))
    }

    /// Compares the reconstructed window family against `P_i`'s and demands a
    /// single right-half mismatch whose difference decodes to a letter.
    fn confirm(
        &self,
        window: SketchFamily,
        before: SketchFamily,
        through: SketchFamily,
        wi: u64,
        pi_family: &SketchFamily,
        pi_codes: &[u64],
        params: &FingerprintParams,
    ) -> Option<VerifyOutcome> {
        let half = wi / 2;
        match locate_single_mismatch(&window, pi_family, params).ok()? {
            MismatchVerdict::Single { pos, diff } if pos > half => {
                let pat_code = pi_codes[pos as usize - 1];
                let txt_code = field::add(pat_code, diff, params.modulus());
                let text_sym = params.alphabet().decode(txt_code)?;
                let _ = before;
                Some(VerifyOutcome {
                    before,
                    through,
                    mismatch_pos: pos,
                    text_sym,
                })
            }
            _ => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Partitions and the assembled matcher.

#[derive(Debug, Clone)]
struct Partition {
    index: usize,
    /// `|P_i| = min(2^i, m)`.
    w: u64,
    /// Right-half threshold `2^(i-1)` (0 for the first partition).
    half: u64,
    pi_fp: Fingerprint,
    pi_family: SketchFamily,
    pi_codes: Vec<u64>,
    detector: Option<FirstProcess>,
    pi_tracker: Option<Tracker>,
    /// Minimal period of `P_i[1, 2^(i-1)]` and the family of that block.
    half_period: u64,
    half_period_family: Option<SketchFamily>,
    /// Running family of `T[1, q]` under this partition's prime set.
    running: SketchFamily,
    suffix: Option<SuffixMachine>,
    pending: Option<Detection>,
}

/// Streaming 1-mismatch-with-error-correcting matcher.
#[derive(Debug, Clone)]
pub struct OneMismatchMatcher {
    pattern: Vec<u8>,
    exact: ExactMatcher,
    partitions: Vec<Partition>,
    text_fp: Fingerprint,
    time: u64,
    trace: bool,
    anomalies: u64,
    scratch: Vec<Event>,
}

impl OneMismatchMatcher {
    pub fn new(pattern: &[u8], params: &FingerprintParams) -> Result<Self> {
        Self::build(pattern, params, false)
    }

    /// Like [`OneMismatchMatcher::new`], but `push_detailed` records trace
    /// events describing sketch transport and right-half detections.
    pub fn with_trace(pattern: &[u8], params: &FingerprintParams) -> Result<Self> {
        Self::build(pattern, params, true)
    }

    fn build(pattern: &[u8], params: &FingerprintParams, trace: bool) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::EmptyPattern);
        }
        let m = pattern.len() as u64;
        let top = field::ceil_log2(m) as usize;
        let mut partitions = Vec::with_capacity(top + 1);
        for i in 0..=top {
            let w = (1u64 << i).min(m);
            let pi = &pattern[..w as usize];
            let primes = PrimeSet::for_length(w);
            let pi_family = SketchFamily::build(pi, &primes, params)?;
            let pi_codes = pi
                .iter()
                .map(|&b| params.alphabet().encode(b))
                .collect::<Result<Vec<_>>>()?;
            let (detector, pi_tracker) = if i == 0 {
                (None, None)
            } else {
                (
                    Some(FirstProcess::new(pi, &primes, params)?),
                    Some(Tracker::new(pi, params)?),
                )
            };
            let (half_period, half_period_family) = if i >= 1 {
                let hlen = 1usize << (i - 1);
                let hp = prefix_periods(&pi[..hlen])[hlen - 1];
                (
                    hp,
                    Some(SketchFamily::build(&pi[..hp as usize], &primes, params)?),
                )
            } else {
                (1, None)
            };
            let suffix_sym = &pattern[w as usize..];
            let suffix = if suffix_sym.is_empty() {
                None
            } else {
                Some(SuffixMachine::new(suffix_sym, w, &primes, params)?)
            };
            partitions.push(Partition {
                index: i,
                w,
                half: if i == 0 { 0 } else { 1 << (i - 1) },
                pi_fp: params.fingerprint(pi)?,
                pi_family,
                pi_codes,
                detector,
                pi_tracker,
                half_period,
                half_period_family,
                running: SketchFamily::empty(&primes),
                suffix,
                pending: None,
            });
        }
        Ok(OneMismatchMatcher {
            pattern: pattern.to_vec(),
            exact: ExactMatcher::new(pattern, params)?,
            partitions,
            text_fp: Fingerprint::EMPTY,
            time: 0,
            trace,
            anomalies: 0,
            scratch: Vec::new(),
        })
    }

    pub fn pattern(&self) -> &[u8] {
        &self.pattern
    }

    pub fn partition_count(&self) -> usize {
        self.partitions.len()
    }

    /// Detected inconsistencies (failed decodes, missing prefix
    /// fingerprints); all are fingerprint-collision events and stay at zero
    /// under the test seeds.
    pub fn anomalies(&self) -> u64 {
        self.anomalies
    }

    pub fn push(&mut self, sym: u8, params: &FingerprintParams) -> Result<Vec<MatchReport>> {
        Ok(self.push_detailed(sym, params)?.0)
    }

    /// Feeds one symbol; returns the reports ending at it plus trace events
    /// when tracing is enabled.
    pub fn push_detailed(
        &mut self,
        sym: u8,
        params: &FingerprintParams,
    ) -> Result<(Vec<MatchReport>, Vec<TraceEvent>)> {
        let code = params.alphabet().encode(sym)?;
        let q = self.time + 1;
        self.time = q;
        self.text_fp = params.append_code(&self.text_fp, code);

        let mut found: Vec<(Option<usize>, MatchReport)> = Vec::new();
        let mut traces: Vec<TraceEvent> = Vec::new();

        for end in self.exact.push(sym, params)? {
            found.push((
                None,
                MatchReport {
                    end,
                    distance: 0,
                    correction: None,
                },
            ));
        }

        let trace = self.trace;
        let pattern_first = self.pattern[0];
        for pi in 0..self.partitions.len() {
            // Second process first: it consumes the detection of time q-1
            // when the arriving symbol starts an S_i candidate.
            let flag = self.partitions[pi].pending.take();
            self.advance_suffix(pi, sym, flag, params, &mut found, &mut traces)?;

            // First process: advance lane matchers and the P_i level matcher,
            // then check whether a right-half occurrence ends at q.
            let detection =
                self.advance_first(pi, sym, code, q, pattern_first, params, &mut traces)?;
            let part = &mut self.partitions[pi];
            match detection {
                Some(det) if part.suffix.is_none() => {
                    // Empty suffix: a right-half occurrence of P_i is already
                    // a 1-mismatch occurrence of the whole pattern.
                    let pos = det.mismatch_pos;
                    found.push((
                        Some(pi),
                        MatchReport {
                            end: det.end,
                            distance: 1,
                            correction: Some(Correction {
                                pos,
                                pattern_sym: self.pattern[pos as usize - 1],
                                text_sym: det.text_sym,
                            }),
                        },
                    ));
                }
                det => part.pending = det,
            }
        }

        // At most one report per end position can exist; duplicates across
        // partitions require a fingerprint collision.
        found.sort_by_key(|(p, r)| (r.end, r.distance, *p));
        found.dedup_by(|a, b| a.1.end == b.1.end);
        if trace {
            for (p, r) in &found {
                traces.push(TraceEvent::Emitted {
                    partition: *p,
                    end: r.end,
                    distance: r.distance,
                });
            }
        }
        Ok((found.into_iter().map(|(_, r)| r).collect(), traces))
    }

    #[allow(clippy::too_many_arguments)]
    fn advance_suffix(
        &mut self,
        pi: usize,
        sym: u8,
        flag: Option<Detection>,
        params: &FingerprintParams,
        found: &mut Vec<(Option<usize>, MatchReport)>,
        traces: &mut Vec<TraceEvent>,
    ) -> Result<()> {
        let trace = self.trace;
        let part = &mut self.partitions[pi];
        let Some(sm) = part.suffix.as_mut() else {
            return Ok(());
        };
        let mut events = std::mem::take(&mut sm.events);
        events.clear();
        sm.tracker.push(sym, params, &mut events)?;
        let mut emit: Vec<(u64, u64, u8)> = Vec::new(); // (end, mismatch pos, text sym)
        for ev in &events {
            match *ev {
                Event::Inserted { pos } => {
                    sm.on_insert(0, pos);
                    if let Some(det) = flag.as_ref() {
                        debug_assert_eq!(det.end + 1, pos);
                        sm.anchor_update(0, pos, part.w, det.before.clone(), det.through.clone());
                    }
                }
                Event::Promoted { from, pos } => {
                    sm.on_insert(from + 1, pos);
                    if let Some(v) = sm.verify(
                        from,
                        pos,
                        part.w,
                        part.half_period,
                        part.half_period_family.as_ref(),
                        &part.pi_family,
                        &part.pi_codes,
                        params,
                    ) {
                        if trace {
                            traces.push(TraceEvent::Verified {
                                partition: pi,
                                level: from,
                                pos,
                                before_family: v.before.clone(),
                                through_family: v.through.clone(),
                            });
                        }
                        sm.anchor_update(from + 1, pos, part.w, v.before, v.through);
                    }
                }
                Event::Occurrence { pos, end } => {
                    if sm.tracker.storage_levels() == 0 {
                        // |S_i| = 1: the occurrence is the flagged insertion.
                        if let Some(det) = flag.as_ref() {
                            debug_assert_eq!(det.end + 1, pos);
                            emit.push((end, det.mismatch_pos, det.text_sym));
                        }
                    } else {
                        let last = sm.tracker.storage_levels() - 1;
                        if let Some(v) = sm.verify(
                            last,
                            pos,
                            part.w,
                            part.half_period,
                            part.half_period_family.as_ref(),
                            &part.pi_family,
                            &part.pi_codes,
                            params,
                        ) {
                            if trace {
                                traces.push(TraceEvent::Verified {
                                    partition: pi,
                                    level: last,
                                    pos,
                                    before_family: v.before.clone(),
                                    through_family: v.through.clone(),
                                });
                            }
                            emit.push((end, v.mismatch_pos, v.text_sym));
                        }
                    }
                }
                Event::Discarded { .. } => {}
            }
        }
        sm.events = events;
        for (end, pos, text_sym) in emit {
            found.push((
                Some(pi),
                MatchReport {
                    end,
                    distance: 1,
                    correction: Some(Correction {
                        pos,
                        pattern_sym: self.pattern[pos as usize - 1],
                        text_sym,
                    }),
                },
            ));
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn advance_first(
        &mut self,
        pi: usize,
        sym: u8,
        code: u64,
        q: u64,
        pattern_first: u8,
        params: &FingerprintParams,
        traces: &mut Vec<TraceEvent>,
    ) -> Result<Option<Detection>> {
        let trace = self.trace;
        let text_fp = self.text_fp;
        let part = &mut self.partitions[pi];
        part.running.append_code(code, params);

        if part.index == 0 {
            if sym == pattern_first {
                return Ok(None);
            }
            let pat_code = part.pi_codes[0];
            let window = part.pi_family.replace_code(1, pat_code, code, params);
            let before = SketchFamily::cut_suffix(&part.running, &window, params)?;
            let det = Detection {
                end: q,
                mismatch_pos: 1,
                text_sym: sym,
                before,
                through: part.running.clone(),
            };
            if trace {
                traces.push(TraceEvent::RightHalf {
                    partition: pi,
                    end: q,
                    mismatch_pos: 1,
                    window_family: window,
                });
            }
            return Ok(Some(det));
        }

        // The left half of a right-half occurrence matches exactly, so the
        // window start sits at the last storage level of P_i's own matcher;
        // read its prefix fingerprint before this push examines it away.
        let w = part.w;
        let prefix_fp = if q >= w {
            part.pi_tracker
                .as_ref()
                .expect("partitions above 0 track P_i")
                .prefix_fp_of(q - w + 1, params)
        } else {
            None
        };
        {
            let tracker = part.pi_tracker.as_mut().expect("tracked");
            self.scratch.clear();
            tracker.push(sym, params, &mut self.scratch)?;
        }
        let detector = part.detector.as_mut().expect("partitions above 0 detect");
        detector.push(sym, q, params)?;
        if q < w {
            return Ok(None);
        }
        let Some(pos) = detector.detect(q) else {
            return Ok(None);
        };
        if pos <= part.half {
            return Ok(None);
        }
        let Some(prefix_fp) = prefix_fp else {
            self.anomalies += 1;
            return Ok(None);
        };
        let window_fp = params.cut_prefix(&text_fp, &prefix_fp)?;
        let diff = params.recover_difference(&part.pi_fp, &window_fp, pos);
        let pat_code = part.pi_codes[pos as usize - 1];
        let txt_code = field::sub(pat_code, diff, params.modulus());
        let Some(text_sym) = params.alphabet().decode(txt_code) else {
            self.anomalies += 1;
            return Ok(None);
        };
        let window = part.pi_family.replace_code(pos, pat_code, txt_code, params);
        let before = SketchFamily::cut_suffix(&part.running, &window, params)?;
        if trace {
            traces.push(TraceEvent::RightHalf {
                partition: pi,
                end: q,
                mismatch_pos: pos,
                window_family: window,
            });
        }
        Ok(Some(Detection {
            end: q,
            mismatch_pos: pos,
            text_sym,
            before,
            through: part.running.clone(),
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mismatch_sketch::SketchFamily;

    fn params() -> FingerprintParams {
        FingerprintParams::new(1 << 16, 99)
    }

    fn naive(pattern: &[u8], text: &[u8]) -> Vec<MatchReport> {
        let m = pattern.len();
        let mut out = Vec::new();
        if m > text.len() {
            return out;
        }
        for s in 0..=text.len() - m {
            let win = &text[s..s + m];
            let mism: Vec<usize> = (0..m).filter(|&i| win[i] != pattern[i]).collect();
            if mism.len() <= 1 {
                out.push(MatchReport {
                    end: (s + m) as u64,
                    distance: mism.len(),
                    correction: mism.first().map(|&i| Correction {
                        pos: i as u64 + 1,
                        pattern_sym: pattern[i],
                        text_sym: win[i],
                    }),
                });
            }
        }
        out
    }

    fn run(pattern: &[u8], text: &[u8]) -> Vec<MatchReport> {
        let params = params();
        let mut m = OneMismatchMatcher::new(pattern, &params).unwrap();
        let mut out = Vec::new();
        for &b in text {
            out.extend(m.push(b, &params).unwrap());
        }
        assert_eq!(m.anomalies(), 0);
        out
    }

    #[test]
    fn partition_shapes() {
        let params = params();
        assert_eq!(
            OneMismatchMatcher::new(b"a", &params).unwrap().partition_count(),
            1
        );
        let m = OneMismatchMatcher::new(b"abcdefgh", &params).unwrap();
        assert_eq!(m.partition_count(), 4);
        let widths: Vec<u64> = m.partitions.iter().map(|p| p.w).collect();
        assert_eq!(widths, vec![1, 2, 4, 8]);
        assert!(m.partitions.last().unwrap().suffix.is_none());
    }

    #[test]
    fn periodic_pattern_periods_are_recorded() {
        let params = params();
        let pat: Vec<u8> = b"ab".repeat(8);
        let m = OneMismatchMatcher::new(&pat, &params).unwrap();
        // per(P_3[1, 8]) = 2 for the partition with |P_i| = 16's half, and
        // per(P_4 half of length 8) likewise.
        let p = &m.partitions[4];
        assert_eq!(p.w, 16);
        assert_eq!(p.half_period, 2);
    }

    #[test]
    fn basic_examples() {
        assert_eq!(
            run(b"abc", b"abc"),
            vec![MatchReport {
                end: 3,
                distance: 0,
                correction: None
            }]
        );
        assert_eq!(
            run(b"abc", b"axc"),
            vec![MatchReport {
                end: 3,
                distance: 1,
                correction: Some(Correction {
                    pos: 2,
                    pattern_sym: b'b',
                    text_sym: b'x'
                })
            }]
        );
        assert_eq!(run(b"ab", b"cd"), Vec::new());
    }

    #[test]
    fn single_symbol_pattern() {
        let got = run(b"a", b"aba");
        assert_eq!(got, naive(b"a", b"aba"));
    }

    #[test]
    fn matches_naive_on_random_small_instances() {
        for seed in 0..8u64 {
            let mut state = seed.wrapping_mul(0x2545f4914f6cdd1d) | 1;
            let mut next = || {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                state
            };
            let sigma = if seed % 2 == 0 { 2u64 } else { 4 };
            let mlen = [5usize, 8, 13, 16][seed as usize % 4];
            let pat: Vec<u8> = (0..mlen).map(|_| b'a' + (next() % sigma) as u8).collect();
            let text: Vec<u8> = (0..1200).map(|_| b'a' + (next() % sigma) as u8).collect();
            assert_eq!(run(&pat, &text), naive(&pat, &text), "seed {seed}");
        }
    }

    #[test]
    fn periodic_adversarial_instances() {
        let pat: Vec<u8> = b"ab".repeat(8);
        let mut text: Vec<u8> = b"ab".repeat(120);
        text[57] = b'c'; // plant one mismatch inside the periodic run
        assert_eq!(run(&pat, &text), naive(&pat, &text));

        let pat = vec![b'a'; 16];
        let mut text = vec![b'a'; 300];
        text[40] = b'b';
        text[240] = b'c';
        assert_eq!(run(&pat, &text), naive(&pat, &text));
    }

    #[test]
    fn trace_right_half_families_match_direct_build() {
        let params = params();
        let pat = b"abcd";
        let text = b"abxd"; // mismatch at position 3 of P_2 = "abcd"
        let mut m = OneMismatchMatcher::with_trace(pat, &params).unwrap();
        let mut seen = false;
        let mut consumed: Vec<u8> = Vec::new();
        for &b in text {
            consumed.push(b);
            let (_, traces) = m.push_detailed(b, &params).unwrap();
            for t in traces {
                if let TraceEvent::RightHalf {
                    end,
                    mismatch_pos,
                    window_family,
                    partition,
                } = t
                {
                    let part = &m.partitions[partition];
                    let w = part.w as usize;
                    let primes = PrimeSet::for_length(part.w);
                    let window = &consumed[end as usize - w..end as usize];
                    let direct =
                        SketchFamily::build(window, &primes, &params).unwrap();
                    assert_eq!(window_family, direct, "partition {partition} end {end}");
                    if partition == 2 {
                        assert_eq!(mismatch_pos, 3);
                        seen = true;
                    }
                }
            }
        }
        assert!(seen, "right-half detection of P_2 never fired");
    }

    #[test]
    fn verified_families_match_retained_text() {
        let params = params();
        // Periodic text drives positions deep into progressions, exercising
        // period-power transport (Case 3).
        let pat: Vec<u8> = b"ab".repeat(8);
        let mut text: Vec<u8> = b"ab".repeat(100);
        text[99] = b'x';
        let mut m = OneMismatchMatcher::with_trace(&pat, &params).unwrap();
        let mut consumed: Vec<u8> = Vec::new();
        let mut verified = 0usize;
        for &b in &text {
            consumed.push(b);
            let (_, traces) = m.push_detailed(b, &params).unwrap();
            for t in traces {
                if let TraceEvent::Verified {
                    partition,
                    pos,
                    before_family,
                    through_family,
                    ..
                } = t
                {
                    let w = m.partitions[partition].w;
                    let primes = PrimeSet::for_length(w);
                    let before =
                        SketchFamily::build(&consumed[..(pos - w - 1) as usize], &primes, &params)
                            .unwrap();
                    let through =
                        SketchFamily::build(&consumed[..(pos - 1) as usize], &primes, &params)
                            .unwrap();
                    assert_eq!(before_family, before);
                    assert_eq!(through_family, through);
                    verified += 1;
                }
            }
        }
        assert!(verified > 0, "no sketch transport happened");
        assert_eq!(m.anomalies(), 0);
    }
}
