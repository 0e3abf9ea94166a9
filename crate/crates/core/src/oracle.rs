//! Brute-force reference implementations used by the tests and the CLI's
//! `oracle` subcommands. These hold the whole input in memory; they sit
//! deliberately outside the streaming space regime.

use crate::one_mismatch::Correction;
use crate::weighted_match::WeightedString;

/// Kahan-compensated sum, used so the oracle's log-domain products carry an
/// error far below the tolerances they arbitrate.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// All alignments of `pattern` in `text` at Hamming distance at most `k`,
/// as `(end position, distance, corrections)` with corrections sorted by
/// pattern position. Direct O(nm) comparison.
pub fn naive_hamming_scan(
    pattern: &[u8],
    text: &[u8],
    k: usize,
) -> Vec<(u64, usize, Vec<Correction>)> {
    let m = pattern.len();
    let mut out = Vec::new();
    if m == 0 || m > text.len() {
        return out;
    }
    for s in 0..=text.len() - m {
        let win = &text[s..s + m];
        let mut corrections = Vec::new();
        for i in 0..m {
            if win[i] != pattern[i] {
                corrections.push(Correction {
                    pos: i as u64 + 1,
                    pattern_sym: pattern[i],
                    text_sym: win[i],
                });
                if corrections.len() > k {
                    break;
                }
            }
        }
        if corrections.len() <= k {
            out.push(((s + m) as u64, corrections.len(), corrections));
        }
    }
    out
}

/// Exact log-domain products of every window of `m` values; entry `i`
/// corresponds to the window ending at position `m + i` (1-based). A window
/// containing a zero yields negative infinity. Each window is recomputed
/// from scratch with compensated summation.
pub fn naive_window_product(xs: &[f64], m: usize) -> Vec<f64> {
    assert!(m >= 1);
    let mut out = Vec::new();
    if xs.len() < m {
        return out;
    }
    for end in m..=xs.len() {
        let mut sum = KahanSum::default();
        let mut zero = false;
        for &x in &xs[end - m..end] {
            if x <= 0.0 {
                zero = true;
                break;
            }
            sum.add(x.ln());
        }
        out.push(if zero { f64::NEG_INFINITY } else { sum.sum });
    }
    out
}

/// Weighted pattern against plain text: entry `i` is the log match
/// probability of the window ending at `m + i`.
pub fn naive_wpm_pattern_weighted(pattern: &WeightedString, text: &[u8]) -> Vec<f64> {
    let m = pattern.len();
    let mut out = Vec::new();
    if m == 0 || m > text.len() {
        return out;
    }
    for s in 0..=text.len() - m {
        let mut sum = KahanSum::default();
        let mut zero = false;
        for i in 0..m {
            let lp = pattern.log_prob(i, text[s + i]);
            if lp == f64::NEG_INFINITY {
                zero = true;
                break;
            }
            sum.add(lp);
        }
        out.push(if zero { f64::NEG_INFINITY } else { sum.sum });
    }
    out
}

/// Plain pattern against weighted text.
pub fn naive_wpm_text_weighted(pattern: &[u8], text: &WeightedString) -> Vec<f64> {
    let m = pattern.len();
    let mut out = Vec::new();
    if m == 0 || m > text.len() {
        return out;
    }
    for s in 0..=text.len() - m {
        let mut sum = KahanSum::default();
        let mut zero = false;
        for (i, &p) in pattern.iter().enumerate() {
            let lp = text.log_prob(s + i, p);
            if lp == f64::NEG_INFINITY {
                zero = true;
                break;
            }
            sum.add(lp);
        }
        out.push(if zero { f64::NEG_INFINITY } else { sum.sum });
    }
    out
}

/// Both weighted: entry `i` is `max_W Pr[P = W] * Pr[window = W]` in log
/// domain. The maximization decomposes per position because the positions
/// are independent.
pub fn naive_wpm_both(pattern: &WeightedString, text: &WeightedString) -> Vec<f64> {
    let m = pattern.len();
    let mut out = Vec::new();
    if m == 0 || m > text.len() {
        return out;
    }
    for s in 0..=text.len() - m {
        let mut sum = KahanSum::default();
        let mut zero = false;
        for i in 0..m {
            let mut best = f64::NEG_INFINITY;
            for &(letter, lp) in pattern.position(i) {
                let lt = text.log_prob(s + i, letter);
                if lt != f64::NEG_INFINITY {
                    best = best.max(lp + lt);
                }
            }
            if best == f64::NEG_INFINITY {
                zero = true;
                break;
            }
            sum.add(best);
        }
        out.push(if zero { f64::NEG_INFINITY } else { sum.sum });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Second independent Hamming scan: per-position difference lists
    /// instead of per-alignment comparison.
    fn hamming_by_columns(pattern: &[u8], text: &[u8], k: usize) -> Vec<(u64, usize)> {
        let m = pattern.len();
        if m == 0 || m > text.len() {
            return Vec::new();
        }
        let n_align = text.len() - m + 1;
        let mut dist = vec![0usize; n_align];
        for i in 0..m {
            for s in 0..n_align {
                if text[s + i] != pattern[i] {
                    dist[s] += 1;
                }
            }
        }
        dist.iter()
            .enumerate()
            .filter(|&(_, &d)| d <= k)
            .map(|(s, &d)| ((s + m) as u64, d))
            .collect()
    }

    #[test]
    fn hamming_scan_examples() {
        assert_eq!(
            naive_hamming_scan(b"ab", b"ab", 1),
            vec![(2, 0, vec![])]
        );
        let got = naive_hamming_scan(b"ab", b"ax", 1);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0, 2);
        assert_eq!(got[0].1, 1);
        assert_eq!(
            got[0].2,
            vec![Correction {
                pos: 2,
                pattern_sym: b'b',
                text_sym: b'x'
            }]
        );
    }

    #[test]
    fn two_hamming_implementations_agree() {
        let mut state = 0xabcdefu64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let pat: Vec<u8> = (0..12).map(|_| b'a' + (next() % 3) as u8).collect();
        let text: Vec<u8> = (0..500).map(|_| b'a' + (next() % 3) as u8).collect();
        let a: Vec<(u64, usize)> = naive_hamming_scan(&pat, &text, 3)
            .into_iter()
            .map(|(e, d, _)| (e, d))
            .collect();
        assert_eq!(a, hamming_by_columns(&pat, &text, 3));
    }

    #[test]
    fn window_product_basics() {
        let ones = vec![1.0; 10];
        assert!(naive_window_product(&ones, 4)
            .iter()
            .all(|&lp| lp == 0.0));
        let mut xs = vec![0.5; 8];
        xs[3] = 0.0;
        let got = naive_window_product(&xs, 3);
        // Windows ending at 4, 5, 6 cover the zero.
        assert!((got[0].exp() - 0.125).abs() < 1e-15);
        assert_eq!(got[1], f64::NEG_INFINITY);
        assert_eq!(got[3], f64::NEG_INFINITY);
        assert!((got[5].exp() - 0.125).abs() < 1e-15);
    }
}
