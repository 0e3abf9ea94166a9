//! Deterministic (1-eps)-approximate sliding-window product over a stream of
//! numbers in `[0, 1]`.
//!
//! The stream is partitioned into consecutive intervals. The last interval is
//! extended while its product stays at least `1 - eps`; otherwise a new
//! interval opens, so the product over any two consecutive intervals is below
//! `1 - eps`. The leftmost interval is dropped once the window has slid past
//! it or the interval count exceeds the capacity `M(z)`. A numeric answer is
//! the total product over the intervals, which straddles the window start by
//! less than one interval and is therefore within a `(1 - eps)` factor of the
//! true window product; a "no" answer certifies the product is at most
//! `(1 - eps) / z`.
//!
//! Products are maintained as sums of natural logarithms in double precision;
//! the approximation factor dwarfs the float error.

use crate::error::Error;
use crate::Result;
use std::collections::VecDeque;

/// Answer for one window position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Answer {
    /// Natural logarithm of an approximation `A` of the window product `P`
    /// with `(1 - eps) * P <= A <= P`.
    Product(f64),
    /// The window product is at most `(1 - eps) / z`.
    No,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    start: u64,
    log_product: f64,
}

/// Streaming state for one window-product instance.
#[derive(Debug, Clone)]
pub struct WindowProduct {
    m: u64,
    eps: f64,
    capacity: usize,
    ln_extend: f64, // ln(1 - eps)
    ln_no: f64,     // ln((1 - eps) / z)
    intervals: VecDeque<Interval>,
    time: u64,
}

/// Comparison slack for log-domain thresholds.
const TOL: f64 = 1e-12;

impl WindowProduct {
    /// Window width `m >= 1`, threshold `1/z` with `z > 1`, `0 < eps < 1/2`.
    /// Capacity `M(z) = floor(2 log_{1-eps}((1-eps)/z))`.
    pub fn new(m: u64, z: f64, eps: f64) -> Result<Self> {
        if m < 1 {
            return Err(Error::OutOfRange {
                what: "window width",
                value: m as f64,
            });
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
        let ln_extend = (1.0 - eps).ln();
        let ln_no = ((1.0 - eps) / z).ln();
        let capacity = (2.0 * ln_no / ln_extend).floor() as usize;
        Ok(WindowProduct {
            m,
            eps,
            capacity,
            ln_extend,
            ln_no,
            intervals: VecDeque::new(),
            time: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    /// Feeds `x` in `[0, 1]` and answers for the window ending at it.
    pub fn push(&mut self, x: f64) -> Result<Answer> {
        if !(0.0..=1.0 + TOL).contains(&x) || x.is_nan() {
            return Err(Error::OutOfRange {
                what: "stream value",
                value: x,
            });
        }
        let lnx = if x <= 0.0 { f64::NEG_INFINITY } else { x.min(1.0).ln() };
        let q = self.time + 1;
        self.time = q;

        // Extend the last interval while its product stays >= 1 - eps.
        let extend = match self.intervals.back() {
            Some(last) => last.log_product + lnx >= self.ln_extend - TOL,
            None => false,
        };
        if extend {
            self.intervals.back_mut().expect("nonempty").log_product += lnx;
        } else {
            self.intervals.push_back(Interval {
                start: q,
                log_product: lnx,
            });
        }

        // One interval is created per push, so one deletion restores both
        // the capacity bound and the window-overlap invariant.
        if self.intervals.len() > self.capacity || self.second_start_expired(q) {
            self.intervals.pop_front();
            debug_assert!(self.intervals.len() <= self.capacity);
            debug_assert!(!self.second_start_expired(q), "double eviction needed");
        }

        let first_start = self.intervals.front().expect("nonempty").start;
        if (q as i128) - (self.m as i128) + 1 < first_start as i128 {
            return Ok(Answer::No);
        }
        let total: f64 = self.intervals.iter().map(|iv| iv.log_product).sum();
        if total == f64::NEG_INFINITY {
            // A zero inside the window: below any positive threshold.
            return Ok(Answer::No);
        }
        Ok(Answer::Product(total))
    }

    fn second_start_expired(&self, q: u64) -> bool {
        match self.intervals.get(1) {
            Some(iv) => (iv.start as i128) <= (q as i128) - (self.m as i128) + 1,
            None => false,
        }
    }

    /// `(start, log product)` of each interval, oldest first. Used by tests
    /// to check the family invariants after every push.
    pub fn intervals(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.intervals.iter().map(|iv| (iv.start, iv.log_product))
    }

    pub fn interval_count(&self) -> usize {
        self.intervals.len()
    }

    /// Checks the structural invariants of the interval family:
    /// starts strictly increase, every interval except the first starts
    /// within the window, every non-last interval is either a singleton or
    /// has product at least `1 - eps`, and the count is within capacity.
    pub fn invariants_ok(&self) -> bool {
        let q = self.time;
        if self.intervals.len() > self.capacity {
            return false;
        }
        let starts: Vec<u64> = self.intervals.iter().map(|iv| iv.start).collect();
        if !starts.windows(2).all(|w| w[0] < w[1]) {
            return false;
        }
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 && (iv.start as i128) <= (q as i128) - (self.m as i128) + 1 {
                return false;
            }
            let end = if i + 1 < starts.len() {
                starts[i + 1] - 1
            } else {
                q
            };
            let singleton = end == iv.start;
            let is_last = i + 1 == self.intervals.len();
            if !is_last && !singleton && iv.log_product < self.ln_extend - 1e-9 {
                return false;
            }
        }
        true
    }

    /// Natural log of the "no" certificate threshold `(1 - eps) / z`.
    pub fn ln_no_threshold(&self) -> f64 {
        self.ln_no
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_formula() {
        // z = 10, eps = 0.1: floor(2 * log_{0.9}(0.09)) = 45.
        let w = WindowProduct::new(5, 10.0, 0.1).unwrap();
        assert_eq!(w.capacity(), 45);
    }

    #[test]
    fn parameter_validation() {
        assert!(WindowProduct::new(1, 10.0, 0.6).is_err());
        assert!(WindowProduct::new(1, 10.0, 0.0).is_err());
        assert!(WindowProduct::new(1, 1.0, 0.1).is_err());
        assert!(WindowProduct::new(1, 10.0, 0.1).is_ok());
    }

    #[test]
    fn all_ones_stream_is_exact() {
        let mut w = WindowProduct::new(4, 10.0, 0.1).unwrap();
        for i in 0..20u64 {
            let a = w.push(1.0).unwrap();
            assert!(w.invariants_ok());
            if i + 1 >= 4 {
                assert_eq!(a, Answer::Product(0.0), "push {i}");
            } else {
                // The window has not filled yet.
                assert_eq!(a, Answer::No, "push {i}");
            }
        }
    }

    #[test]
    fn halves_example() {
        let mut w = WindowProduct::new(3, 10.0, 0.1).unwrap();
        w.push(0.5).unwrap();
        w.push(0.5).unwrap();
        match w.push(0.5).unwrap() {
            Answer::Product(lp) => {
                let a = lp.exp();
                assert!((0.1125..=0.125 + 1e-12).contains(&a), "answer {a}");
            }
            Answer::No => panic!("product 0.125 is above the threshold"),
        }
    }

    #[test]
    fn zero_in_window_answers_no() {
        let mut w = WindowProduct::new(3, 10.0, 0.1).unwrap();
        w.push(1.0).unwrap();
        w.push(0.0).unwrap();
        assert_eq!(w.push(1.0).unwrap(), Answer::No);
        // Once the zero slides out, full-strength answers resume.
        w.push(1.0).unwrap();
        assert_eq!(w.push(1.0).unwrap(), Answer::Product(0.0));
    }

    #[test]
    fn rejects_out_of_range_values() {
        let mut w = WindowProduct::new(3, 10.0, 0.1).unwrap();
        assert!(w.push(-0.1).is_err());
        assert!(w.push(1.5).is_err());
    }

    #[test]
    fn window_of_one() {
        let mut w = WindowProduct::new(1, 10.0, 0.1).unwrap();
        for x in [0.9f64, 0.3, 1.0] {
            match w.push(x).unwrap() {
                Answer::Product(lp) => {
                    let a = lp.exp();
                    assert!(a <= x + 1e-12 && a >= 0.9 * x - 1e-12);
                }
                Answer::No => assert!(x <= 0.09),
            }
        }
    }
}
