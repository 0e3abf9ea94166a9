//! Streaming approximate string matching with error correction.
//!
//! The crate provides small-space streaming matchers that report, for every
//! text window close to a pattern in Hamming distance, the mismatching
//! positions together with the pattern and text symbols there:
//!
//! * [`fingerprint`] — Rabin-Karp fingerprints over a prime field with a
//!   concatenation / subtraction / power algebra.
//! * [`mismatch_sketch`] — per-prime 1-mismatch sketches, their algebra, and
//!   CRT localization of a single mismatch between two equal-length strings.
//! * [`stream_match`] — level-based streaming exact matching with
//!   arithmetic-progression compression, plus a multi-pattern wrapper.
//! * [`one_mismatch`] — the full streaming 1-mismatch-with-error-correcting
//!   matcher built from pattern partitions and sketch transport.
//! * [`k_mismatch`] — reduction from k mismatches to 1 mismatch via random
//!   prime partitions of the pattern, with a pluggable distance filter.
//! * [`window_product`] — deterministic (1-eps)-approximate sliding-window
//!   product over a stream of numbers in [0,1].
//! * [`weighted_match`] — the three weighted-pattern-matching variants
//!   (weighted pattern, weighted text, both weighted).
//! * [`oracle`] — brute-force reference implementations used by the tests.

pub mod error;
pub mod field;
pub mod fingerprint;
pub mod k_mismatch;
pub mod mismatch_sketch;
pub mod one_mismatch;
pub mod oracle;
pub mod stream_match;
pub mod weighted_match;
pub mod window_product;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
