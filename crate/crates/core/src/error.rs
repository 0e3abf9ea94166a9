//! Crate-wide error type.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A symbol was not part of the configured alphabet.
    SymbolOutsideAlphabet(u8),
    /// Two values that must describe strings of compatible lengths did not.
    LengthMismatch { left: u64, right: u64 },
    /// Two sketches or fingerprints built under incompatible parameters.
    Incompatible(&'static str),
    /// An empty pattern was supplied where a non-empty one is required.
    EmptyPattern,
    /// A queried position is not currently stored by the matcher.
    PositionNotStored(u64),
    /// Invalid configuration (thresholds, intervals, parameter ranges).
    Config(String),
    /// A numeric argument fell outside its admissible range.
    OutOfRange { what: &'static str, value: f64 },
    /// Malformed textual input, with the 1-based line it occurred on.
    Parse { line: usize, msg: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::SymbolOutsideAlphabet(b) => {
                write!(f, "symbol {b:#04x} is outside the configured alphabet")
            }
            Error::LengthMismatch { left, right } => {
                write!(f, "incompatible lengths: {left} vs {right}")
            }
            Error::Incompatible(what) => write!(f, "incompatible parameters: {what}"),
            Error::EmptyPattern => write!(f, "pattern must be non-empty"),
            Error::PositionNotStored(p) => write!(f, "position {p} is not stored"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::OutOfRange { what, value } => {
                write!(f, "{what} = {value} is out of range")
            }
            Error::Parse { line, msg } => write!(f, "parse error on line {line}: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
