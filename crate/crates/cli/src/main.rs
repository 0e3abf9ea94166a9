//! Command-line front end: streams text from standard input through the
//! matchers and prints one tab-separated line per report. `oracle`
//! subcommands run the brute-force references over buffered input in the
//! same output format.

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use std::io::{BufRead, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use streamatch::error::Error;
use streamatch::fingerprint::FingerprintParams;
use streamatch::k_mismatch::{FilterKind, KMismatchMatcher, KmOptions};
use streamatch::one_mismatch::{Correction, OneMismatchMatcher};
use streamatch::oracle;
use streamatch::stream_match::ExactMatcher;
use streamatch::weighted_match::{
    parse_position, SpwtMatcher, SpwtMethod, WeightedString, WpmAnswer, WpstMatcher, WpstMethod,
    WpwtMatcher, WpwtMethod,
};

/// Default maximum stream length used to size the fingerprint modulus.
const DEFAULT_MAX_LEN: u64 = 1 << 20;

#[derive(Parser)]
#[command(name = "streamatch", version, about = "Streaming approximate string matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report exact occurrences of the pattern.
    Exact(PatternArgs),
    /// Report occurrences within Hamming distance 1, with corrections.
    Onemismatch(PatternArgs),
    /// Report occurrences within Hamming distance k, with corrections.
    Kmismatch(KmArgs),
    /// Weighted pattern matching (weighted pattern, weighted text, or both).
    Wpm(WpmArgs),
    /// Run the brute-force reference implementation of a subcommand.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    Exact(PatternArgs),
    Onemismatch(PatternArgs),
    Kmismatch(KmArgs),
    Wpm(WpmArgs),
}

#[derive(Args)]
struct PatternArgs {
    /// File holding the pattern (raw bytes; one trailing newline ignored).
    #[arg(long)]
    pattern: PathBuf,
}

#[derive(Args)]
struct KmArgs {
    #[arg(long)]
    pattern: PathBuf,
    /// Mismatch budget, 1 <= k < pattern length.
    #[arg(long)]
    k: usize,
    /// Distance filter: exact-window | residue-count.
    #[arg(long, default_value = "exact-window")]
    filter: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the lower end of the prime-selection interval.
    #[arg(long)]
    prime_lo: Option<u64>,
    /// Override the upper end of the prime-selection interval.
    #[arg(long)]
    prime_hi: Option<u64>,
}

#[derive(Args)]
struct WpmArgs {
    /// pw (weighted pattern), wt (weighted text), or both.
    #[arg(long)]
    mode: String,
    /// Pattern file: weighted-string format for pw/both, raw bytes for wt.
    #[arg(long)]
    pattern: PathBuf,
    /// Probability threshold parameter; matches need probability >= 1/z.
    #[arg(long)]
    z: f64,
    /// Approximation slack for weighted-text modes.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Candidate-finding method: dictionary | kmismatch | exactpm.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("streamatch: {err:#}");
            match err.downcast_ref::<Error>() {
                Some(Error::Parse { .. }) | Some(Error::SymbolOutsideAlphabet(_)) => {
                    ExitCode::from(2)
                }
                Some(_) => ExitCode::from(3),
                None => ExitCode::from(2), // I/O or usage trouble
            }
        }
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Exact(args) => cmd_exact(args),
        Command::Onemismatch(args) => cmd_onemismatch(args),
        Command::Kmismatch(args) => cmd_kmismatch(args),
        Command::Wpm(args) => cmd_wpm(args),
        Command::Oracle(cmd) => match cmd {
            OracleCommand::Exact(args) => oracle_exact(args),
            OracleCommand::Onemismatch(args) => oracle_onemismatch(args),
            OracleCommand::Kmismatch(args) => oracle_kmismatch(args),
            OracleCommand::Wpm(args) => oracle_wpm(args),
        },
    }
}

fn default_seed() -> u64 {
    std::env::var("STREAMATCH_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

fn read_pattern_bytes(path: &PathBuf) -> anyhow::Result<Vec<u8>> {
    let mut bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.last() == Some(&b'\n') {
        bytes.pop();
        if bytes.last() == Some(&b'\r') {
            bytes.pop();
        }
    }
    Ok(bytes)
}

fn read_weighted_pattern(path: &PathBuf) -> anyhow::Result<WeightedString> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(WeightedString::parse(&text)?)
}

fn read_stdin_bytes() -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::io::stdin().lock().read_to_end(&mut buf)?;
    if buf.last() == Some(&b'\n') {
        buf.pop();
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
    }
    Ok(buf)
}

fn read_stdin_weighted_rows() -> anyhow::Result<Vec<Vec<(u8, f64)>>> {
    let mut rows = Vec::new();
    for (i, line) in std::io::stdin().lock().lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        rows.push(parse_position(t, i + 1)?);
    }
    Ok(rows)
}

fn fmt_sym(b: u8) -> String {
    if b.is_ascii_graphic() {
        (b as char).to_string()
    } else {
        format!("{b:#04x}")
    }
}

fn write_hamming_line(
    out: &mut impl Write,
    end: u64,
    distance: usize,
    corrections: &[Correction],
    uncertified: bool,
) -> std::io::Result<()> {
    write!(out, "{end}\t{distance}")?;
    if !corrections.is_empty() {
        let toks: Vec<String> = corrections
            .iter()
            .map(|c| format!("{}:{}>{}", c.pos, fmt_sym(c.pattern_sym), fmt_sym(c.text_sym)))
            .collect();
        write!(out, "\t{}", toks.join(" "))?;
    }
    if uncertified {
        write!(out, "\tuncertified")?;
    }
    writeln!(out)
}

fn write_prob_line(out: &mut impl Write, end: u64, log_prob: f64) -> std::io::Result<()> {
    writeln!(out, "{end}\t{log_prob:.11e}")
}

// ---------------------------------------------------------------------------
// Streaming subcommands.

fn cmd_exact(args: PatternArgs) -> anyhow::Result<()> {
    let pattern = read_pattern_bytes(&args.pattern)?;
    let params = FingerprintParams::new(DEFAULT_MAX_LEN, default_seed());
    let mut matcher = ExactMatcher::new(&pattern, &params)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    stream_plain(stdin.lock(), |sym| {
        for end in matcher.push(sym, &params)? {
            write_hamming_line(&mut out, end, 0, &[], false)?;
        }
        out.flush()?;
        Ok(())
    })
}

fn cmd_onemismatch(args: PatternArgs) -> anyhow::Result<()> {
    let pattern = read_pattern_bytes(&args.pattern)?;
    let params = FingerprintParams::new(DEFAULT_MAX_LEN, default_seed());
    let mut matcher = OneMismatchMatcher::new(&pattern, &params)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    stream_plain(stdin.lock(), |sym| {
        for rep in matcher.push(sym, &params)? {
            let corrections: Vec<Correction> = rep.correction.into_iter().collect();
            write_hamming_line(&mut out, rep.end, rep.distance, &corrections, false)?;
        }
        out.flush()?;
        Ok(())
    })
}

fn cmd_kmismatch(args: KmArgs) -> anyhow::Result<()> {
    let pattern = read_pattern_bytes(&args.pattern)?;
    let filter: FilterKind = args.filter.parse()?;
    let options = KmOptions {
        prime_lo: args.prime_lo,
        prime_hi: args.prime_hi,
    };
    let seed = args.seed.unwrap_or_else(default_seed);
    let mut matcher = KMismatchMatcher::new(&pattern, args.k, seed, filter, options)?;
    if let Some(note) = matcher.interval_warning() {
        eprintln!("streamatch: {note}");
    }
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    stream_plain(stdin.lock(), |sym| {
        for rep in matcher.push(sym) {
            write_hamming_line(&mut out, rep.end, rep.distance, &rep.corrections, !rep.certified)?;
        }
        out.flush()?;
        Ok(())
    })
}

fn cmd_wpm(args: WpmArgs) -> anyhow::Result<()> {
    let seed = args.seed.unwrap_or_else(default_seed);
    let params = FingerprintParams::new(DEFAULT_MAX_LEN, seed);
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    match args.mode.as_str() {
        "pw" => {
            let pattern = read_weighted_pattern(&args.pattern)?;
            let method = match args.method.as_deref().unwrap_or("dictionary") {
                "dictionary" => WpstMethod::Dictionary,
                "kmismatch" => WpstMethod::KMismatch,
                other => {
                    return Err(Error::Config(format!("method `{other}` invalid for pw")).into())
                }
            };
            let mut matcher = WpstMatcher::new(&pattern, args.z, method, seed, &params)?;
            stream_plain(std::io::stdin().lock(), |sym| {
                if let Some(lp) = matcher.push(sym, &params)? {
                    write_prob_line(&mut out, matcher.time(), lp)?;
                }
                out.flush()?;
                Ok(())
            })
        }
        "wt" => {
            let pattern = read_pattern_bytes(&args.pattern)?;
            let method = match args.method.as_deref().unwrap_or("exactpm") {
                "exactpm" => SpwtMethod::ExactPm,
                "kmismatch" => SpwtMethod::KMismatch,
                other => {
                    return Err(Error::Config(format!("method `{other}` invalid for wt")).into())
                }
            };
            let mut matcher =
                SpwtMatcher::new(&pattern, args.z, args.epsilon, method, seed, &params)?;
            stream_weighted(|q, row| {
                if let WpmAnswer::Yes(lp) = matcher.push(row, &params)? {
                    write_prob_line(&mut out, q, lp)?;
                }
                out.flush()?;
                Ok(())
            })
        }
        "both" => {
            let pattern = read_weighted_pattern(&args.pattern)?;
            let method = match args.method.as_deref().unwrap_or("dictionary") {
                "dictionary" => WpwtMethod::Dictionary,
                "kmismatch" => WpwtMethod::KMismatch,
                other => {
                    return Err(Error::Config(format!("method `{other}` invalid for both")).into())
                }
            };
            let mut matcher =
                WpwtMatcher::new(&pattern, args.z, args.epsilon, method, seed, &params)?;
            stream_weighted(|q, row| {
                if let WpmAnswer::Yes(lp) = matcher.push(row, &params)? {
                    write_prob_line(&mut out, q, lp)?;
                }
                out.flush()?;
                Ok(())
            })
        }
        other => Err(Error::Config(format!("unknown wpm mode `{other}`")).into()),
    }
}

/// Feeds stdin to `f` one byte at a time, ignoring one trailing newline.
/// Holding one byte of lookahead keeps the final-newline rule streaming.
fn stream_plain(
    input: impl Read,
    mut f: impl FnMut(u8) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let mut held: Option<u8> = None;
    for byte in input.bytes() {
        let b = byte?;
        if let Some(prev) = held.replace(b) {
            f(prev)?;
        }
    }
    match held {
        Some(b'\n') | None => {}
        Some(last) => f(last)?,
    }
    Ok(())
}

/// Feeds stdin weighted-string lines to `f` with their 1-based position.
fn stream_weighted(
    mut f: impl FnMut(u64, &[(u8, f64)]) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let stdin = std::io::stdin();
    let mut q = 0u64;
    for (i, line) in stdin.lock().lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = parse_position(t, i + 1)?;
        q += 1;
        f(q, &row)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Oracle subcommands (buffered reference runs).

fn oracle_exact(args: PatternArgs) -> anyhow::Result<()> {
    let pattern = read_pattern_bytes(&args.pattern)?;
    if pattern.is_empty() {
        return Err(Error::EmptyPattern.into());
    }
    let text = read_stdin_bytes()?;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for (end, _, _) in oracle::naive_hamming_scan(&pattern, &text, 0) {
        write_hamming_line(&mut out, end, 0, &[], false)?;
    }
    out.flush()?;
    Ok(())
}

fn oracle_onemismatch(args: PatternArgs) -> anyhow::Result<()> {
    let pattern = read_pattern_bytes(&args.pattern)?;
    if pattern.is_empty() {
        return Err(Error::EmptyPattern.into());
    }
    let text = read_stdin_bytes()?;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for (end, dist, corrections) in oracle::naive_hamming_scan(&pattern, &text, 1) {
        write_hamming_line(&mut out, end, dist, &corrections, false)?;
    }
    out.flush()?;
    Ok(())
}

fn oracle_kmismatch(args: KmArgs) -> anyhow::Result<()> {
    let pattern = read_pattern_bytes(&args.pattern)?;
    if pattern.is_empty() {
        return Err(Error::EmptyPattern.into());
    }
    if args.k == 0 || args.k >= pattern.len() {
        return Err(Error::Config(format!(
            "k = {} must satisfy 1 <= k < pattern length {}",
            args.k,
            pattern.len()
        ))
        .into());
    }
    let text = read_stdin_bytes()?;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for (end, dist, corrections) in oracle::naive_hamming_scan(&pattern, &text, args.k) {
        write_hamming_line(&mut out, end, dist, &corrections, false)?;
    }
    out.flush()?;
    Ok(())
}

fn oracle_wpm(args: WpmArgs) -> anyhow::Result<()> {
    if !(args.z > 1.0) || !args.z.is_finite() {
        return Err(Error::OutOfRange {
            what: "threshold parameter z",
            value: args.z,
        }
        .into());
    }
    let thr = -args.z.ln() - 1e-9;
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    // Entry i of each oracle corresponds to the window ending at m + i.
    let (m, values): (usize, Vec<f64>) = match args.mode.as_str() {
        "pw" => {
            let pattern = read_weighted_pattern(&args.pattern)?;
            let text = read_stdin_bytes()?;
            (
                pattern.len(),
                oracle::naive_wpm_pattern_weighted(&pattern, &text),
            )
        }
        "wt" => {
            let pattern = read_pattern_bytes(&args.pattern)?;
            let rows = read_stdin_weighted_rows()?;
            let text = WeightedString::from_rows(rows)?;
            (
                pattern.len(),
                oracle::naive_wpm_text_weighted(&pattern, &text),
            )
        }
        "both" => {
            let pattern = read_weighted_pattern(&args.pattern)?;
            let rows = read_stdin_weighted_rows()?;
            let text = WeightedString::from_rows(rows)?;
            (pattern.len(), oracle::naive_wpm_both(&pattern, &text))
        }
        other => return Err(Error::Config(format!("unknown wpm mode `{other}`")).into()),
    };
    for (i, &lp) in values.iter().enumerate() {
        if lp >= thr {
            write_prob_line(&mut out, (m + i) as u64, lp)?;
        }
    }
    out.flush()?;
    Ok(())
}
