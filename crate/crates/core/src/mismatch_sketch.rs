//! 1-mismatch sketches over a prime set, their algebra, and CRT localization
//! of a single mismatch between two equal-length strings.
//!
//! For a prime `q`, the 1-mismatch sketch of `X` is the vector of `q`
//! fingerprints of the step-`q` subsequences `X[j] X[j+q] X[j+2q] ...`. Two
//! strings at Hamming distance exactly 1 differ in exactly one lane for every
//! prime; the differing lane indices are the mismatch position's residues, so
//! a prime set whose product exceeds the string length pins the position down
//! by the Chinese remainder theorem, and the lane fingerprints recover the
//! symbol difference there.

use crate::error::Error;
use crate::field;
use crate::fingerprint::{Fingerprint, FingerprintParams};
use crate::Result;

/// Ascending primes used for subsequence decomposition of strings up to
/// `target_len` symbols. The product of the primes exceeds `target_len`, so
/// CRT reconstruction of a position is unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeSet {
    primes: Vec<u64>,
    target_len: u64,
}

impl PrimeSet {
    /// All primes in `[max(2, floor(log2 m)), max(2, 2 ceil(log2 m))]`,
    /// extended with the next primes upward until the product exceeds `m`.
    /// The extension handles small `m`, where the log-interval alone has
    /// product at most `m`.
    pub fn for_length(m: u64) -> Self {
        assert!(m >= 1);
        let lower = 2u64.max(field::floor_log2(m) as u64);
        let upper = lower.max(2 * field::ceil_log2(m) as u64);
        let mut primes = field::primes_in(lower, upper);
        let mut product: u128 = primes.iter().map(|&q| q as u128).product();
        let mut last = upper.max(1);
        while product <= m as u128 {
            last = field::next_prime(last);
            product *= last as u128;
            primes.push(last);
        }
        PrimeSet {
            primes,
            target_len: m,
        }
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn target_len(&self) -> u64 {
        self.target_len
    }
}

/// The per-lane fingerprints of one string for one prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneMismatchSketch {
    q: u64,
    len: u64,
    /// Lane `j` (0-based) fingerprints the subsequence of positions `p` with
    /// `(p-1) mod q == j`, taken as a standalone string.
    lanes: Vec<Fingerprint>,
}

impl OneMismatchSketch {
    pub fn empty(q: u64) -> Self {
        assert!(q >= 2);
        OneMismatchSketch {
            q,
            len: 0,
            lanes: vec![Fingerprint::EMPTY; q as usize],
        }
    }

    pub fn build(s: &[u8], q: u64, params: &FingerprintParams) -> Result<Self> {
        let mut sk = Self::empty(q);
        for &b in s {
            sk.append_code(params.alphabet().encode(b)?, params);
        }
        Ok(sk)
    }

    /// Extends the sketched string by one symbol on the right.
    pub(crate) fn append_code(&mut self, code: u64, params: &FingerprintParams) {
        let lane = (self.len % self.q) as usize;
        self.lanes[lane] = params.append_code(&self.lanes[lane], code);
        self.len += 1;
    }

    #[inline]
    pub fn prime(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lanes(&self) -> &[Fingerprint] {
        &self.lanes
    }

    fn check_same_prime(&self, other: &Self) -> Result<()> {
        if self.q != other.q {
            return Err(Error::Incompatible("sketches built for different primes"));
        }
        Ok(())
    }

    /// Sketch of the concatenation `XY`. Symbol `i` of `Y` lands at global
    /// position `|X| + i`, so lane `j` of `Y` feeds lane `(|X| + j) mod q`
    /// of the result; the rotation is computed from lengths, never stored.
    pub fn concat(&self, other: &Self, params: &FingerprintParams) -> Result<Self> {
        self.check_same_prime(other)?;
        let q = self.q as usize;
        let mut lanes = vec![Fingerprint::EMPTY; q];
        let shift = (self.len % self.q) as usize;
        for j in 0..q {
            let g = (shift + j) % q;
            lanes[g] = params.concat(&self.lanes[g], &other.lanes[j]);
        }
        Ok(OneMismatchSketch {
            q: self.q,
            len: self.len + other.len,
            lanes,
        })
    }

    /// Given `Z = XY`, the sketch of the suffix `Y` from `Z` and prefix `X`.
    pub fn cut_prefix(z: &Self, x: &Self, params: &FingerprintParams) -> Result<Self> {
        z.check_same_prime(x)?;
        if x.len > z.len {
            return Err(Error::LengthMismatch {
                left: x.len,
                right: z.len,
            });
        }
        let q = z.q as usize;
        let shift = (x.len % z.q) as usize;
        let mut lanes = vec![Fingerprint::EMPTY; q];
        for j in 0..q {
            let g = (shift + j) % q;
            lanes[j] = params.cut_prefix(&z.lanes[g], &x.lanes[g])?;
        }
        Ok(OneMismatchSketch {
            q: z.q,
            len: z.len - x.len,
            lanes,
        })
    }

    /// Given `Z = XY`, the sketch of the prefix `X` from `Z` and suffix `Y`.
    pub fn cut_suffix(z: &Self, y: &Self, params: &FingerprintParams) -> Result<Self> {
        z.check_same_prime(y)?;
        if y.len > z.len {
            return Err(Error::LengthMismatch {
                left: y.len,
                right: z.len,
            });
        }
        let x_len = z.len - y.len;
        let q = z.q as usize;
        let shift = (x_len % z.q) as usize;
        let mut lanes = vec![Fingerprint::EMPTY; q];
        for j in 0..q {
            let g = (shift + j) % q;
            lanes[g] = params.cut_suffix(&z.lanes[g], &y.lanes[j])?;
        }
        Ok(OneMismatchSketch {
            q: z.q,
            len: x_len,
            lanes,
        })
    }

    /// Sketch of `X^alpha` in O(q log alpha) fingerprint operations.
    pub fn power(&self, mut alpha: u64, params: &FingerprintParams) -> Self {
        let mut acc = Self::empty(self.q);
        let mut base = self.clone();
        while alpha > 0 {
            if alpha & 1 == 1 {
                acc = acc.concat(&base, params).expect("same prime");
            }
            alpha >>= 1;
            if alpha > 0 {
                base = base.concat(&base, params).expect("same prime");
            }
        }
        acc
    }

    /// Sketch of the string with the symbol at `pos` (1-based) replaced,
    /// given the old and new symbol codes. One lane is touched.
    pub fn replace_code(
        &self,
        pos: u64,
        old_code: u64,
        new_code: u64,
        params: &FingerprintParams,
    ) -> Self {
        debug_assert!(pos >= 1 && pos <= self.len);
        let p = params.modulus();
        let lane = ((pos - 1) % self.q) as usize;
        let t = (pos - 1) / self.q + 1; // 1-based index inside the lane
        let delta = field::sub(new_code % p, old_code % p, p);
        let mut out = self.clone();
        out.lanes[lane].value = field::add(
            out.lanes[lane].value,
            field::mul(delta, field::pow(params.point(), t, p), p),
            p,
        );
        out
    }
}

/// Outcome of comparing the sketch families of two equal-length strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MismatchVerdict {
    Equal,
    /// Exactly one differing position `pos` (1-based) whose symbol codes
    /// differ by `diff = code(A[pos]) - code(B[pos]) mod p`.
    Single { pos: u64, diff: u64 },
    Many,
}

/// The 1-mismatch sketches of one string for every prime in a [`PrimeSet`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchFamily {
    len: u64,
    sketches: Vec<OneMismatchSketch>,
}

impl SketchFamily {
    pub fn empty(primes: &PrimeSet) -> Self {
        SketchFamily {
            len: 0,
            sketches: primes
                .primes()
                .iter()
                .map(|&q| OneMismatchSketch::empty(q))
                .collect(),
        }
    }

    pub fn build(s: &[u8], primes: &PrimeSet, params: &FingerprintParams) -> Result<Self> {
        let mut fam = Self::empty(primes);
        for &b in s {
            fam.append_code(params.alphabet().encode(b)?, params);
        }
        Ok(fam)
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sketches(&self) -> &[OneMismatchSketch] {
        &self.sketches
    }

    pub fn append(&mut self, sym: u8, params: &FingerprintParams) -> Result<()> {
        self.append_code(params.alphabet().encode(sym)?, params);
        Ok(())
    }

    pub(crate) fn append_code(&mut self, code: u64, params: &FingerprintParams) {
        for sk in &mut self.sketches {
            sk.append_code(code, params);
        }
        self.len += 1;
    }

    fn check_same_primes(&self, other: &Self) -> Result<()> {
        if self.sketches.len() != other.sketches.len()
            || self
                .sketches
                .iter()
                .zip(&other.sketches)
                .any(|(a, b)| a.prime() != b.prime())
        {
            return Err(Error::Incompatible("families built over different primes"));
        }
        Ok(())
    }

    pub fn concat(&self, other: &Self, params: &FingerprintParams) -> Result<Self> {
        self.check_same_primes(other)?;
        let sketches = self
            .sketches
            .iter()
            .zip(&other.sketches)
            .map(|(a, b)| a.concat(b, params))
            .collect::<Result<_>>()?;
        Ok(SketchFamily {
            len: self.len + other.len,
            sketches,
        })
    }

    pub fn cut_prefix(z: &Self, x: &Self, params: &FingerprintParams) -> Result<Self> {
        z.check_same_primes(x)?;
        let sketches = z
            .sketches
            .iter()
            .zip(&x.sketches)
            .map(|(a, b)| OneMismatchSketch::cut_prefix(a, b, params))
            .collect::<Result<_>>()?;
        Ok(SketchFamily {
            len: z.len - x.len,
            sketches,
        })
    }

    pub fn cut_suffix(z: &Self, y: &Self, params: &FingerprintParams) -> Result<Self> {
        z.check_same_primes(y)?;
        let sketches = z
            .sketches
            .iter()
            .zip(&y.sketches)
            .map(|(a, b)| OneMismatchSketch::cut_suffix(a, b, params))
            .collect::<Result<_>>()?;
        Ok(SketchFamily {
            len: z.len - y.len,
            sketches,
        })
    }

    pub fn power(&self, alpha: u64, params: &FingerprintParams) -> Self {
        SketchFamily {
            len: self.len * alpha,
            sketches: self
                .sketches
                .iter()
                .map(|sk| sk.power(alpha, params))
                .collect(),
        }
    }

    pub fn replace_code(
        &self,
        pos: u64,
        old_code: u64,
        new_code: u64,
        params: &FingerprintParams,
    ) -> Self {
        SketchFamily {
            len: self.len,
            sketches: self
                .sketches
                .iter()
                .map(|sk| sk.replace_code(pos, old_code, new_code, params))
                .collect(),
        }
    }
}

/// Compares two equal-length sketch families.
///
/// `Equal` when every lane of every prime agrees. `Single(pos, diff)` when
/// exactly one lane differs per prime, the differing lane indices CRT-combine
/// to one position within the string, and every prime recovers the same
/// symbol difference there. Anything else — two or more differing lanes for
/// some prime, a CRT position past the end, or disagreeing recovered
/// differences — is conservatively `Many`.
pub fn locate_single_mismatch(
    a: &SketchFamily,
    b: &SketchFamily,
    params: &FingerprintParams,
) -> Result<MismatchVerdict> {
    a.check_same_primes(b)?;
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut residues = Vec::with_capacity(a.sketches.len());
    let mut all_equal = true;
    for (sa, sb) in a.sketches.iter().zip(&b.sketches) {
        let mut differing = None;
        let mut count = 0u32;
        for (j, (la, lb)) in sa.lanes().iter().zip(sb.lanes()).enumerate() {
            if la != lb {
                count += 1;
                differing = Some(j as u64);
                if count > 1 {
                    return Ok(MismatchVerdict::Many);
                }
            }
        }
        match differing {
            None => {}
            Some(j) => {
                all_equal = false;
                residues.push((j, sa.prime()));
            }
        }
    }
    if all_equal {
        return Ok(MismatchVerdict::Equal);
    }
    if residues.len() != a.sketches.len() {
        // Some prime saw no difference while another did.
        return Ok(MismatchVerdict::Many);
    }
    let pos0 = match field::crt(&residues) {
        Some(x) if x < a.len() as u128 => x as u64,
        _ => return Ok(MismatchVerdict::Many),
    };
    let pos = pos0 + 1;
    let mut diff = None;
    for (sa, sb) in a.sketches.iter().zip(&b.sketches) {
        let q = sa.prime();
        let lane = (pos0 % q) as usize;
        let t = pos0 / q + 1;
        let d = params.recover_difference(&sa.lanes()[lane], &sb.lanes()[lane], t);
        match diff {
            None => diff = Some(d),
            Some(prev) if prev != d => return Ok(MismatchVerdict::Many),
            Some(_) => {}
        }
    }
    Ok(MismatchVerdict::Single {
        pos,
        diff: diff.expect("at least one prime"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::Alphabet;

    fn params() -> FingerprintParams {
        FingerprintParams::new(4096, 11)
    }

    #[test]
    fn prime_set_examples() {
        assert_eq!(PrimeSet::for_length(1).primes(), &[2]);
        assert_eq!(PrimeSet::for_length(256).primes(), &[11, 13, 17]);
        for m in [1u64, 2, 3, 17, 100, 1024, 100_000] {
            let ps = PrimeSet::for_length(m);
            let product: u128 = ps.primes().iter().map(|&q| q as u128).product();
            assert!(product > m as u128, "product {product} <= {m}");
            assert!(ps.primes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn build_unrolls_definition() {
        let params = params();
        let sk = OneMismatchSketch::build(b"abca", 2, &params).unwrap();
        // Lane 0 holds positions 1,3 = "ac"; lane 1 holds positions 2,4 = "ba".
        assert_eq!(sk.lanes()[0], params.fingerprint(b"ac").unwrap());
        assert_eq!(sk.lanes()[1], params.fingerprint(b"ba").unwrap());
    }

    #[test]
    fn build_matches_subsequence_extraction() {
        let params = params();
        let s: Vec<u8> = (0..37u8).map(|i| i.wrapping_mul(31).wrapping_add(7)).collect();
        let q = 5u64;
        let sk = OneMismatchSketch::build(&s, q, &params).unwrap();
        for j in 0..q as usize {
            let lane: Vec<u8> = s.iter().copied().skip(j).step_by(q as usize).collect();
            assert_eq!(sk.lanes()[j], params.fingerprint(&lane).unwrap());
        }
    }

    #[test]
    fn empty_sketch_has_empty_lanes() {
        let sk = OneMismatchSketch::empty(3);
        assert!(sk.lanes().iter().all(|l| *l == Fingerprint::EMPTY));
    }

    #[test]
    fn concat_matches_direct_build() {
        let params = params();
        let a = OneMismatchSketch::build(b"ab", 2, &params).unwrap();
        let b = OneMismatchSketch::build(b"cde", 2, &params).unwrap();
        let direct = OneMismatchSketch::build(b"abcde", 2, &params).unwrap();
        assert_eq!(a.concat(&b, &params).unwrap(), direct);
        // Identities.
        let e = OneMismatchSketch::empty(2);
        assert_eq!(a.concat(&e, &params).unwrap(), a);
        assert_eq!(a.power(1, &params), a);
    }

    #[test]
    fn cut_and_power_match_direct_build() {
        let params = params();
        let z = OneMismatchSketch::build(b"abcdefg", 3, &params).unwrap();
        let x = OneMismatchSketch::build(b"abc", 3, &params).unwrap();
        let y = OneMismatchSketch::build(b"defg", 3, &params).unwrap();
        assert_eq!(OneMismatchSketch::cut_prefix(&z, &x, &params).unwrap(), y);
        assert_eq!(OneMismatchSketch::cut_suffix(&z, &y, &params).unwrap(), x);
        let rep = OneMismatchSketch::build(&b"abc".repeat(5), 3, &params).unwrap();
        assert_eq!(x.power(5, &params), rep);
    }

    #[test]
    fn prime_mismatch_is_rejected() {
        let params = params();
        let a = OneMismatchSketch::build(b"ab", 2, &params).unwrap();
        let b = OneMismatchSketch::build(b"ab", 3, &params).unwrap();
        assert!(a.concat(&b, &params).is_err());
    }

    #[test]
    fn locate_equal_and_planted_single() {
        let params = params();
        let ps = PrimeSet::for_length(128);
        let x: Vec<u8> = (0..100u8).map(|i| i.wrapping_mul(7)).collect();
        let fa = SketchFamily::build(&x, &ps, &params).unwrap();
        assert_eq!(
            locate_single_mismatch(&fa, &fa, &params).unwrap(),
            MismatchVerdict::Equal
        );
        let mut y = x.clone();
        y[41] = y[41].wrapping_add(3); // 1-based position 42
        let fb = SketchFamily::build(&y, &ps, &params).unwrap();
        match locate_single_mismatch(&fa, &fb, &params).unwrap() {
            MismatchVerdict::Single { pos, diff } => {
                assert_eq!(pos, 42);
                let code_x = params.alphabet().encode(x[41]).unwrap();
                let code_y = params.alphabet().encode(y[41]).unwrap();
                assert_eq!(diff, field::sub(code_x, code_y, params.modulus()));
            }
            v => panic!("expected Single, got {v:?}"),
        }
    }

    #[test]
    fn locate_adjacent_double_mismatch_is_many() {
        let params = params();
        let ps = PrimeSet::for_length(64);
        let x: Vec<u8> = (0..50u8).collect();
        let mut y = x.clone();
        y[2] = y[2].wrapping_add(1); // positions 3 and 4
        y[3] = y[3].wrapping_add(1);
        let fa = SketchFamily::build(&x, &ps, &params).unwrap();
        let fb = SketchFamily::build(&y, &ps, &params).unwrap();
        assert_eq!(
            locate_single_mismatch(&fa, &fb, &params).unwrap(),
            MismatchVerdict::Many
        );
    }

    #[test]
    fn locate_rejects_length_mismatch() {
        let params = params();
        let ps = PrimeSet::for_length(16);
        let fa = SketchFamily::build(b"abcd", &ps, &params).unwrap();
        let fb = SketchFamily::build(b"abc", &ps, &params).unwrap();
        assert!(locate_single_mismatch(&fa, &fb, &params).is_err());
    }

    #[test]
    fn replace_code_fixes_one_position() {
        let params = FingerprintParams::with_alphabet(
            1024,
            5,
            Alphabet::from_letters(b"abcd"),
        );
        let ps = PrimeSet::for_length(32);
        let s = b"abcdabcdabcd";
        let fam = SketchFamily::build(s, &ps, &params).unwrap();
        let mut t = s.to_vec();
        t[6] = b'a'; // position 7: 'c' -> 'a'
        let expect = SketchFamily::build(&t, &ps, &params).unwrap();
        let old = params.alphabet().encode(b'c').unwrap();
        let new = params.alphabet().encode(b'a').unwrap();
        assert_eq!(fam.replace_code(7, old, new, &params), expect);
    }
}
