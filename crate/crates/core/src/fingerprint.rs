//! Rabin-Karp fingerprints over a prime field.
//!
//! The fingerprint of `X[1..l]` is `phi(X) = sum X[i] * r^i mod p` for a
//! prime `p` and a seeded random evaluation point `r`. Each fingerprint also
//! carries `r^l` and `r^-l`, which makes the concatenation law
//! `phi(XY) = phi(X) + r^|X| * phi(Y)` invertible in both directions: given
//! any two of `phi(X)`, `phi(Y)`, `phi(XY)` the third is one field operation
//! away.

use crate::error::Error;
use crate::field;
use crate::Result;
use rand_core::{RngCore, SeedableRng};

/// Injective map from letters to the field elements `1..=|alphabet|`.
///
/// Codes start at 1, never 0, so a symbol difference recovered from
/// fingerprints always decodes to a concrete letter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    codes: [u16; 256],
    letters: Vec<u8>,
}

impl Alphabet {
    /// Alphabet of all 256 byte values, coded as `byte + 1`.
    pub fn full() -> Self {
        let mut codes = [0u16; 256];
        for (b, c) in codes.iter_mut().enumerate() {
            *c = b as u16 + 1;
        }
        Alphabet {
            codes,
            letters: (0u8..=255).collect(),
        }
    }

    /// Restricted alphabet; letters are deduplicated and coded in ascending
    /// byte order starting from 1.
    pub fn from_letters(letters: &[u8]) -> Self {
        let mut sorted: Vec<u8> = letters.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let mut codes = [0u16; 256];
        for (i, &b) in sorted.iter().enumerate() {
            codes[b as usize] = i as u16 + 1;
        }
        Alphabet {
            codes,
            letters: sorted,
        }
    }

    #[inline]
    pub fn encode(&self, b: u8) -> Result<u64> {
        match self.codes[b as usize] {
            0 => Err(Error::SymbolOutsideAlphabet(b)),
            c => Ok(c as u64),
        }
    }

    /// Letter for a code in `1..=len`, if any.
    #[inline]
    pub fn decode(&self, code: u64) -> Option<u8> {
        if code >= 1 && code <= self.letters.len() as u64 {
            Some(self.letters[(code - 1) as usize])
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// Field modulus, evaluation point and symbol encoding shared by all
/// fingerprints of one matcher family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerprintParams {
    p: u64,
    r: u64,
    r_inv: u64,
    alphabet: Alphabet,
}

/// Fingerprint of a string together with the length-dependent multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint {
    pub value: u64,
    pub len: u64,
    pub r_pow: u64,
    pub r_pow_inv: u64,
}

impl Fingerprint {
    /// Fingerprint of the empty string.
    pub const EMPTY: Fingerprint = Fingerprint {
        value: 0,
        len: 0,
        r_pow: 1,
        r_pow_inv: 1,
    };
}

impl FingerprintParams {
    /// Parameters for texts of at most `max_text_len` symbols over the full
    /// byte alphabet. `p` is the smallest prime exceeding
    /// `max(max_text_len^3, 2^61 - 1)`, found deterministically, so the
    /// per-comparison collision probability is at most `m/p`. `r` is drawn
    /// uniformly from `[1, p-1]` under the seed.
    pub fn new(max_text_len: u64, seed: u64) -> Self {
        Self::with_alphabet(max_text_len, seed, Alphabet::full())
    }

    pub fn with_alphabet(max_text_len: u64, seed: u64, alphabet: Alphabet) -> Self {
        assert!(max_text_len >= 1, "max_text_len must be at least 1");
        let cube = (max_text_len as u128).pow(3);
        let floor = cube.max((1u128 << 61) - 1);
        assert!(
            floor < u64::MAX as u128 - (1 << 32),
            "max_text_len {max_text_len} too large for a word-sized modulus"
        );
        let p = field::next_prime(floor as u64);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // Rejection sampling keeps r uniform on [1, p-1] for any rand version.
        let span = p - 1;
        let bound = u64::MAX - u64::MAX % span;
        let r = loop {
            let x = rng.next_u64();
            if x < bound {
                break 1 + x % span;
            }
        };
        Self::from_parts(p, r, alphabet)
    }

    /// Builds parameters from explicit values. The caller guarantees that `p`
    /// is prime and `1 <= r < p`; useful for tests with tiny fields.
    pub fn from_parts(p: u64, r: u64, alphabet: Alphabet) -> Self {
        assert!(p >= 2 && r >= 1 && r < p);
        FingerprintParams {
            p,
            r,
            r_inv: field::inv(r, p),
            alphabet,
        }
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn point(&self) -> u64 {
        self.r
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    /// `phi(X)` of a whole string.
    pub fn fingerprint(&self, s: &[u8]) -> Result<Fingerprint> {
        let mut fp = Fingerprint::EMPTY;
        for &b in s {
            fp = self.append_code(&fp, self.alphabet.encode(b)?);
        }
        Ok(fp)
    }

    /// Extends a fingerprint by one symbol on the right.
    pub fn append(&self, fp: &Fingerprint, sym: u8) -> Result<Fingerprint> {
        Ok(self.append_code(fp, self.alphabet.encode(sym)?))
    }

    pub(crate) fn append_code(&self, fp: &Fingerprint, code: u64) -> Fingerprint {
        let r_pow = field::mul(fp.r_pow, self.r, self.p);
        Fingerprint {
            value: field::add(fp.value, field::mul(code, r_pow, self.p), self.p),
            len: fp.len + 1,
            r_pow,
            r_pow_inv: field::mul(fp.r_pow_inv, self.r_inv, self.p),
        }
    }

    /// Fingerprint of the concatenation `XY` from those of `X` and `Y`.
    #[inline]
    pub fn concat(&self, a: &Fingerprint, b: &Fingerprint) -> Fingerprint {
        Fingerprint {
            value: field::add(a.value, field::mul(a.r_pow, b.value, self.p), self.p),
            len: a.len + b.len,
            r_pow: field::mul(a.r_pow, b.r_pow, self.p),
            r_pow_inv: field::mul(a.r_pow_inv, b.r_pow_inv, self.p),
        }
    }

    /// Given `Z = XY`, recovers the fingerprint of the suffix `Y` from those
    /// of `Z` and the prefix `X`.
    pub fn cut_prefix(&self, z: &Fingerprint, x: &Fingerprint) -> Result<Fingerprint> {
        if x.len > z.len {
            return Err(Error::LengthMismatch {
                left: x.len,
                right: z.len,
            });
        }
        Ok(Fingerprint {
            value: field::mul(field::sub(z.value, x.value, self.p), x.r_pow_inv, self.p),
            len: z.len - x.len,
            r_pow: field::mul(z.r_pow, x.r_pow_inv, self.p),
            r_pow_inv: field::mul(z.r_pow_inv, x.r_pow, self.p),
        })
    }

    /// Given `Z = XY`, recovers the fingerprint of the prefix `X` from those
    /// of `Z` and the suffix `Y`.
    pub fn cut_suffix(&self, z: &Fingerprint, y: &Fingerprint) -> Result<Fingerprint> {
        if y.len > z.len {
            return Err(Error::LengthMismatch {
                left: y.len,
                right: z.len,
            });
        }
        let x_r_pow = field::mul(z.r_pow, y.r_pow_inv, self.p);
        Ok(Fingerprint {
            value: field::sub(z.value, field::mul(x_r_pow, y.value, self.p), self.p),
            len: z.len - y.len,
            r_pow: x_r_pow,
            r_pow_inv: field::mul(z.r_pow_inv, y.r_pow, self.p),
        })
    }

    /// Fingerprint of `X^alpha` by repeated squaring of the concatenation
    /// law, in O(log alpha) field operations.
    pub fn power(&self, x: &Fingerprint, mut alpha: u64) -> Fingerprint {
        let mut acc = Fingerprint::EMPTY;
        let mut base = *x;
        while alpha > 0 {
            if alpha & 1 == 1 {
                acc = self.concat(&acc, &base);
            }
            alpha >>= 1;
            if alpha > 0 {
                base = self.concat(&base, &base);
            }
        }
        acc
    }

    /// For two equal-length strings differing only at position `j` (1-based),
    /// returns `code(X[j]) - code(Y[j]) mod p` from their fingerprints.
    /// Garbage in, garbage out: the single-mismatch precondition is not
    /// checkable locally.
    pub fn recover_difference(&self, fx: &Fingerprint, fy: &Fingerprint, j: u64) -> u64 {
        let diff = field::sub(fx.value, fy.value, self.p);
        field::mul(diff, field::pow(self.r_inv, j, self.p), self.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct polynomial evaluation, independent of the incremental path.
    fn poly_oracle(params: &FingerprintParams, s: &[u8]) -> u64 {
        let p = params.modulus();
        let mut acc = 0u64;
        let mut rp = 1u64;
        for &b in s {
            rp = field::mul(rp, params.point(), p);
            let code = params.alphabet().encode(b).unwrap();
            acc = field::add(acc, field::mul(code, rp, p), p);
        }
        acc
    }

    fn tiny_params() -> FingerprintParams {
        FingerprintParams::from_parts(97, 10, Alphabet::from_letters(b"abc"))
    }

    #[test]
    fn params_bounds_and_determinism() {
        let a = FingerprintParams::new(100_000, 7);
        assert!(a.modulus() > 1_000_000_000_000_000);
        assert!(a.point() >= 1 && a.point() < a.modulus());
        let b = FingerprintParams::new(100_000, 7);
        assert_eq!(a, b);
        let c = FingerprintParams::new(1, 0);
        assert!(c.modulus() >= 2);
        assert!(c.point() >= 1 && c.point() < c.modulus());
    }

    #[test]
    fn empty_string_fingerprint() {
        let params = tiny_params();
        let fp = params.fingerprint(b"").unwrap();
        assert_eq!(fp, Fingerprint::EMPTY);
    }

    #[test]
    fn abc_matches_hand_computation() {
        // codes a=1 b=2 c=3, p=97, r=10: (1*10 + 2*100 + 3*1000) mod 97 = 9.
        let params = tiny_params();
        let fp = params.fingerprint(b"abc").unwrap();
        assert_eq!(fp.value, 9);
        assert_eq!(fp.len, 3);
        assert_eq!(fp.value, poly_oracle(&params, b"abc"));
    }

    #[test]
    fn encoding_error_for_unknown_symbol() {
        let params = tiny_params();
        assert_eq!(
            params.fingerprint(b"abx"),
            Err(Error::SymbolOutsideAlphabet(b'x'))
        );
    }

    #[test]
    fn concat_identities() {
        let params = tiny_params();
        let x = params.fingerprint(b"ab").unwrap();
        let c = params.fingerprint(b"c").unwrap();
        let e = Fingerprint::EMPTY;
        assert_eq!(params.concat(&x, &e), x);
        assert_eq!(params.concat(&e, &c), c);
        assert_eq!(
            params.concat(&x, &c),
            params.fingerprint(b"abc").unwrap()
        );
    }

    #[test]
    fn cut_prefix_examples() {
        let params = tiny_params();
        let z = params.fingerprint(b"abc").unwrap();
        let x = params.fingerprint(b"ab").unwrap();
        assert_eq!(
            params.cut_prefix(&z, &x).unwrap(),
            params.fingerprint(b"c").unwrap()
        );
        assert_eq!(params.cut_prefix(&z, &z).unwrap(), Fingerprint::EMPTY);
        assert_eq!(params.cut_prefix(&z, &Fingerprint::EMPTY).unwrap(), z);
        let long = params.fingerprint(b"aaaa").unwrap();
        assert!(params.cut_prefix(&z, &long).is_err());
    }

    #[test]
    fn cut_suffix_inverts_concat() {
        let params = tiny_params();
        let z = params.fingerprint(b"abcab").unwrap();
        let y = params.fingerprint(b"cab").unwrap();
        assert_eq!(
            params.cut_suffix(&z, &y).unwrap(),
            params.fingerprint(b"ab").unwrap()
        );
    }

    #[test]
    fn power_examples() {
        let params = tiny_params();
        let x = params.fingerprint(b"ab").unwrap();
        assert_eq!(params.power(&x, 0), Fingerprint::EMPTY);
        assert_eq!(params.power(&x, 1), x);
        assert_eq!(
            params.power(&x, 3),
            params.fingerprint(b"ababab").unwrap()
        );
    }

    #[test]
    fn recover_difference_hand_example() {
        // X="aa", Y="ab", j=2: (phi(X)-phi(Y)) * r^-2 = -1 mod 97 = 96.
        let params = tiny_params();
        let fx = params.fingerprint(b"aa").unwrap();
        let fy = params.fingerprint(b"ab").unwrap();
        assert_eq!(params.recover_difference(&fx, &fy, 2), 96);
        assert_eq!(params.recover_difference(&fx, &fx, 2), 0);
    }

    #[test]
    fn inverse_multipliers_stay_consistent() {
        let params = FingerprintParams::new(1000, 3);
        let fp = params.fingerprint(b"hello world").unwrap();
        assert_eq!(field::mul(fp.r_pow, fp.r_pow_inv, params.modulus()), 1);
    }
}
