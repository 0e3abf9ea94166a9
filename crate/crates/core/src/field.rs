//! Modular arithmetic over a word-sized prime field, primality testing, and
//! Chinese-remainder reconstruction for small moduli sets.
//!
//! All multiplications go through `u128` intermediates so that results stay
//! exact for any modulus below 2^63.

/// `(a + b) mod p`. Operands must already be reduced.
#[inline]
pub fn add(a: u64, b: u64, p: u64) -> u64 {
    let s = a + b;
    if s >= p {
        s - p
    } else {
        s
    }
}

/// `(a - b) mod p`. Operands must already be reduced.
#[inline]
pub fn sub(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + p - b
    }
}

/// `(a * b) mod p` via a double-width intermediate.
#[inline]
pub fn mul(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

/// `a^e mod p` by square-and-multiply.
pub fn pow(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut acc = 1u64 % p;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(acc, a, p);
        }
        a = mul(a, a, p);
        e >>= 1;
    }
    acc
}

/// Multiplicative inverse modulo a prime `p` (Fermat).
#[inline]
pub fn inv(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0, "zero has no inverse");
    pow(a, p - 2, p)
}

/// Deterministic Miller-Rabin, exact for all `u64` inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &q in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly greater than `n`.
pub fn next_prime(mut n: u64) -> u64 {
    loop {
        n += 1;
        if is_prime(n) {
            return n;
        }
    }
}

/// All primes in `[lo, hi]`, ascending.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo.max(2)..=hi).filter(|&n| is_prime(n)).collect()
}

/// `floor(log2 n)` for `n >= 1`.
#[inline]
pub fn floor_log2(n: u64) -> u32 {
    debug_assert!(n >= 1);
    63 - n.leading_zeros()
}

/// `ceil(log2 n)` for `n >= 1`.
#[inline]
pub fn ceil_log2(n: u64) -> u32 {
    debug_assert!(n >= 1);
    if n == 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Reconstructs the unique `x` in `[0, prod(moduli))` with `x = r_i (mod m_i)`
/// for pairwise-coprime moduli. Returns `None` if the system is inconsistent
/// (cannot happen for distinct primes, kept for symmetry with callers).
pub fn crt(residues: &[(u64, u64)]) -> Option<u128> {
    let mut x: u128 = 0;
    let mut modulus: u128 = 1;
    for &(r, m) in residues {
        let m128 = m as u128;
        // Solve x + modulus * t = r (mod m).
        let cur = (x % m128) as u64;
        let need = sub(r % m, cur, m);
        let g = (modulus % m128) as u64;
        if g == 0 {
            if need != 0 {
                return None;
            }
            continue;
        }
        let t = mul(need, inv(g, m), m);
        x += modulus * t as u128;
        modulus *= m128;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primality_basics() {
        let primes = [2u64, 3, 5, 7, 97, 2147483647, 2305843009213693951];
        for p in primes {
            assert!(is_prime(p), "{p} should be prime");
        }
        let composites = [1u64, 4, 91, 561, 6700417 * 3, 2305843009213693951 + 2];
        for c in composites {
            assert!(!is_prime(c), "{c} should be composite");
        }
    }

    #[test]
    fn inv_roundtrip() {
        let p = 2305843009213693951u64; // 2^61 - 1
        for a in [1u64, 2, 10, 123456789, p - 1] {
            assert_eq!(mul(a, inv(a, p), p), 1);
        }
    }

    #[test]
    fn crt_reconstructs() {
        assert_eq!(crt(&[(2, 3), (3, 5), (2, 7)]), Some(23));
        assert_eq!(crt(&[(0, 2), (0, 3)]), Some(0));
        // Position 42 (0-based 41) modulo {5, 7, 11}.
        let pos = 41u64;
        let rs: Vec<_> = [5u64, 7, 11].iter().map(|&m| (pos % m, m)).collect();
        assert_eq!(crt(&rs), Some(41));
    }

    #[test]
    fn logs() {
        assert_eq!(floor_log2(1), 0);
        assert_eq!(floor_log2(128), 7);
        assert_eq!(floor_log2(129), 7);
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(256), 8);
    }
}
