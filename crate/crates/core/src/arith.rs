//! Small integer number-theory helpers used across the crate: centered
//! residues, powers of two, discrete logs, orders, factorization.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::HashMap;

/// 2^n as a `BigInt`.
pub fn pow2(n: u64) -> BigInt {
    BigInt::one() << n
}

/// The centered residue of `x` modulo 2^n, lying in (-2^(n-1), 2^(n-1)].
///
/// For odd `x` this is the unique odd representative with absolute value
/// at most 2^(n-1); for n >= 2 the bound is strict since 2^(n-1) is even.
pub fn centered_mod_pow2(x: &BigInt, n: u64) -> BigInt {
    let m = pow2(n);
    let mut r = x.mod_floor(&m);
    if &r * 2 > m {
        r -= &m;
    }
    r
}

/// If `x` is an exact power of two (x = 2^k, k >= 0), returns k.
pub fn power_of_two_exponent(x: &BigInt) -> Option<u64> {
    if x.sign() != num_bigint::Sign::Plus {
        return None;
    }
    let (_, bytes) = x.to_bytes_be();
    // x > 0: power of two iff exactly one bit set
    let mut ones = 0u32;
    for b in &bytes {
        ones += b.count_ones();
    }
    if ones == 1 {
        Some((x.bits() - 1) as u64)
    } else {
        None
    }
}

/// Inverse of `a` modulo `m` (m > 1), when gcd(a, m) = 1.
pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

/// Multiplicative order of `a` modulo `m` by plain iteration.
/// Returns `None` if gcd(a, m) != 1 or the order exceeds `cap`.
pub fn multiplicative_order(a: u64, m: u64, cap: u64) -> Option<u64> {
    if m <= 1 || a.gcd(&m) != 1 {
        return None;
    }
    let a = a % m;
    let mut acc = a % m;
    let mut k = 1u64;
    while acc != 1 {
        if k >= cap {
            return None;
        }
        acc = mulmod(acc, a, m);
        k += 1;
    }
    Some(k)
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// 2^n mod m by square-and-multiply (m need not be odd).
pub fn pow2_mod(n: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut result = 1u64 % m;
    let mut base = 2u64 % m;
    let mut e = n;
    while e > 0 {
        if e & 1 == 1 {
            result = mulmod(result, base, m);
        }
        base = mulmod(base, base, m);
        e >>= 1;
    }
    result
}

/// Smallest n >= 0 with 2^n = target (mod m), for odd m > 1, by
/// baby-step giant-step. Returns `None` when target is not in <2>.
pub fn dlog2_bsgs(target: u64, m: u64) -> Option<u64> {
    debug_assert!(m > 1 && m % 2 == 1);
    let target = target % m;
    if target == 1 {
        return Some(0);
    }
    // Orbit size is at most m - 1; table of ceil(sqrt(m)) baby steps.
    let s = (m as f64).sqrt().ceil() as u64 + 1;
    let mut table: HashMap<u64, u64> = HashMap::with_capacity(s as usize);
    let mut cur = 1u64;
    for j in 0..s {
        table.entry(cur).or_insert(j);
        cur = mulmod(cur, 2, m);
    }
    // giant stride 2^(-s) mod m
    let inv2s = {
        let g = BigInt::from(pow2_mod(s, m));
        let mm = BigInt::from(m);
        mod_inverse(&g, &mm)?.to_u64().unwrap()
    };
    let mut gamma = target;
    let mut i = 0u64;
    while i * s <= m {
        if let Some(j) = table.get(&gamma) {
            let n = i * s + j;
            if pow2_mod(n, m) == target {
                return Some(n);
            }
        }
        gamma = mulmod(gamma, inv2s, m);
        i += 1;
    }
    None
}

/// Prime factorization of a small positive integer by trial division.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Euler phi of a prime power p^e.
pub fn phi_prime_power(p: u64, e: u32) -> u64 {
    p.pow(e - 1) * (p - 1)
}

/// Smallest generator of the cyclic group (Z/p^e Z)* for odd prime p.
pub fn primitive_root(p: u64, e: u32) -> u64 {
    let q = p.pow(e);
    let phi = phi_prime_power(p, e);
    let prime_factors: Vec<u64> = factorize(phi).into_iter().map(|(r, _)| r).collect();
    'outer: for g in 2..q {
        if g % p == 0 {
            continue;
        }
        for r in &prime_factors {
            if powmod(g, phi / r, q) == 1 {
                continue 'outer;
            }
        }
        return g;
    }
    unreachable!("no primitive root found mod {}^{}", p, e)
}

/// a^n mod m for u64 operands.
pub fn powmod(a: u64, mut n: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut result = 1u64;
    let mut base = a % m;
    while n > 0 {
        if n & 1 == 1 {
            result = mulmod(result, base, m);
        }
        base = mulmod(base, base, m);
        n >>= 1;
    }
    result
}

/// Proper euclidean residue a mod m in [0, m) for i64.
pub fn rem_euclid_i64(a: i64, m: i64) -> i64 {
    a.rem_euclid(m)
}

/// Exact quotient `a / b`, or `None` when `b` does not divide `a`.
pub fn exact_div(a: &BigInt, b: &BigInt) -> Option<BigInt> {
    if b.is_zero() {
        return None;
    }
    let (q, r) = a.div_rem(b);
    if r.is_zero() {
        Some(q)
    } else {
        None
    }
}

/// |x| as BigInt.
pub fn abs(x: &BigInt) -> BigInt {
    x.abs()
}
