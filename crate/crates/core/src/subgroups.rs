//! Membership predicates and enumeration for the matrix sets the relation
//! engine works in: Gamma_0(N), Gamma_{0,2}(N), G_{0,2}(N), L_{0,2}(N),
//! plus a character-theoretic cross-check oracle for Gamma_{0,2}(N).

use crate::arith;
use crate::error::{Error, Result};
use crate::mat2::{LevelContext, Mat2};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::HashMap;
use std::fmt;

/// Integer entries, determinant 1, and lower-left entry divisible by N.
pub fn in_gamma0(m: &Mat2, ctx: &LevelContext) -> bool {
    let Some((_, _, c, _)) = m.integer_entries() else {
        return false;
    };
    m.det().is_one() && c.mod_floor(&BigInt::from(ctx.level())).is_zero()
}

/// Gamma_0(N) with top-left entry congruent to a power of 2 mod N.
pub fn in_gamma02(m: &Mat2, ctx: &LevelContext) -> bool {
    if !in_gamma0(m, ctx) {
        return false;
    }
    let a = m.a().to_integer().mod_floor(&BigInt::from(ctx.level()));
    let a = a.to_i64().expect("residue fits i64");
    ctx.pow2_residues().contains(&a)
}

/// Gamma_0(N) with top-left entry an exact power of 2 (n >= 0, so the
/// identity, T and W_N all qualify).
pub fn in_g02(m: &Mat2, ctx: &LevelContext) -> bool {
    g02_exponent(m, ctx).is_some()
}

/// When `m` lies in G_{0,2}(N), the exponent n of its top-left entry 2^n.
pub fn g02_exponent(m: &Mat2, ctx: &LevelContext) -> Option<u64> {
    if !in_gamma0(m, ctx) {
        return None;
    }
    arith::power_of_two_exponent(&m.a().to_integer())
}

/// G_{0,2}(N) with n >= 1 and off-diagonal bounds |alpha|, |beta| <= 2^(n-1),
/// where b = alpha and c = beta * N.
pub fn in_l02(m: &Mat2, ctx: &LevelContext) -> bool {
    descriptor_of(m, ctx).is_ok()
}

/// The (n, alpha, beta) coordinates of an L_{0,2}(N) element: the matrix
/// (2^n, alpha; beta*N, (alpha*beta*N + 1)/2^n).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LElementDescriptor {
    level: i64,
    n: u64,
    alpha: BigInt,
    beta: BigInt,
}

impl fmt::Debug for LElementDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L(N={}; n={}, a={}, b={})", self.level, self.n, self.alpha, self.beta)
    }
}

impl fmt::Display for LElementDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.n, self.alpha, self.beta)
    }
}

impl LElementDescriptor {
    /// Validate the descriptor invariants against `ctx` and construct.
    pub fn new(ctx: &LevelContext, n: u64, alpha: BigInt, beta: BigInt) -> Result<Self> {
        let d = LElementDescriptor {
            level: ctx.level(),
            n,
            alpha,
            beta,
        };
        d.check(ctx)?;
        Ok(d)
    }

    fn check(&self, ctx: &LevelContext) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::NotLElement {
                level: ctx.level(),
                key: format!("{self}"),
                reason: reason.into(),
            })
        };
        if self.n < 1 {
            return fail("exponent n must be >= 1");
        }
        if self.alpha.is_even() || self.beta.is_even() {
            return fail("alpha and beta must be odd");
        }
        let bound = arith::pow2(self.n - 1);
        if self.alpha.abs() > bound || self.beta.abs() > bound {
            return fail("off-diagonal bound |alpha|,|beta| <= 2^(n-1) violated");
        }
        let k: BigInt = &self.alpha * &self.beta * ctx.level() + 1;
        if !k.mod_floor(&arith::pow2(self.n)).is_zero() {
            return fail("alpha*beta*N != -1 mod 2^n, bottom-right entry not an integer");
        }
        Ok(())
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> &BigInt {
        &self.alpha
    }

    pub fn beta(&self) -> &BigInt {
        &self.beta
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    /// The matrix (2^n, alpha; beta*N, (alpha*beta*N + 1)/2^n).
    pub fn matrix(&self, ctx: &LevelContext) -> Mat2 {
        let k = &self.alpha * &self.beta * ctx.level() + 1;
        let d = arith::exact_div(&k, &arith::pow2(self.n)).expect("descriptor invariant");
        Mat2::from_bigint(
            arith::pow2(self.n),
            self.alpha.clone(),
            &self.beta * ctx.level(),
            d,
        )
        .expect("descriptor matrices have determinant 1")
    }
}

/// Extract the descriptor of an L_{0,2}(N) member, or say why not.
pub fn descriptor_of(m: &Mat2, ctx: &LevelContext) -> Result<LElementDescriptor> {
    let fail = |reason: &str| Error::NotLElement {
        level: ctx.level(),
        key: m.key(),
        reason: reason.into(),
    };
    let n = g02_exponent(m, ctx).ok_or_else(|| fail("not in G_{0,2}(N)"))?;
    if n < 1 {
        return Err(fail("top-left entry is 2^0"));
    }
    let alpha = m.b().to_integer();
    let beta = arith::exact_div(&m.c().to_integer(), &BigInt::from(ctx.level()))
        .expect("Gamma_0 membership guarantees divisibility");
    LElementDescriptor::new(ctx, n, alpha, beta)
}

/// All admissible (n, alpha, beta) with 1 <= n <= n_max: alpha, beta odd,
/// |alpha|, |beta| <= 2^(n-1), alpha*beta*N = -1 mod 2^n, each exactly once.
///
/// For n = 1 the congruence is vacuous (alpha*beta*N is odd), so all four
/// sign choices appear. For n >= 2 each odd alpha determines beta uniquely.
pub fn enumerate_l_descriptors(ctx: &LevelContext, n_max: u64) -> Vec<LElementDescriptor> {
    let mut out = Vec::new();
    for n in 1..=n_max {
        if n == 1 {
            for alpha in [-1i64, 1] {
                for beta in [-1i64, 1] {
                    out.push(
                        LElementDescriptor::new(ctx, 1, alpha.into(), beta.into())
                            .expect("n=1 descriptors always admissible"),
                    );
                }
            }
            continue;
        }
        let modulus = arith::pow2(n);
        let bound = arith::pow2(n - 1);
        let mut alpha: BigInt = -(&bound) + 1;
        while alpha < bound {
            if alpha.is_odd() {
                let an = &alpha * ctx.level();
                let inv = arith::mod_inverse(&an, &modulus).expect("odd is invertible mod 2^n");
                let beta = arith::centered_mod_pow2(&-inv, n);
                out.push(
                    LElementDescriptor::new(ctx, n, alpha.clone(), beta)
                        .expect("solved congruence is admissible"),
                );
            }
            alpha += 1;
        }
    }
    out
}

/// One cyclic factor of (Z/NZ)*: the units mod p^e with a fixed generator
/// and its discrete-log table.
struct CyclicFactor {
    prime_power: u64,
    order: u64,
    dlog: HashMap<u64, u64>,
}

/// The full character group of (Z/NZ)* for odd N, realized through the
/// cyclic decomposition by prime powers. A character is a tuple
/// (c_1, ..., c_r) acting on dlog coordinates; chi(x) = 1 is the exact
/// integer condition sum_i c_i * x_i * (L / m_i) = 0 mod L, which avoids
/// root-of-unity arithmetic entirely.
pub struct CharacterGroup {
    factors: Vec<CyclicFactor>,
    /// dlog coordinates of 2.
    two_coords: Vec<u64>,
    /// lcm of the factor orders.
    exponent: u64,
}

impl CharacterGroup {
    pub fn new(ctx: &LevelContext) -> Self {
        let mut factors = Vec::new();
        for (p, e) in arith::factorize(ctx.level() as u64) {
            let q = p.pow(e);
            let order = arith::phi_prime_power(p, e);
            let g = arith::primitive_root(p, e);
            let mut dlog = HashMap::with_capacity(order as usize);
            let mut acc = 1u64;
            for j in 0..order {
                dlog.insert(acc, j);
                acc = (acc as u128 * g as u128 % q as u128) as u64;
            }
            factors.push(CyclicFactor {
                prime_power: q,
                order,
                dlog,
            });
        }
        let exponent = factors.iter().fold(1u64, |l, f| l.lcm(&f.order));
        let two_coords = coords_of(&factors, 2).expect("2 is a unit mod odd N");
        CharacterGroup {
            factors,
            two_coords,
            exponent,
        }
    }

    /// chi(a) = 1 for every Dirichlet character mod N with chi(2) = 1?
    /// Requires gcd(a, N) = 1.
    pub fn annihilated_by_two_trivial_characters(&self, a: &BigInt) -> Option<bool> {
        let a_coords = coords_of_bigint(&self.factors, a)?;
        // enumerate all characters with a mixed-radix counter
        let r = self.factors.len();
        let mut c = vec![0u64; r];
        loop {
            let chi_two = self.pair(&c, &self.two_coords);
            if chi_two == 0 {
                let chi_a = self.pair(&c, &a_coords);
                if chi_a != 0 {
                    return Some(false);
                }
            }
            // increment
            let mut i = 0;
            loop {
                if i == r {
                    return Some(true);
                }
                c[i] += 1;
                if c[i] < self.factors[i].order {
                    break;
                }
                c[i] = 0;
                i += 1;
            }
        }
    }

    /// The exact phase sum_i c_i * x_i * (L / m_i) mod L; zero means chi(x)=1.
    fn pair(&self, character: &[u64], coords: &[u64]) -> u64 {
        let mut acc: u128 = 0;
        for (i, f) in self.factors.iter().enumerate() {
            let weight = (self.exponent / f.order) as u128;
            acc += character[i] as u128 * coords[i] as u128 % self.exponent as u128 * weight;
        }
        (acc % self.exponent as u128) as u64
    }
}

fn coords_of(factors: &[CyclicFactor], x: u64) -> Option<Vec<u64>> {
    factors
        .iter()
        .map(|f| f.dlog.get(&(x % f.prime_power)).copied())
        .collect()
}

fn coords_of_bigint(factors: &[CyclicFactor], x: &BigInt) -> Option<Vec<u64>> {
    factors
        .iter()
        .map(|f| {
            let r = x.mod_floor(&BigInt::from(f.prime_power)).to_u64().unwrap();
            f.dlog.get(&r).copied()
        })
        .collect()
}

/// Character-theoretic route to Gamma_{0,2}(N) membership: true iff
/// chi(a) = 1 for every Dirichlet character chi mod N with chi(2) = 1.
///
/// This is an independent oracle for [`in_gamma02`]; a lies in <2> exactly
/// when it is annihilated by all characters trivial on <2>. The precondition
/// is membership in Gamma_0(N).
pub fn in_gamma02_by_characters(m: &Mat2, ctx: &LevelContext) -> Result<bool> {
    if !in_gamma0(m, ctx) {
        return Err(Error::NotGamma0 {
            level: ctx.level(),
            reason: format!("{m} fails the Gamma_0 precondition of the character oracle"),
        });
    }
    let group = CharacterGroup::new(ctx);
    Ok(group
        .annihilated_by_two_trivial_characters(&m.a().to_integer())
        .expect("det 1 and c = 0 mod N force gcd(a, N) = 1"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(n: i64) -> LevelContext {
        LevelContext::new(n, 1).unwrap()
    }

    fn m(a: i64, b: i64, c: i64, d: i64) -> Mat2 {
        Mat2::from_i64(a, b, c, d).unwrap()
    }

    #[test]
    fn gamma0_membership() {
        let c7 = ctx(7);
        assert!(in_gamma0(&m(2, 1, 7, 4), &c7)); // det 8-7=1, 7 = 0 mod 7
        assert!(in_gamma0(&Mat2::identity(), &c7));
        assert!(!in_gamma0(&m(2, -1, -5, 3), &c7)); // -5 != 0 mod 7
        // non-integral matrices are excluded outright
        let half: Mat2 = "1/2,0,0,2".parse().unwrap();
        assert!(!in_gamma0(&half, &c7));
    }

    #[test]
    fn gamma02_membership() {
        let c7 = ctx(7);
        assert!(in_gamma02(&m(2, 1, 7, 4), &c7)); // powers of 2 mod 7: {1,2,4}
        let outside = m(3, 1, 14, 5); // det 15-14=1, 14 = 0 mod 7, but 3 not in <2>
        assert!(in_gamma0(&outside, &c7));
        assert!(!in_gamma02(&outside, &c7));
        assert!(in_gamma02(&Mat2::identity(), &c7)); // 1 = 2^0
    }

    #[test]
    fn character_oracle_matches_examples() {
        let c7 = ctx(7);
        assert_eq!(in_gamma02_by_characters(&m(2, 1, 7, 4), &c7).unwrap(), true);
        assert_eq!(
            in_gamma02_by_characters(&m(3, 1, 14, 5), &c7).unwrap(),
            false
        );
        assert_eq!(
            in_gamma02_by_characters(&Mat2::identity(), &c7).unwrap(),
            true
        );
        // precondition violation
        assert!(matches!(
            in_gamma02_by_characters(&m(2, -1, -5, 3), &c7),
            Err(Error::NotGamma0 { .. })
        ));
    }

    #[test]
    fn character_oracle_agrees_on_residues() {
        // for every odd N <= 45 and every unit residue, the two routes agree
        for n in (3..=45i64).step_by(2) {
            let c = ctx(n);
            let group = CharacterGroup::new(&c);
            for a in 1..n {
                if BigInt::from(a).gcd(&BigInt::from(n)) != BigInt::one() {
                    continue;
                }
                let direct = c.pow2_residues().contains(&a);
                let via_chars = group
                    .annihilated_by_two_trivial_characters(&BigInt::from(a))
                    .unwrap();
                assert_eq!(direct, via_chars, "disagreement at a={} N={}", a, n);
            }
        }
    }

    #[test]
    fn g02_membership() {
        let c5 = ctx(5);
        assert!(in_g02(&m(2, 1, 5, 3), &c5)); // top-left 2^1, det 6-5=1
        assert!(in_g02(&m(1, 1, 0, 1), &c5)); // T, 1 = 2^0
        assert!(!in_g02(&m(3, 1, 14, 5), &ctx(7))); // 3 is not a power of 2
        assert_eq!(g02_exponent(&m(4, 1, 3, 1), &ctx(3)), Some(2));
    }

    #[test]
    fn l02_membership_and_descriptors() {
        let c3 = ctx(3);
        let m2 = c3.m2();
        assert!(in_l02(&m2, &c3));
        let d = descriptor_of(&m2, &c3).unwrap();
        assert_eq!((d.n(), d.alpha().clone(), d.beta().clone()), (1, (-1).into(), (-1).into()));
        assert_eq!(d.matrix(&c3), m2);

        let four = m(4, 1, 3, 1);
        let d = descriptor_of(&four, &c3).unwrap();
        assert_eq!((d.n(), d.alpha().clone(), d.beta().clone()), (2, 1.into(), 1.into()));

        // |alpha| = 3 > 2 violates the bound even though the matrix is in G_{0,2}(3)
        let wide = m(4, 3, 9, 7);
        assert!(in_g02(&wide, &c3));
        assert!(!in_l02(&wide, &c3));
        // and the non-integral completion of (4,3,3,*) is not even in Gamma_0
        let odd: Mat2 = "4,3,3,5/2".parse().unwrap();
        assert!(!in_l02(&odd, &c3));
    }

    #[test]
    fn membership_chain_on_enumerated_descriptors() {
        for n in [3i64, 5, 7, 9, 15] {
            let c = ctx(n);
            for d in enumerate_l_descriptors(&c, 5) {
                let mat = d.matrix(&c);
                assert!(in_l02(&mat, &c));
                assert!(in_g02(&mat, &c));
                assert!(in_gamma02(&mat, &c), "L element outside Gamma02 at N={n}");
                assert!(in_gamma0(&mat, &c));
            }
        }
    }

    #[test]
    fn enumeration_examples() {
        let c3 = ctx(3);
        let level1 = enumerate_l_descriptors(&c3, 1);
        assert_eq!(level1.len(), 4);

        let level2: Vec<_> = enumerate_l_descriptors(&c3, 2)
            .into_iter()
            .filter(|d| d.n() == 2)
            .collect();
        let has = |a: i64, b: i64| {
            level2
                .iter()
                .any(|d| d.alpha() == &BigInt::from(a) && d.beta() == &BigInt::from(b))
        };
        assert!(has(1, 1)); // 1*1*3 = 3 = -1 mod 4
        assert!(!has(1, -1)); // -3 = 1 mod 4
        assert!(has(-1, -1));
    }

    #[test]
    fn enumeration_matches_brute_force() {
        // independent double loop over all odd pairs in range
        for n_level in (3..=15i64).step_by(2) {
            let c = ctx(n_level);
            for n in 1..=6u64 {
                let fast: Vec<_> = enumerate_l_descriptors(&c, n)
                    .into_iter()
                    .filter(|d| d.n() == n)
                    .collect();
                let bound = 1i64 << (n - 1);
                let modulus = 1i64 << n;
                let mut brute = 0usize;
                let mut alpha = -bound;
                while alpha <= bound {
                    let mut beta = -bound;
                    while beta <= bound {
                        if alpha % 2 != 0
                            && beta % 2 != 0
                            && (alpha * beta * n_level + 1).rem_euclid(modulus) == 0
                        {
                            brute += 1;
                            assert!(
                                fast.iter().any(|d| d.alpha() == &BigInt::from(alpha)
                                    && d.beta() == &BigInt::from(beta)),
                                "missing ({n},{alpha},{beta}) at N={n_level}"
                            );
                        }
                        beta += 1;
                    }
                    alpha += 1;
                }
                assert_eq!(fast.len(), brute, "count mismatch at N={n_level} n={n}");
            }
        }
    }
}
