//! Exact 2x2 matrices over arbitrary-precision rationals, plus the level
//! context that carries the odd level N and its derived data.
//!
//! Everything downstream computes in this module's types. Entries are
//! rationals, not integers: intermediate products such as right
//! multiplication by the inverse of an integral matrix are rational before
//! the relation engine normalizes them. Integrality is a checked property,
//! not a type constraint. There is no quotient by scalar -1; equality is
//! exact entrywise equality.

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

/// Render a rational in lowest terms as `"n"` or `"n/d"` with d > 0.
pub fn rational_to_string(x: &BigRational) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parse `"n"` or `"n/d"` into a rational.
pub fn rational_from_string(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n = BigInt::from_str(num).map_err(|e| Error::Parse(format!("bad numerator {s:?}: {e}")))?;
    let d =
        BigInt::from_str(den).map_err(|e| Error::Parse(format!("bad denominator {s:?}: {e}")))?;
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(BigRational::new(n, d))
}

/// An exact 2x2 matrix with nonzero determinant.
///
/// Row-major entry order (a, b; c, d). `num_rational` keeps entries in
/// lowest terms with positive denominators, so derived equality and
/// ordering coincide with the canonical 4-tuple key.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mat2 {
    a: BigRational,
    b: BigRational,
    c: BigRational,
    d: BigRational,
}

impl Mat2 {
    /// Construct a matrix, rejecting zero determinant.
    pub fn new(a: BigRational, b: BigRational, c: BigRational, d: BigRational) -> Result<Self> {
        let m = Mat2 { a, b, c, d };
        if m.det().is_zero() {
            return Err(Error::SingularMatrix);
        }
        Ok(m)
    }

    pub fn from_i64(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        Self::new(
            BigRational::from_integer(a.into()),
            BigRational::from_integer(b.into()),
            BigRational::from_integer(c.into()),
            BigRational::from_integer(d.into()),
        )
    }

    pub fn from_bigint(a: BigInt, b: BigInt, c: BigInt, d: BigInt) -> Result<Self> {
        Self::new(
            BigRational::from_integer(a),
            BigRational::from_integer(b),
            BigRational::from_integer(c),
            BigRational::from_integer(d),
        )
    }

    pub fn identity() -> Self {
        Mat2 {
            a: BigRational::one(),
            b: BigRational::zero(),
            c: BigRational::zero(),
            d: BigRational::one(),
        }
    }

    pub fn a(&self) -> &BigRational {
        &self.a
    }
    pub fn b(&self) -> &BigRational {
        &self.b
    }
    pub fn c(&self) -> &BigRational {
        &self.c
    }
    pub fn d(&self) -> &BigRational {
        &self.d
    }

    /// Exact determinant ad - bc.
    pub fn det(&self) -> BigRational {
        &self.a * &self.d - &self.b * &self.c
    }

    /// Exact matrix product self * rhs.
    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: &self.a * &rhs.a + &self.b * &rhs.c,
            b: &self.a * &rhs.b + &self.b * &rhs.d,
            c: &self.c * &rhs.a + &self.d * &rhs.c,
            d: &self.c * &rhs.b + &self.d * &rhs.d,
        }
    }

    /// Exact inverse; always defined since the determinant is nonzero.
    pub fn inverse(&self) -> Mat2 {
        let det = self.det();
        Mat2 {
            a: &self.d / &det,
            b: -&self.b / &det,
            c: -&self.c / &det,
            d: &self.a / &det,
        }
    }

    /// True iff all four entries are integers.
    pub fn is_integral(&self) -> bool {
        self.a.is_integer() && self.b.is_integer() && self.c.is_integer() && self.d.is_integer()
    }

    /// Integer entries (a, b, c, d) when integral.
    pub fn integer_entries(&self) -> Option<(BigInt, BigInt, BigInt, BigInt)> {
        if !self.is_integral() {
            return None;
        }
        Some((
            self.a.to_integer(),
            self.b.to_integer(),
            self.c.to_integer(),
            self.d.to_integer(),
        ))
    }

    /// Canonical key: the four lowest-terms entries joined by commas.
    /// Two matrices are equal iff their keys agree.
    pub fn key(&self) -> String {
        format!(
            "{},{},{},{}",
            rational_to_string(&self.a),
            rational_to_string(&self.b),
            rational_to_string(&self.c),
            rational_to_string(&self.d)
        )
    }

    pub fn entries(&self) -> [&BigRational; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }
}

impl fmt::Debug for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.key())
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.key())
    }
}

impl FromStr for Mat2 {
    type Err = Error;

    /// Parse `"a,b,c,d"`, each entry `"n"` or `"n/d"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!(
                "expected 4 comma-separated entries, got {}",
                parts.len()
            )));
        }
        Mat2::new(
            rational_from_string(parts[0])?,
            rational_from_string(parts[1])?,
            rational_from_string(parts[2])?,
            rational_from_string(parts[3])?,
        )
    }
}

impl Serialize for Mat2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let strings = [
            rational_to_string(&self.a),
            rational_to_string(&self.b),
            rational_to_string(&self.c),
            rational_to_string(&self.d),
        ];
        strings.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mat2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let strings = <[String; 4]>::deserialize(deserializer)?;
        let parse =
            |s: &String| rational_from_string(s).map_err(|e| D::Error::custom(e.to_string()));
        Mat2::new(
            parse(&strings[0])?,
            parse(&strings[1])?,
            parse(&strings[2])?,
            parse(&strings[3])?,
        )
        .map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// The matrices the derivations are phrased in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedMatrix {
    /// T = (1, 1; 0, 1), translation.
    T,
    /// W_N = (1, 0; N, 1).
    W,
    /// H_N = (0, -1; N, 0), the Fricke involution (determinant N).
    H,
    /// M_2 = (2, -1; -N, (N+1)/2), the first derived relation.
    M2,
}

/// The odd level N together with derived data: the sign of the Fricke
/// relation and the cyclic subgroup of (Z/NZ)* generated by 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelContext {
    level: i64,
    epsilon: i32,
    pow2_residues: BTreeSet<i64>,
    ord2: u64,
}

impl LevelContext {
    /// Build the context for an odd level N >= 3. `epsilon` is the +-1 of
    /// the Fricke relation; it is recorded but never changes any matrix
    /// computation (the sign cancels in the base-case conjugation).
    pub fn new(level: i64, epsilon: i32) -> Result<Self> {
        if level < 3 || level % 2 == 0 {
            return Err(Error::InvalidLevel(level));
        }
        if epsilon != 1 && epsilon != -1 {
            return Err(Error::InvalidEpsilon(epsilon as i64));
        }
        let mut residues = BTreeSet::new();
        let mut r = 1i64;
        let mut ord2 = 0u64;
        loop {
            residues.insert(r);
            r = (r * 2) % level;
            ord2 += 1;
            if r == 1 {
                break;
            }
        }
        Ok(LevelContext {
            level,
            epsilon,
            pow2_residues: residues,
            ord2,
        })
    }

    pub fn level(&self) -> i64 {
        self.level
    }

    pub fn epsilon(&self) -> i32 {
        self.epsilon
    }

    /// {2^j mod N : j >= 0}, the subgroup of (Z/NZ)* generated by 2.
    pub fn pow2_residues(&self) -> &BTreeSet<i64> {
        &self.pow2_residues
    }

    /// Multiplicative order of 2 mod N.
    pub fn ord2(&self) -> u64 {
        self.ord2
    }

    pub fn named(&self, which: NamedMatrix) -> Mat2 {
        let n = self.level;
        match which {
            NamedMatrix::T => Mat2::from_i64(1, 1, 0, 1),
            NamedMatrix::W => Mat2::from_i64(1, 0, n, 1),
            NamedMatrix::H => Mat2::from_i64(0, -1, n, 0),
            // (N+1)/2 is an integer exactly because N is odd.
            NamedMatrix::M2 => Mat2::new(
                BigRational::from_integer(2.into()),
                BigRational::from_integer((-1).into()),
                BigRational::from_integer((-n).into()),
                BigRational::new((n + 1).into(), 2.into()),
            ),
        }
        .expect("named matrices are never singular")
    }

    pub fn t(&self) -> Mat2 {
        self.named(NamedMatrix::T)
    }

    pub fn w(&self) -> Mat2 {
        self.named(NamedMatrix::W)
    }

    pub fn h(&self) -> Mat2 {
        self.named(NamedMatrix::H)
    }

    pub fn m2(&self) -> Mat2 {
        self.named(NamedMatrix::M2)
    }

    /// T^e = (1, e; 0, 1) in closed form.
    pub fn t_pow(&self, e: &BigInt) -> Mat2 {
        Mat2::from_bigint(BigInt::one(), e.clone(), BigInt::zero(), BigInt::one())
            .expect("unipotent")
    }

    /// W_N^e = (1, 0; eN, 1) in closed form.
    pub fn w_pow(&self, e: &BigInt) -> Mat2 {
        Mat2::from_bigint(BigInt::one(), BigInt::zero(), e * self.level, BigInt::one())
            .expect("unipotent")
    }

    /// Smallest j >= 0 with 2^j = a (mod N), if a lies in <2>.
    pub fn dlog2_mod_level(&self, a: &BigInt) -> Option<u64> {
        let target = a.mod_floor(&BigInt::from(self.level));
        let mut acc = BigInt::one();
        let n = BigInt::from(self.level);
        for j in 0..self.ord2 {
            if acc == target {
                return Some(j);
            }
            acc = (acc * 2) % &n;
        }
        None
    }
}

/// Named-matrix accessor matching the operation table.
pub fn named(which: NamedMatrix, ctx: &LevelContext) -> Mat2 {
    ctx.named(which)
}

pub use crate::arith::{centered_mod_pow2, power_of_two_exponent};

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn constructor_rejects_singular() {
        assert!(Mat2::from_i64(1, 0, 0, 1).is_ok());
        assert!(matches!(
            Mat2::from_i64(1, 1, 0, 0),
            Err(Error::SingularMatrix)
        ));
        assert_eq!(Mat2::from_i64(1, 0, 0, 1).unwrap(), Mat2::identity());
    }

    #[test]
    fn named_matrices() {
        let ctx3 = LevelContext::new(3, 1).unwrap();
        let ctx5 = LevelContext::new(5, 1).unwrap();
        assert_eq!(ctx3.h(), Mat2::from_i64(0, -1, 3, 0).unwrap());
        assert_eq!(ctx3.m2(), Mat2::from_i64(2, -1, -3, 2).unwrap());
        assert_eq!(ctx5.m2(), Mat2::from_i64(2, -1, -5, 3).unwrap());
        assert!(matches!(LevelContext::new(1, 1), Err(Error::InvalidLevel(1))));
        assert!(matches!(LevelContext::new(4, 1), Err(Error::InvalidLevel(4))));
        assert!(matches!(LevelContext::new(5, 2), Err(Error::InvalidEpsilon(2))));
    }

    #[test]
    fn products_and_inverses() {
        let ctx = LevelContext::new(5, 1).unwrap();
        // direct exact multiplication (1,0,5,1)*(2,-1,-5,3)
        let got = ctx.w().mul(&ctx.m2());
        assert_eq!(got, Mat2::from_i64(2, -1, 5, -2).unwrap());
        assert_eq!(ctx.t().inverse(), Mat2::from_i64(1, -1, 0, 1).unwrap());
        for n in (3..=99i64).step_by(2) {
            let c = LevelContext::new(n, 1).unwrap();
            assert!(c.m2().det().is_one(), "det M2({}) != 1", n);
        }
    }

    #[test]
    fn fourth_variant_identity_all_levels() {
        // W_N * M2 * T = (2, 1; N, (N+1)/2) for every odd N <= 999
        for n in (3..=999i64).step_by(2) {
            let ctx = LevelContext::new(n, 1).unwrap();
            let lhs = ctx.w().mul(&ctx.m2().mul(&ctx.t()));
            let rhs = Mat2::new(
                rat(2, 1),
                rat(1, 1),
                rat(n, 1),
                BigRational::new((n + 1).into(), 2.into()),
            )
            .unwrap();
            assert_eq!(lhs, rhs, "variant identity failed at N={}", n);
        }
    }

    #[test]
    fn hecke_conjugation_per_summand() {
        // H_N^{-1} * summand * H_N for the three T_2 summands, every odd N <= 999
        for n in (3..=999i64).step_by(2) {
            let ctx = LevelContext::new(n, 1).unwrap();
            let h = ctx.h();
            let hinv = h.inverse();
            let conj = |m: &Mat2| hinv.mul(m).mul(&h);
            assert_eq!(
                conj(&Mat2::from_i64(2, 0, 0, 1).unwrap()),
                Mat2::from_i64(1, 0, 0, 2).unwrap()
            );
            assert_eq!(
                conj(&Mat2::from_i64(1, 0, 0, 2).unwrap()),
                Mat2::from_i64(2, 0, 0, 1).unwrap()
            );
            assert_eq!(
                conj(&Mat2::from_i64(1, 1, 0, 2).unwrap()),
                Mat2::from_i64(2, 0, -n, 1).unwrap()
            );
        }
    }

    #[test]
    fn integrality() {
        assert!(Mat2::from_i64(4, 1, 3, 1).unwrap().is_integral());
        let half = Mat2::new(rat(4, 1), rat(-1, 1), rat(-3, 1), rat(-1, 2)).unwrap();
        assert!(!half.is_integral());
        assert!(Mat2::identity().is_integral());
    }

    #[test]
    fn keys_and_serialization() {
        let m = Mat2::new(rat(2, 1), rat(-1, 1), rat(-5, 1), rat(3, 1)).unwrap();
        assert_eq!(m.key(), "2,-1,-5,3");
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"["2","-1","-5","3"]"#);
        let back: Mat2 = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);

        let q = Mat2::new(rat(1, 2), rat(0, 1), rat(0, 1), rat(2, 1)).unwrap();
        assert_eq!(q.key(), "1/2,0,0,2");
        let round: Mat2 = serde_json::from_str(&serde_json::to_string(&q).unwrap()).unwrap();
        assert_eq!(round, q);
    }

    #[test]
    fn parse_matrix_argument() {
        let m: Mat2 = "2,-1,-5,3".parse().unwrap();
        assert_eq!(m, Mat2::from_i64(2, -1, -5, 3).unwrap());
        let q: Mat2 = "1/2, 0, 0, 2".parse().unwrap();
        assert_eq!(q.det(), BigRational::one());
        assert!("1,2,3".parse::<Mat2>().is_err());
        assert!("1,1,0,0".parse::<Mat2>().is_err());
    }

    #[test]
    fn dlog_mod_level() {
        let ctx = LevelContext::new(7, 1).unwrap();
        assert_eq!(ctx.ord2(), 3);
        assert_eq!(
            ctx.pow2_residues().iter().copied().collect::<Vec<_>>(),
            vec![1, 2, 4]
        );
        assert_eq!(ctx.dlog2_mod_level(&BigInt::from(4)), Some(2));
        assert_eq!(ctx.dlog2_mod_level(&BigInt::from(3)), None);
        assert_eq!(ctx.dlog2_mod_level(&BigInt::from(11)), Some(2));
    }
}
