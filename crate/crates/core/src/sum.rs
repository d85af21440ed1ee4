//! Finite integer-coefficient formal sums of matrices: the group-ring
//! elements that carry every cancellation step of the derivations. The
//! Hecke operator T_2 lives here as a three-term sum.

use crate::mat2::{LevelContext, Mat2};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;

/// Which side a matrix multiplies a sum on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A finite formal sum of matrices with integer coefficients. Terms with
/// equal canonical keys are merged; zero coefficients are dropped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FormalSum {
    terms: BTreeMap<Mat2, i64>,
}

impl FormalSum {
    pub fn empty() -> Self {
        FormalSum::default()
    }

    pub fn from_terms<I: IntoIterator<Item = (i64, Mat2)>>(terms: I) -> Self {
        let mut s = FormalSum::empty();
        for (coeff, m) in terms {
            s.add_term(coeff, m);
        }
        s
    }

    /// A single matrix with coefficient 1.
    pub fn singleton(m: Mat2) -> Self {
        FormalSum::from_terms([(1, m)])
    }

    pub fn add_term(&mut self, coeff: i64, m: Mat2) {
        if coeff == 0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if *e.get() == 0 {
                    e.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
        }
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Mat2) -> i64 {
        self.terms.get(m).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Mat2, i64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn add(&self, rhs: &FormalSum) -> FormalSum {
        let mut out = self.clone();
        for (m, c) in rhs.iter() {
            out.add_term(c, m.clone());
        }
        out
    }

    pub fn sub(&self, rhs: &FormalSum) -> FormalSum {
        let mut out = self.clone();
        for (m, c) in rhs.iter() {
            out.add_term(-c, m.clone());
        }
        out
    }

    /// Termwise product by `g` on the given side, coefficients preserved.
    pub fn mul(&self, g: &Mat2, side: Side) -> FormalSum {
        FormalSum::from_terms(self.iter().map(|(m, c)| {
            let p = match side {
                Side::Left => g.mul(m),
                Side::Right => m.mul(g),
            };
            (c, p)
        }))
    }

    /// Termwise conjugation g^{-1} * m * g.
    pub fn conjugate(&self, g: &Mat2) -> FormalSum {
        let ginv = g.inverse();
        FormalSum::from_terms(self.iter().map(|(m, c)| (c, ginv.mul(m).mul(g))))
    }
}

impl fmt::Display for FormalSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            if c == 1 {
                write!(f, "{m}")?;
            } else {
                write!(f, "{c}*{m}")?;
            }
        }
        Ok(())
    }
}

impl Serialize for FormalSum {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Term<'a> {
            coeff: String,
            matrix: &'a Mat2,
        }
        let mut seq = serializer.serialize_seq(Some(self.terms.len()))?;
        for (m, c) in self.iter() {
            seq.serialize_element(&Term {
                coeff: c.to_string(),
                matrix: m,
            })?;
        }
        seq.end()
    }
}

/// The Hecke operator at 2 with trivial character, chi(2) = 1:
/// (2,0;0,1) + (1,0;0,2) + (1,1;0,2), each with coefficient 1.
pub fn hecke_t2() -> FormalSum {
    FormalSum::from_terms([
        (1, Mat2::from_i64(2, 0, 0, 1).unwrap()),
        (1, Mat2::from_i64(1, 0, 0, 2).unwrap()),
        (1, Mat2::from_i64(1, 1, 0, 2).unwrap()),
    ])
}

/// The three T_2 summands in display order (2,0;0,1), (1,0;0,2), (1,1;0,2).
pub fn hecke_t2_summands() -> [Mat2; 3] {
    [
        Mat2::from_i64(2, 0, 0, 1).unwrap(),
        Mat2::from_i64(1, 0, 0, 2).unwrap(),
        Mat2::from_i64(1, 1, 0, 2).unwrap(),
    ]
}

/// Conjugate every term of `s` by `g`: termwise g^{-1} m g.
pub fn conjugate_sum(s: &FormalSum, g: &Mat2) -> FormalSum {
    s.conjugate(g)
}

/// Termwise product of `s` by `g` on the chosen side.
pub fn mul_sum(s: &FormalSum, g: &Mat2, side: Side) -> FormalSum {
    s.mul(g, side)
}

/// Remove the shared part of both sides: for every matrix carried by both
/// sums with same-signed coefficients, subtract the smaller magnitude from
/// each. Re-adding the cancelled part restores the originals exactly, so
/// the truth of lhs = rhs is untouched.
pub fn cancel_common(lhs: &FormalSum, rhs: &FormalSum) -> (FormalSum, FormalSum) {
    let mut l = lhs.clone();
    let mut r = rhs.clone();
    let shared: Vec<(Mat2, i64)> = lhs
        .iter()
        .filter_map(|(m, cl)| {
            let cr = rhs.coefficient(m);
            if cl > 0 && cr > 0 {
                Some((m.clone(), cl.min(cr)))
            } else if cl < 0 && cr < 0 {
                Some((m.clone(), cl.max(cr)))
            } else {
                None
            }
        })
        .collect();
    for (m, c) in shared {
        l.add_term(-c, m.clone());
        r.add_term(-c, m);
    }
    (l, r)
}

/// The four-term second-order expansion (1 - g)(1 - d) = 1 - g - d + g*d,
/// merged. Rearranged it is the statement 1 + g*d = g + d.
pub fn expand_second_order(g: &Mat2, d: &Mat2) -> FormalSum {
    FormalSum::from_terms([
        (1, Mat2::identity()),
        (-1, g.clone()),
        (-1, d.clone()),
        (1, g.mul(d)),
    ])
}

/// The conjugated Hecke sum H_N^{-1} T_2 H_N, computed exactly.
pub fn hecke_t2_conjugated_by_fricke(ctx: &LevelContext) -> FormalSum {
    conjugate_sum(&hecke_t2(), &ctx.h())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::LevelContext;

    fn m(a: i64, b: i64, c: i64, d: i64) -> Mat2 {
        Mat2::from_i64(a, b, c, d).unwrap()
    }

    #[test]
    fn hecke_operator_terms() {
        let t2 = hecke_t2();
        assert_eq!(t2.term_count(), 3);
        assert_eq!(t2.coefficient(&m(2, 0, 0, 1)), 1);
        assert_eq!(t2.coefficient(&m(1, 0, 0, 2)), 1);
        assert_eq!(t2.coefficient(&m(1, 1, 0, 2)), 1);
        let det_sum: i64 = t2
            .iter()
            .map(|(mat, c)| c * mat.det().to_integer().to_string().parse::<i64>().unwrap())
            .sum();
        assert_eq!(det_sum, 6); // each summand has det 2
    }

    #[test]
    fn conjugation_by_fricke() {
        for n in [3i64, 999] {
            let ctx = LevelContext::new(n, 1).unwrap();
            let conj = hecke_t2_conjugated_by_fricke(&ctx);
            let expected = FormalSum::from_terms([
                (1, m(1, 0, 0, 2)),
                (1, m(2, 0, 0, 1)),
                (1, m(2, 0, -n, 1)),
            ]);
            assert_eq!(conj, expected, "conjugation identity failed at N={n}");
        }
        // conjugating by the identity is a no-op
        let s = hecke_t2();
        assert_eq!(conjugate_sum(&s, &Mat2::identity()), s);
    }

    #[test]
    fn multiplication_examples() {
        let ctx = LevelContext::new(3, 1).unwrap();
        let prod = mul_sum(&hecke_t2(), &ctx.m2(), Side::Right);
        let expected = FormalSum::from_terms([
            (1, m(4, -2, -3, 2)),
            (1, m(2, -1, -6, 4)),
            (1, m(-1, 1, -6, 4)),
        ]);
        assert_eq!(prod, expected);

        let s = hecke_t2();
        assert!(s.sub(&s).is_empty());

        let disjoint = FormalSum::from_terms([(2, m(5, 0, 0, 1))]);
        assert_eq!(s.add(&disjoint).term_count(), s.term_count() + 1);
    }

    #[test]
    fn cancellation() {
        // the base-case instance: both sides share (2,0,0,1) and (1,0,0,2)
        let n = 11i64;
        let ctx = LevelContext::new(n, 1).unwrap();
        let lhs = hecke_t2_conjugated_by_fricke(&ctx);
        let rhs = hecke_t2();
        let (l, r) = cancel_common(&lhs, &rhs);
        assert_eq!(l, FormalSum::singleton(m(2, 0, -n, 1)));
        assert_eq!(r, FormalSum::singleton(m(1, 1, 0, 2)));
        // re-adding the cancelled part restores the originals
        let cancelled_l = lhs.sub(&l);
        let cancelled_r = rhs.sub(&r);
        assert_eq!(cancelled_l, cancelled_r);
        assert_eq!(l.add(&cancelled_l), lhs);
        assert_eq!(r.add(&cancelled_r), rhs);

        let (e1, e2) = cancel_common(&rhs, &rhs);
        assert!(e1.is_empty() && e2.is_empty());

        // opposite signs do not cancel
        let a = FormalSum::from_terms([(1, m(2, 0, 0, 1))]);
        let b = FormalSum::from_terms([(-1, m(2, 0, 0, 1))]);
        let (x, y) = cancel_common(&a, &b);
        assert_eq!((x, y), (a, b));
    }

    #[test]
    fn second_order_expansion() {
        let ctx = LevelContext::new(3, 1).unwrap();
        // (1 - 1)(1 - d) = 0
        assert!(expand_second_order(&Mat2::identity(), &ctx.w()).is_empty());

        let e = expand_second_order(&ctx.t(), &ctx.w());
        let expected = FormalSum::from_terms([
            (1, Mat2::identity()),
            (-1, m(1, 1, 0, 1)),
            (-1, m(1, 0, 3, 1)),
            (1, m(4, 1, 3, 1)), // T * W_3 = (1,1;0,1)(1,0;3,1)
        ]);
        assert_eq!(e, expected);
        assert!(e.iter().all(|(_, c)| c == 1 || c == -1));
    }

    #[test]
    fn serialization_uses_decimal_strings() {
        let s = FormalSum::from_terms([(2, m(1, 0, 0, 2)), (-1, m(2, 0, 0, 1))]);
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(
            json,
            serde_json::json!([
                {"coeff": "2", "matrix": ["1","0","0","2"]},
                {"coeff": "-1", "matrix": ["2","0","0","1"]}
            ])
        );
    }
}
