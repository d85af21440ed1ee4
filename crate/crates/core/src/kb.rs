//! The relation knowledge base: certified "matrix = 1" entries with
//! replayable derivation records, generator words over the certified set,
//! and a bounded-word equivalence search.
//!
//! A certificate never stores trust: replaying its reason must reconstruct
//! the matrix exactly, and the audit path does exactly that for every entry.

use crate::error::{Error, Result};
use crate::mat2::{LevelContext, Mat2};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, HashMap};
use std::fmt;

/// Canonical key of a certified matrix: its lowest-terms entry 4-tuple.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CertKey(pub String);

impl CertKey {
    pub fn of(m: &Mat2) -> Self {
        CertKey(m.key())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CertKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One token of a generator word. T and W powers are stored as runs with a
/// nonzero exponent; certificate references carry the canonical key of a
/// certified matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Token {
    T(BigInt),
    W(BigInt),
    Cert(CertKey),
}

impl Token {
    fn run_text(letter: char, e: &BigInt) -> String {
        if e.is_one() {
            letter.to_string()
        } else if (-e).is_one() {
            format!("{letter}-1")
        } else {
            format!("{letter}^{e}")
        }
    }

    pub fn text(&self) -> String {
        match self {
            Token::T(e) => Self::run_text('T', e),
            Token::W(e) => Self::run_text('W', e),
            Token::Cert(k) => format!("cert:{k}"),
        }
    }

    pub fn parse(s: &str) -> Result<Token> {
        let bad = || Error::Parse(format!("bad word token {s:?}"));
        if let Some(key) = s.strip_prefix("cert:") {
            return Ok(Token::Cert(CertKey(key.to_string())));
        }
        let mut chars = s.chars();
        let letter = chars.next().ok_or_else(bad)?;
        let rest = chars.as_str();
        let exp: BigInt = if rest.is_empty() {
            BigInt::one()
        } else if rest == "-1" {
            -BigInt::one()
        } else if let Some(e) = rest.strip_prefix('^') {
            e.parse().map_err(|_| bad())?
        } else {
            return Err(bad());
        };
        match letter {
            'T' => Ok(Token::T(exp)),
            'W' => Ok(Token::W(exp)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Token {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.text())
    }
}

impl<'de> Deserialize<'de> for Token {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Token::parse(&s).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// A word over {T^e, W^e, cert(key)} whose replay is the exact left-to-right
/// product of its tokens.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeneratorWord {
    pub tokens: Vec<Token>,
}

impl GeneratorWord {
    pub fn empty() -> Self {
        GeneratorWord::default()
    }

    pub fn push_t(&mut self, e: BigInt) {
        if e.is_zero() {
            return;
        }
        if let Some(Token::T(prev)) = self.tokens.last_mut() {
            *prev += &e;
            if prev.is_zero() {
                self.tokens.pop();
            }
            return;
        }
        self.tokens.push(Token::T(e));
    }

    pub fn push_w(&mut self, e: BigInt) {
        if e.is_zero() {
            return;
        }
        if let Some(Token::W(prev)) = self.tokens.last_mut() {
            *prev += &e;
            if prev.is_zero() {
                self.tokens.pop();
            }
            return;
        }
        self.tokens.push(Token::W(e));
    }

    pub fn push_cert(&mut self, key: CertKey) {
        self.tokens.push(Token::Cert(key));
    }

    pub fn extend(&mut self, other: &GeneratorWord) {
        for t in &other.tokens {
            match t {
                Token::T(e) => self.push_t(e.clone()),
                Token::W(e) => self.push_w(e.clone()),
                Token::Cert(k) => self.push_cert(k.clone()),
            }
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Merge adjacent T and W runs; drops nothing else.
    pub fn collapsed(&self) -> GeneratorWord {
        let mut out = GeneratorWord::empty();
        out.extend(self);
        out
    }
}

impl fmt::Display for GeneratorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tokens.is_empty() {
            return write!(f, "(empty)");
        }
        let texts: Vec<String> = self.tokens.iter().map(Token::text).collect();
        write!(f, "{}", texts.join(" "))
    }
}

/// Seed relations: T = 1 (periodicity) and W_N = 1 (Fricke-transported
/// periodicity).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedName {
    T,
    W,
}

/// Which of the two splittings of the surviving four-term identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pairing {
    P1,
    P2,
}

/// Which member of the chosen pairing a certificate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    First,
    Second,
}

/// The replayable derivation of a certified matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reason {
    /// T or W_N, assumed from the start.
    Seed(SeedName),
    /// A word over prior certificates and T/W runs replaying to the matrix.
    Word(GeneratorWord),
    /// The base-case derivation of M_2 from the Fricke conjugation of T_2.
    BaseM2,
    /// One inductive step: cancel against the parent's half-level identity,
    /// split by the chosen pairing, take `slot`, then normalize with
    /// W^k on the left (`pre`) and T^l on the right (`post`).
    ProcessStep {
        parent: CertKey,
        pairing: Pairing,
        slot: Slot,
        pre: GeneratorWord,
        post: GeneratorWord,
    },
}

/// A certified relation "matrix = 1" with its derivation record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub matrix: Mat2,
    pub reason: Reason,
}

impl Certificate {
    pub fn key(&self) -> CertKey {
        CertKey::of(&self.matrix)
    }
}

/// The growing set of certified relations for one level, plus the search
/// depth for bounded-word equivalence.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    ctx: LevelContext,
    certified: BTreeMap<CertKey, Certificate>,
    rewrite_depth: usize,
    half_level_adjustments: u64,
}

/// Default maximal |u| + |v| for the bounded-word equivalence search.
pub const DEFAULT_REWRITE_DEPTH: usize = 4;

/// A fresh knowledge base holding exactly the seed relations T = 1 and
/// W_N = 1. The Fricke sign epsilon stays recorded in the context; H_N is
/// never inserted (its determinant is N, not 1) and only appears inside the
/// base-case conjugation.
pub fn seed_kb(ctx: &LevelContext) -> KnowledgeBase {
    let mut kb = KnowledgeBase {
        ctx: ctx.clone(),
        certified: BTreeMap::new(),
        rewrite_depth: DEFAULT_REWRITE_DEPTH,
        half_level_adjustments: 0,
    };
    kb.insert(Certificate {
        matrix: ctx.t(),
        reason: Reason::Seed(SeedName::T),
    })
    .expect("T is integral with determinant 1");
    kb.insert(Certificate {
        matrix: ctx.w(),
        reason: Reason::Seed(SeedName::W),
    })
    .expect("W is integral with determinant 1");
    kb
}

impl KnowledgeBase {
    pub fn ctx(&self) -> &LevelContext {
        &self.ctx
    }

    pub fn rewrite_depth(&self) -> usize {
        self.rewrite_depth
    }

    pub fn set_rewrite_depth(&mut self, depth: usize) {
        self.rewrite_depth = depth;
    }

    pub fn len(&self) -> usize {
        self.certified.len()
    }

    pub fn is_empty(&self) -> bool {
        self.certified.is_empty()
    }

    /// Insert a certificate after checking the knowledge-base invariant:
    /// certified matrices are integral with determinant 1. When the matrix
    /// is already certified the existing entry wins (certificates for the
    /// same matrix are interchangeable, and keeping the first stabilizes
    /// the derivation DAG).
    pub fn insert(&mut self, cert: Certificate) -> Result<CertKey> {
        if !cert.matrix.is_integral() {
            return Err(Error::InternalIdentity(format!(
                "refusing to certify non-integral matrix {}",
                cert.matrix
            )));
        }
        if !cert.matrix.det().is_one() {
            return Err(Error::InternalIdentity(format!(
                "refusing to certify matrix {} with determinant {}",
                cert.matrix,
                cert.matrix.det()
            )));
        }
        let key = cert.key();
        self.certified.entry(key.clone()).or_insert(cert);
        Ok(key)
    }

    pub fn get(&self, key: &CertKey) -> Option<&Certificate> {
        self.certified.get(key)
    }

    pub fn contains(&self, m: &Mat2) -> bool {
        self.certified.contains_key(&CertKey::of(m))
    }

    pub fn contains_key(&self, key: &CertKey) -> bool {
        self.certified.contains_key(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&CertKey, &Certificate)> {
        self.certified.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &CertKey> {
        self.certified.keys()
    }

    /// Times a half-level prerequisite fell outside the L bounds and was
    /// certified through a T/W adjustment word instead.
    pub fn half_level_adjustments(&self) -> u64 {
        self.half_level_adjustments
    }

    pub(crate) fn record_half_level_adjustment(&mut self) {
        self.half_level_adjustments += 1;
    }

    /// Merge another snapshot's certificates into this base; existing keys win.
    pub fn merge(&mut self, other: KnowledgeBase) {
        for (key, cert) in other.certified {
            self.certified.entry(key).or_insert(cert);
        }
        self.half_level_adjustments += other.half_level_adjustments;
    }

    /// Exact left-to-right product of a word's tokens.
    pub fn replay_word(&self, word: &GeneratorWord) -> Result<Mat2> {
        let mut acc = Mat2::identity();
        for token in &word.tokens {
            let m = match token {
                Token::T(e) => self.ctx.t_pow(e),
                Token::W(e) => self.ctx.w_pow(e),
                Token::Cert(key) => self
                    .certified
                    .get(key)
                    .map(|c| c.matrix.clone())
                    .ok_or_else(|| Error::UnknownKey(key.to_string()))?,
            };
            acc = acc.mul(&m);
        }
        Ok(acc)
    }
}

/// Exact left-to-right product of `word`, resolving certificate references
/// in `kb`. The empty word replays to the identity.
pub fn replay(word: &GeneratorWord, kb: &KnowledgeBase) -> Result<Mat2> {
    kb.replay_word(word)
}

/// A witness that `m` and `target` are equivalent modulo the certified
/// relations: replay(left) * target * replay(right) = m, exactly, with every
/// token itself certified equivalent to 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceWitness {
    pub left: GeneratorWord,
    pub right: GeneratorWord,
}

impl EquivalenceWitness {
    pub fn verify(&self, m: &Mat2, target: &Mat2, kb: &KnowledgeBase) -> Result<bool> {
        let l = kb.replay_word(&self.left)?;
        let r = kb.replay_word(&self.right)?;
        Ok(l.mul(target).mul(&r) == *m)
    }
}

/// Bounded-word equivalence search: look for words u, v over
/// {T, T^-1, W, W^-1} and the certified matrices with |u| + |v| at most the
/// knowledge base's rewrite depth such that u * target * v = m exactly.
///
/// Absence is a value: general equivalence modulo a finitely generated
/// group is undecidable, and every derivation step the engine performs
/// needs words of length at most 2. Each returned witness is re-verified by
/// multiplication before being surfaced.
pub fn equivalent_to(kb: &KnowledgeBase, m: &Mat2, target: &Mat2) -> Option<EquivalenceWitness> {
    let depth = kb.rewrite_depth;
    let alphabet = search_alphabet(kb);

    // Right factors first: map key(target * R) -> (length, right word), the
    // shortest word per product. Then scan left words L in length order and
    // look up the needed right product (L^-1 would be wasteful; instead we
    // match replay(l) * target * R = m through key(R) = key((L*target)^-1 m)).
    let mut right_products: HashMap<String, (usize, GeneratorWord)> = HashMap::new();
    let mut frontier: Vec<(Mat2, GeneratorWord)> = vec![(Mat2::identity(), GeneratorWord::empty())];
    right_products.insert(Mat2::identity().key(), (0, GeneratorWord::empty()));
    for len in 1..=depth {
        let mut next = Vec::new();
        for (prod, word) in &frontier {
            for (tok, mat) in &alphabet {
                let new_prod = prod.mul(mat);
                let key = new_prod.key();
                if !right_products.contains_key(&key) {
                    let mut w = word.clone();
                    w.tokens.push(tok.clone());
                    right_products.insert(key, (len, w.clone()));
                    next.push((new_prod, w));
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }

    // Left frontiers by exact length, then scan total budgets in order so
    // the first witness returned has minimal |u| + |v|.
    let mut left_by_len: Vec<Vec<(Mat2, GeneratorWord)>> =
        vec![vec![(Mat2::identity(), GeneratorWord::empty())]];
    for len in 1..=depth {
        let mut next = Vec::new();
        let mut seen: std::collections::HashSet<String> = std::collections::HashSet::new();
        for (prod, word) in &left_by_len[len - 1] {
            for (tok, mat) in &alphabet {
                let new_prod = prod.mul(mat);
                if seen.insert(new_prod.key()) {
                    let mut w = word.clone();
                    w.tokens.push(tok.clone());
                    next.push((new_prod, w));
                }
            }
        }
        left_by_len.push(next);
    }

    for budget in 0..=depth {
        for left_len in 0..=budget {
            let want_rlen = budget - left_len;
            for (lprod, lword) in &left_by_len[left_len] {
                // need R with (lprod * target) * R = m
                let lt = lprod.mul(target);
                let needed = lt.inverse().mul(m);
                if let Some((rlen, rword)) = right_products.get(&needed.key()) {
                    if *rlen == want_rlen {
                        let witness = EquivalenceWitness {
                            left: lword.clone(),
                            right: rword.clone(),
                        };
                        if witness.verify(m, target, kb).unwrap_or(false) {
                            return Some(witness);
                        }
                    }
                }
            }
        }
    }
    None
}

fn search_alphabet(kb: &KnowledgeBase) -> Vec<(Token, Mat2)> {
    let one = BigInt::one();
    let mut alphabet = vec![
        (Token::T(one.clone()), kb.ctx.t()),
        (Token::T(-one.clone()), kb.ctx.t().inverse()),
        (Token::W(one.clone()), kb.ctx.w()),
        (Token::W(-one.clone()), kb.ctx.w().inverse()),
    ];
    for (key, cert) in kb.iter() {
        // T and W already appear with explicit runs
        if cert.matrix == kb.ctx.t() || cert.matrix == kb.ctx.w() {
            continue;
        }
        alphabet.push((Token::Cert(key.clone()), cert.matrix.clone()));
    }
    alphabet
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::LevelContext;

    fn ctx(n: i64) -> LevelContext {
        LevelContext::new(n, 1).unwrap()
    }

    #[test]
    fn seeding() {
        let c = ctx(5);
        let kb = seed_kb(&c);
        assert_eq!(kb.len(), 2);
        assert!(kb.contains(&c.t()));
        assert!(kb.contains(&c.w()));
        // replaying the seed certificates returns the exact matrices
        for (_, cert) in kb.iter() {
            match cert.reason {
                Reason::Seed(SeedName::T) => assert_eq!(cert.matrix, c.t()),
                Reason::Seed(SeedName::W) => assert_eq!(cert.matrix, c.w()),
                _ => panic!("unexpected reason in seed kb"),
            }
        }
    }

    #[test]
    fn insert_guards() {
        let c = ctx(5);
        let mut kb = seed_kb(&c);
        // H_N has determinant N and must be rejected
        assert!(kb.insert(Certificate {
            matrix: c.h(),
            reason: Reason::Word(GeneratorWord::empty()),
        })
        .is_err());
        let half: Mat2 = "2,-1,-5,3/2".parse().unwrap();
        assert!(kb.insert(Certificate {
            matrix: half,
            reason: Reason::Word(GeneratorWord::empty()),
        })
        .is_err());
    }

    #[test]
    fn replay_words() {
        let c = ctx(5);
        let mut kb = seed_kb(&c);
        let m2_key = kb
            .insert(Certificate {
                matrix: c.m2(),
                reason: Reason::BaseM2,
            })
            .unwrap();

        assert_eq!(replay(&GeneratorWord::empty(), &kb).unwrap(), Mat2::identity());

        let mut w = GeneratorWord::empty();
        w.push_t(1.into());
        w.push_t((-1).into());
        assert_eq!(replay(&w, &kb).unwrap(), Mat2::identity());
        assert!(w.is_empty()); // runs merged away

        let mut w = GeneratorWord::empty();
        w.push_w(1.into());
        w.push_cert(m2_key);
        w.push_t(1.into());
        assert_eq!(
            replay(&w, &kb).unwrap(),
            Mat2::from_i64(2, 1, 5, 3).unwrap() // W_5 * M2 * T
        );

        let mut w = GeneratorWord::empty();
        w.push_cert(CertKey("9,9,9,9".into()));
        assert!(matches!(replay(&w, &kb), Err(Error::UnknownKey(_))));
    }

    #[test]
    fn token_text_round_trip() {
        for t in [
            Token::T(1.into()),
            Token::T((-1).into()),
            Token::T(7.into()),
            Token::W((-3).into()),
            Token::Cert(CertKey("2,-1,-5,3".into())),
        ] {
            assert_eq!(Token::parse(&t.text()).unwrap(), t);
        }
        assert_eq!(Token::T(1.into()).text(), "T");
        assert_eq!(Token::W((-1).into()).text(), "W-1");
        assert_eq!(Token::T((-4).into()).text(), "T^-4");
    }

    #[test]
    fn equivalence_search() {
        let c = ctx(3);
        let mut kb = seed_kb(&c);

        // m = target: empty witness
        let w = equivalent_to(&kb, &c.m2(), &c.m2()).unwrap();
        assert!(w.left.is_empty() && w.right.is_empty());

        // the first-induction-step cancellation: m = W^-1 T^-1 * target
        let m = Mat2::from_i64(2, -1, -6, 4).unwrap();
        let target = Mat2::from_i64(2, 0, 0, 1).unwrap();
        let w = equivalent_to(&kb, &m, &target).expect("witness within depth 4");
        assert!(w.verify(&m, &target, &kb).unwrap());
        assert_eq!(
            kb.replay_word(&w.left).unwrap(),
            c.w().inverse().mul(&c.t().inverse())
        );

        // the middle-term identity of a process step: m = half * target
        let half = Mat2::from_i64(1, -1, -3, 4).unwrap(); // W^-1 T^-1 at N=3
        let half_key = kb
            .insert(Certificate {
                matrix: half.clone(),
                reason: Reason::Word(GeneratorWord::empty()),
            })
            .unwrap();
        let m = half.mul(&target);
        let w = equivalent_to(&kb, &m, &target).unwrap();
        assert!(w.verify(&m, &target, &kb).unwrap());
        // shortest witness is the single certificate token
        assert_eq!(w.left.tokens, vec![Token::Cert(half_key)]);
        assert!(w.right.is_empty());

        // absence is a value: nothing maps the identity to a determinant-2 matrix
        assert!(equivalent_to(&kb, &Mat2::from_i64(2, 0, 0, 1).unwrap(), &Mat2::identity()).is_none());
    }
}
