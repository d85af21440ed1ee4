//! Decomposition of Gamma_{0,2}(N) elements into certified generator words
//! and the W^k d1 d2 W^l normal form, plus the primitive-root witness
//! search that powers the general case.
//!
//! The general reduction repeatedly multiplies by auxiliary matrices
//! delta = (2^n, alpha; beta N, 2^m) whose *both* diagonal entries are
//! powers of two, so delta^-1 also lies in G_{0,2}(N) and the final word
//! needs only positive certificate tokens. Each step shrinks the top-right
//! entry until one right W power lands in G_{0,2}(N). The normal form is
//! found by a separate search that trades a T power against a power-of-two
//! top-left entry; it needs no certificates, so its exponents may be large.

use crate::arith;
use crate::error::{Error, Result};
use crate::kb::{CertKey, GeneratorWord, KnowledgeBase, Token};
use crate::mat2::{LevelContext, Mat2};
use crate::process::{certify_descriptor, reduce_to_l};
use crate::subgroups::{descriptor_of, g02_exponent, in_g02, in_gamma02};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// A witness for the weak primitive-root statement: b = 2^n mod (d + kM).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtinWitness {
    pub d: i64,
    pub b: i64,
    pub m: i64,
    pub k: u64,
    pub n: u64,
}

impl ArtinWitness {
    /// Independent re-check by square-and-multiply.
    pub fn verify(&self) -> bool {
        let modulus = self.d + self.k as i64 * self.m;
        if modulus <= 1 {
            return false;
        }
        let modulus = modulus as u64;
        arith::pow2_mod(self.n, modulus) == self.b.rem_euclid(modulus as i64) as u64
    }
}

/// Scan k = 0..k_max for the smallest k (ties broken by smallest n) such
/// that b lies in the orbit {2^n mod (d + kM)}. Moduli <= 1 are skipped.
/// The orbit walk is bounded by the orbit length itself and by `n_cap`.
///
/// Exhaustion signals the scanned bounds were too small, not falsity.
pub fn artin_search(d: i64, b: i64, m: i64, k_max: u64, n_cap: u64) -> Result<ArtinWitness> {
    if m < 1 {
        return Err(Error::Precondition(format!(
            "artin_search requires M >= 1, got {m}"
        )));
    }
    let g = BigInt::from(d).gcd(&(BigInt::from(b) * BigInt::from(m)));
    if g != BigInt::one() {
        return Err(Error::Precondition(format!(
            "artin_search requires gcd(d, bM) = 1, got gcd = {g}"
        )));
    }
    for k in 0..=k_max {
        let modulus = d + k as i64 * m;
        if modulus <= 1 {
            continue;
        }
        let modulus = modulus as u64;
        let target = b.rem_euclid(modulus as i64) as u64;
        // Walk 2^0, 2^1, ...; the orbit is rho-shaped with tail at most the
        // 2-adic valuation of the modulus (<= 63) plus one full odd cycle.
        let mut x = 1u64 % modulus;
        let mut n = 0u64;
        let mut cycle_start: Option<u64> = None;
        loop {
            if x == target {
                let witness = ArtinWitness { d, b, m, k, n };
                debug_assert!(witness.verify());
                return Ok(witness);
            }
            n += 1;
            if n > n_cap {
                break;
            }
            x = (x as u128 * 2 % modulus as u128) as u64;
            match cycle_start {
                Some(v) if v == x => break, // walked the full cycle
                None if n == 64 => cycle_start = Some(x),
                _ => {}
            }
        }
    }
    Err(Error::SearchExhausted {
        what: format!("no n with {b} = 2^n mod ({d} + k*{m})"),
        bounds: format!("k <= {k_max}, n <= {n_cap}"),
    })
}

/// Search bounds for the general decomposition.
#[derive(Debug, Clone)]
pub struct DecomposeBounds {
    /// Largest odd |alpha| tried when shrinking the top-right entry.
    pub shrink_alpha_bound: i64,
    /// Below this |b| the peel aims directly for top-right +-1.
    pub unit_b_threshold: u64,
    /// Largest |alpha| tried when aiming for top-right +-1.
    pub unit_alpha_bound: i64,
    /// Hard cap on peel iterations.
    pub max_peel_steps: u32,
    /// Skip auxiliary matrices whose bottom-right exponent m exceeds this
    /// (it bounds the certification chain length).
    pub m_cap: u64,
    /// Largest |u| tried in the normal-form search.
    pub nf_u_window: i64,
    /// Largest |K| tried for the W pre-shift in the normal-form search.
    pub nf_k_window: i64,
    /// Largest discrete-log exponent accepted in the normal-form search.
    pub nf_j_cap: u64,
    /// Largest modulus handed to the baby-step giant-step discrete log.
    pub nf_modulus_cap: u64,
}

impl Default for DecomposeBounds {
    fn default() -> Self {
        DecomposeBounds {
            shrink_alpha_bound: 63,
            unit_b_threshold: 128,
            unit_alpha_bound: 2048,
            max_peel_steps: 256,
            m_cap: 1024,
            nf_u_window: 48,
            nf_k_window: 16,
            nf_j_cap: 1 << 17,
            nf_modulus_cap: 1 << 40,
        }
    }
}

/// The closing-remark shape: g = W^k * delta1 * delta2 * W^l with both
/// middle factors in G_{0,2}(N).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalForm {
    pub w_left: BigInt,
    pub delta1: Mat2,
    pub delta2: Mat2,
    pub w_right: BigInt,
}

impl NormalForm {
    /// Exact product identity plus membership of both middle factors.
    pub fn verify(&self, g: &Mat2, ctx: &LevelContext) -> bool {
        let product = ctx
            .w_pow(&self.w_left)
            .mul(&self.delta1)
            .mul(&self.delta2)
            .mul(&ctx.w_pow(&self.w_right));
        product == *g && in_g02(&self.delta1, ctx) && in_g02(&self.delta2, ctx)
    }
}

/// A verified decomposition: a replayable word and its normal form.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub word: GeneratorWord,
    pub normal_form: NormalForm,
}

impl Decomposition {
    /// The collapser's contract: the word's exact replay is reproduced by
    /// W^k * d1 * d2 * W^l with both middle factors in G_{0,2}(N).
    pub fn matches_pattern(&self, kb: &KnowledgeBase) -> Result<bool> {
        let g = kb.replay_word(&self.word)?;
        Ok(self.normal_form.verify(&g, kb.ctx()))
    }
}

/// Decompose a G_{0,2}(N) element as W^k * cert * T^l (n >= 1) or as the
/// unipotent word W^beta T^alpha (n = 0). Read-only: the required L element
/// must already be certified, otherwise a missing-certificate error names
/// it so the caller can certify first.
pub fn decompose_g02(psi: &Mat2, ctx: &LevelContext, kb: &KnowledgeBase) -> Result<GeneratorWord> {
    let (word, _, _) = g02_pieces(psi, ctx, kb)?;
    Ok(word)
}

/// Split a G_{0,2}(N) element as psi = W^w * rest, where `rest` is in
/// G_{0,2}(N) and is spelled by the returned word's suffix. Returns the
/// full word, the leading W exponent, and `rest`.
fn g02_pieces(
    psi: &Mat2,
    ctx: &LevelContext,
    kb: &KnowledgeBase,
) -> Result<(GeneratorWord, BigInt, Mat2)> {
    let n = g02_exponent(psi, ctx).ok_or_else(|| {
        Error::Precondition(format!("{psi} is not in G_(0,2)({})", ctx.level()))
    })?;
    if n == 0 {
        // (1, alpha; beta N, *) = W^beta T^alpha
        let alpha = psi.b().to_integer();
        let beta = arith::exact_div(&psi.c().to_integer(), &BigInt::from(ctx.level()))
            .expect("Gamma_0 membership");
        let mut word = GeneratorWord::empty();
        word.push_w(beta.clone());
        word.push_t(alpha.clone());
        let rest = ctx.t_pow(&alpha);
        debug_assert_eq!(kb.replay_word(&word)?, *psi);
        return Ok((word, beta, rest));
    }
    let red = reduce_to_l(psi, ctx)?;
    let key = CertKey::of(&red.reduced);
    if !kb.contains_key(&key) {
        return Err(Error::MissingCertificate {
            key: key.to_string(),
        });
    }
    // psi = W^-k * reduced * T^-l
    let mut word = GeneratorWord::empty();
    word.push_w(-red.w_exp.clone());
    word.push_cert(key);
    word.push_t(-red.t_exp.clone());
    let rest = red.reduced.mul(&ctx.t_pow(&-red.t_exp.clone()));
    debug_assert_eq!(kb.replay_word(&word)?, *psi);
    Ok((word, -red.w_exp, rest))
}

/// Certify whatever L element `decompose_g02` will need for `psi`.
pub fn ensure_g02_certified(kb: &mut KnowledgeBase, psi: &Mat2) -> Result<()> {
    let ctx = kb.ctx().clone();
    let n = g02_exponent(psi, &ctx).ok_or_else(|| {
        Error::Precondition(format!("{psi} is not in G_(0,2)({})", ctx.level()))
    })?;
    if n == 0 {
        return Ok(());
    }
    let red = reduce_to_l(psi, &ctx)?;
    let desc = descriptor_of(&red.reduced, &ctx)?;
    certify_descriptor(kb, &desc)?;
    Ok(())
}

/// Exact left-to-right replay of a word against the knowledge base.
pub fn replay(word: &GeneratorWord, kb: &KnowledgeBase) -> Result<Mat2> {
    kb.replay_word(word)
}

/// For an element with top-right entry +-1, the right W power carrying it
/// into G_{0,2}(N): g * W^k has top-left 2^j, with j the smallest exponent
/// satisfying 2^j = a mod N and 2^j >= a.
fn unit_b_to_g02(g: &Mat2, ctx: &LevelContext) -> Result<(Mat2, BigInt)> {
    let a = g.a().to_integer();
    let b = g.b().to_integer();
    debug_assert!(b.abs().is_one());
    let j0 = ctx.dlog2_mod_level(&a).ok_or_else(|| {
        Error::Precondition(format!(
            "top-left entry {a} is not a power of 2 mod {}",
            ctx.level()
        ))
    })?;
    let mut j = j0;
    while arith::pow2(j) < a {
        j += ctx.ord2();
    }
    // a + b k N = 2^j
    let k = arith::exact_div(&(arith::pow2(j) - &a), &(&b * ctx.level()))
        .expect("j was chosen congruent mod N");
    let phi = g.mul(&ctx.w_pow(&k));
    debug_assert!(in_g02(&phi, ctx));
    Ok((phi, k))
}

/// One peel multiplier: delta = (2^n, alpha; beta N, 2^m) with power-of-two
/// diagonal, and the W exponent k such that delta * W^k * g has top-right
/// entry `new_b`.
struct PeelStep {
    delta: Mat2,
    delta_inv: Mat2,
    k: BigInt,
    new_b: BigInt,
    /// multiplicative order of 2 mod |alpha| N; bounds both exponents of
    /// delta and with them the length of the certification chain
    ord: u64,
    m: u64,
}

/// Try to build the peel multiplier for one candidate alpha and target
/// remainder r = alpha * d - quotient * b.
fn peel_candidate(
    g: &Mat2,
    ctx: &LevelContext,
    alpha: &BigInt,
    r: &BigInt,
    m_cap: u64,
) -> Option<PeelStep> {
    let level = BigInt::from(ctx.level());
    let b = g.b().to_integer();
    let d = g.d().to_integer();
    // alpha d = q b + r
    let q = arith::exact_div(&(alpha * &d - r), &b)?;
    let alpha_n: BigInt = alpha.abs() * &level;
    let modulus = alpha_n.to_u64()?;
    if modulus <= 1 {
        return None;
    }
    // need k with 2^n + alpha N k = -q, i.e. 2^n = -q mod |alpha| N
    let target = (-&q).mod_floor(&alpha_n).to_u64()?;
    if target == 0 || target.gcd(&modulus) != 1 {
        return None;
    }
    let n = arith::dlog2_bsgs(target, modulus)?;
    let k = arith::exact_div(&(-&q - arith::pow2(n)), &(alpha * &level))?;
    // close the determinant: 2^(n+m) = 1 mod |alpha| N
    let r_ord = arith::multiplicative_order(2, modulus, m_cap + n + 1)?;
    let m = (r_ord - n % r_ord) % r_ord;
    if m > m_cap || n > m_cap {
        return None;
    }
    let beta = arith::exact_div(&(arith::pow2(n + m) - 1), &(alpha * &level))
        .expect("2^(n+m) = 1 mod alpha N by choice of m");
    let delta = Mat2::from_bigint(
        arith::pow2(n),
        alpha.clone(),
        &beta * &level,
        arith::pow2(m),
    )
    .expect("determinant 1 by construction");
    debug_assert!(delta.det().is_one());
    let delta_inv =
        Mat2::from_bigint(arith::pow2(m), -alpha, -(&beta * &level), arith::pow2(n))
            .expect("inverse of a determinant-1 matrix");
    Some(PeelStep {
        delta,
        delta_inv,
        k,
        new_b: r.clone(),
        ord: r_ord,
        m,
    })
}

fn peel_score(s: &PeelStep) -> (u8, u8, BigInt, u64) {
    // chain cost dominates: the certification of delta^-1 walks ord-many
    // levels, so candidates with small multiplicative order win
    let bucket = match s.ord {
        0..=16 => 0u8,
        17..=64 => 1,
        65..=256 => 2,
        257..=1024 => 3,
        _ => 4,
    };
    let non_unit = u8::from(!s.new_b.abs().is_one());
    (bucket, non_unit, s.new_b.abs(), s.m)
}

fn better_peel(new: &PeelStep, old: &Option<PeelStep>) -> bool {
    match old {
        None => true,
        Some(o) => peel_score(new) < peel_score(o),
    }
}

/// Candidate target remainders for one peel round.
fn peel_step(g: &Mat2, ctx: &LevelContext, bounds: &DecomposeBounds) -> Option<PeelStep> {
    let b = g.b().to_integer();
    let d = g.d().to_integer();
    let b_abs = b.abs();
    let mut best: Option<PeelStep> = None;

    // Aim for top-right +-1 once b is small: alpha = +-d^{-1} + t b, odd.
    if b_abs <= BigInt::from(bounds.unit_b_threshold) {
        if let Some(d_inv) = arith::mod_inverse(&d, &b_abs) {
            for r in [BigInt::one(), -BigInt::one()] {
                let base = (&d_inv * &r).mod_floor(&b_abs);
                let mut t = BigInt::zero();
                loop {
                    let mut hit_bound = true;
                    for alpha in [&base + &t * &b_abs, &base - (&t + 1) * &b_abs] {
                        if alpha.abs() > BigInt::from(bounds.unit_alpha_bound) {
                            continue;
                        }
                        hit_bound = false;
                        if alpha.is_even() || alpha.is_zero() {
                            continue;
                        }
                        if let Some(c) = peel_candidate(g, ctx, &alpha, &r, bounds.m_cap) {
                            if better_peel(&c, &best) {
                                best = Some(c);
                            }
                        }
                    }
                    if hit_bound {
                        break;
                    }
                    t += 1;
                }
            }
            // a unit jump with a short chain ends the peel in one move
            if best
                .as_ref()
                .is_some_and(|s| s.new_b.abs().is_one() && s.ord <= 64)
            {
                return best;
            }
        }
    }

    // Otherwise shrink: small odd alpha, remainder r = alpha d mod b centered.
    let mut alpha = BigInt::one();
    while alpha <= BigInt::from(bounds.shrink_alpha_bound) {
        for a in [alpha.clone(), -&alpha] {
            let prod: BigInt = &a * &d;
            let mut r = prod.mod_floor(&b_abs);
            if &r * 2 > b_abs {
                r -= &b_abs;
            }
            if r.is_zero() || &r.abs() * 2 > b_abs {
                continue;
            }
            if let Some(c) = peel_candidate(g, ctx, &a, &r, bounds.m_cap) {
                if better_peel(&c, &best) {
                    best = Some(c);
                }
            }
        }
        alpha += 2;
    }
    best
}

/// Decompose an arbitrary Gamma_{0,2}(N) element into a certified word and
/// the W^k d1 d2 W^l normal form. Certifies the L elements it needs on the
/// fly (targeted chains, not full enumeration) and verifies the word and
/// the normal form by exact replay before returning.
pub fn decompose_gamma02(
    g: &Mat2,
    ctx: &LevelContext,
    kb: &mut KnowledgeBase,
    bounds: &DecomposeBounds,
) -> Result<Decomposition> {
    if !in_gamma02(g, ctx) {
        return Err(Error::Precondition(format!(
            "{g} is not in Gamma_(0,2)({})",
            ctx.level()
        )));
    }
    let dec = decompose_gamma02_inner(g, ctx, kb, bounds)?;
    let replayed = kb.replay_word(&dec.word)?;
    if replayed != *g {
        return Err(Error::InternalIdentity(format!(
            "decomposition word replays to {replayed}, not {g}"
        )));
    }
    if !dec.normal_form.verify(g, ctx) {
        return Err(Error::InternalIdentity(format!(
            "normal form fails to reproduce {g}"
        )));
    }
    Ok(dec)
}

fn decompose_gamma02_inner(
    g: &Mat2,
    ctx: &LevelContext,
    kb: &mut KnowledgeBase,
    bounds: &DecomposeBounds,
) -> Result<Decomposition> {
    let b = g.b().to_integer();

    // Lower-triangular inputs: a = d = +-1, so g = +-W^m.
    if b.is_zero() {
        let a = g.a().to_integer();
        if a == BigInt::one() {
            let exp = arith::exact_div(&g.c().to_integer(), &BigInt::from(ctx.level()))
                .expect("Gamma_0 membership");
            let mut word = GeneratorWord::empty();
            word.push_w(exp.clone());
            return Ok(Decomposition {
                word,
                normal_form: NormalForm {
                    w_left: exp,
                    delta1: Mat2::identity(),
                    delta2: Mat2::identity(),
                    w_right: BigInt::zero(),
                },
            });
        }
        // a = -1: the matrix is -(W^m); relations are certified for literal
        // matrices and the sign quotient is deliberately not taken.
        return Err(Error::DegenerateInput(format!(
            "{g} equals -1 times a W power; the engine never identifies \
             gamma with -gamma"
        )));
    }

    // Already in G_{0,2}(N): one reduction does it.
    if in_g02(g, ctx) {
        ensure_g02_certified(kb, g)?;
        let (word, w_run, rest) = g02_pieces(g, ctx, kb)?;
        return Ok(Decomposition {
            word,
            normal_form: NormalForm {
                w_left: w_run,
                delta1: rest,
                delta2: Mat2::identity(),
                w_right: BigInt::zero(),
            },
        });
    }

    // Top-right entry +-1: one right W power lands in G_{0,2}(N).
    if b.abs().is_one() {
        let (phi, k) = unit_b_to_g02(g, ctx)?;
        ensure_g02_certified(kb, &phi)?;
        let (phi_word, w_run, rest) = g02_pieces(&phi, ctx, kb)?;
        let mut word = phi_word;
        word.push_w(-k.clone());
        return Ok(Decomposition {
            word,
            normal_form: NormalForm {
                w_left: w_run,
                delta1: rest,
                delta2: Mat2::identity(),
                w_right: -k,
            },
        });
    }

    // General case: peel the top-right entry down to +-1 with power-of-two
    // diagonal multipliers, then fall into the branches above.
    let mut current = g.clone();
    let mut pieces: Vec<(BigInt, Mat2)> = Vec::new(); // (k_i, delta_i^-1)
    let mut steps = 0u32;
    let terminal = loop {
        let b_cur = current.b().to_integer();
        if b_cur.is_zero() || b_cur.abs().is_one() || in_g02(&current, ctx) {
            break current.clone();
        }
        if steps >= bounds.max_peel_steps {
            return Err(Error::SearchExhausted {
                what: format!("peel did not reduce the top-right entry of {g}"),
                bounds: format!("max_peel_steps = {}", bounds.max_peel_steps),
            });
        }
        let step = peel_step(&current, ctx, bounds).ok_or_else(|| Error::SearchExhausted {
            what: format!("no peel multiplier for top-right entry {b_cur}"),
            bounds: format!(
                "shrink_alpha <= {}, unit_alpha <= {}, m <= {}",
                bounds.shrink_alpha_bound, bounds.unit_alpha_bound, bounds.m_cap
            ),
        })?;
        let next = step.delta.mul(&ctx.w_pow(&step.k)).mul(&current);
        if next.b().to_integer() != step.new_b {
            return Err(Error::InternalIdentity(format!(
                "peel produced top-right {} instead of {}",
                next.b(),
                step.new_b
            )));
        }
        pieces.push((step.k.clone(), step.delta_inv.clone()));
        current = next;
        steps += 1;
    };

    // word(g) = prod_i [W^-k_i word(delta_i^-1)] ++ word(terminal)
    let mut word = GeneratorWord::empty();
    for (k, delta_inv) in &pieces {
        ensure_g02_certified(kb, delta_inv)?;
        let (piece_word, _, _) = g02_pieces(delta_inv, ctx, kb)?;
        word.push_w(-k.clone());
        word.extend(&piece_word);
    }
    let terminal_dec = decompose_gamma02_inner(&terminal, ctx, kb, bounds)?;
    word.extend(&terminal_dec.word);

    // The normal form comes from an independent search; its exponents may
    // be large but it needs no certificates.
    let normal_form = normal_form_by_shifts(g, ctx, bounds)?;
    Ok(Decomposition { word, normal_form })
}

/// Find g = W^K * T^u * D * W^L with D in G_{0,2}(N): scan small (K, u),
/// solve the power-of-two condition on the shifted top-left entry by
/// discrete log. The W pre-shift matters: it changes the second row the T
/// shift mixes in, which breaks residue obstructions a pure T scan hits.
/// The resulting exponents can be large; no certificates are involved.
fn normal_form_by_shifts(
    g: &Mat2,
    ctx: &LevelContext,
    bounds: &DecomposeBounds,
) -> Result<NormalForm> {
    let level = BigInt::from(ctx.level());
    let a = g.a().to_integer();
    let b = g.b().to_integer();
    let c = g.c().to_integer();
    let d = g.d().to_integer();

    let spread = |window: i64| {
        let mut out = vec![0i64];
        for off in 1..=window {
            out.push(off);
            out.push(-off);
        }
        out
    };
    // Collect candidates and try them by ascending modulus: the discrete
    // log costs sqrt of the modulus, and smaller orbits are likelier to
    // yield an exponent below the cap.
    let mut candidates: Vec<(BigInt, i64, i64, BigInt, BigInt)> = Vec::new();
    for k_shift in spread(bounds.nf_k_window) {
        // W^-K g: second row becomes (c - KNa, d - KNb)
        let c_shift: BigInt = &c - k_shift * &level * &a;
        let d_shift: BigInt = &d - k_shift * &level * &b;
        for u in spread(bounds.nf_u_window) {
            // T^-u (W^-K g) has first row (a - u c', b - u d')
            let a_shift: BigInt = &a - u * &c_shift;
            let b_shift: BigInt = &b - u * &d_shift;
            if b_shift.is_zero() {
                continue;
            }
            let modulus_big: BigInt = b_shift.abs() * &level;
            if modulus_big.is_even() || modulus_big <= BigInt::one() {
                continue;
            }
            candidates.push((modulus_big, k_shift, u, a_shift, b_shift));
        }
    }
    candidates.sort_by(|x, y| x.0.cmp(&y.0));
    for (modulus_big, k_shift, u, a_shift, b_shift) in candidates {
        let Some(modulus) = modulus_big.to_u64() else {
            continue;
        };
        if modulus > bounds.nf_modulus_cap {
            continue;
        }
        let target = a_shift.mod_floor(&modulus_big).to_u64().unwrap();
        if target == 0 || target.gcd(&modulus) != 1 {
            continue;
        }
        let Some(j) = arith::dlog2_bsgs(target, modulus) else {
            continue;
        };
        if j > bounds.nf_j_cap {
            continue;
        }
        // a_shift - L N b_shift = 2^j
        let l = arith::exact_div(&(&a_shift - arith::pow2(j)), &(&b_shift * &level))
            .expect("j solves the congruence");
        let ku = BigInt::from(k_shift);
        let uu = BigInt::from(u);
        let middle = ctx
            .t_pow(&-&uu)
            .mul(&ctx.w_pow(&-&ku))
            .mul(g)
            .mul(&ctx.w_pow(&-&l));
        if !in_g02(&middle, ctx) {
            continue;
        }
        return Ok(NormalForm {
            w_left: ku,
            delta1: ctx.t_pow(&uu),
            delta2: middle,
            w_right: l,
        });
    }
    Err(Error::SearchExhausted {
        what: format!("no shifted normal form for {g}"),
        bounds: format!(
            "|K| <= {}, |u| <= {}, j <= {}, modulus <= {}",
            bounds.nf_k_window, bounds.nf_u_window, bounds.nf_j_cap, bounds.nf_modulus_cap
        ),
    })
}

/// Does the collapsed word match W^k d1 d2 W^l with both middle segments
/// replaying into G_{0,2}(N)? Decided exactly by trying every split of the
/// collapsed token list into four consecutive segments.
pub fn word_matches_normal_form_pattern(
    word: &GeneratorWord,
    kb: &KnowledgeBase,
) -> Result<bool> {
    let ctx = kb.ctx();
    let tokens = word.collapsed().tokens;
    let len = tokens.len();
    let is_w_run = |seg: &[Token]| seg.iter().all(|t| matches!(t, Token::W(_)));
    let replay_seg = |seg: &[Token]| -> Result<Mat2> {
        let w = GeneratorWord {
            tokens: seg.to_vec(),
        };
        kb.replay_word(&w)
    };
    for i in 0..=len {
        if !is_w_run(&tokens[..i]) {
            break;
        }
        for j in i..=len {
            for k in j..=len {
                if !is_w_run(&tokens[k..]) {
                    continue;
                }
                let d1 = replay_seg(&tokens[i..j])?;
                let d2 = replay_seg(&tokens[j..k])?;
                if in_g02(&d1, ctx) && in_g02(&d2, ctx) {
                    return Ok(true);
                }
            }
        }
    }
    Ok(false)
}
