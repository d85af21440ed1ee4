use gamma02::decompose::{decompose_gamma02, DecomposeBounds};
use gamma02::kb::seed_kb;
use gamma02::mat2::{LevelContext, Mat2};
use gamma02::subgroups::in_gamma02;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn main() {
    let cap = BigInt::from(10_000_000i64);
    let t_all = Instant::now();
    for level in [3i64, 5, 7, 9, 11, 13, 15] {
        let c = LevelContext::new(level, 1).unwrap();
        let mut kb = seed_kb(&c);
        let base = gamma02::process::derive_base_case(&mut kb).unwrap();
        let mut gens: Vec<Mat2> = vec![c.t(), c.t().inverse(), c.w(), c.w().inverse()];
        for key in std::iter::once(&base.m2).chain(base.variants.iter()) {
            gens.push(kb.get(key).unwrap().matrix.clone());
        }
        let mut rng = ChaCha12Rng::seed_from_u64(0x47414d * level as u64);
        let bounds = DecomposeBounds::default();
        let t0 = Instant::now();
        let mut n_done = 0; let mut slow = 0u32; let mut worst = 0u128;
        while n_done < 1000 {
            let len = rng.gen_range(1..=12);
            let mut g = Mat2::identity();
            for _ in 0..len {
                g = g.mul(&gens[rng.gen_range(0..gens.len())]);
            }
            let too_big = g.entries().iter().any(|e| e.numer().abs() > cap);
            let neg = g.b().is_zero() && g.a().to_integer() == (-1).into();
            if g == Mat2::identity() || neg || too_big { continue; }
            assert!(in_gamma02(&g, &c));
            let t1 = Instant::now();
            let dec = decompose_gamma02(&g, &c, &mut kb, &bounds).unwrap();
            assert!(dec.matches_pattern(&kb).unwrap());
            let dt = t1.elapsed().as_millis();
            if dt > 100 { slow += 1; }
            if dt > worst { worst = dt; }
            n_done += 1;
        }
        eprintln!("N={:2}: 1000 decompositions in {:?} (kb={}, >100ms: {}, worst {} ms)",
                  level, t0.elapsed(), kb.len(), slow, worst);
    }
    eprintln!("TOTAL {:?}", t_all.elapsed());
}
