use gamma02::decompose::{decompose_gamma02, DecomposeBounds};
use gamma02::kb::seed_kb;
use gamma02::mat2::{LevelContext, Mat2};
use gamma02::subgroups::in_gamma02;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn main() {
    for level in [3i64, 7, 13] {
        let c = LevelContext::new(level, 1).unwrap();
        let mut kb = seed_kb(&c);
        let base = gamma02::process::derive_base_case(&mut kb).unwrap();
        let mut gens: Vec<Mat2> = vec![c.t(), c.t().inverse(), c.w(), c.w().inverse()];
        for key in std::iter::once(&base.m2).chain(base.variants.iter()) {
            gens.push(kb.get(key).unwrap().matrix.clone());
        }
        let mut rng = ChaCha12Rng::seed_from_u64(7 + level as u64);
        let bounds = DecomposeBounds::default();
        for i in 0..60 {
            let len = rng.gen_range(1..=8);
            let mut g = Mat2::identity();
            for _ in 0..len {
                g = g.mul(&gens[rng.gen_range(0..gens.len())]);
            }
            let neg = g.b().is_zero() && g.a().to_integer() == (-1).into();
            if g == Mat2::identity() || neg { continue; }
            assert!(in_gamma02(&g, &c));
            let t0 = Instant::now();
            let _dec = decompose_gamma02(&g, &c, &mut kb, &bounds).unwrap();
            let dt = t0.elapsed();
            if dt.as_millis() > 100 {
                eprintln!("N={} i={} b={} SLOW {:?} kb={}", level, i, g.b(), dt, kb.len());
            }
        }
        eprintln!("N={} done kb={}", level, kb.len());
    }
}
