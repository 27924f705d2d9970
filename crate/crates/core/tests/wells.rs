use lipext::verification::random_field;
use lipext::wells::WellsComplex;
use lipext::{gamma1, Extender, Sign, SolveOptions};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_extremal_extensions_in_space() {
    for seed in 0..5 {
        let f = random_field(3 + seed as usize % 3, 3, 0.3, 40 + seed);
        let k = gamma1(&f);
        let ext = Extender::new(&f, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for sign in [Sign::Plus, Sign::Minus] {
            let w = WellsComplex::build(&f, k, sign).unwrap();
            for _ in 0..40 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let a = w.value(&x).unwrap();
                let b = ext.solve(&x, sign, &SolveOptions::default()).unwrap();
                assert!((a.value - b.value).abs() < 1e-8, "seed {seed}: {} vs {}", a.value, b.value);
                assert!(lipext::linalg::max_abs_diff(&a.gradient, &b.gradient) < 1e-6);
            }
        }
    }
}

#[test]
fn kappa_above_gamma_still_agrees() {
    let f = random_field(4, 2, 0.3, 90);
    let k = 1.5 * gamma1(&f);
    let ext = Extender::new(&f, k).unwrap();
    let w = WellsComplex::build(&f, k, Sign::Plus).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(90);
    for _ in 0..100 {
        let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let a = w.value(&x).unwrap().value;
        let b = ext.solve(&x, Sign::Plus, &SolveOptions::default()).unwrap().value;
        assert!((a - b).abs() < 1e-8);
    }
}
