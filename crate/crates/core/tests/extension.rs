use lipext::linalg::{dist, max_abs_diff};
use lipext::supinf::{lambda_constraints, psi_envelope};
use lipext::verification::{e1_fixture, random_field, two_circles_fixture};
use lipext::{certify_mle_point, extend_field, gamma1, psi, u_extremal, Error, Extender, JetSample, OneField, Sign, SolveOptions};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const S3: f64 = 1.732_050_807_568_877_2;

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn e1_pinches_at_c() {
    let f = e1_fixture();
    for sign in [Sign::Plus, Sign::Minus] {
        let r = u_extremal(&f, S3, &[0.0, 1.0 / S3], sign, 1e-8).unwrap();
        assert!(r.value.abs() < 1e-12, "{r:?}");
        assert!((r.gradient[0] + S3).abs() < 1e-10 && r.gradient[1].abs() < 1e-10);
    }
}

#[test]
fn interpolates_at_data_points() {
    let f = random_field(6, 3, 0.2, 4);
    let ext = Extender::new(&f, gamma1(&f)).unwrap();
    for s in f.samples() {
        for sign in [Sign::Plus, Sign::Minus] {
            let r = ext.solve(&s.x, sign, &opts()).unwrap();
            assert_eq!(r.value, s.f);
            assert_eq!(r.gradient, s.df);
        }
    }
}

#[test]
fn two_circle_inner_quadratic() {
    let f = two_circles_fixture(360).unwrap();
    let ext = Extender::new(&f, 4.0).unwrap();
    let r = ext.solve(&[0.75, 0.0], Sign::Plus, &opts()).unwrap();
    assert!((r.value - 0.125).abs() < 1e-9);
    assert!((r.gradient[0] + 1.0).abs() < 1e-7 && r.gradient[1].abs() < 1e-7);
    let lo = ext.solve(&[0.75, 0.0], Sign::Minus, &opts()).unwrap();
    assert!((lo.value + 0.125).abs() < 1e-9);
    for x in [[1.5, 0.0], [0.0, -1.25], [1.2, 1.1]] {
        let up = ext.solve(&x, Sign::Plus, &opts()).unwrap().value;
        let dn = ext.solve(&x, Sign::Minus, &opts()).unwrap().value;
        assert!((up - dn).abs() < 2e-2, "{x:?}: {up} {dn}");
    }
}

#[test]
fn psi_examples() {
    let f = two_circles_fixture(360).unwrap();
    let v = psi(&f, 4.0, &[0.75, 0.0], 0, &[-1.0, 0.0], Sign::Plus).unwrap();
    assert!((v - 0.125).abs() < 1e-15);
    let e = e1_fixture();
    for sign in [Sign::Plus, Sign::Minus] {
        let a = &e.samples()[0];
        assert_eq!(psi(&e, S3, &a.x, 0, &a.df, sign).unwrap(), a.f);
    }
    assert!(matches!(psi(&e, 0.0, &[0.0, 0.0], 0, &[0.0, 0.0], Sign::Plus), Err(Error::NonPositiveKappa(_))));
}

#[test]
fn kappa_below_gamma_is_rejected() {
    let f = e1_fixture();
    assert!(matches!(Extender::new(&f, 1.7), Err(Error::KappaTooSmall { .. })));
    assert!(Extender::new(&f, S3).is_ok());
    assert!(Extender::new(&f, 5.0).is_ok());
}

#[test]
fn affine_fields_extend_affinely() {
    let jets =
        |pts: &[[f64; 2]]| pts.iter().map(|p| JetSample::new(p.to_vec(), 1.0 + 2.0 * p[0] - p[1], vec![2.0, -1.0])).collect::<Vec<_>>();
    let f = OneField::new(jets(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])).unwrap();
    assert_eq!(gamma1(&f), 0.0);
    let queries = vec![vec![3.0, -2.0], vec![0.5, 0.5]];
    let out = extend_field(&f, 0.0, &queries, Sign::Plus, &opts()).unwrap();
    assert_eq!(gamma1(&out), 0.0);
    assert_eq!(out.samples()[4].f, 1.5);
    // with room to bend, u+ leaves the plane but stays within kappa
    let bent = extend_field(&f, 1.0, &queries, Sign::Plus, &opts()).unwrap();
    assert!(gamma1(&bent) <= 1.0 + 1e-7);
    assert!(bent.samples()[3].f > 9.0);
    let same = extend_field(&f, 0.0, &f.samples().iter().map(|s| s.x.clone()).collect::<Vec<_>>(), Sign::Plus, &opts()).unwrap();
    assert_eq!(same, f);
}

#[test]
fn minus_is_plus_of_negated_field() {
    let f = random_field(5, 2, 0.2, 8);
    let k = gamma1(&f);
    let a = Extender::new(&f, k).unwrap();
    let b = Extender::new(&f.negated(), k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let lo = a.solve(&x, Sign::Minus, &opts()).unwrap();
        let up = b.solve(&x, Sign::Plus, &opts()).unwrap();
        assert!((lo.value + up.value).abs() < 1e-12);
        assert!(lo.gradient.iter().zip(&up.gradient).all(|(p, q)| (p + q).abs() < 1e-12));
    }
}

#[test]
fn gradient_is_unique_across_starts() {
    let f = random_field(5, 2, 0.2, 21);
    let k = gamma1(&f);
    let ext = Extender::new(&f, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        for sign in [Sign::Plus, Sign::Minus] {
            let base = ext.solve(&x, sign, &opts()).unwrap();
            for _ in 0..3 {
                let start: Vec<f64> = base.gradient.iter().map(|g| g + rng.random_range(-5.0..5.0)).collect();
                let o = SolveOptions { start: Some(start), ..opts() };
                let r = ext.solve(&x, sign, &o).unwrap();
                assert!(max_abs_diff(&r.gradient, &base.gradient) <= 10.0 * 1e-8 * (1.0 + k), "{x:?}");
            }
        }
    }
}

#[test]
fn monotone_in_the_domain() {
    let g = random_field(7, 2, 0.2, 33);
    let k = gamma1(&g);
    let full = Extender::new(&g, k).unwrap();
    let part = OneField::new(g.samples()[..4].to_vec()).unwrap();
    let sub = Extender::new(&part, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let (fu, su) = (full.solve(&x, Sign::Plus, &opts()).unwrap(), sub.solve(&x, Sign::Plus, &opts()).unwrap());
        let (fl, sl) = (full.solve(&x, Sign::Minus, &opts()).unwrap(), sub.solve(&x, Sign::Minus, &opts()).unwrap());
        assert!(su.value >= fu.value - 1e-9 && sl.value <= fl.value + 1e-9, "{x:?}");
    }
}

#[test]
fn single_query_augmentation_keeps_gamma() {
    let f = random_field(5, 2, 0.2, 5);
    let k = gamma1(&f);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let x = vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        for sign in [Sign::Plus, Sign::Minus] {
            let out = extend_field(&f, k, &[x.clone()], sign, &opts()).unwrap();
            assert!(gamma1(&out) <= k + 1e-7);
        }
    }
}

#[test]
fn certificates() {
    let f = random_field(4, 2, 0.2, 6);
    let k = gamma1(&f);
    let x = [0.3, -1.7];
    let r = u_extremal(&f, k, &x, Sign::Plus, 1e-8).unwrap();
    let c = certify_mle_point(&f, k, &x, r.value, &r.gradient, 1e-7).unwrap();
    assert!(c.pass && (c.upper - r.value).abs() < 1e-9);
    let s = &f.samples()[2];
    assert!(certify_mle_point(&f, k, &s.x, s.f, &s.df, 1e-9).unwrap().pass);
    let e = e1_fixture();
    let c = certify_mle_point(&e, S3, &[0.0, 1.0 / S3], 0.5, &[-S3, 0.0], 1e-8).unwrap();
    assert!(!c.pass && c.upper.abs() < 1e-12 && c.lower.abs() < 1e-12);
}

#[test]
fn lambda_at_data_point_is_the_data_gradient() {
    let f = e1_fixture();
    let set = lambda_constraints(&f, S3, &[-1.0, 0.0]).unwrap();
    assert!(set.contains(&[0.0, 1.0], 1e-12));
    assert!(!set.contains(&[0.0, 1.0 + 1e-6], 1e-9));
}

#[test]
fn query_errors_carry_the_index() {
    let f = e1_fixture();
    let err = extend_field(&f, S3, &[vec![0.0, 0.0], vec![1.0]], Sign::Plus, &opts()).unwrap_err();
    assert!(matches!(err, Error::DimensionMismatch { .. }));
}

fn field_strategy() -> impl Strategy<Value = OneField> {
    (2usize..6, 1usize..4, any::<u64>()).prop_map(|(m, n, seed)| random_field(m, n, 0.15, seed))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn sandwich_holds(f in field_strategy(), seed in any::<u64>()) {
        let k = gamma1(&f);
        let ext = Extender::new(&f, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..f.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
        let up = ext.solve(&x, Sign::Plus, &opts()).unwrap();
        let lo = ext.solve(&x, Sign::Minus, &opts()).unwrap();
        prop_assert!(lo.value <= up.value + 1e-8);
        let upper = psi_envelope(&f, k, &x, &up.gradient, Sign::Plus);
        prop_assert!((upper - up.value).abs() < 1e-12);
    }

    #[test]
    fn translation_and_scaling_invariance(f in field_strategy(), shift in -3.0f64..3.0, lambda in 0.2f64..5.0, seed in any::<u64>()) {
        let k = gamma1(&f);
        let n = f.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let moved = OneField::new(f.samples().iter().map(|s| JetSample::new(s.x.iter().map(|c| c + shift).collect(), s.f, s.df.clone())).collect()).unwrap();
        let scaled = OneField::new(f.samples().iter().map(|s| JetSample::new(s.x.clone(), lambda * s.f, s.df.iter().map(|g| lambda * g).collect())).collect()).unwrap();
        let base = u_extremal(&f, k, &x, Sign::Plus, 1e-8).unwrap();
        let xm: Vec<f64> = x.iter().map(|c| c + shift).collect();
        let m = u_extremal(&moved, k, &xm, Sign::Plus, 1e-8).unwrap();
        let s = u_extremal(&scaled, lambda * k, &x, Sign::Plus, 1e-8).unwrap();
        let tol = 1e-7 * (1.0 + k) * (1.0 + base.value.abs());
        prop_assert!((m.value - base.value).abs() < tol);
        prop_assert!((s.value - lambda * base.value).abs() < lambda * tol);
        prop_assert!(dist(&s.gradient, &base.gradient.iter().map(|g| lambda * g).collect::<Vec<_>>()) < lambda * tol);
    }

    #[test]
    fn concavity_identity(f in field_strategy(), t in 0.0f64..1.0, seed in any::<u64>()) {
        let k = gamma1(&f) + 0.5;
        let n = f.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pt = || (0..n).map(|_| rng.random_range(-3.0..3.0)).collect::<Vec<f64>>();
        let (x, v1, v2) = (pt(), pt(), pt());
        let vt: Vec<f64> = v1.iter().zip(&v2).map(|(p, q)| t * p + (1.0 - t) * q).collect();
        let g = |v: &[f64]| psi(&f, k, &x, 0, v, Sign::Plus).unwrap();
        let rhs = t * g(&v1) + (1.0 - t) * g(&v2) + t * (1.0 - t) * dist(&v1, &v2).powi(2) / (4.0 * k);
        prop_assert!((g(&vt) - rhs).abs() < 1e-10);
    }

    #[test]
    fn psi_gap_identity(f in field_strategy(), seed in any::<u64>()) {
        let k = gamma1(&f) + 0.1;
        let n = f.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let s = &f.samples()[0];
        let d = psi(&f, k, &x, 0, &v, Sign::Plus).unwrap() - psi(&f, k, &x, 0, &v, Sign::Minus).unwrap();
        let want = 0.5 * k * dist(&s.x, &x).powi(2) - dist(&s.df, &v).powi(2) / (2.0 * k);
        prop_assert!((d - want).abs() < 1e-10 * (1.0 + want.abs()));
    }
}
