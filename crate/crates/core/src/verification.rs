//! Independent oracles, fixtures and sampling checks of the AMLE property.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{JetSample, OneField};
use crate::gamma::{gamma1, jet_pair_stats};
use crate::linalg::{add, axpy, dist, dot, norm2, scale, sub};
use crate::supinf::{Extender, SolveOptions};
use crate::Sign;

pub fn e1_fixture() -> OneField {
    let s = 1.0 / 3f64.sqrt();
    OneField::new(vec![JetSample::new(vec![-1.0, 0.0], s, vec![0.0, 1.0]), JetSample::new(vec![1.0, 0.0], -s, vec![0.0, -1.0])])
        .expect("fixture is valid")
}

/// Two concentric circles of radius 1 (value 0) and 2 (value 1), sampled
/// along the same `n_per_circle` rays, all gradients zero.
pub fn two_circles_fixture(n_per_circle: usize) -> Result<OneField> {
    if n_per_circle < 8 {
        return Err(Error::InvalidArgument(format!("two-circle fixture needs at least 8 rays, got {n_per_circle}")));
    }
    let dirs: Vec<[f64; 2]> = (0..n_per_circle).map(|k| unit_direction(std::f64::consts::TAU * k as f64 / n_per_circle as f64)).collect();
    let mut samples = Vec::with_capacity(2 * n_per_circle);
    for (r, f) in [(1.0, 0.0), (2.0, 1.0)] {
        for d in &dirs {
            samples.push(JetSample::new(vec![r * d[0], r * d[1]], f, vec![0.0, 0.0]));
        }
    }
    OneField::new(samples)
}

/// `(cos t, sin t)` nudged by a few ulps so that `c*c + s*s` evaluates to
/// exactly 1. Doubling is exact, so aligned pairs are then at distance
/// exactly 1 and the fixture's Gamma^1 is exactly 4.
fn unit_direction(t: f64) -> [f64; 2] {
    let (s0, c0) = t.sin_cos();
    let nudge = |x: f64, k: i64| {
        if x == 0.0 || k == 0 {
            x
        } else {
            f64::from_bits((x.to_bits() as i64 + k) as u64)
        }
    };
    // Ulps of the smaller component are finer, so search it more widely and
    // keep the smallest displacement.
    let small_is_sin = s0.abs() <= c0.abs();
    let (big, small) = if small_is_sin { (c0, s0) } else { (s0, c0) };
    let mut best = [c0, s0];
    let mut best_cost = f64::INFINITY;
    for i in -4..=4i64 {
        let b = nudge(big, i);
        for j in -1024..=1024i64 {
            let sm = nudge(small, j);
            let cost = (b - big).abs() + (sm - small).abs();
            if b * b + sm * sm == 1.0 && cost < best_cost {
                best = if small_is_sin { [b, sm] } else { [sm, b] };
                best_cost = cost;
            }
        }
    }
    best
}

/// Closed-form MLE of a two-point field.
///
/// The pair is ordered so that `A(a, b) >= 0`. The extension is the affine
/// jet at the pinch point `c`, bent down along `a - c` on the side of `a` and
/// up along `b - c` on the side of `b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiponctualModel {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub kappa: f64,
    pub c: Vec<f64>,
    pub u_c: f64,
    pub d_c: Vec<f64>,
    pub p_coef: Vec<f64>,
    pub q_coef: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl BiponctualModel {
    pub fn new(field: &OneField) -> Result<Self> {
        if field.len() != 2 {
            return Err(Error::InvalidArgument(format!("two-point model needs exactly 2 samples, got {}", field.len())));
        }
        let (mut sa, mut sb) = (&field.samples()[0], &field.samples()[1]);
        let st = jet_pair_stats(sa, sb);
        if st.gamma <= 0.0 {
            return Err(Error::Unsupported("two-point field is affine".into()));
        }
        if st.a_val < 0.0 {
            std::mem::swap(&mut sa, &mut sb);
        }
        let kappa = st.gamma;
        let mid = scale(&add(&sa.x, &sb.x), 0.5);
        let c = axpy(&mid, 0.5 / kappa, &sub(&sa.df, &sb.df));
        let p_coef = sub(&sa.x, &c);
        let q_coef = sub(&sb.x, &c);
        let d = dist(&sa.x, &sb.x);
        if norm2(&p_coef).sqrt() <= 1e-10 * (1.0 + d) || norm2(&q_coef).sqrt() <= 1e-10 * (1.0 + d) {
            return Err(Error::Unsupported("pinch point coincides with a data point".into()));
        }
        let d_c = axpy(&sa.df, kappa, &p_coef);
        let u_c = sa.eval(&c) - 0.5 * kappa * norm2(&p_coef);

        let d_b = axpy(&sb.df, -kappa, &q_coef);
        let u_b = sb.eval(&c) + 0.5 * kappa * norm2(&q_coef);
        let g = 1.0 + sa.df.iter().chain(&sb.df).fold(0.0f64, |m, v| m.max(v.abs())) + kappa * d;
        if crate::linalg::max_abs_diff(&d_c, &d_b) > 1e-10 * g || (u_c - u_b).abs() > 1e-10 * g * (1.0 + d) {
            return Err(Error::Unsupported("two-point closed form is inconsistent for this pair".into()));
        }
        if dist(&c, &mid) > 0.5 * d * (1.0 + 1e-10) {
            return Err(Error::Unsupported("pinch point outside the half ball".into()));
        }
        Ok(BiponctualModel { a: sa.x.clone(), b: sb.x.clone(), kappa, c, u_c, d_c, p_coef, q_coef })
    }

    pub fn p(&self, z: &[f64]) -> f64 {
        dot(&self.p_coef, &sub(z, &self.c))
    }

    pub fn q(&self, z: &[f64]) -> f64 {
        dot(&self.q_coef, &sub(z, &self.c))
    }

    pub fn eval(&self, z: &[f64]) -> JetValue {
        let zc = sub(z, &self.c);
        let p = dot(&self.p_coef, &zc);
        let q = dot(&self.q_coef, &zc);
        let mut value = self.u_c + dot(&self.d_c, &zc);
        let mut gradient = self.d_c.clone();
        if p > 0.0 {
            let na = norm2(&self.p_coef);
            value -= 0.5 * self.kappa * p * p / na;
            gradient = axpy(&gradient, -self.kappa * p / na, &self.p_coef);
        }
        if q > 0.0 {
            let nb = norm2(&self.q_coef);
            value += 0.5 * self.kappa * q * q / nb;
            gradient = axpy(&gradient, self.kappa * q / nb, &self.q_coef);
        }
        JetValue { value, gradient }
    }
}

pub fn biponctual_mle(field: &OneField, z: &[f64]) -> Result<JetValue> {
    field.check_point(z)?;
    Ok(BiponctualModel::new(field)?.eval(z))
}

pub fn sampled_gamma_region(jets: &OneField) -> Result<f64> {
    if jets.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: jets.len() });
    }
    Ok(gamma1(jets))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

fn gaussian_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = 1.0 - rng.random::<f64>();
                let u2: f64 = rng.random();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let r = norm2(&v).sqrt();
        if r > 1e-12 {
            return scale(&v, 1.0 / r);
        }
    }
}

fn fibonacci_direction(k: usize, count: usize) -> Vec<f64> {
    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let t = GOLDEN_ANGLE * k as f64;
    vec![r * t.cos(), r * t.sin(), z]
}

/// Quasi-uniform points inside the open ball: sunflower in the plane,
/// Fibonacci shells in space, midpoints on the line, seeded uniform otherwise.
pub fn ball_points(region: &RegionBall, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = region.center.len();
    let r0 = region.radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let s = (k as f64 + 0.5) / count as f64;
            let offset = match n {
                1 => vec![r0 * (2.0 * s - 1.0)],
                2 => {
                    let t = GOLDEN_ANGLE * k as f64;
                    let r = r0 * s.sqrt();
                    vec![r * t.cos(), r * t.sin()]
                }
                3 => scale(&fibonacci_direction(k, count), r0 * s.cbrt()),
                _ => {
                    let u: f64 = rng.random();
                    scale(&gaussian_direction(&mut rng, n), r0 * u.powf(1.0 / n as f64))
                }
            };
            add(&region.center, &offset)
        })
        .collect()
}

/// Quasi-uniform points on the sphere: equispaced angles in the plane,
/// a Fibonacci lattice in space, the two endpoints on the line.
pub fn sphere_points(region: &RegionBall, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = region.center.len();
    let r0 = region.radius;
    if n == 1 {
        return vec![vec![region.center[0] - r0], vec![region.center[0] + r0]];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..count)
        .map(|k| {
            let dir = match n {
                2 => {
                    let t = std::f64::consts::TAU * k as f64 / count as f64;
                    vec![t.cos(), t.sin()]
                }
                3 => fibonacci_direction(k, count),
                _ => gaussian_direction(&mut rng, n),
            };
            axpy(&region.center, r0, &dir)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtensionMode {
    Plus,
    Minus,
    Average,
}

impl From<Sign> for ExtensionMode {
    fn from(s: Sign) -> Self {
        match s {
            Sign::Plus => ExtensionMode::Plus,
            Sign::Minus => ExtensionMode::Minus,
        }
    }
}

/// Jets of u+, u- or their half-sum at the given points.
pub fn extension_jets(ext: &Extender, points: &[Vec<f64>], mode: ExtensionMode, opts: &SolveOptions) -> Result<Vec<JetSample>> {
    let run = |sign| -> Result<Vec<JetSample>> {
        ext.solve_many(points, sign, opts)
            .into_iter()
            .zip(points)
            .enumerate()
            .map(|(i, (r, x))| {
                r.map(|r| JetSample::new(x.clone(), r.value, r.gradient)).map_err(|e| Error::Query { index: i, source: Box::new(e) })
            })
            .collect()
    };
    match mode {
        ExtensionMode::Plus => run(Sign::Plus),
        ExtensionMode::Minus => run(Sign::Minus),
        ExtensionMode::Average => {
            let up = run(Sign::Plus)?;
            let lo = run(Sign::Minus)?;
            Ok(up.into_iter().zip(lo).map(|(u, l)| JetSample::new(u.x, 0.5 * (u.f + l.f), scale(&add(&u.df, &l.df), 0.5))).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmleReport {
    #[serde(rename = "gamma_V")]
    pub gamma_v: f64,
    #[serde(rename = "gamma_dV")]
    pub gamma_dv: f64,
    pub ratio: f64,
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub n_interior: usize,
    pub n_boundary: usize,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct AmleOptions {
    pub n_interior: usize,
    pub n_boundary: usize,
    pub mode: ExtensionMode,
    pub tol_rel: f64,
    /// Slack in units of kappa, absorbing solver roundoff when both sides vanish.
    pub tol_abs: f64,
    pub seed: u64,
    pub solve: SolveOptions,
}

impl Default for AmleOptions {
    fn default() -> Self {
        AmleOptions {
            n_interior: 500,
            n_boundary: 360,
            mode: ExtensionMode::Plus,
            tol_rel: 0.05,
            tol_abs: 1e-6,
            seed: 0,
            solve: SolveOptions::default(),
        }
    }
}

pub fn check_region(field: &OneField, region: &RegionBall) -> Result<()> {
    field.check_point(&region.center)?;
    if !(region.radius > 0.0) || !region.radius.is_finite() {
        return Err(Error::InvalidArgument(format!("region radius must be positive, got {}", region.radius)));
    }
    for (i, s) in field.samples().iter().enumerate() {
        if dist(&s.x, &region.center) <= region.radius {
            return Err(Error::RegionIntersectsData(i));
        }
    }
    Ok(())
}

/// Compares Gamma^1 of the extension jets on the closed ball with Gamma^1 of
/// the jets on its boundary sphere.
pub fn amle_check_with(field: &OneField, kappa: f64, region: &RegionBall, opts: &AmleOptions) -> Result<AmleReport> {
    check_region(field, region)?;
    for (what, n) in [("interior", opts.n_interior), ("boundary", opts.n_boundary)] {
        if n < 16 {
            return Err(Error::InvalidArgument(format!("{what} sample count must be at least 16, got {n}")));
        }
    }
    if !(opts.tol_rel >= 0.0) || !(opts.tol_abs >= 0.0) {
        return Err(Error::InvalidArgument("tolerances must be non-negative".into()));
    }
    let ext = Extender::new(field, kappa)?;
    let inner = ball_points(region, opts.n_interior, opts.seed);
    let outer = sphere_points(region, opts.n_boundary, opts.seed);
    let dim = field.dim();
    let boundary = extension_jets(&ext, &outer, opts.mode, &opts.solve)?;
    let mut all = extension_jets(&ext, &inner, opts.mode, &opts.solve)?;
    all.extend(boundary.iter().cloned());
    let gamma_dv = sampled_gamma_region(&OneField::with_dim(dim, boundary)?)?;
    let gamma_v = sampled_gamma_region(&OneField::with_dim(dim, all)?)?;
    let ratio = if gamma_dv > 0.0 {
        gamma_v / gamma_dv
    } else if gamma_v > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(AmleReport {
        gamma_v,
        gamma_dv,
        ratio,
        tol_rel: opts.tol_rel,
        tol_abs: opts.tol_abs,
        n_interior: opts.n_interior,
        n_boundary: opts.n_boundary,
        pass: gamma_v <= gamma_dv * (1.0 + opts.tol_rel) + opts.tol_abs * kappa.max(1.0),
    })
}

pub fn amle_check(
    field: &OneField,
    kappa: f64,
    region: &RegionBall,
    n_interior: usize,
    n_boundary: usize,
    sign: Sign,
    tol_rel: f64,
) -> Result<AmleReport> {
    let opts = AmleOptions { n_interior, n_boundary, mode: sign.into(), tol_rel, ..AmleOptions::default() };
    amle_check_with(field, kappa, region, &opts)
}

/// Uniformly random field with `m` points in `[-1, 1]^n`, values and
/// gradient entries in `[-1, 1]`, points at least `min_sep` apart.
pub fn random_field(m: usize, n: usize, min_sep: f64, seed: u64) -> OneField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<JetSample> = Vec::with_capacity(m);
    while samples.len() < m {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if samples.iter().any(|s| dist(&s.x, &x) < min_sep) {
            continue;
        }
        let f = rng.random_range(-1.0..1.0);
        let df = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        samples.push(JetSample::new(x, f, df));
    }
    OneField::with_dim(n, samples).expect("random field is valid")
}

/// Pair Gamma^1 values of model jets sampled along a segment.
pub fn segment_pair_gammas(model: &BiponctualModel, from: &[f64], to: &[f64], count: usize) -> Vec<f64> {
    let pts: Vec<Vec<f64>> = (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            axpy(from, t, &sub(to, from))
        })
        .collect();
    let jets: Vec<JetSample> = pts
        .iter()
        .map(|z| {
            let j = model.eval(z);
            JetSample::new(z.clone(), j.value, j.gradient)
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..jets.len() {
        for k in i + 1..jets.len() {
            out.push(jet_pair_stats(&jets[i], &jets[k]).gamma);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supinf::u_extremal;

    #[test]
    fn e1_closed_form() {
        let f = e1_fixture();
        let m = BiponctualModel::new(&f).unwrap();
        let s3 = 3f64.sqrt();
        assert_eq!(m.a, vec![-1.0, 0.0]);
        assert!((m.kappa - s3).abs() < 1e-15);
        assert!(m.c[0].abs() < 1e-15 && (m.c[1] - 1.0 / s3).abs() < 1e-15);
        let j = m.eval(&m.c.clone());
        assert!(j.value.abs() < 1e-15);
        assert!((j.gradient[0] + s3).abs() < 1e-15 && j.gradient[1].abs() < 1e-15);
        let ja = m.eval(&[-1.0, 0.0]);
        assert!((ja.value - 1.0 / s3).abs() < 1e-15);
        assert!(ja.gradient[0].abs() < 1e-14 && (ja.gradient[1] - 1.0).abs() < 1e-14);
        let jb = m.eval(&[1.0, 0.0]);
        assert!((jb.value + 1.0 / s3).abs() < 1e-15);
        assert!(jb.gradient[0].abs() < 1e-14 && (jb.gradient[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_pairs_interpolate_and_stay_sandwiched() {
        for seed in 0..30 {
            let f = random_field(2, 2, 0.2, seed);
            let m = match BiponctualModel::new(&f) {
                Ok(m) => m,
                Err(Error::Unsupported(_)) => continue,
                Err(e) => panic!("{e}"),
            };
            for s in f.samples() {
                let j = m.eval(&s.x);
                assert!((j.value - s.f).abs() < 1e-12, "seed {seed}");
                assert!(crate::linalg::max_abs_diff(&j.gradient, &s.df) < 1e-12);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10 {
                let z: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
                let v = m.eval(&z).value;
                let up = u_extremal(&f, m.kappa, &z, Sign::Plus, 1e-9).unwrap().value;
                let lo = u_extremal(&f, m.kappa, &z, Sign::Minus, 1e-9).unwrap().value;
                assert!(lo - 1e-6 <= v && v <= up + 1e-6, "seed {seed}: {lo} {v} {up}");
            }
        }
    }

    #[test]
    fn branch_continuity() {
        let f = e1_fixture();
        let m = BiponctualModel::new(&f).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let perp = |v: &[f64]| vec![-v[1], v[0]];
        for k in 0..100 {
            let coef = if k % 2 == 0 { &m.p_coef } else { &m.q_coef };
            let t: f64 = rng.random_range(-3.0..3.0);
            let on = axpy(&m.c, t, &perp(coef));
            let h = 1e-12 * norm2(coef).sqrt().recip();
            let lo = m.eval(&axpy(&on, -h, coef));
            let hi = m.eval(&axpy(&on, h, coef));
            assert!((lo.value - hi.value).abs() < 1e-9);
            assert!(crate::linalg::max_abs_diff(&lo.gradient, &hi.gradient) < 1e-9);
        }
    }

    #[test]
    fn grid_audit_and_segment_pinch() {
        let f = e1_fixture();
        let m = BiponctualModel::new(&f).unwrap();
        let mut jets = Vec::new();
        for i in 0..41 {
            for j in 0..41 {
                let z = vec![-2.0 + 0.1 * i as f64, -2.0 + 0.1 * j as f64];
                let v = m.eval(&z);
                jets.push(JetSample::new(z, v.value, v.gradient));
            }
        }
        let g = gamma1(&OneField::new(jets).unwrap());
        assert!(g <= m.kappa + 1e-6, "{g}");
        for end in [&m.a, &m.b] {
            for g in segment_pair_gammas(&m, end, &m.c, 12) {
                assert!((g - m.kappa).abs() < 1e-8, "{g}");
            }
        }
    }

    #[test]
    fn pinch_at_data_point_is_unsupported() {
        let f = OneField::new(vec![JetSample::new(vec![0.0], 0.0, vec![0.0]), JetSample::new(vec![1.0], 1.0, vec![0.0])]).unwrap();
        let m = BiponctualModel::new(&f).unwrap();
        assert_eq!((m.a[0], m.kappa, m.c[0]), (1.0, 4.0, 0.5));
        let step = OneField::new(vec![JetSample::new(vec![0.0], 0.0, vec![1.0]), JetSample::new(vec![1.0], 0.5, vec![0.0])]).unwrap();
        assert!(matches!(BiponctualModel::new(&step), Err(Error::Unsupported(_))));
    }

    #[test]
    fn samplers_stay_in_region() {
        for n in 1..=5 {
            let r = RegionBall { center: vec![0.5; n], radius: 0.25 };
            for p in ball_points(&r, 64, 3) {
                assert!(dist(&p, &r.center) < r.radius);
            }
            for p in sphere_points(&r, 64, 3) {
                assert!((dist(&p, &r.center) - r.radius).abs() < 1e-14);
            }
        }
        let r = RegionBall { center: vec![0.0, 0.0], radius: 1.0 };
        assert_eq!(ball_points(&r, 50, 1), ball_points(&r, 50, 2));
    }

    #[test]
    fn two_circle_fixture_rejects_coarse_rings() {
        assert!(two_circles_fixture(7).is_err());
        for n in [8, 12, 100, 360, 361] {
            assert_eq!(gamma1(&two_circles_fixture(n).unwrap()), 4.0, "N = {n}");
        }
    }

    #[test]
    fn region_on_data_is_rejected() {
        let f = e1_fixture();
        let r = RegionBall { center: vec![-1.0, 0.0], radius: 0.1 };
        assert!(matches!(amle_check(&f, 3f64.sqrt(), &r, 16, 16, Sign::Plus, 0.05), Err(Error::RegionIntersectsData(0))));
    }
}
