use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{JetSample, OneField};
use crate::linalg::{dist2, norm2};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub a_val: f64,
    pub b_val: f64,
    pub gamma: f64,
}

pub fn jet_pair_stats(a: &JetSample, b: &JetSample) -> PairStats {
    let n = a.x.len();
    let mut d2 = 0.0;
    let mut inner = 0.0;
    let mut g2 = 0.0;
    for k in 0..n {
        let dx = b.x[k] - a.x[k];
        d2 += dx * dx;
        inner += (a.df[k] + b.df[k]) * dx;
        let dg = a.df[k] - b.df[k];
        g2 += dg * dg;
    }
    let a_val = (2.0 * (a.f - b.f) + inner) / d2;
    let b_val = (g2 / d2).sqrt();
    PairStats { a_val, b_val, gamma: a_val.hypot(b_val) + a_val.abs() }
}

pub fn pair_stats(field: &OneField, i: usize, j: usize) -> Result<PairStats> {
    let a = field.sample(i)?;
    let b = field.sample(j)?;
    if i == j {
        return Err(Error::SamePair(i));
    }
    Ok(jet_pair_stats(a, b))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub gamma1: f64,
    pub lip_df: f64,
    pub argmax_pair: Option<[usize; 2]>,
}

/// Row-wise maxima of a symmetric pair function, reduced in index order so the
/// result and its argmax do not depend on the thread count.
fn pair_max(samples: &[JetSample], stat: impl Fn(&PairStats) -> f64 + Sync) -> (f64, Option<[usize; 2]>) {
    let m = samples.len();
    let rows: Vec<(f64, usize)> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::NEG_INFINITY, usize::MAX);
            for j in i + 1..m {
                let v = stat(&jet_pair_stats(&samples[i], &samples[j]));
                if v > best.0 {
                    best = (v, j);
                }
            }
            best
        })
        .collect();
    let mut best = (0.0, None);
    for (i, &(v, j)) in rows.iter().enumerate() {
        if j != usize::MAX && (best.1.is_none() || v > best.0) {
            best = (v, Some([i, j]));
        }
    }
    best
}

/// Largest pair Gamma^1 with the achieving pair; a single sample gives 0.
pub fn gamma1_argmax(field: &OneField) -> (f64, Option<[usize; 2]>) {
    pair_max(field.samples(), |p| p.gamma)
}

pub fn gamma1(field: &OneField) -> f64 {
    gamma1_argmax(field).0
}

pub fn lip_df(field: &OneField) -> Result<f64> {
    if field.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: field.len() });
    }
    Ok(pair_max(field.samples(), |p| p.b_val).0)
}

pub fn gamma_report(field: &OneField) -> GammaReport {
    let (g, arg) = gamma1_argmax(field);
    GammaReport { gamma1: g, lip_df: lip_df(field).unwrap_or(0.0), argmax_pair: arg }
}

const CHUNK: usize = 1 << 14;

/// Monte-Carlo estimate of the ball-sup form of the pair Gamma^1. Points are
/// drawn by rejection from the bounding cube of the ball; each chunk of
/// samples has its own ChaCha stream, so the result does not depend on how
/// chunks are scheduled.
pub fn gamma1_pair_bruteforce(field: &OneField, i: usize, j: usize, m: usize, rng_seed: u64) -> Result<f64> {
    let a = field.sample(i)?;
    let b = field.sample(j)?;
    if i == j {
        return Err(Error::SamePair(i));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let n = field.dim();
    let center: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| 0.5 * (p + q)).collect();
    let r = 0.5 * dist2(&a.x, &b.x).sqrt();
    let chunks = m.div_ceil(CHUNK);
    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(m - c * CHUNK);
            let mut u = vec![0.0; n];
            let mut y = vec![0.0; n];
            let mut best = f64::NEG_INFINITY;
            for _ in 0..count {
                loop {
                    for uk in u.iter_mut() {
                        *uk = rng.random_range(-1.0..=1.0);
                    }
                    if norm2(&u) <= 1.0 {
                        break;
                    }
                }
                for k in 0..n {
                    y[k] = center[k] + r * u[k];
                }
                let num = (a.eval(&y) - b.eval(&y)).abs();
                let den = dist2(&a.x, &y) + dist2(&b.x, &y);
                best = f64::max(best, num / den);
            }
            best
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(2.0 * best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Compares Gamma^1 of interior plus boundary samples against the larger of
/// the gradient Lipschitz constant and the boundary's own Gamma^1.
pub fn decomposition_check(interior: &OneField, boundary: &OneField, tol: f64) -> Result<DecompositionReport> {
    if boundary.is_empty() {
        return Err(Error::Empty("boundary samples".into()));
    }
    if interior.dim() != boundary.dim() {
        return Err(Error::DimensionMismatch { expected: interior.dim(), found: boundary.dim() });
    }
    let union = interior.extended(boundary.samples().to_vec())?;
    let lhs = gamma1(&union);
    let rhs = lip_df(&union)?.max(gamma1(boundary));
    Ok(DecompositionReport { lhs, rhs, pass: lhs <= rhs + tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1() -> OneField {
        let s = 1.0 / 3f64.sqrt();
        OneField::new(vec![JetSample::new(vec![-1.0, 0.0], s, vec![0.0, 1.0]), JetSample::new(vec![1.0, 0.0], -s, vec![0.0, -1.0])])
            .unwrap()
    }

    fn step_pair() -> OneField {
        OneField::new(vec![JetSample::new(vec![0.0, 0.0], 0.0, vec![0.0, 0.0]), JetSample::new(vec![0.6, 0.8], 1.0, vec![0.0, 0.0])])
            .unwrap()
    }

    #[test]
    fn e1_pair_values() {
        let p = pair_stats(&e1(), 0, 1).unwrap();
        assert!((p.a_val - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((p.b_val - 1.0).abs() < 1e-15);
        assert!((p.gamma - 3f64.sqrt()).abs() < 1e-15);
        assert!(matches!(pair_stats(&e1(), 1, 1), Err(Error::SamePair(1))));
    }

    #[test]
    fn step_pair_values() {
        let p = pair_stats(&step_pair(), 0, 1).unwrap();
        assert!((p.a_val + 2.0).abs() < 1e-15 && p.b_val == 0.0);
        assert!((p.gamma - 4.0).abs() < 1e-15);
    }

    #[test]
    fn affine_field_is_flat() {
        let f = OneField::new(
            [[0.0, 1.0], [2.0, -1.0], [0.5, 0.5]]
                .iter()
                .map(|p| JetSample::new(p.to_vec(), 1.0 - p[0] + 4.0 * p[1], vec![-1.0, 4.0]))
                .collect(),
        )
        .unwrap();
        assert!(gamma1(&f) < 1e-14);
        assert_eq!(lip_df(&f).unwrap(), 0.0);
        assert!(gamma1_pair_bruteforce(&f, 0, 1, 1000, 3).unwrap() < 1e-14);
    }

    #[test]
    fn single_sample_conventions() {
        let f = OneField::new(vec![JetSample::new(vec![0.0], 1.0, vec![2.0])]).unwrap();
        assert_eq!(gamma1_argmax(&f), (0.0, None));
        assert!(lip_df(&f).is_err());
    }

    #[test]
    fn bruteforce_approaches_closed_form_from_below() {
        let g = gamma1_pair_bruteforce(&e1(), 0, 1, 50_000, 7).unwrap();
        assert!(g <= 3f64.sqrt() + 1e-12 && g > 3f64.sqrt() - 0.05);
        let g2 = gamma1_pair_bruteforce(&e1(), 0, 1, 50_000, 7).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn quadratic_decomposition_passes() {
        let q = |x: &[f64]| (x[0] * x[0] + 3.0 * x[1] * x[1] + x[0] * x[1], vec![2.0 * x[0] + x[1], 6.0 * x[1] + x[0]]);
        let jet = |x: Vec<f64>| {
            let (f, df) = q(&x);
            JetSample::new(x, f, df)
        };
        let boundary = OneField::new(
            (0..40)
                .map(|k| {
                    let t = k as f64 * std::f64::consts::TAU / 40.0;
                    jet(vec![t.cos(), t.sin()])
                })
                .collect(),
        )
        .unwrap();
        let interior = OneField::new(
            (1..60)
                .map(|k| {
                    let r = (k as f64 / 60.0).sqrt() * 0.95;
                    let t = k as f64 * 2.399963;
                    jet(vec![r * t.cos(), r * t.sin()])
                })
                .collect(),
        )
        .unwrap();
        let rep = decomposition_check(&interior, &boundary, 1e-6).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.lhs >= rep.rhs - 1e-12);
    }
}
