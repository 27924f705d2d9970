use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::OneField;
use crate::linalg::{dist, dist2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    /// Positive when `v` lies outside the ball.
    pub fn overshoot(&self, v: &[f64]) -> f64 {
        dist(v, &self.center) - self.radius
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let d = dist(v, &self.center);
        if d <= self.radius {
            return v.to_vec();
        }
        let s = self.radius / d;
        self.center.iter().zip(v).map(|(c, x)| c + s * (x - c)).collect()
    }
}

/// The admissible gradient set at a query point as an explicit list of balls,
/// one per ordered pair of samples, diagonal pairs included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaSet {
    pub query: Vec<f64>,
    pub balls: Vec<Ball>,
}

impl LambdaSet {
    pub fn max_overshoot(&self, v: &[f64]) -> f64 {
        self.balls.iter().map(|b| b.overshoot(v)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.max_overshoot(v) <= tol
    }
}

/// Precomputed, query-independent parts of the pair balls.
///
/// For the ordered pair (a, b) the ball has center
/// `(D_a + D_b)/2 + kappa (b - a)/2` and squared radius `alpha_ab + |h_ab + kappa x|^2`
/// with `h_ab = (D_a - D_b)/2 - kappa (a + b)/2`.
#[derive(Clone, Debug)]
pub struct PairBalls {
    pub(crate) m: usize,
    pub(crate) n: usize,
    pub(crate) kappa: f64,
    pub(crate) alpha: Vec<f64>,
    // center_ab = lo_a + hi_b and h_ab + kappa x = lo_a + kappa x - hi_b
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl PairBalls {
    pub fn new(field: &OneField, kappa: f64) -> Self {
        let m = field.len();
        let n = field.dim();
        let mut lo = Vec::with_capacity(m * n);
        let mut hi = Vec::with_capacity(m * n);
        for s in field.samples() {
            for k in 0..n {
                lo.push(0.5 * s.df[k] - 0.5 * kappa * s.x[k]);
                hi.push(0.5 * s.df[k] + 0.5 * kappa * s.x[k]);
            }
        }
        let mut alpha = vec![0.0; m * m];
        let samples = field.samples();
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                let (sa, sb) = (&samples[a], &samples[b]);
                let mut inner = 0.0;
                let mut g2 = 0.0;
                let mut d2 = 0.0;
                for k in 0..n {
                    let dx = sb.x[k] - sa.x[k];
                    inner += (sa.df[k] + sb.df[k]) * dx;
                    let dg = sa.df[k] - sb.df[k];
                    g2 += dg * dg;
                    d2 += dx * dx;
                }
                let val = 2.0 * kappa * (sa.f - sb.f) + kappa * inner - 0.5 * g2 + 0.5 * kappa * kappa * d2;
                alpha[a * m + b] = val.max(0.0);
            }
        }
        PairBalls { m, n, kappa, alpha, lo, hi }
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    fn lo(&self, a: usize) -> &[f64] {
        &self.lo[a * self.n..(a + 1) * self.n]
    }

    fn hi(&self, b: usize) -> &[f64] {
        &self.hi[b * self.n..(b + 1) * self.n]
    }

    pub fn center_into(&self, a: usize, b: usize, out: &mut [f64]) {
        for ((o, l), h) in out.iter_mut().zip(self.lo(a)).zip(self.hi(b)) {
            *o = l + h;
        }
    }

    pub fn radius2(&self, a: usize, b: usize, q: &[f64]) -> f64 {
        let mut beta = 0.0;
        for k in 0..self.n {
            let h = self.lo(a)[k] + self.kappa * q[k] - self.hi(b)[k];
            beta += h * h;
        }
        self.alpha[a * self.m + b] + beta
    }

    pub fn ball(&self, a: usize, b: usize, q: &[f64]) -> Ball {
        let mut c = vec![0.0; self.n];
        self.center_into(a, b, &mut c);
        Ball { center: c, radius: self.radius2(a, b, q).sqrt() }
    }

    /// `|v - c_ab| - r_ab(x)` for one pair.
    pub fn overshoot(&self, a: usize, b: usize, q: &[f64], v: &[f64], buf: &mut [f64]) -> f64 {
        self.center_into(a, b, buf);
        dist2(v, buf).sqrt() - self.radius2(a, b, q).sqrt()
    }

    /// Calls `visit(a, b, d2, r2)` for every pair, with `d2 = |v - c_ab|^2`
    /// and `r2` the squared radius.
    fn scan(&self, q: &[f64], v: &[f64], mut visit: impl FnMut(usize, usize, f64, f64)) {
        let n = self.n;
        let mut va = vec![0.0; n];
        let mut wa = vec![0.0; n];
        for a in 0..self.m {
            let la = self.lo(a);
            for k in 0..n {
                va[k] = v[k] - la[k];
                wa[k] = la[k] + self.kappa * q[k];
            }
            let row = &self.alpha[a * self.m..(a + 1) * self.m];
            for (b, hb) in self.hi.chunks_exact(n).enumerate() {
                let mut d2 = 0.0;
                let mut r2 = row[b];
                for k in 0..n {
                    let e = va[k] - hb[k];
                    let h = wa[k] - hb[k];
                    d2 += e * e;
                    r2 += h * h;
                }
                visit(a, b, d2, r2);
            }
        }
    }

    /// Pair with the largest overshoot at `v`, and that overshoot.
    pub fn worst(&self, q: &[f64], v: &[f64]) -> ((usize, usize), f64) {
        let mut best = ((0, 0), f64::NEG_INFINITY);
        self.scan(q, v, |a, b, d2, r2| {
            let o = d2.sqrt() - r2.sqrt();
            if o > best.1 {
                best = ((a, b), o);
            }
        });
        best
    }

    /// Largest overshoot at `v`, or 0 when `v` lies in every ball.
    pub fn max_violation(&self, q: &[f64], v: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        self.scan(q, v, |_, _, d2, r2| {
            if d2 > r2 {
                worst = worst.max(d2.sqrt() - r2.sqrt());
            }
        });
        worst
    }

    /// Pairs whose overshoot at `v` exceeds `thresh`, largest first, at most `cap`.
    pub fn violated(&self, q: &[f64], v: &[f64], thresh: f64, cap: usize) -> Vec<((usize, usize), f64)> {
        let mut out = Vec::new();
        self.scan(q, v, |a, b, d2, r2| {
            if d2 > r2 {
                let o = d2.sqrt() - r2.sqrt();
                if o > thresh {
                    out.push(((a, b), o));
                }
            }
        });
        out.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        out.truncate(cap);
        out
    }

    /// Pair with the smallest radius at `q`.
    pub fn smallest(&self, q: &[f64]) -> ((usize, usize), f64) {
        let mut best = ((0, 0), f64::INFINITY);
        self.scan(q, q, |a, b, _, r2| {
            if r2 < best.1 {
                best = ((a, b), r2);
            }
        });
        (best.0, best.1.sqrt())
    }

    pub fn lambda_set(&self, q: &[f64]) -> LambdaSet {
        let mut balls = Vec::with_capacity(self.m * self.m);
        for a in 0..self.m {
            for b in 0..self.m {
                balls.push(self.ball(a, b, q));
            }
        }
        LambdaSet { query: q.to_vec(), balls }
    }
}

pub(crate) fn check_kappa(field: &OneField, kappa: f64) -> Result<f64> {
    let g = crate::gamma::gamma1(field);
    if !kappa.is_finite() {
        return Err(Error::NonFinite("kappa".into()));
    }
    if kappa < g - 1e-12 * (1.0 + g) {
        return Err(Error::KappaTooSmall { kappa, gamma1: g });
    }
    if kappa <= 0.0 && field.detect_affine(1e-12).is_none() {
        return Err(Error::NonPositiveKappa(kappa));
    }
    Ok(g)
}

pub fn lambda_constraints(field: &OneField, kappa: f64, x: &[f64]) -> Result<LambdaSet> {
    field.check_point(x)?;
    check_kappa(field, kappa)?;
    Ok(PairBalls::new(field, kappa).lambda_set(x))
}

/// Dykstra's cyclic projection onto the intersection of the balls, run on a
/// growing working set: balls are only cycled once `v0`'s current projection
/// violates them. The final point satisfies every ball, so it is also the
/// projection onto the full intersection.
pub fn project_lambda(lset: &LambdaSet, v0: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    if lset.balls.is_empty() {
        return Ok(v0.to_vec());
    }
    let n = v0.len();
    let mut work: Vec<usize> = Vec::new();
    let mut in_work = vec![false; lset.balls.len()];
    let mut v = v0.to_vec();
    let mut iters = 0;
    loop {
        let mut viol: Vec<(usize, f64)> = lset
            .balls
            .iter()
            .enumerate()
            .filter(|(i, _)| !in_work[*i])
            .map(|(i, b)| (i, b.overshoot(&v)))
            .filter(|(_, o)| *o > tol)
            .collect();
        if viol.is_empty() {
            let worst = lset.max_overshoot(&v);
            if worst <= tol {
                return Ok(v);
            }
        }
        viol.sort_by(|a, b| b.1.total_cmp(&a.1));
        for (i, _) in viol.into_iter().take(64) {
            in_work[i] = true;
            work.push(i);
        }
        // Dykstra restarts from v0 on the enlarged working set.
        v = v0.to_vec();
        let mut corr = vec![vec![0.0; n]; work.len()];
        loop {
            iters += 1;
            let mut change = 0.0f64;
            for (k, &i) in work.iter().enumerate() {
                let y: Vec<f64> = v.iter().zip(&corr[k]).map(|(a, b)| a + b).collect();
                let p = lset.balls[i].project(&y);
                for j in 0..n {
                    corr[k][j] = y[j] - p[j];
                }
                change = change.max(dist(&p, &v));
                v = p;
            }
            let worst = work.iter().map(|&i| lset.balls[i].overshoot(&v)).fold(0.0, f64::max);
            if change <= 0.1 * tol && worst <= tol {
                break;
            }
            if iters >= max_iter {
                return Err(Error::NoConvergence { iterations: iters, gap: change, violation: worst });
            }
        }
    }
}
