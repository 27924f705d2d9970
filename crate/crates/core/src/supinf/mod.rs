//! Extremal extensions u+ and u- of a 1-field.
//!
//! For the plus sign the comparison functions complete to
//! `Psi+(a, v) = e_a - |v - q_a|^2 / (4 kappa)` with `q_a = D_a + kappa (x - a)` and
//! `e_a = f_a + <D_a, x - a> + kappa |x - a|^2 / 2`, so maximizing their lower
//! envelope over the ball intersection is the convex minimax
//! `min_v max_a |v - q_a|^2 - 4 kappa e_a` handled by [`solver::minimize_max`].
//! The minus sign is solved through `u-(F) = -u+(-F)`.

pub mod lambda;
pub mod solver;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{AffinePolynomial, JetSample, OneField};
use crate::linalg::{dist, dist2, dot, norm2};
use crate::Sign;

pub use lambda::{lambda_constraints, project_lambda, Ball, LambdaSet, PairBalls};
use solver::{minimize_max, Site};

pub fn psi_unchecked(s: &JetSample, kappa: f64, x: &[f64], v: &[f64], sign: Sign) -> f64 {
    let mut lin = 0.0;
    let mut dx2 = 0.0;
    let mut dv2 = 0.0;
    for k in 0..x.len() {
        let d = x[k] - s.x[k];
        lin += (s.df[k] + v[k]) * d;
        dx2 += d * d;
        let e = s.df[k] - v[k];
        dv2 += e * e;
    }
    let corr = 0.25 * kappa * dx2 - 0.25 * dv2 / kappa;
    match sign {
        Sign::Plus => s.f + 0.5 * lin + corr,
        Sign::Minus => s.f + 0.5 * lin - corr,
    }
}

pub fn psi(field: &OneField, kappa: f64, x: &[f64], a_idx: usize, v: &[f64], sign: Sign) -> Result<f64> {
    let s = field.sample(a_idx)?;
    field.check_point(x)?;
    field.check_point(v)?;
    if kappa <= 0.0 {
        return Err(Error::NonPositiveKappa(kappa));
    }
    Ok(psi_unchecked(s, kappa, x, v, sign))
}

/// `min_a Psi+(a, v)` for the plus sign, `max_a Psi-(a, v)` for the minus sign.
pub fn psi_envelope(field: &OneField, kappa: f64, x: &[f64], v: &[f64], sign: Sign) -> f64 {
    let vals = field.samples().iter().map(|s| psi_unchecked(s, kappa, x, v, sign));
    match sign {
        Sign::Plus => vals.fold(f64::INFINITY, f64::min),
        Sign::Minus => vals.fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionResult {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    pub constraint_violation: f64,
    pub stationarity_gap: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting gradient; the solver translates its coordinates to this point.
    pub start: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-8, max_iter: 10_000, start: None }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions { tol, ..Default::default() }
    }
}

/// Smallest admissible-gradient radius below which the set is treated as a
/// single point (relative to the gradient scale). Tight pairs leave the
/// radius at the square root of roundoff, around 1e-8.
const PIN_REL: f64 = 1e-7;
const ROUND_CAP: usize = 24;
const THIN_REL: f64 = 1e-12;

/// Two balls touching from outside meet in one point, which is far better
/// conditioned than the minimax estimate of it. Taken from the two largest
/// multipliers and kept only if it overshoots no ball more than `thin.v` does.
fn tangent_point(balls: &[Site], thin: &solver::IpmOutcome) -> Option<Vec<f64>> {
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| thin.z[b].total_cmp(&thin.z[a]));
    let (i, j) = (*order.first()?, *order.get(1)?);
    let (ri, rj) = (balls[i].w.max(0.0).sqrt(), balls[j].w.max(0.0).sqrt());
    let gap = dist(&balls[i].p, &balls[j].p);
    if ri + rj == 0.0 || (gap - ri - rj).abs() > 1e-6 * (ri + rj) {
        return None;
    }
    let s = ri / (ri + rj);
    let v: Vec<f64> = balls[i].p.iter().zip(&balls[j].p).map(|(a, b)| a + s * (b - a)).collect();
    let over = |v: &[f64]| balls.iter().map(|b| dist(v, &b.p) - b.w.max(0.0).sqrt()).fold(0.0f64, f64::max);
    (over(&v) <= over(&thin.v)).then_some(v)
}

#[derive(Clone, Debug)]
struct Core {
    field: OneField,
    kappa: f64,
    balls: PairBalls,
    grad_scale: f64,
}

impl Core {
    fn new(field: OneField, kappa: f64) -> Self {
        let balls = PairBalls::new(&field, kappa);
        let grad_scale = 1.0 + field.samples().iter().map(|s| norm2(&s.df).sqrt()).fold(0.0, f64::max);
        Core { field, kappa, balls, grad_scale }
    }

    fn solve(&self, x: &[f64], opts: &SolveOptions) -> Result<ExtensionResult> {
        let kappa = self.kappa;
        let samples = self.field.samples();
        let m = samples.len();
        let n = x.len();
        if let Some(i) = samples.iter().position(|s| s.x.as_slice() == x) {
            return Ok(ExtensionResult {
                value: samples[i].f,
                gradient: samples[i].df.clone(),
                iterations: 0,
                constraint_violation: 0.0,
                stationarity_gap: 0.0,
            });
        }
        let reach = samples.iter().map(|s| dist(&s.x, x)).fold(0.0, f64::max);
        let scale = self.grad_scale + kappa * reach;

        let ((pa, pb), r_min) = self.balls.smallest(x);
        let pin_center = self.balls.ball(pa, pb, x).center;
        let finish = |v: Vec<f64>, iterations: usize, gap: f64| -> Result<ExtensionResult> {
            let violation = self.balls.max_violation(x, &v);
            let value = psi_envelope(&self.field, kappa, x, &v, Sign::Plus);
            if violation > opts.tol || gap > opts.tol || !value.is_finite() {
                return Err(Error::NoConvergence { iterations, gap, violation });
            }
            Ok(ExtensionResult { value, gradient: v, iterations, constraint_violation: violation, stationarity_gap: gap })
        };
        if r_min <= PIN_REL * scale {
            return finish(pin_center, 0, 0.0);
        }

        let mut sites: Vec<Site> = samples
            .iter()
            .map(|s| {
                let d: Vec<f64> = x.iter().zip(&s.x).map(|(a, b)| a - b).collect();
                let q: Vec<f64> = s.df.iter().zip(&d).map(|(g, e)| g + kappa * e).collect();
                let e = s.f + dot(&s.df, &d) + 0.5 * kappa * norm2(&d);
                Site { p: q, w: 4.0 * kappa * e, tau: 1.0 }
            })
            .collect();
        let mut active = vec![false; m * m];
        let mut add_ball = |sites: &mut Vec<Site>, a: usize, b: usize| {
            if !active[a * m + b] {
                active[a * m + b] = true;
                let ball = self.balls.ball(a, b, x);
                sites.push(Site { p: ball.center, w: ball.radius * ball.radius, tau: 0.0 });
                true
            } else {
                false
            }
        };
        for a in 0..m {
            add_ball(&mut sites, a, a);
        }
        add_ball(&mut sites, pa, pb);

        let origin = opts.start.clone().unwrap_or_else(|| pin_center.clone());
        if origin.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: origin.len() });
        }
        let l = r_min.max(1e-3 * scale);
        let feas = 1e-13 * scale;
        let mut iterations = 0;
        let mut best: Option<(Vec<f64>, f64)> = None;
        for _ in 0..ROUND_CAP {
            let budget = (opts.max_iter.saturating_sub(iterations)).min(200);
            if budget == 0 {
                break;
            }
            let out = minimize_max(&sites, &origin, l, 1e-15, budget);
            iterations += out.iterations;
            let (out, gap) = if out.converged {
                let gap = out.gap / (4.0 * kappa);
                (out, gap)
            } else {
                // No interior: the balls may meet in a single point. Find the
                // point that overshoots them least.
                let balls: Vec<Site> = sites.iter().filter(|s| s.tau == 0.0).map(|s| Site { p: s.p.clone(), w: s.w, tau: 1.0 }).collect();
                let thin = minimize_max(&balls, &origin, l, 1e-15, budget);
                iterations += thin.iterations;
                if !thin.converged || thin.t > THIN_REL * scale * scale {
                    return Err(Error::NoConvergence { iterations, gap: out.gap / (4.0 * kappa), violation: out.infeasibility });
                }
                match tangent_point(&balls, &thin) {
                    Some(v) => (solver::IpmOutcome { v, ..thin }, 0.0),
                    None => {
                        let width = (-thin.t).max(0.0).sqrt();
                        (thin, width * scale / (2.0 * kappa))
                    }
                }
            };
            let viol = self.balls.violated(x, &out.v, feas, 16);
            best = Some((out.v.clone(), gap));
            if viol.is_empty() {
                break;
            }
            let mut added = false;
            for ((a, b), _) in viol {
                added |= add_ball(&mut sites, a, b);
            }
            if !added {
                break;
            }
        }
        let (v, gap) = best.expect("at least one round");
        finish(v, iterations, gap)
    }
}

/// Solver for both extremal extensions of one field at a fixed kappa.
#[derive(Clone, Debug)]
pub struct Extender {
    kappa: f64,
    gamma1: f64,
    affine: Option<AffinePolynomial>,
    plus: Option<Core>,
    minus: Option<Core>,
}

impl Extender {
    pub fn new(field: &OneField, kappa: f64) -> Result<Self> {
        let gamma1 = lambda::check_kappa(field, kappa)?;
        if kappa <= 0.0 {
            return Ok(Extender { kappa, gamma1, affine: field.detect_affine(1e-12), plus: None, minus: None });
        }
        Ok(Extender {
            kappa,
            gamma1,
            affine: None,
            plus: Some(Core::new(field.clone(), kappa)),
            minus: Some(Core::new(field.negated(), kappa)),
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma1(&self) -> f64 {
        self.gamma1
    }

    pub fn field(&self) -> Option<&OneField> {
        self.plus.as_ref().map(|c| &c.field)
    }

    pub fn solve(&self, x: &[f64], sign: Sign, opts: &SolveOptions) -> Result<ExtensionResult> {
        if let Some(p) = &self.affine {
            if x.len() != p.v.len() {
                return Err(Error::DimensionMismatch { expected: p.v.len(), found: x.len() });
            }
            return Ok(ExtensionResult {
                value: p.eval(x),
                gradient: p.v.clone(),
                iterations: 0,
                constraint_violation: 0.0,
                stationarity_gap: 0.0,
            });
        }
        let core = self.plus.as_ref().expect("non-affine extender has cores");
        core.field.check_point(x)?;
        match sign {
            Sign::Plus => core.solve(x, opts),
            Sign::Minus => {
                let mut o = opts.clone();
                o.start = o.start.map(|s| s.iter().map(|c| -c).collect());
                let mut r = self.minus.as_ref().expect("cores").solve(x, &o)?;
                r.value = -r.value;
                r.gradient.iter_mut().for_each(|g| *g = -*g);
                Ok(r)
            }
        }
    }

    /// Solves every query in parallel; results keep the query order.
    pub fn solve_many(&self, xs: &[Vec<f64>], sign: Sign, opts: &SolveOptions) -> Vec<Result<ExtensionResult>> {
        xs.par_iter().map(|x| self.solve(x, sign, opts)).collect()
    }

    pub fn lambda_set(&self, x: &[f64]) -> Option<LambdaSet> {
        self.plus.as_ref().map(|c| c.balls.lambda_set(x))
    }
}

pub fn u_extremal(field: &OneField, kappa: f64, x: &[f64], sign: Sign, tol: f64) -> Result<ExtensionResult> {
    field.check_point(x)?;
    Extender::new(field, kappa)?.solve(x, sign, &SolveOptions::with_tol(tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleCertificate {
    pub feasible_gradient: bool,
    pub lower: f64,
    pub upper: f64,
    pub pass: bool,
}

/// Checks whether a candidate jet at `x` can be appended to the field without
/// raising Gamma^1 above kappa.
pub fn certify_mle_point(field: &OneField, kappa: f64, x: &[f64], value: f64, gradient: &[f64], tol: f64) -> Result<MleCertificate> {
    field.check_point(x)?;
    field.check_point(gradient)?;
    if kappa <= 0.0 {
        return Err(Error::NonPositiveKappa(kappa));
    }
    lambda::check_kappa(field, kappa)?;
    let balls = PairBalls::new(field, kappa);
    let (_, worst) = balls.worst(x, gradient);
    let feasible_gradient = worst <= tol;
    let lower = psi_envelope(field, kappa, x, gradient, Sign::Minus);
    let upper = psi_envelope(field, kappa, x, gradient, Sign::Plus);
    let pass = feasible_gradient && lower - tol <= value && value <= upper + tol;
    Ok(MleCertificate { feasible_gradient, lower, upper, pass })
}

/// Appends the extremal jets at `queries` to the field. Queries that coincide
/// with a sample are skipped, since the extension interpolates there.
pub fn extend_field(field: &OneField, kappa: f64, queries: &[Vec<f64>], sign: Sign, opts: &SolveOptions) -> Result<OneField> {
    for q in queries {
        field.check_point(q)?;
    }
    let ext = Extender::new(field, kappa)?;
    let fresh: Vec<&Vec<f64>> = queries.iter().filter(|q| field.find_point(q, 0.0).is_none()).collect();
    let jets: Vec<Result<JetSample>> =
        fresh.par_iter().map(|q| ext.solve(q, sign, opts).map(|r| JetSample::new(q.to_vec(), r.value, r.gradient))).collect();
    let mut extra = Vec::with_capacity(jets.len());
    for (k, j) in jets.into_iter().enumerate() {
        let idx = queries.iter().position(|q| std::ptr::eq(q, fresh[k])).unwrap_or(k);
        extra.push(j.map_err(|e| Error::Query { index: idx, source: Box::new(e) })?);
    }
    field.extended(extra)
}

/// Distance from `x` to the nearest sample point.
pub fn data_distance(field: &OneField, x: &[f64]) -> f64 {
    field.samples().iter().map(|s| dist2(&s.x, x)).fold(f64::INFINITY, f64::min).sqrt()
}
