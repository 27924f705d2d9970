//! Primal-dual interior point method for
//!
//! ```text
//! minimize t  subject to  |v - p_j|^2 - w_j - tau_j t <= 0
//! ```
//!
//! Every constraint has Hessian `2 I` in `v`, so the Newton system is only
//! `(n + 1) x (n + 1)` regardless of the number of constraints.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug)]
pub struct Site {
    pub p: Vec<f64>,
    pub w: f64,
    pub tau: f64,
}

#[derive(Clone, Debug)]
pub struct IpmOutcome {
    pub v: Vec<f64>,
    pub t: f64,
    /// Multipliers, one per site.
    pub z: Vec<f64>,
    pub iterations: usize,
    /// Complementarity `s'z` in the original units of `t`.
    pub gap: f64,
    /// Largest constraint residual in the original units of `t`.
    pub infeasibility: f64,
    pub converged: bool,
}

/// Solves the problem after translating `v` to `origin` and dividing lengths
/// by `scale`. The caller's choice of `origin` and `scale` only affects
/// conditioning.
const GUARD_AFTER: usize = 30;

pub fn minimize_max(sites: &[Site], origin: &[f64], scale: f64, rel_tol: f64, max_iter: usize) -> IpmOutcome {
    let n = origin.len();
    let m = sites.len();
    let l2 = scale * scale;
    // shifted t so the start has t = 0
    // sites with tiny tau would push the start far from the optimum
    let tau_max = sites.iter().map(|s| s.tau).fold(0.0f64, f64::max);
    let mut t0 = f64::NEG_INFINITY;
    for s in sites {
        if s.tau > 0.0 && s.tau >= 1e-3 * tau_max {
            t0 = t0.max((crate::linalg::dist2(origin, &s.p) - s.w) / s.tau);
        }
    }
    if !t0.is_finite() {
        t0 = 0.0;
    }
    let ps: Vec<Vec<f64>> = sites.iter().map(|s| s.p.iter().zip(origin).map(|(p, o)| (p - o) / scale).collect()).collect();
    let ws: Vec<f64> = sites.iter().map(|s| (s.w + s.tau * t0) / l2).collect();
    let taus: Vec<f64> = sites.iter().map(|s| s.tau).collect();

    let g_at = |v: &[f64], t: f64, j: usize| -> f64 {
        let mut d = 0.0;
        for k in 0..n {
            let e = v[k] - ps[j][k];
            d += e * e;
        }
        d - ws[j] - taus[j] * t
    };

    let mut v = vec![0.0; n];
    let mut t = 1.0;
    let mut s = vec![0.0; m];
    let mut z = vec![0.0; m];
    for j in 0..m {
        s[j] = (-g_at(&v, t, j)).max(1.0);
        z[j] = 1.0 / s[j];
    }
    let tau_sum: f64 = taus.iter().sum();
    if tau_sum > 0.0 {
        for j in 0..m {
            if taus[j] > 0.0 {
                z[j] = z[j].max(1.0 / tau_sum);
            }
        }
    }

    let mut jac = vec![0.0; m * (n + 1)];
    let mut g = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;
    let dim = n + 1;
    while iterations < max_iter {
        for j in 0..m {
            g[j] = g_at(&v, t, j);
            for k in 0..n {
                jac[j * dim + k] = 2.0 * (v[k] - ps[j][k]);
            }
            jac[j * dim + n] = -taus[j];
        }
        let mut rd = vec![0.0; dim];
        rd[n] = 1.0;
        for j in 0..m {
            for k in 0..dim {
                rd[k] += z[j] * jac[j * dim + k];
            }
        }
        let rp: Vec<f64> = (0..m).map(|j| g[j] + s[j]).collect();
        let sz: f64 = s.iter().zip(&z).map(|(a, b)| a * b).sum();
        let mu = sz / m as f64;
        let zsum: f64 = z.iter().sum();
        let gap_scale = 1.0 + t.abs() + v.iter().map(|x| x * x).sum::<f64>();
        let rp_inf = rp.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        // residual relative to the size of the terms that cancel in it
        let rp_rel =
            (0..m).map(|j| rp[j].abs() / (gap_scale + (g[j] + ws[j] + taus[j] * t).abs() + ws[j].abs() + s[j])).fold(0.0f64, f64::max);
        let rd_inf = rd.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let primal_ok = rp_rel <= 100.0 * rel_tol;
        // At degenerate optima the dual residual stalls near sqrt(eps) while
        // complementarity keeps shrinking; once it is below roundoff nothing
        // further is gained.
        if primal_ok && sz <= rel_tol * gap_scale && (rd_inf <= 1e3 * rel_tol * (1.0 + zsum) || sz <= 0.1 * rel_tol * gap_scale) {
            converged = true;
            break;
        }
        iterations += 1;

        let dvec: Vec<f64> = (0..m).map(|j| z[j] / s[j]).collect();
        let mut kmat = DMatrix::<f64>::zeros(dim, dim);
        for k in 0..n {
            kmat[(k, k)] = 2.0 * zsum;
        }
        for j in 0..m {
            let row = &jac[j * dim..(j + 1) * dim];
            for a in 0..dim {
                let ra = dvec[j] * row[a];
                for b in 0..=a {
                    kmat[(a, b)] += ra * row[b];
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                kmat[(b, a)] = kmat[(a, b)];
            }
        }
        let diag_max = (0..dim).map(|k| kmat[(k, k)]).fold(0.0f64, f64::max);
        let chol = match kmat.clone().cholesky() {
            Some(c) => c,
            None => {
                let mut reg = kmat.clone();
                for k in 0..dim {
                    reg[(k, k)] += 1e-14 * diag_max + 1e-300;
                }
                match reg.cholesky() {
                    Some(c) => c,
                    None => break,
                }
            }
        };

        let solve = |rc: &[f64]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            let mut rhs = DVector::<f64>::from_iterator(dim, rd.iter().map(|x| -x));
            for j in 0..m {
                let c = dvec[j] * rp[j] - rc[j] / s[j];
                for k in 0..dim {
                    rhs[k] -= jac[j * dim + k] * c;
                }
            }
            let dy = chol.solve(&rhs);
            let mut dz = vec![0.0; m];
            let mut ds = vec![0.0; m];
            for j in 0..m {
                let mut jd = 0.0;
                for k in 0..dim {
                    jd += jac[j * dim + k] * dy[k];
                }
                dz[j] = dvec[j] * (jd + rp[j]) - rc[j] / s[j];
                ds[j] = -(rc[j] + s[j] * dz[j]) / z[j];
            }
            (dy.iter().copied().collect(), dz, ds)
        };
        let max_step = |ds: &[f64], dz: &[f64]| -> f64 {
            let mut a = 1.0f64;
            for j in 0..m {
                if ds[j] < 0.0 {
                    a = a.min(-s[j] / ds[j]);
                }
                if dz[j] < 0.0 {
                    a = a.min(-z[j] / dz[j]);
                }
            }
            a
        };

        let rc_aff: Vec<f64> = (0..m).map(|j| s[j] * z[j]).collect();
        let (_, dz_a, ds_a) = solve(&rc_aff);
        let a_aff = max_step(&ds_a, &dz_a);
        let mu_aff: f64 = (0..m).map(|j| (s[j] + a_aff * ds_a[j]) * (z[j] + a_aff * dz_a[j])).sum::<f64>() / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let rc: Vec<f64> = (0..m).map(|j| s[j] * z[j] + ds_a[j] * dz_a[j] - sigma * mu).collect();
        let (dy, dz, ds) = solve(&rc);
        // The constraints are quadratic, so a full linearized step can raise
        // the primal residual and the plain iteration may cycle. Past a few
        // dozen steps, backtrack on the primal residual plus complementarity.
        let merit = |v: &[f64], t: f64, s: &[f64], z: &[f64]| -> f64 {
            let mut rp = 0.0f64;
            let mut sz = 0.0;
            for j in 0..m {
                rp = rp.max((g_at(v, t, j) + s[j]).abs());
                sz += s[j] * z[j];
            }
            rp + sz / m as f64
        };
        let m0 = rp_inf + mu;
        let mut alpha = (0.995 * max_step(&ds, &dz)).min(1.0);
        let step = |alpha: f64| -> (Vec<f64>, f64, Vec<f64>, Vec<f64>) {
            let v1: Vec<f64> = (0..n).map(|k| v[k] + alpha * dy[k]).collect();
            let s1: Vec<f64> = (0..m).map(|j| s[j] + alpha * ds[j]).collect();
            let z1: Vec<f64> = (0..m).map(|j| z[j] + alpha * dz[j]).collect();
            (v1, t + alpha * dy[n], s1, z1)
        };
        let mut next = step(alpha);
        let backtracks = if iterations > GUARD_AFTER { 30 } else { 0 };
        for _ in 0..backtracks {
            if merit(&next.0, next.1, &next.2, &next.3) <= (1.0 - 1e-4 * alpha) * m0 {
                break;
            }
            alpha *= 0.5;
            next = step(alpha);
        }
        (v, t, s, z) = next;
    }
    if converged {
        if let Some((pv, pt)) = polish(&ps, &ws, &taus, &v, t, &s, &z) {
            let phi = |v: &[f64]| -> (f64, f64) {
                let mut obj = f64::NEG_INFINITY;
                let mut viol = 0.0f64;
                for j in 0..m {
                    let d: f64 = (0..n).map(|k| (v[k] - ps[j][k]).powi(2)).sum::<f64>() - ws[j];
                    if taus[j] > 0.0 {
                        obj = obj.max(d / taus[j]);
                    } else {
                        viol = viol.max(d);
                    }
                }
                (obj, viol)
            };
            let gs = 1.0 + t.abs() + v.iter().map(|x| x * x).sum::<f64>();
            let (obj0, viol0) = phi(&v);
            let (obj1, viol1) = phi(&pv);
            if viol1 <= viol0.max(1e-15 * gs) && obj1 <= obj0 + 1e-15 * gs {
                v = pv;
                t = pt;
            }
        }
    }
    let mut infeas = 0.0f64;
    for j in 0..m {
        infeas = infeas.max(g_at(&v, t, j));
    }
    let sz: f64 = s.iter().zip(&z).map(|(a, b)| a * b).sum();
    IpmOutcome {
        v: v.iter().zip(origin).map(|(x, o)| o + scale * x).collect(),
        t: t0 + l2 * t,
        z,
        iterations,
        gap: sz * l2,
        infeasibility: infeas.max(0.0) * l2,
        converged,
    }
}

const POLISH_MAX_ACTIVE: usize = 48;

/// Newton refinement of the KKT system restricted to the constraints the
/// interior point iterate identifies as active (`s_j <= z_j`). Degenerate
/// optima leave the multipliers non-unique, so each step is a minimum-norm
/// least-squares solve.
fn polish(ps: &[Vec<f64>], ws: &[f64], taus: &[f64], v0: &[f64], t0: f64, s: &[f64], z: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = v0.len();
    let act: Vec<usize> = (0..s.len()).filter(|&j| s[j] <= z[j]).collect();
    if act.is_empty() || act.len() > POLISH_MAX_ACTIVE {
        return None;
    }
    let k = act.len();
    let dim = n + 1 + k;
    let mut v = v0.to_vec();
    let mut t = t0;
    let mut za: Vec<f64> = act.iter().map(|&j| z[j]).collect();
    let residual = |v: &[f64], t: f64, za: &[f64]| -> DVector<f64> {
        let mut r = DVector::<f64>::zeros(dim);
        r[n] = 1.0;
        for (i, &j) in act.iter().enumerate() {
            let mut d2 = 0.0;
            for c in 0..n {
                let e = v[c] - ps[j][c];
                r[c] += za[i] * 2.0 * e;
                d2 += e * e;
            }
            r[n] -= za[i] * taus[j];
            r[n + 1 + i] = d2 - ws[j] - taus[j] * t;
        }
        r
    };
    let mut r = residual(&v, t, &za);
    for _ in 0..8 {
        let mut jm = DMatrix::<f64>::zeros(dim, dim);
        let zs: f64 = za.iter().sum();
        for c in 0..n {
            jm[(c, c)] = 2.0 * zs;
        }
        for (i, &j) in act.iter().enumerate() {
            for c in 0..n {
                let g = 2.0 * (v[c] - ps[j][c]);
                jm[(c, n + 1 + i)] = g;
                jm[(n + 1 + i, c)] = g;
            }
            jm[(n, n + 1 + i)] = -taus[j];
            jm[(n + 1 + i, n)] = -taus[j];
        }
        let svd = jm.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd.solve(&(-&r), 1e-12 * smax).ok()?;
        for c in 0..n {
            v[c] += step[c];
        }
        t += step[n];
        for i in 0..k {
            za[i] += step[n + 1 + i];
        }
        let r_new = residual(&v, t, &za);
        let done = step.rows(0, n + 1).amax() <= 1e-15 * (1.0 + v.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        r = r_new;
        if done {
            break;
        }
    }
    if !v.iter().all(|x| x.is_finite()) || !t.is_finite() || r.rows(n + 1, k).amax() > 1e-10 {
        return None;
    }
    Some((v, t))
}
