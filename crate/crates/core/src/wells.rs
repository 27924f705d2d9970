//! Wells's explicit extension for finite sets.
//!
//! Every sample `p` gets a shifted point `p~ = p - D_p/kappa` and a paraboloid
//! `d_p(x) = f_p - |D_p|^2/(2 kappa) + kappa |x - p~|^2 / 4`. For a subset S the
//! paraboloids agree on an affine set `S_E` orthogonal to the affine hull
//! `S_H` of the shifted points; the two meet at the single point `S_C`. The
//! cell `T_S` is the set of midpoints between the hull of the shifted points
//! and the part `S_*` of `S_E` where S attains the lower envelope.
//!
//! Since `T_S` lies in `S_C + V_H (+) V_E` with orthogonal `V_H`, `V_E`, the
//! midpoint decomposition of a query is unique and membership reduces to two
//! independent distance problems.
//!
//! The minus construction is the plus construction of `-F`, negated.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::OneField;
use crate::linalg::{combine, coords, dist2, dot, norm, norm2, orthogonal_complement, orthonormal_basis, sub};
use crate::Sign;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellsPointData {
    pub p_tilde: Vec<f64>,
    pub d_const: f64,
    pub sign: Sign,
}

impl WellsPointData {
    pub fn eval(&self, kappa: f64, x: &[f64]) -> f64 {
        let q = 0.25 * kappa * dist2(x, &self.p_tilde);
        match self.sign {
            Sign::Plus => self.d_const + q,
            Sign::Minus => self.d_const - q,
        }
    }
}

pub fn wells_prep(field: &OneField, kappa: f64, sign: Sign) -> Result<Vec<WellsPointData>> {
    if kappa <= 0.0 {
        return Err(Error::NonPositiveKappa(kappa));
    }
    crate::supinf::lambda::check_kappa(field, kappa)?;
    Ok(prep_unchecked(field, kappa, sign))
}

fn prep_unchecked(field: &OneField, kappa: f64, sign: Sign) -> Vec<WellsPointData> {
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    field
        .samples()
        .iter()
        .map(|p| WellsPointData {
            p_tilde: p.x.iter().zip(&p.df).map(|(x, d)| x - s * d / kappa).collect(),
            d_const: p.f - s * 0.5 * norm2(&p.df) / kappa,
            sign,
        })
        .collect()
}

/// Orthonormal basis of an affine set together with a base point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineBasis {
    pub base: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

/// `<normal, x> <= offset`, with `normal` of unit length or zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellsCell {
    pub members: Vec<usize>,
    pub s_tilde: Vec<Vec<f64>>,
    pub hull_basis: AffineBasis,
    pub eq_basis: AffineBasis,
    pub s_c: Vec<f64>,
    /// Common paraboloid value at `s_c`, for the cell's sign.
    pub d_c: f64,
    pub star_inequalities: Vec<HalfSpace>,
    /// Optimal slack of the admission LP.
    pub margin: f64,
}

#[derive(Clone, Debug)]
pub struct WellsOptions {
    pub max_points: usize,
    pub max_dim: usize,
    pub rank_tol: f64,
    pub admit_slack: f64,
}

impl Default for WellsOptions {
    fn default() -> Self {
        WellsOptions { max_points: 20, max_dim: 3, rank_tol: 1e-10, admit_slack: 1e-10 }
    }
}

/// The admitted cells for one sign, ready for point location.
#[derive(Clone, Debug)]
pub struct WellsComplex {
    pub kappa: f64,
    pub sign: Sign,
    pub points: Vec<WellsPointData>,
    pub cells: Vec<WellsCell>,
    /// Subsets skipped because distinct samples share a shifted point with
    /// different paraboloid constants.
    pub skipped_degenerate: usize,
    scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellsValue {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub cell: Vec<usize>,
    pub defect: f64,
    /// Largest value difference among the other cells that also contain the point.
    pub spread: f64,
}

fn plus_points(field: &OneField, kappa: f64, sign: Sign) -> Vec<WellsPointData> {
    // Minus cells are built from the plus data of -F.
    match sign {
        Sign::Plus => prep_unchecked(field, kappa, Sign::Plus),
        Sign::Minus => prep_unchecked(&field.negated(), kappa, Sign::Plus),
    }
}

pub fn enumerate_cells(field: &OneField, kappa: f64, sign: Sign, opts: &WellsOptions) -> Result<WellsComplex> {
    let m = field.len();
    let n = field.dim();
    if m > opts.max_points {
        return Err(Error::SubsetBudget { m, cap: opts.max_points });
    }
    if n > opts.max_dim {
        return Err(Error::DimensionBudget { n, cap: opts.max_dim });
    }
    if kappa <= 0.0 {
        return Err(Error::NonPositiveKappa(kappa));
    }
    crate::supinf::lambda::check_kappa(field, kappa)?;
    let pts = plus_points(field, kappa, sign);
    let scale =
        1.0 + pts.iter().map(|p| norm(&p.p_tilde)).fold(0.0, f64::max) + pts.iter().map(|p| p.d_const.abs()).fold(0.0, f64::max) / kappa;

    let mut degenerate = vec![false; m * m];
    let mut skipped = 0usize;
    for i in 0..m {
        for j in i + 1..m {
            if dist2(&pts[i].p_tilde, &pts[j].p_tilde) <= (1e-12 * scale).powi(2) && (pts[i].d_const - pts[j].d_const).abs() > 1e-10 * scale
            {
                degenerate[i * m + j] = true;
            }
        }
    }

    let masks: Vec<u64> = (1u64..(1u64 << m)).collect();
    let built: Vec<Option<WellsCell>> = masks
        .par_iter()
        .map(|&mask| {
            let members: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            for (a, &i) in members.iter().enumerate() {
                for &j in &members[a + 1..] {
                    if degenerate[i * m + j] {
                        return None;
                    }
                }
            }
            build_cell(&pts, &members, kappa, n, scale, opts)
        })
        .collect();
    for (mask, c) in masks.iter().zip(&built) {
        if c.is_none() {
            let members: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            if members.iter().enumerate().any(|(a, &i)| members[a + 1..].iter().any(|&j| degenerate[i * m + j])) {
                skipped += 1;
            }
        }
    }
    let mut cells: Vec<WellsCell> = built.into_iter().flatten().collect();
    if sign == Sign::Minus {
        for c in &mut cells {
            c.d_c = -c.d_c;
        }
    }
    let points = prep_unchecked(field, kappa, sign);
    Ok(WellsComplex { kappa, sign, points, cells, skipped_degenerate: skipped, scale })
}

fn build_cell(pts: &[WellsPointData], members: &[usize], kappa: f64, n: usize, scale: f64, opts: &WellsOptions) -> Option<WellsCell> {
    let s0 = &pts[members[0]].p_tilde;
    let c0 = pts[members[0]].d_const;
    let deltas: Vec<Vec<f64>> = members[1..].iter().map(|&i| sub(&pts[i].p_tilde, s0)).collect();
    let rhs: Vec<f64> = members[1..].iter().zip(&deltas).map(|(&i, d)| 0.5 * norm2(d) + 2.0 * (pts[i].d_const - c0) / kappa).collect();
    let bh = orthonormal_basis(&deltas, opts.rank_tol);
    let k = bh.len();
    // S_C - s0 = B_H eta with <B_H eta, delta_i> = rhs_i
    let eta = if k == 0 {
        Vec::new()
    } else {
        let a = nalgebra::DMatrix::<f64>::from_fn(deltas.len(), k, |r, c| dot(&deltas[r], &bh[c]));
        let b = nalgebra::DVector::<f64>::from_column_slice(&rhs);
        let svd = a.clone().svd(true, true);
        let sol = svd.solve(&b, 1e-13 * svd.singular_values.max()).ok()?;
        let res = (&a * &sol - &b).amax();
        if res > 1e-9 * (scale * scale + rhs.iter().fold(0.0f64, |x, y| x.max(y.abs()))) {
            return None;
        }
        sol.iter().copied().collect()
    };
    let s_c: Vec<f64> = s0.iter().zip(combine(&bh, &eta, n)).map(|(a, b)| a + b).collect();
    let be = orthogonal_complement(&bh, n);
    let d_c = c0 + 0.25 * kappa * dist2(&s_c, s0);

    // S_* inside S_E: for j outside S, d_{s0} - d_j <= 0, normalized.
    let mut star = Vec::new();
    let mut in_s = vec![false; pts.len()];
    for &i in members {
        in_s[i] = true;
    }
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (j, pj) in pts.iter().enumerate() {
        if in_s[j] {
            continue;
        }
        let dj = sub(&pj.p_tilde, s0);
        let g = 0.5 * kappa * norm(&dj);
        // value at x: 0.5 kappa <x - s0, dj> - 0.25 kappa |dj|^2 + c0 - cj
        if g <= 1e-12 * kappa * scale {
            let slack = pj.d_const - c0;
            star.push(HalfSpace { normal: vec![0.0; n], offset: slack });
            rows.push((vec![0.0; be.len()], slack));
            continue;
        }
        let normal: Vec<f64> = dj.iter().map(|d| 0.5 * kappa * d / g).collect();
        let offset = (0.25 * kappa * norm2(&dj) - c0 + pj.d_const + 0.5 * kappa * dot(s0, &dj)) / g;
        let at_c = offset - dot(&normal, &s_c);
        rows.push((coords(&be, &normal), at_c));
        star.push(HalfSpace { normal, offset });
    }
    let margin = max_slack(&rows, be.len())?;
    if margin <= opts.admit_slack * scale {
        return None;
    }
    Some(WellsCell {
        members: members.to_vec(),
        s_tilde: members.iter().map(|&i| pts[i].p_tilde.clone()).collect(),
        hull_basis: AffineBasis { base: s0.clone(), basis: bh },
        eq_basis: AffineBasis { base: s_c.clone(), basis: be },
        s_c,
        d_c,
        star_inequalities: star,
        margin,
    })
}

/// max sigma s.t. a_j' w + sigma <= b_j, sigma <= 1.
fn max_slack(rows: &[(Vec<f64>, f64)], p: usize) -> Option<f64> {
    if rows.is_empty() {
        return Some(1.0);
    }
    if p == 0 || rows.iter().all(|(a, _)| a.iter().all(|x| *x == 0.0)) {
        return Some(rows.iter().map(|r| r.1).fold(1.0, f64::min));
    }
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let w: Vec<_> = (0..p).map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let sigma = lp.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    for (a, b) in rows {
        let mut terms: Vec<(minilp::Variable, f64)> = w.iter().zip(a).filter(|(_, c)| **c != 0.0).map(|(v, c)| (*v, *c)).collect();
        terms.push((sigma, 1.0));
        lp.add_constraint(&terms[..], ComparisonOp::Le, *b);
    }
    match lp.solve() {
        Ok(sol) => Some(sol[sigma]),
        Err(_) => None,
    }
}

/// Lawson-Hanson non-negative least squares: min |A x - b| with x >= 0.
/// `a` is row-major with `rows` rows and `cols` columns.
pub fn nnls(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Vec<f64> {
    let col = |j: usize| -> Vec<f64> { (0..rows).map(|i| a[i * cols + j]).collect() };
    let cols_v: Vec<Vec<f64>> = (0..cols).map(col).collect();
    let mut x = vec![0.0; cols];
    let mut passive = vec![false; cols];
    let tol = 1e-13 * (1.0 + a.iter().fold(0.0f64, |m, v| m.max(v.abs()))) * (rows.max(cols) as f64);
    let residual = |x: &[f64]| -> Vec<f64> { (0..rows).map(|i| b[i] - (0..cols).map(|j| a[i * cols + j] * x[j]).sum::<f64>()).collect() };
    let ls = |passive: &[bool]| -> Vec<f64> {
        let idx: Vec<usize> = (0..cols).filter(|&j| passive[j]).collect();
        let mut out = vec![0.0; cols];
        if idx.is_empty() {
            return out;
        }
        let mat = nalgebra::DMatrix::<f64>::from_fn(rows, idx.len(), |i, k| cols_v[idx[k]][i]);
        let rhs = nalgebra::DVector::<f64>::from_column_slice(b);
        let svd = mat.svd(true, true);
        let eps = 1e-14 * svd.singular_values.max();
        if let Ok(sol) = svd.solve(&rhs, eps) {
            for (k, &j) in idx.iter().enumerate() {
                out[j] = sol[k];
            }
        }
        out
    };
    for _ in 0..(3 * cols + 10) {
        let r = residual(&x);
        let w: Vec<f64> = (0..cols).map(|j| dot(&cols_v[j], &r)).collect();
        let cand = (0..cols).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = cand else { break };
        passive[t] = true;
        loop {
            let z = ls(&passive);
            if (0..cols).all(|j| !passive[j] || z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in 0..cols {
                if passive[j] && z[j] <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - z[j]));
                }
            }
            for j in 0..cols {
                x[j] += alpha * (z[j] - x[j]);
                if passive[j] && x[j] <= 1e-300 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    x
}

/// Least distance programming: min |w| subject to G w >= h. Returns `None`
/// when the constraints are infeasible.
pub fn ldp(g: &[Vec<f64>], h: &[f64], p: usize) -> Option<Vec<f64>> {
    let k = g.len();
    if k == 0 {
        return Some(vec![0.0; p]);
    }
    // E = [G'; h'] is (p+1) x k, f = (0, .., 0, 1)
    let mut e = vec![0.0; (p + 1) * k];
    for (j, row) in g.iter().enumerate() {
        for i in 0..p {
            e[i * k + j] = row[i];
        }
        e[p * k + j] = h[j];
    }
    let mut f = vec![0.0; p + 1];
    f[p] = 1.0;
    let u = nnls(&e, p + 1, k, &f);
    let r: Vec<f64> = (0..=p).map(|i| (0..k).map(|j| e[i * k + j] * u[j]).sum::<f64>() - f[i]).collect();
    if norm(&r) <= 1e-12 || r[p].abs() <= 1e-14 {
        return None;
    }
    Some((0..p).map(|i| -r[i] / r[p]).collect())
}

/// Euclidean distance from `y` to the convex hull of `pts`.
pub fn hull_distance(pts: &[Vec<f64>], y: &[f64]) -> f64 {
    let k = pts.len();
    if k == 1 {
        return dist2(&pts[0], y).sqrt();
    }
    if k <= 10 {
        // The optimum is the affine projection onto some face whose weights
        // are all non-negative; try every support.
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << k) {
            let idx: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            if let Some(d) = face_distance(pts, &idx, y) {
                best = best.min(d);
            }
        }
        return best;
    }
    // Larger hulls: min |P l - y|^2 over the simplex via NNLS with a heavily
    // weighted sum-to-one row.
    let n = y.len();
    let wgt = 1e6 * (1.0 + pts.iter().chain(std::iter::once(&y.to_vec())).map(|p| norm(p)).fold(0.0, f64::max));
    let mut a = vec![0.0; (n + 1) * k];
    for (j, p) in pts.iter().enumerate() {
        for i in 0..n {
            a[i * k + j] = p[i];
        }
        a[n * k + j] = wgt;
    }
    let mut b = y.to_vec();
    b.push(wgt);
    let l = nnls(&a, n + 1, k, &b);
    let s: f64 = l.iter().sum();
    let proj: Vec<f64> = (0..n).map(|i| pts.iter().zip(&l).map(|(p, w)| p[i] * w).sum::<f64>() / s).collect();
    dist2(&proj, y).sqrt()
}

fn face_distance(pts: &[Vec<f64>], idx: &[usize], y: &[f64]) -> Option<f64> {
    let base = &pts[idx[0]];
    if idx.len() == 1 {
        return Some(dist2(base, y).sqrt());
    }
    let dirs: Vec<Vec<f64>> = idx[1..].iter().map(|&i| sub(&pts[i], base)).collect();
    let k = dirs.len();
    let gram = nalgebra::DMatrix::<f64>::from_fn(k, k, |r, c| dot(&dirs[r], &dirs[c]));
    let ry = sub(y, base);
    let rhs = nalgebra::DVector::<f64>::from_iterator(k, dirs.iter().map(|d| dot(d, &ry)));
    let lam = gram.cholesky()?.solve(&rhs);
    let tol = 1e-12;
    if lam.iter().any(|l| *l < -tol) || lam.sum() > 1.0 + tol {
        return None;
    }
    let mut proj = base.clone();
    for (d, l) in dirs.iter().zip(lam.iter()) {
        for i in 0..proj.len() {
            proj[i] += l * d[i];
        }
    }
    Some(dist2(&proj, y).sqrt())
}

impl WellsCell {
    /// Unique split `x = (y + z)/2` with `y` in the hull's affine span and `z`
    /// in `S_E`.
    fn split(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = x.len();
        let u = sub(x, &self.s_c);
        let ph = combine(&self.hull_basis.basis, &coords(&self.hull_basis.basis, &u), n);
        let pe = combine(&self.eq_basis.basis, &coords(&self.eq_basis.basis, &u), n);
        let y: Vec<f64> = self.s_c.iter().zip(&ph).map(|(c, p)| c + 2.0 * p).collect();
        let z: Vec<f64> = self.s_c.iter().zip(&pe).map(|(c, p)| c + 2.0 * p).collect();
        (y, z, ph, pe)
    }

    /// Distance from `x` to the cell.
    pub fn defect(&self, x: &[f64]) -> f64 {
        let (y, z, _, _) = self.split(x);
        let dy = hull_distance(&self.s_tilde, &y);
        let dz = self.star_distance(&z);
        0.5 * (dy * dy + dz * dz).sqrt()
    }

    fn star_distance(&self, z: &[f64]) -> f64 {
        let be = &self.eq_basis.basis;
        let p = be.len();
        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut const_viol = 0.0f64;
        for hs in &self.star_inequalities {
            let a = coords(be, &hs.normal);
            let slack = hs.offset - dot(&hs.normal, z);
            if a.iter().all(|c| c.abs() <= 1e-14) {
                const_viol = const_viol.max(-slack);
                continue;
            }
            // a'w <= slack  <=>  -a'w >= -slack
            g.push(a.iter().map(|c| -c).collect());
            h.push(-slack);
        }
        if const_viol > 0.0 {
            return f64::INFINITY;
        }
        if h.iter().all(|v| *v <= 0.0) {
            return 0.0;
        }
        match ldp(&g, &h, p) {
            Some(w) => norm(&w),
            None => f64::INFINITY,
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.defect(x) <= tol
    }

    /// Plus-sign quadratic piece (negated by the caller for the minus sign).
    fn piece(&self, kappa: f64, x: &[f64], plus_dc: f64) -> (f64, Vec<f64>) {
        let (_, _, ph, pe) = self.split(x);
        let v = plus_dc + 0.5 * kappa * (norm2(&pe) - norm2(&ph));
        let g = pe.iter().zip(&ph).map(|(e, h)| kappa * (e - h)).collect();
        (v, g)
    }
}

pub fn cell_membership(cell: &WellsCell, x: &[f64], tol: f64) -> bool {
    cell.contains(x, tol)
}

impl WellsComplex {
    pub fn build(field: &OneField, kappa: f64, sign: Sign) -> Result<Self> {
        enumerate_cells(field, kappa, sign, &WellsOptions::default())
    }

    /// Membership tolerance used by [`WellsComplex::value`].
    pub fn default_tol(&self) -> f64 {
        1e-9 * self.scale
    }

    pub fn locate(&self, x: &[f64], tol: f64) -> Vec<(usize, f64)> {
        let mut hits: Vec<(usize, f64)> = self.cells.iter().enumerate().map(|(i, c)| (i, c.defect(x))).collect();
        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let best = hits.first().map(|h| h.1).unwrap_or(f64::INFINITY);
        hits.retain(|h| h.1 <= tol.max(best));
        if best > tol {
            hits.truncate(1);
        }
        hits
    }

    pub fn value(&self, x: &[f64]) -> Result<WellsValue> {
        self.value_tol(x, self.default_tol())
    }

    pub fn value_tol(&self, x: &[f64], tol: f64) -> Result<WellsValue> {
        let n = self.points.first().map(|p| p.p_tilde.len()).unwrap_or(0);
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: x.len() });
        }
        let hits = self.locate(x, tol);
        let Some(&(ci, defect)) = hits.first() else {
            return Err(Error::NoContainingCell(f64::INFINITY));
        };
        if defect > tol {
            return Err(Error::NoContainingCell(defect));
        }
        let sgn = match self.sign {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        };
        let eval = |i: usize| {
            let c = &self.cells[i];
            let (v, g) = c.piece(self.kappa, x, sgn * c.d_c);
            (sgn * v, g.into_iter().map(|gi| sgn * gi).collect::<Vec<f64>>())
        };
        let (value, gradient) = eval(ci);
        let spread = hits[1..].iter().map(|&(i, _)| (eval(i).0 - value).abs()).fold(0.0, f64::max);
        Ok(WellsValue { value, gradient, cell: self.cells[ci].members.clone(), defect, spread })
    }
}

pub fn wells_value(field: &OneField, kappa: f64, x: &[f64], sign: Sign) -> Result<WellsValue> {
    field.check_point(x)?;
    WellsComplex::build(field, kappa, sign)?.value(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::JetSample;
    use crate::verification::e1_fixture;

    #[test]
    fn prep_examples() {
        let f = OneField::new(vec![JetSample::new(vec![1.0, 0.0], 0.0, vec![0.0, 0.0])]).unwrap();
        let p = wells_prep(&f, 4.0, Sign::Plus).unwrap();
        assert_eq!(p[0].p_tilde, vec![1.0, 0.0]);
        assert_eq!(p[0].d_const, 0.0);
        let s3 = 3f64.sqrt();
        let p = wells_prep(&e1_fixture(), s3, Sign::Plus).unwrap();
        assert!(dist2(&p[0].p_tilde, &[-1.0, -1.0 / s3]) < 1e-30);
        assert!((p[0].d_const - 1.0 / (2.0 * s3)).abs() < 1e-15);
        let neg = wells_prep(&e1_fixture().negated(), s3, Sign::Plus).unwrap();
        let minus = wells_prep(&e1_fixture(), s3, Sign::Minus).unwrap();
        for (a, b) in neg.iter().zip(&minus) {
            assert_eq!(a.d_const, -b.d_const);
            assert_eq!(a.p_tilde, b.p_tilde);
        }
    }

    #[test]
    fn single_point_covers_everything() {
        let f = OneField::new(vec![JetSample::new(vec![0.5, -0.5], 2.0, vec![1.0, 3.0])]).unwrap();
        let cx = WellsComplex::build(&f, 1.0, Sign::Plus).unwrap();
        assert_eq!(cx.cells.len(), 1);
        assert!(cx.cells[0].eq_basis.basis.len() == 2 && cx.cells[0].hull_basis.basis.is_empty());
        for x in [[0.0, 0.0], [10.0, -3.0], [0.5, -0.5]] {
            assert!(cx.cells[0].contains(&x, 1e-12));
        }
        let v = cx.value(&[0.5, -0.5]).unwrap();
        assert!((v.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn e1_cells_and_pinch() {
        let s3 = 3f64.sqrt();
        let f = e1_fixture();
        let cx = WellsComplex::build(&f, s3, Sign::Plus).unwrap();
        let mut members: Vec<Vec<usize>> = cx.cells.iter().map(|c| c.members.clone()).collect();
        members.sort();
        assert_eq!(members, vec![vec![0], vec![0, 1], vec![1]]);
        let pair = cx.cells.iter().find(|c| c.members.len() == 2).unwrap();
        assert!(dist2(&pair.s_c, &[-0.5, -s3 / 6.0]) < 1e-28);
        assert!((pair.d_c - s3 / 4.0).abs() < 1e-15);
        let v = cx.value(&[0.0, 1.0 / s3]).unwrap();
        assert!(v.value.abs() < 1e-14, "{v:?}");
        assert!(dist2(&v.gradient, &[-s3, 0.0]) < 1e-26);
    }

    #[test]
    fn e1_grid_is_covered_without_overlapping_interiors() {
        let s3 = 3f64.sqrt();
        let cx = WellsComplex::build(&e1_fixture(), s3, Sign::Plus).unwrap();
        let tol = 1e-9;
        for i in 0..41 {
            for j in 0..41 {
                let x = [-2.0 + 0.1 * i as f64, -2.0 + 0.1 * j as f64];
                let d: Vec<f64> = cx.cells.iter().map(|c| c.defect(&x)).collect();
                assert!(d.iter().any(|v| *v <= tol), "{x:?} {d:?}");
                // interior membership of two cells would mean a common ball around x
                let deep = cx.cells.iter().filter(|c| {
                    [[1e-3, 0.0], [-1e-3, 0.0], [0.0, 1e-3], [0.0, -1e-3]].iter().all(|h| c.contains(&[x[0] + h[0], x[1] + h[1]], tol))
                });
                assert!(deep.count() <= 1, "{x:?}");
            }
        }
    }

    #[test]
    fn nnls_and_ldp_small_cases() {
        // min |x - (1, -1)| with x >= 0 -> (1, 0)
        let x = nnls(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[1.0, -1.0]);
        assert!((x[0] - 1.0).abs() < 1e-14 && x[1] == 0.0);
        // min |w| s.t. w1 + w2 >= 2 -> (1, 1)
        let w = ldp(&[vec![1.0, 1.0]], &[2.0], 2).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12);
        // w >= 1 and -w >= 0 is infeasible
        assert!(ldp(&[vec![1.0], vec![-1.0]], &[1.0, 0.0], 1).is_none());
        let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((hull_distance(&tri, &[1.0, 1.0]) - 0.5f64.sqrt()).abs() < 1e-14);
        assert_eq!(hull_distance(&tri, &[0.2, 0.2]), 0.0);
    }
}
