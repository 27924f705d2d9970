//! Extension of Lipschitz maps R^m -> R^n through a 1-field on R^(m+n).
//!
//! The sample `(x, u(x))` becomes the jet at `(x, 0)` with value 0 and
//! gradient `(0, u(x))`. Its Gamma^1 is exactly the Lipschitz constant of the
//! data, and the last `n` gradient components of an extremal extension along
//! the zero section give a Lipschitz extension with the same constant.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{JetSample, OneField, DUPLICATE_DISTANCE};
use crate::linalg::{all_finite, dist, dist2};
use crate::supinf::solver::{minimize_max, Site};
use crate::supinf::{Extender, SolveOptions};
use crate::Sign;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSample {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LipschitzMapData {
    dim_in: usize,
    dim_out: usize,
    samples: Vec<MapSample>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    dim_in: usize,
    dim_out: usize,
    samples: Vec<MapSample>,
}

impl LipschitzMapData {
    pub fn new(dim_in: usize, dim_out: usize, samples: Vec<MapSample>) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::InvalidArgument("map dimensions must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Empty("map has no samples".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != dim_in {
                return Err(Error::DimensionMismatch { expected: dim_in, found: s.x.len() });
            }
            if s.u.len() != dim_out {
                return Err(Error::DimensionMismatch { expected: dim_out, found: s.u.len() });
            }
            if !all_finite(&s.x) || !all_finite(&s.u) {
                return Err(Error::NonFinite(format!("map sample {i}")));
            }
        }
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                if dist(&samples[i].x, &samples[j].x) < DUPLICATE_DISTANCE {
                    return Err(Error::DuplicatePoint(i, j));
                }
            }
        }
        Ok(LipschitzMapData { dim_in, dim_out, samples })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawMap = serde_json::from_str(text)?;
        Self::new(raw.dim_in, raw.dim_out, raw.samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("map serializes")
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn samples(&self) -> &[MapSample] {
        &self.samples
    }

    /// Largest difference quotient over sample pairs; 0 for a single sample.
    pub fn lip(&self) -> f64 {
        let mut l = 0.0f64;
        for i in 0..self.samples.len() {
            for j in i + 1..self.samples.len() {
                let (a, b) = (&self.samples[i], &self.samples[j]);
                l = l.max((dist2(&a.u, &b.u) / dist2(&a.x, &b.x)).sqrt());
            }
        }
        l
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, found: x.len() });
        }
        if !all_finite(x) {
            return Err(Error::NonFinite("query point".into()));
        }
        Ok(())
    }
}

pub fn lift_map(data: &LipschitzMapData) -> OneField {
    let (m, n) = (data.dim_in, data.dim_out);
    let samples = data
        .samples
        .iter()
        .map(|s| {
            let mut x = s.x.clone();
            x.resize(m + n, 0.0);
            let mut df = vec![0.0; m];
            df.extend_from_slice(&s.u);
            JetSample::new(x, 0.0, df)
        })
        .collect();
    OneField::with_dim(m + n, samples).expect("distinct inputs lift to distinct points")
}

/// Reusable solver for many queries of one map.
#[derive(Clone, Debug)]
pub struct MapExtender {
    dim_in: usize,
    dim_out: usize,
    lip: f64,
    ext: Extender,
}

impl MapExtender {
    pub fn new(data: &LipschitzMapData) -> Result<Self> {
        let lifted = lift_map(data);
        let lip = crate::gamma::gamma1(&lifted);
        Ok(MapExtender { dim_in: data.dim_in, dim_out: data.dim_out, lip, ext: Extender::new(&lifted, lip)? })
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn extend(&self, x: &[f64], sign: Sign, opts: &SolveOptions) -> Result<Vec<f64>> {
        if x.len() != self.dim_in {
            return Err(Error::DimensionMismatch { expected: self.dim_in, found: x.len() });
        }
        let mut q = x.to_vec();
        q.resize(self.dim_in + self.dim_out, 0.0);
        let r = self.ext.solve(&q, sign, opts)?;
        Ok(r.gradient[self.dim_in..].to_vec())
    }
}

pub fn extend_map(data: &LipschitzMapData, x: &[f64], sign: Sign, tol: f64) -> Result<Vec<f64>> {
    data.check_query(x)?;
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    MapExtender::new(data)?.extend(x, sign, &SolveOptions::with_tol(tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnePointExtension {
    pub value: Vec<f64>,
    pub ratio: f64,
}

/// Minimizes `max_i |y - u_i| / |x - a_i|` over `y`: the best value a single
/// new point can take. Bisects on the ratio `L`; a level is feasible when the
/// balls `B(u_i, L |x - a_i|)` meet, decided by minimizing the largest power
/// distance `|y - u_i|^2 - L^2 |x - a_i|^2`.
pub fn one_point_oracle(data: &LipschitzMapData, x: &[f64]) -> Result<OnePointExtension> {
    data.check_query(x)?;
    if let Some(i) = data.samples.iter().position(|s| dist(&s.x, x) < DUPLICATE_DISTANCE) {
        return Err(Error::InvalidArgument(format!("query coincides with map sample {i}")));
    }
    let r: Vec<f64> = data.samples.iter().map(|s| dist(&s.x, x)).collect();
    let ratio = |y: &[f64]| data.samples.iter().zip(&r).map(|(s, r)| dist(y, &s.u) / r).fold(0.0, f64::max);
    let nearest = (0..r.len()).min_by(|&i, &j| r[i].total_cmp(&r[j])).expect("map is not empty");
    let mut best = data.samples[nearest].u.clone();
    let mut hi = ratio(&best);
    let mut lo = 0.0f64;
    for i in 0..r.len() {
        for j in i + 1..r.len() {
            lo = lo.max(dist(&data.samples[i].u, &data.samples[j].u) / (r[i] + r[j]));
        }
    }
    let spread = data.samples.iter().map(|s| dist(&s.u, &best)).fold(0.0, f64::max);
    if spread == 0.0 {
        return Ok(OnePointExtension { value: best, ratio: 0.0 });
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let sites: Vec<Site> = data.samples.iter().zip(&r).map(|(s, r)| Site { p: s.u.clone(), w: (mid * r).powi(2), tau: 1.0 }).collect();
        let out = minimize_max(&sites, &best, spread, 1e-15, 200);
        if out.converged && out.t > 0.0 {
            lo = mid;
            continue;
        }
        let level = ratio(&out.v);
        if all_finite(&out.v) && level < hi {
            hi = level;
            best = out.v;
        } else {
            lo = mid;
        }
    }
    let ratio = ratio(&best);
    Ok(OnePointExtension { value: best, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(samples: &[(&[f64], &[f64])]) -> LipschitzMapData {
        let m = samples[0].0.len();
        let n = samples[0].1.len();
        LipschitzMapData::new(m, n, samples.iter().map(|(x, u)| MapSample { x: x.to_vec(), u: u.to_vec() }).collect()).unwrap()
    }

    #[test]
    fn single_sample_lift() {
        let d = map(&[(&[0.0], &[1.0])]);
        let f = lift_map(&d);
        assert_eq!(f.dim(), 2);
        assert_eq!(f.samples()[0], JetSample::new(vec![0.0, 0.0], 0.0, vec![0.0, 1.0]));
        let o = one_point_oracle(&d, &[3.0]).unwrap();
        assert_eq!((o.value, o.ratio), (vec![1.0], 0.0));
    }

    #[test]
    fn lift_gamma_equals_lipschitz_constant() {
        let d = map(&[(&[0.0, 0.0], &[1.0, 2.0, 0.0]), (&[1.0, 0.5], &[0.0, 0.0, 1.0]), (&[-0.3, 2.0], &[0.5, -1.0, 0.2])]);
        assert!((crate::gamma::gamma1(&lift_map(&d)) - d.lip()).abs() <= 1e-15 * d.lip());
        let c = map(&[(&[0.0], &[2.0]), (&[1.0], &[2.0])]);
        assert_eq!(crate::gamma::gamma1(&lift_map(&c)), 0.0);
        assert_eq!(extend_map(&c, &[0.4], Sign::Plus, 1e-8).unwrap(), vec![2.0]);
    }

    #[test]
    fn identity_map_is_rigid() {
        let d = map(&[(&[-1.0], &[-1.0]), (&[2.0], &[2.0])]);
        let o = one_point_oracle(&d, &[0.5]).unwrap();
        assert!((o.ratio - 1.0).abs() < 1e-12, "{o:?}");
        assert!((o.value[0] - 0.5).abs() < 1e-12);
        for sign in [Sign::Plus, Sign::Minus] {
            let k = extend_map(&d, &[0.5], sign, 1e-8).unwrap();
            assert!((k[0] - 0.5).abs() < 1e-7, "{k:?}");
        }
    }

    #[test]
    fn interpolates_at_samples() {
        let d = map(&[(&[0.0, 0.0], &[1.0, -1.0]), (&[1.0, 0.0], &[0.0, 0.5]), (&[0.0, 1.0], &[2.0, 0.0])]);
        for s in d.samples() {
            for sign in [Sign::Plus, Sign::Minus] {
                let k = extend_map(&d, &s.x, sign, 1e-8).unwrap();
                assert!(dist(&k, &s.u) < 1e-12);
            }
        }
    }

    #[test]
    fn map_json_rejects_unknown_keys() {
        assert!(LipschitzMapData::from_json(r#"{"dim_in":1,"dim_out":1,"samples":[{"x":[0],"u":[1]}]}"#).is_ok());
        assert!(LipschitzMapData::from_json(r#"{"dim_in":1,"dim_out":1,"samples":[{"x":[0],"u":[1],"w":2}]}"#).is_err());
    }
}
