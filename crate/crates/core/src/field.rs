use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dist2, dot, max_abs_diff};

pub const DUPLICATE_DISTANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetSample {
    pub x: Vec<f64>,
    pub f: f64,
    pub df: Vec<f64>,
}

impl JetSample {
    pub fn new(x: Vec<f64>, f: f64, df: Vec<f64>) -> Self {
        JetSample { x, f, df }
    }

    /// Value at `a` of the first-degree polynomial carried by this jet.
    pub fn eval(&self, a: &[f64]) -> f64 {
        let mut s = self.f;
        for k in 0..a.len() {
            s += self.df[k] * (a[k] - self.x[k]);
        }
        s
    }
}

/// A finite 1-field: first-order jets at pairwise distinct points of R^n.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneField {
    dim: usize,
    samples: Vec<JetSample>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawField {
    dim: Option<usize>,
    samples: Vec<JetSample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinePolynomial {
    pub p: f64,
    pub v: Vec<f64>,
}

impl AffinePolynomial {
    pub fn eval(&self, a: &[f64]) -> f64 {
        self.p + dot(&self.v, a)
    }
}

impl OneField {
    pub fn new(samples: Vec<JetSample>) -> Result<Self> {
        let dim = samples.first().ok_or_else(|| Error::Empty("field has no samples".into()))?.x.len();
        Self::with_dim(dim, samples)
    }

    pub fn with_dim(dim: usize, samples: Vec<JetSample>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::Empty("field has no samples".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            for len in [s.x.len(), s.df.len()] {
                if len != dim {
                    return Err(Error::DimensionMismatch { expected: dim, found: len });
                }
            }
            if !all_finite(&s.x) || !all_finite(&s.df) || !s.f.is_finite() {
                return Err(Error::NonFinite(format!("sample {i}")));
            }
        }
        let tol2 = DUPLICATE_DISTANCE * DUPLICATE_DISTANCE;
        for i in 0..samples.len() {
            for j in i + 1..samples.len() {
                if dist2(&samples[i].x, &samples[j].x) < tol2 {
                    return Err(Error::DuplicatePoint(i, j));
                }
            }
        }
        Ok(OneField { dim, samples })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawField = serde_json::from_str(text)?;
        match raw.dim {
            Some(d) => Self::with_dim(d, raw.samples),
            None => Self::new(raw.samples),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("field serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[JetSample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> Result<&JetSample> {
        self.samples.get(i).ok_or(Error::IndexOutOfRange { index: i, len: self.samples.len() })
    }

    pub fn check_point(&self, a: &[f64]) -> Result<()> {
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: a.len() });
        }
        if !all_finite(a) {
            return Err(Error::NonFinite("query point".into()));
        }
        Ok(())
    }

    pub fn eval_jet(&self, i: usize, a: &[f64]) -> Result<f64> {
        let s = self.sample(i)?;
        self.check_point(a)?;
        Ok(s.eval(a))
    }

    /// Fits the polynomial from sample 0 and accepts it if every other jet
    /// matches in value and gradient within `tol`.
    pub fn detect_affine(&self, tol: f64) -> Option<AffinePolynomial> {
        let s0 = &self.samples[0];
        let poly = AffinePolynomial { p: s0.f - dot(&s0.df, &s0.x), v: s0.df.clone() };
        for s in &self.samples[1..] {
            if (poly.eval(&s.x) - s.f).abs() > tol || max_abs_diff(&poly.v, &s.df) > tol {
                return None;
            }
        }
        Some(poly)
    }

    /// The field -F: every value and gradient negated.
    pub fn negated(&self) -> OneField {
        OneField {
            dim: self.dim,
            samples: self.samples.iter().map(|s| JetSample { x: s.x.clone(), f: -s.f, df: s.df.iter().map(|d| -d).collect() }).collect(),
        }
    }

    /// Appends jets, revalidating distinctness.
    pub fn extended(&self, extra: Vec<JetSample>) -> Result<OneField> {
        let mut all = self.samples.clone();
        all.extend(extra);
        OneField::with_dim(self.dim, all)
    }

    /// Index of a sample whose point lies within `tol` of `x`.
    pub fn find_point(&self, x: &[f64], tol: f64) -> Option<usize> {
        self.samples.iter().position(|s| dist2(&s.x, x) <= tol * tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1_text() -> &'static str {
        r#"{"dim":2,"samples":[{"x":[-1,0],"f":0.57735026919,"df":[0,1]},
            {"x":[1,0],"f":-0.57735026919,"df":[0,-1]}]}"#
    }

    #[test]
    fn loads_two_point_field() {
        let f = OneField::from_json(e1_text()).unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn single_sample_is_valid() {
        let f = OneField::from_json(r#"{"dim":1,"samples":[{"x":[0],"f":0,"df":[0]}]}"#).unwrap();
        assert_eq!((f.dim(), f.len()), (1, 1));
    }

    #[test]
    fn duplicate_points_rejected() {
        let e = OneField::from_json(r#"{"dim":1,"samples":[{"x":[0.5],"f":0,"df":[0]},{"x":[0.5],"f":1,"df":[0]}]}"#);
        assert!(matches!(e, Err(Error::DuplicatePoint(0, 1))));
    }

    #[test]
    fn bad_inputs_rejected() {
        assert!(matches!(OneField::from_json(r#"{"dim":2,"samples":[{"x":[0],"f":0,"df":[0]}]}"#), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(OneField::from_json(r#"{"samples":[{"x":[0],"f":0,"df":[0],"g":1}]}"#), Err(Error::Parse(_))));
        assert!(matches!(OneField::from_json("{"), Err(Error::Parse(_))));
        assert!(matches!(OneField::new(vec![JetSample::new(vec![f64::NAN], 0.0, vec![0.0])]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn eval_jet_matches_hand_value() {
        let s3 = 3f64.sqrt();
        let f = OneField::new(vec![
            JetSample::new(vec![-1.0, 0.0], 1.0 / s3, vec![0.0, 1.0]),
            JetSample::new(vec![1.0, 0.0], -1.0 / s3, vec![0.0, -1.0]),
        ])
        .unwrap();
        let v = f.eval_jet(0, &[0.0, 1.0 / s3]).unwrap();
        assert!((v - 2.0 / s3).abs() < 1e-15);
        assert_eq!(f.eval_jet(1, &[1.0, 0.0]).unwrap(), -1.0 / s3);
        assert!(f.eval_jet(2, &[0.0, 0.0]).is_err());
        assert!(f.eval_jet(0, &[0.0]).is_err());
    }

    #[test]
    fn detect_affine_cases() {
        let poly = |x: &[f64]| 3.0 + x[0] + 2.0 * x[1];
        let pts = [[0.3, -1.0], [2.0, 0.5], [-1.5, 4.0]];
        let f = OneField::new(pts.iter().map(|p| JetSample::new(p.to_vec(), poly(p), vec![1.0, 2.0])).collect()).unwrap();
        let a = f.detect_affine(1e-12).unwrap();
        assert!((a.p - 3.0).abs() < 1e-12 && a.v == vec![1.0, 2.0]);
        let e1 = OneField::from_json(e1_text()).unwrap();
        assert!(e1.detect_affine(1e-9).is_none());
        let one = OneField::new(vec![JetSample::new(vec![1.0], 2.0, vec![3.0])]).unwrap();
        let a = one.detect_affine(0.0).unwrap();
        assert_eq!((a.p, a.v.clone()), (-1.0, vec![3.0]));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let f = OneField::new(vec![
            JetSample::new(vec![0.1, 1.0 / 3.0], std::f64::consts::PI, vec![1e-300, -2.5e17]),
            JetSample::new(vec![-7.25, 0.2], -0.0, vec![f64::MIN_POSITIVE, 1.0 / 7.0]),
        ])
        .unwrap();
        let g = OneField::from_json(&f.to_json()).unwrap();
        for (a, b) in f.samples().iter().zip(g.samples()) {
            assert_eq!(a.f.to_bits(), b.f.to_bits());
            for k in 0..2 {
                assert_eq!(a.x[k].to_bits(), b.x[k].to_bits());
                assert_eq!(a.df[k].to_bits(), b.df[k].to_bits());
            }
        }
    }
}
