//! Standard-form LP data, unit-norm normalization and solution-quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{norm1, norm2, Matrix};

/// `min c·x  s.t.  A x = b, x ≥ 0`, optionally with the budget `Σ x ≤ theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LpFile", into = "LpFile")]
pub struct StandardFormLp {
    c: Vec<f64>,
    a: Matrix,
    b: Vec<f64>,
    theta: Option<f64>,
}

impl StandardFormLp {
    pub fn new(c: Vec<f64>, a: Matrix, b: Vec<f64>) -> Result<Self> {
        Self::with_theta(c, a, b, None)
    }

    pub fn with_theta(c: Vec<f64>, a: Matrix, b: Vec<f64>, theta: Option<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 || n == 0 {
            return Err(Error::InvalidInstance(format!("empty constraint matrix {m}x{n}")));
        }
        if c.len() != n {
            return Err(Error::DimensionMismatch(format!("c has length {}, A has {n} columns", c.len())));
        }
        if b.len() != m {
            return Err(Error::DimensionMismatch(format!("b has length {}, A has {m} rows", b.len())));
        }
        if let Some(t) = theta {
            if !(t > 0.0) {
                return Err(Error::InvalidInstance(format!("budget theta must be positive, got {t}")));
            }
        }
        Ok(Self { c, a, b, theta })
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Same instance with a different budget (`None` or `+∞` removes it).
    pub fn set_theta(mut self, theta: Option<f64>) -> Result<Self> {
        let theta = theta.filter(|t| t.is_finite());
        if let Some(t) = theta {
            if !(t > 0.0) {
                return Err(Error::InvalidInstance(format!("budget theta must be positive, got {t}")));
            }
        }
        self.theta = theta;
        Ok(self)
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.c, x)
    }

    /// `A x − b`.
    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.a.mul_vec(x)?;
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        Ok(r)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// On-disk layout of an LP instance.
#[derive(Serialize, Deserialize)]
struct LpFile {
    m: usize,
    n: usize,
    c: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
}

impl TryFrom<LpFile> for StandardFormLp {
    type Error = Error;

    fn try_from(f: LpFile) -> Result<Self> {
        let a = Matrix::from_rows(&f.a)?;
        if a.nrows() != f.m || a.ncols() != f.n {
            return Err(Error::DimensionMismatch(format!(
                "declared {}x{}, A is {}x{}",
                f.m,
                f.n,
                a.nrows(),
                a.ncols()
            )));
        }
        StandardFormLp::with_theta(f.c, a, f.b, f.theta)
    }
}

impl From<StandardFormLp> for LpFile {
    fn from(lp: StandardFormLp) -> Self {
        LpFile {
            m: lp.m(),
            n: lp.n(),
            a: lp.a.to_rows(),
            c: lp.c,
            b: lp.b,
            theta: lp.theta,
        }
    }
}

/// An instance rescaled so that every column of `A` and `b` have unit Euclidean norm.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedLp {
    pub lp: StandardFormLp,
    pub column_scales: Vec<f64>,
    pub rhs_scale: f64,
}

/// Divides column `j` of `A` by `‖A_j‖` and `b` by `‖b‖`. Costs are rescaled to
/// `c_j ‖b‖ / ‖A_j‖` so that objective values carry over under [`denormalize_solution`].
pub fn normalize(lp: &StandardFormLp) -> Result<NormalizedLp> {
    let rhs_scale = norm2(lp.b());
    if rhs_scale == 0.0 {
        return Err(Error::ZeroRhs);
    }
    let (m, n) = lp.a().shape();
    let mut column_scales = vec![0.0; n];
    for i in 0..m {
        for (s, v) in column_scales.iter_mut().zip(lp.a().row(i)) {
            *s += v * v;
        }
    }
    for (j, s) in column_scales.iter_mut().enumerate() {
        *s = s.sqrt();
        if *s == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
    }
    let mut a = lp.a().clone();
    for i in 0..m {
        for (v, s) in a.row_mut(i).iter_mut().zip(&column_scales) {
            *v /= s;
        }
    }
    let b: Vec<f64> = lp.b().iter().map(|v| v / rhs_scale).collect();
    let c: Vec<f64> = lp
        .c()
        .iter()
        .zip(&column_scales)
        .map(|(cj, s)| cj * rhs_scale / s)
        .collect();
    let theta = lp.theta();
    Ok(NormalizedLp {
        lp: StandardFormLp::with_theta(c, a, b, theta)?,
        column_scales,
        rhs_scale,
    })
}

/// Maps a solution of the normalized instance back: `x_j = ‖b‖ x̃_j / ‖A_j‖`.
pub fn denormalize_solution(x_tilde: &[f64], norm: &NormalizedLp) -> Result<Vec<f64>> {
    if x_tilde.len() != norm.column_scales.len() {
        return Err(Error::DimensionMismatch(format!(
            "solution of length {} for {} columns",
            x_tilde.len(),
            norm.column_scales.len()
        )));
    }
    Ok(x_tilde
        .iter()
        .zip(&norm.column_scales)
        .map(|(x, s)| norm.rhs_scale * x / s)
        .collect())
}

/// How the `obj` field of [`QualityMetrics`] was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjGap {
    /// `|v_ref − v_cand| / |v_ref|`
    Relative,
    /// Reference value was zero; `|v_ref − v_cand|`.
    Absolute,
    /// No reference value was available; `obj` is reported as 0.
    Unavailable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityMetrics {
    /// Scaled ℓ₁ residual of `Ax = b`.
    pub feas: f64,
    /// Share of the ℓ₁ mass of `x` sitting on negative components.
    pub neg: f64,
    /// Optimality gap.
    pub obj: f64,
    pub obj_gap: ObjGap,
}

pub fn quality_metrics(
    lp: &StandardFormLp,
    x: &[f64],
    v_reference: f64,
    v_candidate: f64,
) -> Result<QualityMetrics> {
    let r = lp.residual(x)?;
    let b1 = norm1(lp.b());
    let feas = if b1 > 0.0 { norm1(&r) / b1 } else { norm1(&r) };
    let x1 = norm1(x);
    let neg = if x1 > 0.0 {
        x.iter().filter(|&&v| v < 0.0).fold(0.0, |s, v| s - v) / x1
    } else {
        0.0
    };
    let gap = (v_reference - v_candidate).abs();
    let (obj, obj_gap) = if v_reference != 0.0 {
        (gap / v_reference.abs(), ObjGap::Relative)
    } else {
        (gap, ObjGap::Absolute)
    };
    Ok(QualityMetrics { feas, neg, obj, obj_gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(rows: &[Vec<f64>], b: Vec<f64>, c: Vec<f64>) -> StandardFormLp {
        StandardFormLp::new(c, Matrix::from_rows(rows).unwrap(), b).unwrap()
    }

    #[test]
    fn normalize_identity() {
        let p = lp(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![2.0, 0.0], vec![1.0, 1.0]);
        let nl = normalize(&p).unwrap();
        assert_eq!(nl.lp.a(), p.a());
        assert_eq!(nl.lp.b(), &[1.0, 0.0]);
        assert_eq!(nl.rhs_scale, 2.0);
        assert_eq!(nl.column_scales, vec![1.0, 1.0]);
    }

    #[test]
    fn normalize_three_four_five() {
        let p = lp(&[vec![3.0], vec![4.0]], vec![3.0, 4.0], vec![1.0]);
        let nl = normalize(&p).unwrap();
        assert!((nl.lp.a()[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((nl.lp.a()[(1, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(nl.column_scales, vec![5.0]);
    }

    #[test]
    fn normalize_errors() {
        let p = lp(&[vec![1.0, 0.0]], vec![0.0], vec![1.0, 1.0]);
        assert!(matches!(normalize(&p), Err(Error::ZeroRhs)));
        let p = lp(&[vec![1.0, 0.0, 0.0]], vec![1.0], vec![1.0, 1.0, 1.0]);
        assert!(matches!(normalize(&p), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn denormalize_examples() {
        let p = lp(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![2.0, 0.0], vec![1.0, 1.0]);
        let nl = normalize(&p).unwrap();
        assert_eq!(denormalize_solution(&[1.0, 0.0], &nl).unwrap(), vec![2.0, 0.0]);

        let ident = NormalizedLp {
            lp: p.clone(),
            column_scales: vec![1.0, 1.0],
            rhs_scale: 1.0,
        };
        assert_eq!(denormalize_solution(&[0.3, 7.0], &ident).unwrap(), vec![0.3, 7.0]);

        let five = NormalizedLp {
            lp: lp(&[vec![1.0]], vec![1.0], vec![1.0]),
            column_scales: vec![5.0],
            rhs_scale: 2.0,
        };
        assert_eq!(denormalize_solution(&[1.0], &five).unwrap(), vec![0.4]);
        assert!(matches!(
            denormalize_solution(&[1.0, 2.0], &five),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn metrics_hand_computed() {
        let p = lp(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0], vec![1.0, 1.0]);
        let q = quality_metrics(&p, &[1.0, -1.0], 2.0, 2.0).unwrap();
        assert_eq!(q.feas, 1.0);
        assert_eq!(q.neg, 0.5);
        assert_eq!(q.obj, 0.0);

        let exact = quality_metrics(&p, &[1.0, 1.0], 2.0, 2.0).unwrap();
        assert_eq!((exact.feas, exact.neg, exact.obj), (0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_degenerate_denominators() {
        let p = lp(&[vec![1.0]], vec![1.0], vec![1.0]);
        let q = quality_metrics(&p, &[0.0], 0.0, 0.5).unwrap();
        assert_eq!(q.neg, 0.0);
        assert_eq!(q.obj, 0.5);
        assert_eq!(q.obj_gap, ObjGap::Absolute);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let p = lp(
            &[vec![0.1, 1.0 / 3.0], vec![2.0f64.sqrt(), -1e-300]],
            vec![std::f64::consts::PI, 1e17],
            vec![1.0, 0.7],
        )
        .set_theta(Some(4.25))
        .unwrap();
        let s = p.to_json().unwrap();
        assert!(s.contains("\"A\""));
        assert_eq!(StandardFormLp::from_json(&s).unwrap(), p);
    }

    #[test]
    fn json_shape_checked() {
        let s = r#"{"m":2,"n":1,"c":[1],"A":[[1]],"b":[1]}"#;
        assert!(StandardFormLp::from_json(s).is_err());
        let s = r#"{"m":1,"n":1,"c":[1],"A":[[1]],"b":[1],"theta":-1}"#;
        assert!(StandardFormLp::from_json(s).is_err());
    }
}
