//! Random projectors: sampling, application, the row-count rule and concentration statistics.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, sub, Matrix};

/// Default nonzero probability per sign for the sparse projector.
pub const ACHLIOPTAS_Q: f64 = 1.0 / 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProjectorKind {
    /// i.i.d. `N(0, 1)` entries.
    Gaussian,
    /// Rows spanning a uniformly random `k`-dimensional subspace (needs `k ≤ m`).
    GaussianOrthogonal,
    /// i.i.d. `±1` entries.
    Rademacher,
    /// `±1` each with probability `q`, `0` otherwise.
    Sparse { q: f64 },
}

impl ProjectorKind {
    pub fn achlioptas() -> Self {
        ProjectorKind::Sparse { q: ACHLIOPTAS_Q }
    }

    fn name(&self) -> &'static str {
        match self {
            ProjectorKind::Gaussian => "gaussian",
            ProjectorKind::GaussianOrthogonal => "gaussian_orthogonal",
            ProjectorKind::Rademacher => "rademacher",
            ProjectorKind::Sparse { .. } => "sparse",
        }
    }

    pub fn parse(name: &str, q: Option<f64>) -> Result<Self> {
        match name {
            "gaussian" => Ok(ProjectorKind::Gaussian),
            "gaussian_orthogonal" | "orthogonal" => Ok(ProjectorKind::GaussianOrthogonal),
            "rademacher" => Ok(ProjectorKind::Rademacher),
            "sparse" | "achlioptas" => Ok(ProjectorKind::Sparse { q: q.unwrap_or(ACHLIOPTAS_Q) }),
            other => Err(Error::InvalidInstance(format!("unknown projector kind {other:?}"))),
        }
    }
}

/// A sampled `k × m` projector. Entries are never stored on disk; they are regenerated
/// from `(kind, k, m, seed)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProjectorRecord", into = "ProjectorRecord")]
pub struct Projector {
    kind: ProjectorKind,
    seed: u64,
    entries: Matrix,
}

#[derive(Serialize, Deserialize)]
struct ProjectorRecord {
    kind: String,
    q: Option<f64>,
    k: usize,
    m: usize,
    seed: u64,
}

impl TryFrom<ProjectorRecord> for Projector {
    type Error = Error;

    fn try_from(s: ProjectorRecord) -> Result<Self> {
        sample_projector(ProjectorKind::parse(&s.kind, s.q)?, s.k, s.m, s.seed)
    }
}

impl From<Projector> for ProjectorRecord {
    fn from(p: Projector) -> Self {
        let q = match p.kind {
            ProjectorKind::Sparse { q } => Some(q),
            _ => None,
        };
        ProjectorRecord {
            kind: p.kind.name().to_string(),
            q,
            k: p.k(),
            m: p.m(),
            seed: p.seed,
        }
    }
}

impl Projector {
    pub fn kind(&self) -> ProjectorKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn m(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn apply_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.entries.mul_vec(v)
    }

    pub fn transpose_apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.entries.tr_mul_vec(y)
    }
}

/// `⌈(1.8/ε²) ln n⌉ + 1`.
pub fn projected_dimension(n: usize, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::BadEpsilon(epsilon));
    }
    if n < 2 {
        return Err(Error::InvalidInstance(format!("need n >= 2 points, got {n}")));
    }
    let k = (1.8 / (epsilon * epsilon) * (n as f64).ln()).ceil();
    Ok(k as usize + 1)
}

/// Samples a projector scaled so that `E‖Ty‖² = ‖y‖²`.
pub fn sample_projector(kind: ProjectorKind, k: usize, m: usize, seed: u64) -> Result<Projector> {
    if k == 0 || m == 0 {
        return Err(Error::BadDimension(format!("k = {k}, m = {m}")));
    }
    let mut rng = crate::seed::rng(seed);
    let kf = k as f64;
    let entries = match kind {
        ProjectorKind::Gaussian => {
            let s = 1.0 / kf.sqrt();
            let data = (0..k * m).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
            Matrix::from_row_major(k, m, data)?
        }
        ProjectorKind::Rademacher => {
            let s = 1.0 / kf.sqrt();
            let data = (0..k * m).map(|_| if rng.gen::<bool>() { s } else { -s }).collect();
            Matrix::from_row_major(k, m, data)?
        }
        ProjectorKind::Sparse { q } => {
            if !(q > 0.0 && q <= 0.5) {
                return Err(Error::BadSparsity(q));
            }
            let s = 1.0 / (2.0 * q * kf).sqrt();
            let data = (0..k * m)
                .map(|_| {
                    let u: f64 = rng.gen();
                    if u < q {
                        s
                    } else if u < 2.0 * q {
                        -s
                    } else {
                        0.0
                    }
                })
                .collect();
            Matrix::from_row_major(k, m, data)?
        }
        ProjectorKind::GaussianOrthogonal => {
            if k > m {
                return Err(Error::BadDimension(format!(
                    "orthogonal projector needs k <= m, got k = {k}, m = {m}"
                )));
            }
            let g = nalgebra::DMatrix::<f64>::from_fn(m, k, |_, _| rng.sample(StandardNormal));
            let q = g.qr().q();
            let s = (m as f64 / kf).sqrt();
            let mut t = Matrix::zeros(k, m);
            for i in 0..k {
                for j in 0..m {
                    t[(i, j)] = s * q[(j, i)];
                }
            }
            t
        }
    };
    Ok(Projector { kind, seed, entries })
}

/// `T · M` for an `m × p` matrix `M`.
pub fn apply(t: &Projector, mat: &Matrix) -> Result<Matrix> {
    if mat.nrows() != t.m() {
        return Err(Error::DimensionMismatch(format!(
            "projector has {} columns, matrix has {} rows",
            t.m(),
            mat.nrows()
        )));
    }
    t.entries.matmul(mat)
}

/// The block matrix `[[I_h, 0], [0, T]]`, which leaves the first `h` rows of its
/// argument untouched and projects the rest.
pub fn extended_projector(t: &Projector, h: usize) -> Matrix {
    let (k, m) = t.entries.shape();
    let mut out = Matrix::zeros(h + k, h + m);
    for i in 0..h {
        out[(i, i)] = 1.0;
    }
    for i in 0..k {
        out.row_mut(h + i)[h..].copy_from_slice(t.entries.row(i));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionStats {
    pub epsilon: f64,
    /// Unordered pairs with distinct points.
    pub n_pairs: usize,
    /// Pairs with `(1−ε)‖u−v‖ ≤ ‖Tu−Tv‖ ≤ (1+ε)‖u−v‖`.
    pub fraction_within: f64,
    /// Same test on squared distances.
    pub fraction_within_squared: f64,
    /// `max |‖Tu−Tv‖/‖u−v‖ − 1|`.
    pub max_relative_error: f64,
    /// `max |⟨Tx,Ty⟩ − ⟨x,y⟩| / (‖x‖‖y‖)` over ordered pairs of distinct points.
    pub inner_product_max_violation: f64,
    /// Ordered pairs whose inner-product deviation exceeds `ε‖x‖‖y‖`.
    pub inner_product_fraction_violating: f64,
}

/// `count` points with i.i.d. standard normal coordinates in dimension `dim`.
pub fn gaussian_points(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = crate::seed::rng(seed);
    (0..count).map(|_| (0..dim).map(|_| r.sample(StandardNormal)).collect()).collect()
}

pub fn distortion_stats(t: &Projector, points: &[Vec<f64>], epsilon: f64) -> Result<DistortionStats> {
    if points.len() < 2 {
        return Err(Error::InvalidInstance("need at least two points".into()));
    }
    if let Some(p) = points.iter().find(|p| p.len() != t.m()) {
        return Err(Error::DimensionMismatch(format!(
            "point of length {} for a projector with {} columns",
            p.len(),
            t.m()
        )));
    }
    let images: Vec<Vec<f64>> = points.iter().map(|p| t.apply_vec(p)).collect::<Result<_>>()?;

    let mut pairs = 0usize;
    let mut within = 0usize;
    let mut within_sq = 0usize;
    let mut max_rel = 0.0f64;
    let mut ordered = 0usize;
    let mut violating = 0usize;
    let mut max_ip = 0.0f64;
    for i in 0..points.len() {
        for j in 0..points.len() {
            if i == j {
                continue;
            }
            let scale = norm2(&points[i]) * norm2(&points[j]);
            ordered += 1;
            if scale > 0.0 {
                let dev = (dot(&images[i], &images[j]) - dot(&points[i], &points[j])).abs() / scale;
                max_ip = max_ip.max(dev);
                if dev > epsilon {
                    violating += 1;
                }
            }
            if j < i {
                continue;
            }
            let d = norm2(&sub(&points[i], &points[j]));
            if d == 0.0 {
                continue;
            }
            let dt = norm2(&sub(&images[i], &images[j]));
            pairs += 1;
            let ratio = dt / d;
            max_rel = max_rel.max((ratio - 1.0).abs());
            if ratio >= 1.0 - epsilon && ratio <= 1.0 + epsilon {
                within += 1;
            }
            let r2 = ratio * ratio;
            if r2 >= 1.0 - epsilon && r2 <= 1.0 + epsilon {
                within_sq += 1;
            }
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 1.0 } else { a as f64 / b as f64 };
    Ok(DistortionStats {
        epsilon,
        n_pairs: pairs,
        fraction_within: frac(within, pairs),
        fraction_within_squared: frac(within_sq, pairs),
        max_relative_error: max_rel,
        inner_product_max_violation: max_ip,
        inner_product_fraction_violating: frac(violating, ordered),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_rule() {
        assert_eq!(projected_dimension(600, 0.2).unwrap(), 289);
        assert_eq!(projected_dimension(1200, 0.2).unwrap(), 321);
        assert_eq!(projected_dimension(2400, 0.2).unwrap(), 352);
        assert!(matches!(projected_dimension(10, 1.0), Err(Error::BadEpsilon(_))));
        assert!(matches!(projected_dimension(10, 0.0), Err(Error::BadEpsilon(_))));
    }

    #[test]
    fn same_seed_same_entries() {
        for kind in [
            ProjectorKind::Gaussian,
            ProjectorKind::Rademacher,
            ProjectorKind::achlioptas(),
            ProjectorKind::GaussianOrthogonal,
        ] {
            let a = sample_projector(kind, 7, 30, 11).unwrap();
            let b = sample_projector(kind, 7, 30, 11).unwrap();
            assert_eq!(a.entries().as_slice(), b.entries().as_slice());
            let c = sample_projector(kind, 7, 30, 12).unwrap();
            assert_ne!(a.entries().as_slice(), c.entries().as_slice());
        }
    }

    #[test]
    fn bad_sparsity_rejected() {
        for q in [0.0, 0.6, -0.1] {
            assert!(matches!(
                sample_projector(ProjectorKind::Sparse { q }, 2, 2, 0),
                Err(Error::BadSparsity(_))
            ));
        }
        assert!(sample_projector(ProjectorKind::Sparse { q: 0.5 }, 2, 2, 0).is_ok());
    }

    #[test]
    fn sparse_entries_take_three_values() {
        let t = sample_projector(ProjectorKind::achlioptas(), 10, 50, 3).unwrap();
        let s = 1.0 / (2.0 * ACHLIOPTAS_Q * 10.0f64).sqrt();
        assert!(t.entries().as_slice().iter().all(|&v| v == 0.0 || v == s || v == -s));
    }

    #[test]
    fn orthogonal_rows_are_orthonormal_up_to_scale() {
        let (k, m) = (5, 20);
        let t = sample_projector(ProjectorKind::GaussianOrthogonal, k, m, 9).unwrap();
        let s2 = m as f64 / k as f64;
        for i in 0..k {
            for j in 0..k {
                let v = dot(t.entries().row(i), t.entries().row(j));
                let want = if i == j { s2 } else { 0.0 };
                assert!((v - want).abs() < 1e-10);
            }
        }
        assert!(sample_projector(ProjectorKind::GaussianOrthogonal, 21, 20, 0).is_err());
    }

    #[test]
    fn extended_projector_blocks() {
        let t = sample_projector(ProjectorKind::Gaussian, 3, 4, 1).unwrap();
        assert_eq!(&extended_projector(&t, 0), t.entries());
        let e = extended_projector(&t, 2);
        assert_eq!(e.shape(), (5, 6));
        let stacked = Matrix::from_rows(&[
            vec![1.0, 2.0],
            vec![3.0, 4.0],
            vec![0.5, 0.1],
            vec![0.2, 0.3],
            vec![0.7, 0.9],
            vec![0.4, 0.6],
        ])
        .unwrap();
        let out = e.matmul(&stacked).unwrap();
        assert_eq!(out.shape(), (5, 2));
        assert_eq!(out.row(0), &[1.0, 2.0]);
        assert_eq!(out.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn apply_checks_shape() {
        let t = sample_projector(ProjectorKind::Gaussian, 3, 4, 1).unwrap();
        assert!(matches!(apply(&t, &Matrix::zeros(5, 2)), Err(Error::DimensionMismatch(_))));
        assert_eq!(apply(&t, &Matrix::zeros(4, 2)).unwrap(), Matrix::zeros(3, 2));
    }

    #[test]
    fn zero_point_pair_matches_single_vector() {
        let t = sample_projector(ProjectorKind::Gaussian, 20, 10, 5).unwrap();
        let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let stats = distortion_stats(&t, &[vec![0.0; 10], y.clone()], 0.2).unwrap();
        let ratio = norm2(&t.apply_vec(&y).unwrap()) / norm2(&y);
        assert_eq!(stats.n_pairs, 1);
        assert!((stats.max_relative_error - (ratio - 1.0).abs()).abs() < 1e-14);
    }

    #[test]
    fn serialized_spec_regenerates_entries() {
        let t = sample_projector(ProjectorKind::Sparse { q: 0.01 }, 6, 40, 77).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(!s.contains("entries"));
        let back: Projector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
