//! Recovering an approximate solution of the original LP from the projected one.
//!
//! Two routes are offered. [`retrieve_basis_alg2`] lifts the projected dual back with
//! `y_prox = Tᵀ y_T` and picks the `m` columns whose dual constraints pass closest to
//! `y_prox`. [`retrieve_pseudoinverse`] keeps the basic columns of the projected solve
//! and fits them to `b` in the least-squares sense.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_min_norm, Matrix};
use crate::lp_model::{denormalize_solution, normalize, quality_metrics, NormalizedLp, ObjGap, QualityMetrics, StandardFormLp};
use crate::project::{project_lp, ProjectedLp};
use crate::seed::derive_seed;
use crate::sketch::{projected_dimension, sample_projector, Projector, ProjectorKind};
use crate::solver::{SolveResult, Status};

const SINGULAR_COND: f64 = 1e12;
const DUAL_FEAS_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RetrievalMethod {
    BasisAlg2,
    Pseudoinverse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub x: Vec<f64>,
    pub method: RetrievalMethod,
    pub basis_used: Vec<usize>,
    pub metrics: QualityMetrics,
    /// Whether `y_proxᵀA ≤ c + 1e-8`; only meaningful for the dual-lift route.
    pub dual_lift_feasible: Option<bool>,
    /// The reduced system was singular or ill-conditioned and was solved by
    /// minimum-norm least squares instead.
    pub singular_fallback: bool,
    /// 1-norm condition estimate of the matrix that was factorized.
    pub condition_estimate: f64,
    /// Gap between the `(m+1)`-th and `m`-th smallest `z_j` (dual-lift route only).
    pub z_gap: Option<f64>,
}

/// `Tᵀ y_T`.
pub fn dual_lift(t: &Projector, y_t: &[f64]) -> Result<Vec<f64>> {
    if y_t.len() != t.k() {
        return Err(Error::DimensionMismatch(format!(
            "dual of length {} for a projector with {} rows",
            y_t.len(),
            t.k()
        )));
    }
    t.transpose_apply(y_t)
}

fn column_norms(a: &Matrix) -> Result<Vec<f64>> {
    let mut norms = vec![0.0; a.ncols()];
    for i in 0..a.nrows() {
        for (s, v) in norms.iter_mut().zip(a.row(i)) {
            *s += v * v;
        }
    }
    for (j, s) in norms.iter_mut().enumerate() {
        *s = s.sqrt();
        if *s == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
    }
    Ok(norms)
}

fn metrics_for(lp: &StandardFormLp, x: &[f64], v_reference: Option<f64>) -> Result<QualityMetrics> {
    let v = lp.objective(x);
    match v_reference {
        Some(r) => quality_metrics(lp, x, r, v),
        None => {
            let mut q = quality_metrics(lp, x, v, v)?;
            q.obj_gap = ObjGap::Unavailable;
            Ok(q)
        }
    }
}

/// Solves the square system `B x = rhs` by LU, falling back to least squares when `B`
/// is singular or its condition estimate exceeds `1e12`.
fn solve_square(b: &Matrix, rhs: &[f64]) -> Result<(Vec<f64>, f64, bool)> {
    let nb = b.to_nalgebra();
    let norm1 = |m: &nalgebra::DMatrix<f64>| {
        (0..m.ncols())
            .map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0f64, f64::max)
    };
    if let Some(inv) = nb.clone().lu().try_inverse() {
        let cond = norm1(&nb) * norm1(&inv);
        if cond.is_finite() && cond <= SINGULAR_COND {
            let x = Matrix::from_nalgebra(&inv).mul_vec(rhs)?;
            return Ok((x, cond, false));
        }
        Ok((lstsq_min_norm(b, rhs)?, cond, true))
    } else {
        Ok((lstsq_min_norm(b, rhs)?, f64::INFINITY, true))
    }
}

/// Picks the `m` columns with the smallest normalized dual slacks
/// `z_j = (c_j − A_jᵀ y_prox) / ‖A_j‖` (ties to the lower index) and solves `A_B x_B = b`.
pub fn retrieve_basis_alg2(
    lp: &StandardFormLp,
    y_prox: &[f64],
    v_reference: Option<f64>,
) -> Result<RetrievalReport> {
    let (m, n) = lp.a().shape();
    if y_prox.len() != m {
        return Err(Error::DimensionMismatch(format!("y_prox of length {} for {m} rows", y_prox.len())));
    }
    let norms = column_norms(lp.a())?;
    let aty = lp.a().tr_mul_vec(y_prox)?;
    let z: Vec<f64> = (0..n).map(|j| (lp.c()[j] - aty[j]) / norms[j]).collect();
    let dual_lift_feasible = aty.iter().zip(lp.c()).all(|(v, c)| *v <= c + DUAL_FEAS_TOL);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[i].total_cmp(&z[j]).then(i.cmp(&j)));
    let size = m.min(n);
    let z_gap = (n > size && size > 0).then(|| z[order[size]] - z[order[size - 1]]);
    let mut basis: Vec<usize> = order[..size].to_vec();
    basis.sort_unstable();

    let ab = lp.a().select_columns(&basis);
    let (xb, cond, fallback) = if size == m {
        solve_square(&ab, lp.b())?
    } else {
        (lstsq_min_norm(&ab, lp.b())?, f64::INFINITY, true)
    };
    let mut x = vec![0.0; n];
    for (&j, &v) in basis.iter().zip(&xb) {
        x[j] = v;
    }
    let metrics = metrics_for(lp, &x, v_reference)?;
    Ok(RetrievalReport {
        x,
        method: RetrievalMethod::BasisAlg2,
        basis_used: basis,
        metrics,
        dual_lift_feasible: Some(dual_lift_feasible),
        singular_fallback: fallback,
        condition_estimate: cond,
        z_gap,
    })
}

/// Solves the normal equations `A_Hᵀ A_H x_H = A_Hᵀ b` over the columns `H` and
/// zero-fills the rest.
pub fn retrieve_pseudoinverse(
    lp: &StandardFormLp,
    projected_basis: &[usize],
    v_reference: Option<f64>,
) -> Result<RetrievalReport> {
    let n = lp.n();
    let mut h = projected_basis.to_vec();
    h.sort_unstable();
    h.dedup();
    if h.is_empty() {
        return Err(Error::InvalidInstance("empty column set".into()));
    }
    if let Some(&j) = h.iter().find(|&&j| j >= n) {
        return Err(Error::DimensionMismatch(format!("column index {j} out of range for n = {n}")));
    }
    let ah = lp.a().select_columns(&h);
    let gram = ah.transpose().matmul(&ah)?;
    let rhs = ah.tr_mul_vec(lp.b())?;
    let (mut xh, cond, mut fallback) = solve_square(&gram, &rhs)?;
    if fallback {
        // Work on A_H directly rather than on the squared system.
        xh = lstsq_min_norm(&ah, lp.b())?;
        fallback = true;
    }
    let mut x = vec![0.0; n];
    for (&j, &v) in h.iter().zip(&xh) {
        x[j] = v;
    }
    let metrics = metrics_for(lp, &x, v_reference)?;
    Ok(RetrievalReport {
        x,
        method: RetrievalMethod::Pseudoinverse,
        basis_used: h,
        metrics,
        dual_lift_feasible: None,
        singular_fallback: fallback,
        condition_estimate: cond,
        z_gap: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub epsilon: f64,
    /// Overrides the row-count rule when set.
    pub k: Option<usize>,
    pub projector: ProjectorKind,
    pub method: RetrievalMethod,
    /// Optimal value of the original instance, if known; drives the `obj` metric.
    pub reference_value: Option<f64>,
}

impl PipelineConfig {
    pub fn new(epsilon: f64, method: RetrievalMethod) -> Self {
        Self {
            epsilon,
            k: None,
            projector: ProjectorKind::achlioptas(),
            method,
            reference_value: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sample: Duration,
    pub multiply: Duration,
    pub solve: Duration,
    pub retrieve: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.sample + self.multiply + self.solve + self.retrieve
    }
}

/// A solved projection of a normalized instance, ready for retrieval.
#[derive(Clone, Debug)]
pub struct ProjectedSolve {
    pub normalized: NormalizedLp,
    pub projected: ProjectedLp,
    pub result: SolveResult,
    pub timings: StageTimings,
}

impl ProjectedSolve {
    pub fn k(&self) -> usize {
        self.projected.k()
    }

    pub fn projector(&self) -> &Projector {
        &self.projected.projector
    }

    /// Raw projected solution mapped back to the original variable scale.
    pub fn raw_solution(&self) -> Result<Vec<f64>> {
        let x = self.result.x.as_ref().ok_or(Error::InfeasibleProjection)?;
        denormalize_solution(x, &self.normalized)
    }

    /// `v(P_T)`, equal in both scales.
    pub fn objective(&self) -> Option<f64> {
        self.result.objective
    }

    /// Runs one retrieval method on the normalized instance, then maps the result back and
    /// evaluates it against `original`.
    pub fn retrieve(
        &self,
        original: &StandardFormLp,
        method: RetrievalMethod,
        v_reference: Option<f64>,
    ) -> Result<(RetrievalReport, Duration)> {
        let start = Instant::now();
        let norm_lp = &self.normalized.lp;
        let k = self.k();
        let mut report = match method {
            RetrievalMethod::BasisAlg2 => {
                let y = self.result.y.as_ref().ok_or(Error::InfeasibleProjection)?;
                // With a budget row the dual carries one extra multiplier; only the
                // projected rows are lifted.
                let y_prox = dual_lift(self.projector(), &y[..k])?;
                retrieve_basis_alg2(norm_lp, &y_prox, None)?
            }
            RetrievalMethod::Pseudoinverse => {
                let n = norm_lp.n();
                let h: Vec<usize> = self
                    .result
                    .basis
                    .as_ref()
                    .ok_or(Error::InfeasibleProjection)?
                    .iter()
                    .copied()
                    .filter(|&j| j < n)
                    .collect();
                retrieve_pseudoinverse(norm_lp, &h, None)?
            }
        };
        report.x = denormalize_solution(&report.x, &self.normalized)?;
        let elapsed = start.elapsed();
        report.metrics = metrics_for(original, &report.x, v_reference)?;
        Ok((report, elapsed))
    }
}

/// Normalize, sample `T`, multiply and solve the projection. The projector seed is
/// derived from `master_seed`. A budget carried by `lp` is applied to the normalized
/// variables.
pub fn project_and_solve(lp: &StandardFormLp, cfg: &PipelineConfig, master_seed: u64) -> Result<ProjectedSolve> {
    let normalized = normalize(lp)?;
    let k = match cfg.k {
        Some(k) => k,
        None => projected_dimension(lp.n(), cfg.epsilon)?,
    };
    let t0 = Instant::now();
    let t = sample_projector(cfg.projector, k, lp.m(), derive_seed(master_seed, 0))?;
    let t1 = Instant::now();
    let projected = project_lp(&normalized.lp, &t)?;
    let t2 = Instant::now();
    let result = projected.solve()?;
    let t3 = Instant::now();
    match result.status {
        Status::Infeasible => return Err(Error::InfeasibleProjection),
        Status::Unbounded => return Err(Error::UnboundedProjection),
        Status::Optimal => {}
    }
    Ok(ProjectedSolve {
        normalized,
        projected,
        result,
        timings: StageTimings {
            sample: t1 - t0,
            multiply: t2 - t1,
            solve: t3 - t2,
            retrieve: Duration::ZERO,
        },
    })
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub solve: ProjectedSolve,
    pub report: RetrievalReport,
}

/// normalize → project → solve → retrieve → denormalize → metrics.
pub fn full_pipeline(lp: &StandardFormLp, cfg: &PipelineConfig, master_seed: u64) -> Result<PipelineRun> {
    let mut solve = project_and_solve(lp, cfg, master_seed)?;
    let (report, elapsed) = solve.retrieve(lp, cfg.method, cfg.reference_value)?;
    solve.timings.retrieve = elapsed;
    Ok(PipelineRun { solve, report })
}

/// Dual feasibility residual `max_j (A_jᵀy − c_j)`; non-positive means feasible.
pub fn dual_infeasibility(lp: &StandardFormLp, y: &[f64]) -> Result<f64> {
    let aty = lp.a().tr_mul_vec(y)?;
    Ok(aty
        .iter()
        .zip(lp.c())
        .map(|(v, c)| v - c)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::sample_projector;

    fn lp(rows: &[Vec<f64>], b: Vec<f64>, c: Vec<f64>) -> StandardFormLp {
        StandardFormLp::new(c, Matrix::from_rows(rows).unwrap(), b).unwrap()
    }

    #[test]
    fn lift_examples() {
        let t = sample_projector(ProjectorKind::Gaussian, 3, 5, 1).unwrap();
        assert_eq!(dual_lift(&t, &[0.0; 3]).unwrap(), vec![0.0; 5]);
        assert!(matches!(dual_lift(&t, &[0.0; 4]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn alg2_tiny_case() {
        let p = lp(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]], vec![1.0, 1.0], vec![1.0, 1.0, 3.0]);
        let r = retrieve_basis_alg2(&p, &[1.0, 1.0], Some(2.0)).unwrap();
        assert_eq!(r.basis_used, vec![0, 1]);
        assert_eq!(r.x, vec![1.0, 1.0, 0.0]);
        assert_eq!(r.dual_lift_feasible, Some(true));
        assert_eq!(r.metrics.feas, 0.0);
        assert_eq!(r.metrics.obj, 0.0);
        let bf = crate::solver::brute_force_optimum(&p).unwrap();
        assert_eq!(bf.basis.unwrap(), vec![0, 1]);
    }

    #[test]
    fn alg2_ties_go_to_lower_index() {
        // z = (0, 0, 0): every column ties, so {0, 1} is chosen.
        let p = lp(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]], vec![1.0, 1.0], vec![1.0, 1.0, 2.0]);
        let r = retrieve_basis_alg2(&p, &[1.0, 1.0], None).unwrap();
        assert_eq!(r.basis_used, vec![0, 1]);
        assert_eq!(r.metrics.obj_gap, ObjGap::Unavailable);
    }

    #[test]
    fn alg2_singular_basis_falls_back() {
        // Columns 0 and 1 are parallel and have the smallest z.
        let p = lp(&[vec![1.0, 2.0, 0.0], vec![1.0, 2.0, 1.0]], vec![1.0, 2.0], vec![0.0, 0.0, 5.0]);
        let r = retrieve_basis_alg2(&p, &[0.0, 0.0], None).unwrap();
        assert_eq!(r.basis_used, vec![0, 1]);
        assert!(r.singular_fallback);
        assert!(r.x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn pinv_single_column() {
        let p = lp(&[vec![1.0, 0.0], vec![2.0, 1.0]], vec![1.0, 2.0], vec![1.0, 1.0]);
        let r = retrieve_pseudoinverse(&p, &[0], Some(1.0)).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-14);
        assert_eq!(r.x[1], 0.0);
        assert!(r.metrics.feas < 1e-14);
        assert!(retrieve_pseudoinverse(&p, &[], None).is_err());
        assert!(retrieve_pseudoinverse(&p, &[2], None).is_err());
    }

    #[test]
    fn pinv_rank_deficient_flagged() {
        let p = lp(&[vec![1.0, 2.0], vec![1.0, 2.0]], vec![1.0, 1.0], vec![1.0, 1.0]);
        let r = retrieve_pseudoinverse(&p, &[0, 1], None).unwrap();
        assert!(r.singular_fallback);
        assert!(r.metrics.feas < 1e-12);
    }
}
