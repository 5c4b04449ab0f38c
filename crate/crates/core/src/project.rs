//! Projected problems, membership oracles and preservation trials.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genbench::{gen_feasible, gen_infeasible, GenConfig};
use crate::linalg::Matrix;
use crate::lp_model::StandardFormLp;
use crate::seed::{derive_seed, derive_seed2};
use crate::sketch::{apply, projected_dimension, sample_projector, Projector, ProjectorKind};
use crate::solver::{solve, solve_with_budget, SolveResult, Status};

/// `min c·x s.t. TAx = Tb, x ≥ 0` (and `Σx ≤ θ` when a budget is attached).
#[derive(Clone, Debug)]
pub struct ProjectedLp {
    pub original: StandardFormLp,
    pub projector: Projector,
    pub projected: StandardFormLp,
}

impl ProjectedLp {
    pub fn k(&self) -> usize {
        self.projector.k()
    }

    /// Solves the projected instance, honoring its budget if one is attached.
    pub fn solve(&self) -> Result<SolveResult> {
        match self.projected.theta() {
            Some(theta) => solve_with_budget(&self.projected, theta),
            None => solve(&self.projected),
        }
    }
}

pub fn project_lp(lp: &StandardFormLp, t: &Projector) -> Result<ProjectedLp> {
    if t.m() != lp.m() {
        return Err(Error::DimensionMismatch(format!(
            "projector has {} columns, LP has {} rows",
            t.m(),
            lp.m()
        )));
    }
    let ta = apply(t, lp.a())?;
    let tb = t.apply_vec(lp.b())?;
    let projected = StandardFormLp::with_theta(lp.c().to_vec(), ta, tb, lp.theta())?;
    Ok(ProjectedLp {
        original: lp.clone(),
        projector: t.clone(),
        projected,
    })
}

/// Like [`project_lp`] with the budget `Σx ≤ θ`; `θ = +∞` means no budget.
pub fn project_lp_with_budget(lp: &StandardFormLp, t: &Projector, theta: f64) -> Result<ProjectedLp> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInstance(format!("budget theta must be positive, got {theta}")));
    }
    let with_budget = lp.clone().set_theta(Some(theta))?;
    project_lp(&with_budget, t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipResult {
    pub member: bool,
    /// Multipliers `λ` for members, a separating `y` (`yᵀA ≥ 0`, `yᵀtarget < 0`) otherwise.
    pub certificate: Vec<f64>,
}

/// Is `target` in `{Aλ : λ ≥ 0}`?
pub fn in_cone(a: &Matrix, target: &[f64]) -> Result<MembershipResult> {
    let lp = StandardFormLp::new(vec![0.0; a.ncols()], a.clone(), target.to_vec())?;
    membership(&lp)
}

/// Is `target` in the convex hull of the columns of `A`?
pub fn in_conv_hull(a: &Matrix, target: &[f64]) -> Result<MembershipResult> {
    let ones = Matrix::from_rows(&[vec![1.0; a.ncols()]])?;
    let stacked = a.vstack(&ones)?;
    let mut rhs = target.to_vec();
    rhs.push(1.0);
    let lp = StandardFormLp::new(vec![0.0; a.ncols()], stacked, rhs)?;
    let mut res = membership(&lp)?;
    if !res.member {
        // Drop the multiplier of the convexity row; the remaining part separates in
        // the affine sense: yᵀa_j + y₀ ≥ 0 for all j, yᵀtarget + y₀ < 0.
        res.certificate.truncate(a.nrows() + 1);
    }
    Ok(res)
}

fn membership(lp: &StandardFormLp) -> Result<MembershipResult> {
    let res = solve(lp)?;
    match res.status {
        Status::Optimal => Ok(MembershipResult {
            member: true,
            certificate: res.x.expect("optimal carries x"),
        }),
        Status::Infeasible => Ok(MembershipResult {
            member: false,
            certificate: res.farkas.expect("infeasible carries a certificate"),
        }),
        Status::Unbounded => Err(Error::NumericalFailure("feasibility problem reported unbounded".into())),
    }
}

/// `‖x‖_A = min{Σλ : Aλ = x, λ ≥ 0}`.
pub fn a_norm(a: &Matrix, x: &[f64]) -> Result<f64> {
    let lp = StandardFormLp::new(vec![1.0; a.ncols()], a.clone(), x.to_vec())?;
    let res = solve(&lp)?;
    match res.status {
        Status::Optimal => Ok(res.objective.expect("optimal carries objective")),
        Status::Infeasible => Err(Error::NotInCone),
        Status::Unbounded => Err(Error::NumericalFailure("A-norm problem reported unbounded".into())),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    /// Random nonnegative generators, Gaussian target: generic cone membership.
    Cone,
    /// Columns in the unit cube, target `(1 + margin)·1` outside it.
    Hull,
    /// Planted-solution feasible instances.
    Feasibility,
    /// Farkas-certified infeasible instances.
    Infeasibility,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    pub projector: ProjectorKind,
    /// Overrides the row-count rule when set.
    pub k: Option<usize>,
    /// Distance of the hull target beyond the unit cube.
    pub margin: f64,
}

impl TrialParams {
    pub fn new(m: usize, n: usize, density: f64) -> Self {
        Self {
            m,
            n,
            density,
            projector: ProjectorKind::achlioptas(),
            k: None,
            margin: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    pub original_answer: bool,
    pub projected_answer: bool,
    pub k: usize,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// Share of trials where the projected answer equals the original one.
    pub rate: f64,
    pub rows: Vec<TrialRow>,
}

impl TrialOutcome {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["seed", "original_answer", "projected_answer", "k", "epsilon"])?;
        for r in &self.rows {
            wr.write_record([
                r.seed.to_string(),
                r.original_answer.to_string(),
                r.projected_answer.to_string(),
                r.k.to_string(),
                r.epsilon.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Repeats "generate, project, compare membership answers" `trials` times. Trials run in
/// parallel; trial `i` uses seeds derived from `(master_seed, i)` only.
pub fn preservation_trial(
    kind: TrialKind,
    params: &TrialParams,
    epsilon: f64,
    trials: usize,
    master_seed: u64,
) -> Result<TrialOutcome> {
    use rayon::prelude::*;

    if trials == 0 {
        return Err(Error::InvalidInstance("trials must be at least 1".into()));
    }
    let k = match params.k {
        Some(k) => k,
        None => projected_dimension(params.n, epsilon)?,
    };
    let rows: Vec<TrialRow> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(master_seed, i);
            let (a, target) = trial_instance(kind, params, derive_seed2(seed, 0, 0))?;
            let original = answer(kind, &a, &target)?;
            let t = sample_projector(params.projector, k, a.nrows(), derive_seed2(seed, 1, 0))?;
            let ta = apply(&t, &a)?;
            let tt = t.apply_vec(&target)?;
            let projected = answer(kind, &ta, &tt)?;
            Ok(TrialRow {
                seed,
                original_answer: original,
                projected_answer: projected,
                k,
                epsilon,
            })
        })
        .collect::<Result<_>>()?;
    let matches = rows.iter().filter(|r| r.original_answer == r.projected_answer).count();
    Ok(TrialOutcome {
        rate: matches as f64 / rows.len() as f64,
        rows,
    })
}

fn answer(kind: TrialKind, a: &Matrix, target: &[f64]) -> Result<bool> {
    Ok(match kind {
        TrialKind::Hull => in_conv_hull(a, target)?.member,
        _ => in_cone(a, target)?.member,
    })
}

fn trial_instance(kind: TrialKind, p: &TrialParams, seed: u64) -> Result<(Matrix, Vec<f64>)> {
    use rand::Rng;
    use rand_distr::StandardNormal;

    let cfg = GenConfig {
        m: p.m,
        n: p.n,
        density: p.density,
        seed,
        feasible: !matches!(kind, TrialKind::Infeasibility),
    };
    match kind {
        TrialKind::Feasibility => {
            let (lp, _) = gen_feasible(&cfg)?;
            Ok((lp.a().clone(), lp.b().to_vec()))
        }
        TrialKind::Infeasibility => {
            let (lp, _) = gen_infeasible(&cfg)?;
            Ok((lp.a().clone(), lp.b().to_vec()))
        }
        TrialKind::Cone => {
            let (lp, _) = gen_feasible(&cfg)?;
            let mut rng = crate::seed::rng(derive_seed(seed, 1));
            let target = (0..p.m).map(|_| rng.sample(StandardNormal)).collect();
            Ok((lp.a().clone(), target))
        }
        TrialKind::Hull => {
            let (lp, _) = gen_feasible(&cfg)?;
            Ok((lp.a().clone(), vec![1.0 + p.margin; p.m]))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye2() -> Matrix {
        Matrix::identity(2)
    }

    #[test]
    fn cone_examples() {
        let r = in_cone(&eye2(), &[1.0, 1.0]).unwrap();
        assert!(r.member);
        assert!((r.certificate[0] - 1.0).abs() < 1e-12 && (r.certificate[1] - 1.0).abs() < 1e-12);

        let r = in_cone(&eye2(), &[-1.0, 0.0]).unwrap();
        assert!(!r.member);
        // separating direction: yᵀA ≥ 0, yᵀtarget < 0, i.e. a positive multiple of e₁
        let y = &r.certificate;
        assert!(y[0] > 0.0 && y[1].abs() < 1e-12);
    }

    #[test]
    fn hull_examples() {
        assert!(in_conv_hull(&eye2(), &[0.5, 0.5]).unwrap().member);
        assert!(!in_conv_hull(&eye2(), &[2.0, 0.0]).unwrap().member);
        let r = in_conv_hull(&eye2(), &[0.25, 0.75]).unwrap();
        let s: f64 = r.certificate.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn a_norm_examples() {
        assert!((a_norm(&eye2(), &[1.0, 2.0]).unwrap() - 3.0).abs() < 1e-12);
        let dup = Matrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        assert!((a_norm(&dup, &[1.0, 1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(a_norm(&eye2(), &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(a_norm(&eye2(), &[-1.0, 0.0]), Err(Error::NotInCone)));
    }

    #[test]
    fn projection_shapes() {
        let cfg = GenConfig { m: 4, n: 6, density: 1.0, seed: 3, feasible: true };
        let (lp, _) = gen_feasible(&cfg).unwrap();
        let t = sample_projector(ProjectorKind::Gaussian, 2, 4, 1).unwrap();
        let p = project_lp(&lp, &t).unwrap();
        assert_eq!(p.projected.a().shape(), (2, 6));
        assert_eq!(p.projected.b().len(), 2);
        assert_eq!(p.projected.c(), lp.c());

        let bad = sample_projector(ProjectorKind::Gaussian, 2, 5, 1).unwrap();
        assert!(matches!(project_lp(&lp, &bad), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn infinite_budget_is_no_budget() {
        let cfg = GenConfig { m: 5, n: 8, density: 1.0, seed: 8, feasible: true };
        let (lp, _) = gen_feasible(&cfg).unwrap();
        let t = sample_projector(ProjectorKind::Gaussian, 3, 5, 2).unwrap();
        let plain = project_lp(&lp, &t).unwrap();
        let inf = project_lp_with_budget(&lp, &t, f64::INFINITY).unwrap();
        assert_eq!(inf.projected.theta(), None);
        assert_eq!(plain.solve().unwrap(), inf.solve().unwrap());
    }

    #[test]
    fn trial_csv_header() {
        let out = TrialOutcome {
            rate: 1.0,
            rows: vec![TrialRow { seed: 1, original_answer: true, projected_answer: true, k: 3, epsilon: 0.2 }],
        };
        let mut buf = Vec::new();
        out.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "seed,original_answer,projected_answer,k,epsilon\n1,true,true,3,0.2\n");
    }
}
