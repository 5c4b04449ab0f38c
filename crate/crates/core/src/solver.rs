//! Dense two-phase revised simplex, plus a vertex-enumeration oracle for small instances.
//!
//! The basis inverse is kept explicitly and updated with elementary row operations after
//! each pivot; it is recomputed from scratch every [`REFACTOR_EVERY`] pivots and before a
//! solution is reported. Rows with a negative right-hand side are negated internally, and
//! every row starts with its own artificial column.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, lstsq_min_norm, norm_inf, rank, Matrix};
use crate::lp_model::StandardFormLp;

const FEAS_TOL: f64 = 1e-8;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DRIVE_OUT_TOL: f64 = 1e-7;
const REFACTOR_EVERY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: Status,
    pub objective: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    /// Basic structural columns, ascending. Has `m` entries unless `A` is rank deficient.
    pub basis: Option<Vec<usize>>,
    /// For infeasible instances: `f` with `fᵀA ≥ 0` and `fᵀb < 0`.
    #[serde(skip)]
    pub farkas: Option<Vec<f64>>,
    #[serde(skip)]
    pub iterations: usize,
}

impl SolveResult {
    fn without_solution(status: Status, iterations: usize) -> Self {
        Self {
            status,
            objective: None,
            x: None,
            y: None,
            basis: None,
            farkas: None,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

/// Solves `min c·x s.t. Ax = b, x ≥ 0`. Any budget carried by `lp` is ignored here;
/// use [`solve_with_budget`] for that.
pub fn solve(lp: &StandardFormLp) -> Result<SolveResult> {
    Simplex::new(lp.a(), lp.b(), lp.c()).run()
}

/// Solves the instance with the extra row `Σ x_j + s = θ`, `s ≥ 0`.
///
/// The budget row is appended last and its slack is column `n`, so a basis containing
/// index `n` refers to the slack. `x` is truncated to the original `n` variables; `y`
/// keeps `m + 1` entries, the last one being the budget multiplier.
pub fn solve_with_budget(lp: &StandardFormLp, theta: f64) -> Result<SolveResult> {
    if !(theta > 0.0) {
        return Err(Error::InvalidInstance(format!("budget theta must be positive, got {theta}")));
    }
    let (m, n) = lp.a().shape();
    let mut a = Matrix::zeros(m + 1, n + 1);
    for i in 0..m {
        a.row_mut(i)[..n].copy_from_slice(lp.a().row(i));
    }
    a.row_mut(m).fill(1.0);
    let mut b = lp.b().to_vec();
    b.push(theta);
    let mut c = lp.c().to_vec();
    c.push(0.0);
    let mut res = Simplex::new(&a, &b, &c).run()?;
    if let Some(x) = res.x.as_mut() {
        x.truncate(n);
    }
    Ok(res)
}

struct Simplex {
    m: usize,
    n: usize,
    /// Column `j` of the sign-adjusted constraint matrix is row `j` here.
    at: Matrix,
    b: Vec<f64>,
    c: Vec<f64>,
    sign: Vec<f64>,
    binv: Matrix,
    /// Variable index per basis row; indices `n..n+m` are artificials.
    basis: Vec<usize>,
    in_basis: Vec<bool>,
    xb: Vec<f64>,
    iterations: usize,
    cap: usize,
    since_refactor: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Simplex {
    fn new(a: &Matrix, b: &[f64], c: &[f64]) -> Self {
        let (m, n) = a.shape();
        let sign: Vec<f64> = b.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut at = a.transpose();
        for j in 0..n {
            for (v, s) in at.row_mut(j).iter_mut().zip(&sign) {
                *v *= s;
            }
        }
        let b: Vec<f64> = b.iter().map(|v| v.abs()).collect();
        let mut in_basis = vec![false; n + m];
        in_basis[n..].fill(true);
        Self {
            m,
            n,
            at,
            xb: b.clone(),
            b,
            c: c.to_vec(),
            sign,
            binv: Matrix::identity(m),
            basis: (n..n + m).collect(),
            in_basis,
            iterations: 0,
            cap: 50 * (m + n),
            since_refactor: 0,
        }
    }

    fn is_artificial(&self, var: usize) -> bool {
        var >= self.n
    }

    fn run(mut self) -> Result<SolveResult> {
        let mut phase1 = vec![0.0; self.n + self.m];
        phase1[self.n..].fill(1.0);
        self.iterate(&phase1, false)?;
        self.refactor()?;

        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(&v, _)| self.is_artificial(v))
            .map(|(_, &x)| x.max(0.0))
            .sum();
        if infeasibility > FEAS_TOL * (1.0 + norm_inf(&self.b)) {
            let y1 = self.duals(&phase1);
            let farkas: Vec<f64> = y1.iter().zip(&self.sign).map(|(y, s)| -y * s).collect();
            let mut res = SolveResult::without_solution(Status::Infeasible, self.iterations);
            res.farkas = Some(farkas);
            return Ok(res);
        }

        self.drive_out_artificials()?;

        let mut phase2 = self.c.clone();
        phase2.resize(self.n + self.m, 0.0);
        match self.iterate(&phase2, true)? {
            PhaseEnd::Unbounded => Ok(SolveResult::without_solution(Status::Unbounded, self.iterations)),
            PhaseEnd::Optimal => {
                self.refactor()?;
                let mut x = vec![0.0; self.n];
                for (&v, &val) in self.basis.iter().zip(&self.xb) {
                    if v < self.n {
                        x[v] = val.max(0.0);
                    }
                }
                let y: Vec<f64> = self
                    .duals(&phase2)
                    .iter()
                    .zip(&self.sign)
                    .map(|(y, s)| y * s)
                    .collect();
                let mut basis: Vec<usize> = self.basis.iter().copied().filter(|&v| v < self.n).collect();
                basis.sort_unstable();
                Ok(SolveResult {
                    status: Status::Optimal,
                    objective: Some(dot(&self.c, &x)),
                    x: Some(x),
                    y: Some(y),
                    basis: Some(basis),
                    farkas: None,
                    iterations: self.iterations,
                })
            }
        }
    }

    /// `c_Bᵀ B⁻¹` in the sign-adjusted row space.
    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (r, &v) in self.basis.iter().enumerate() {
            let cb = cost[v];
            if cb != 0.0 {
                crate::linalg::axpy(cb, self.binv.row(r), &mut y);
            }
        }
        y
    }

    /// `B⁻¹ a_j`.
    fn ftran(&self, var: usize) -> Vec<f64> {
        if var < self.n {
            let col = self.at.row(var);
            (0..self.m).map(|i| dot(self.binv.row(i), col)).collect()
        } else {
            self.binv.column(var - self.n)
        }
    }

    fn iterate(&mut self, cost: &[f64], phase_two: bool) -> Result<PhaseEnd> {
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.cap {
                return Err(Error::NumericalFailure(format!(
                    "simplex iteration cap {} reached",
                    self.cap
                )));
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.duals(cost);
            let Some(q) = self.price(cost, &y, bland) else {
                return Ok(PhaseEnd::Optimal);
            };
            let alpha = self.ftran(q);
            let Some(r) = self.ratio_test(&alpha, phase_two, bland) else {
                return Ok(PhaseEnd::Unbounded);
            };
            let step = self.pivot(r, q, &alpha);
            self.iterations += 1;
            if step <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run > 10 * self.m {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
        }
    }

    /// Entering structural column: most negative reduced cost, or the lowest index under Bland.
    fn price(&self, cost: &[f64], y: &[f64], bland: bool) -> Option<usize> {
        let tol = OPT_TOL * (1.0 + norm_inf(&cost[..self.n]));
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.n {
            if self.in_basis[j] {
                continue;
            }
            let d = cost[j] - dot(y, self.at.row(j));
            if d < -tol {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Harris two-pass ratio test; textbook ratio with lowest-index ties under Bland.
    /// In phase two, artificials still basic are pinned at zero and block any step
    /// whose column touches their row.
    fn ratio_test(&self, alpha: &[f64], phase_two: bool, bland: bool) -> Option<usize> {
        let scale = alpha.iter().fold(1.0f64, |m, a| m.max(a.abs()));
        let piv = PIVOT_TOL * scale;
        let pinned = |r: usize| phase_two && self.is_artificial(self.basis[r]);

        if let Some(r) = (0..self.m).filter(|&r| pinned(r) && alpha[r].abs() > piv).max_by(|&a, &b| {
            alpha[a].abs().total_cmp(&alpha[b].abs())
        }) {
            return Some(r);
        }

        if bland {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.m {
                if alpha[r] > piv && !pinned(r) {
                    let ratio = self.xb[r].max(0.0) / alpha[r];
                    let better = match best {
                        None => true,
                        Some((br, bratio)) => {
                            ratio < bratio - 1e-12
                                || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                        }
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
            }
            return best.map(|(r, _)| r);
        }

        let mut bound = f64::INFINITY;
        for r in 0..self.m {
            if alpha[r] > piv && !pinned(r) {
                bound = bound.min((self.xb[r].max(0.0) + FEAS_TOL) / alpha[r]);
            }
        }
        if !bound.is_finite() {
            return None;
        }
        let mut best: Option<usize> = None;
        for r in 0..self.m {
            if alpha[r] > piv && !pinned(r) && self.xb[r].max(0.0) / alpha[r] <= bound
                && best.is_none_or(|b| alpha[r] > alpha[b]) {
                    best = Some(r);
                }
        }
        best
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) -> f64 {
        let step = if self.is_artificial(self.basis[r]) && self.xb[r].abs() <= FEAS_TOL {
            0.0
        } else {
            self.xb[r].max(0.0) / alpha[r]
        };
        for i in 0..self.m {
            if i != r {
                self.xb[i] -= step * alpha[i];
            }
        }
        self.xb[r] = step;

        let ar = alpha[r];
        for v in self.binv.row_mut(r) {
            *v /= ar;
        }
        let pivot_row = self.binv.row(r).to_vec();
        for i in 0..self.m {
            if i != r && alpha[i] != 0.0 {
                crate::linalg::axpy(-alpha[i], &pivot_row, self.binv.row_mut(i));
            }
        }

        self.in_basis[self.basis[r]] = false;
        self.in_basis[q] = true;
        self.basis[r] = q;
        self.since_refactor += 1;
        step.abs()
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = nalgebra::DMatrix::<f64>::zeros(m, m);
        for (r, &v) in self.basis.iter().enumerate() {
            if v < self.n {
                for (i, &a) in self.at.row(v).iter().enumerate() {
                    bmat[(i, r)] = a;
                }
            } else {
                bmat[(v - self.n, r)] = 1.0;
            }
        }
        let inv = bmat
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("basis matrix became singular".into()))?;
        self.binv = Matrix::from_nalgebra(&inv);
        self.xb = self.binv.mul_vec(&self.b)?;
        self.since_refactor = 0;
        Ok(())
    }

    /// Pivots zero-level artificials out of the basis where possible. Those that
    /// cannot leave sit on redundant rows and stay pinned at zero.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.m {
            if !self.is_artificial(self.basis[r]) {
                continue;
            }
            let rho = self.binv.row(r).to_vec();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                if self.in_basis[j] {
                    continue;
                }
                let col = self.at.row(j);
                let v = dot(&rho, col);
                let scale = col.iter().fold(1.0f64, |m, a| m.max(a.abs()));
                if v.abs() > DRIVE_OUT_TOL * scale && best.is_none_or(|(_, bv)| v.abs() > bv.abs()) {
                    best = Some((j, v));
                }
            }
            if let Some((q, _)) = best {
                let alpha = self.ftran(q);
                self.pivot(r, q, &alpha);
            }
        }
        self.refactor()
    }
}

/// Largest instance accepted by [`brute_force_optimum`].
pub const BRUTE_FORCE_MAX_M: usize = 6;
pub const BRUTE_FORCE_MAX_N: usize = 12;

/// Reference answer by enumerating every basic solution.
///
/// Slow and only meant for cross-checking [`solve`] on tiny instances. Unboundedness is
/// detected by enumerating the extreme rays `{d ≥ 0, Ad = 0, Σd = 1}`.
pub fn brute_force_optimum(lp: &StandardFormLp) -> Result<SolveResult> {
    let (m, n) = lp.a().shape();
    if m > BRUTE_FORCE_MAX_M || n > BRUTE_FORCE_MAX_N {
        return Err(Error::TooLarge(format!(
            "{m}x{n} exceeds {BRUTE_FORCE_MAX_M}x{BRUTE_FORCE_MAX_N}"
        )));
    }
    let a = lp.a();
    let c = lp.c();

    let vertices = basic_solutions(a, lp.b(), m);
    if vertices.is_empty() {
        return Ok(SolveResult::without_solution(Status::Infeasible, 0));
    }

    let mut ray_rows = a.to_rows();
    ray_rows.push(vec![1.0; n]);
    let ray_mat = Matrix::from_rows(&ray_rows)?;
    let mut ray_rhs = vec![0.0; m];
    ray_rhs.push(1.0);
    let ctol = 1e-9 * (1.0 + norm_inf(c));
    if basic_solutions(&ray_mat, &ray_rhs, m + 1)
        .iter()
        .any(|(_, d)| dot(c, d) < -ctol)
    {
        return Ok(SolveResult::without_solution(Status::Unbounded, 0));
    }

    let (support, x) = vertices
        .into_iter()
        .min_by(|(_, x1), (_, x2)| dot(c, x1).total_cmp(&dot(c, x2)))
        .expect("nonempty");

    // A degenerate vertex shows up under several supports; only its positive entries
    // have to be basic.
    let xtol = 1e-9 * (1.0 + norm_inf(&x));
    let support: Vec<usize> = support.into_iter().filter(|&j| x[j] > xtol).collect();
    let r = rank(a, 1e-10);
    let (basis, y) = dual_feasible_basis(a, c, &support, r).ok_or_else(|| {
        Error::NumericalFailure("no dual-feasible basis around the optimal vertex".into())
    })?;
    Ok(SolveResult {
        status: Status::Optimal,
        objective: Some(dot(c, &x)),
        x: Some(x),
        y: Some(y),
        basis: Some(basis),
        farkas: None,
        iterations: 0,
    })
}

/// All `(support, x)` with `x ≥ 0`, `Ax = b`, and linearly independent support columns.
fn basic_solutions(a: &Matrix, b: &[f64], max_support: usize) -> Vec<(Vec<usize>, Vec<f64>)> {
    let n = a.ncols();
    let tol = 1e-9 * (1.0 + norm_inf(b));
    let mut out = Vec::new();
    for size in 0..=max_support.min(n) {
        for support in combinations(n, size) {
            let sub = a.select_columns(&support);
            if size > 0 && rank(&sub, 1e-10) < size {
                continue;
            }
            let xs = if size == 0 {
                Vec::new()
            } else {
                match lstsq_min_norm(&sub, b) {
                    Ok(v) => v,
                    Err(_) => continue,
                }
            };
            if xs.iter().any(|&v| v < -tol) {
                continue;
            }
            let mut x = vec![0.0; n];
            for (&j, &v) in support.iter().zip(&xs) {
                x[j] = v.max(0.0);
            }
            let resid = a
                .mul_vec(&x)
                .expect("shape")
                .iter()
                .zip(b)
                .fold(0.0f64, |m, (ax, bi)| m.max((ax - bi).abs()));
            if resid <= tol {
                out.push((support, x));
            }
        }
    }
    out
}

fn dual_feasible_basis(a: &Matrix, c: &[f64], support: &[usize], r: usize) -> Option<(Vec<usize>, Vec<f64>)> {
    let n = a.ncols();
    let rest: Vec<usize> = (0..n).filter(|j| !support.contains(j)).collect();
    let extra = r.checked_sub(support.len())?;
    let tol = 1e-9 * (1.0 + norm_inf(c));
    for pick in combinations(rest.len(), extra) {
        let mut basis: Vec<usize> = support.iter().copied().chain(pick.iter().map(|&i| rest[i])).collect();
        basis.sort_unstable();
        let ab = a.select_columns(&basis);
        if rank(&ab, 1e-10) < basis.len() {
            continue;
        }
        let cb: Vec<f64> = basis.iter().map(|&j| c[j]).collect();
        let abt = ab.transpose();
        let Ok(y) = lstsq_min_norm(&abt, &cb) else { continue };
        let aty = a.tr_mul_vec(&y).ok()?;
        let consistent = basis.iter().all(|&j| (aty[j] - c[j]).abs() <= tol);
        if consistent && aty.iter().zip(c).all(|(v, cj)| *v <= cj + tol) {
            return Some((basis, y));
        }
    }
    None
}

/// Index subsets of `0..n` of the given size, in lexicographic order.
pub(crate) fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if size > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..size).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..size).rev().find(|&i| cur[i] < n - size + i) else {
            return out;
        };
        cur[i] += 1;
        for k in i + 1..size {
            cur[k] = cur[k - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(rows: &[Vec<f64>], b: Vec<f64>, c: Vec<f64>) -> StandardFormLp {
        StandardFormLp::new(c, Matrix::from_rows(rows).unwrap(), b).unwrap()
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
        assert_eq!(combinations(12, 6).len(), 924);
    }

    #[test]
    fn one_row_optimal() {
        let p = lp(&[vec![1.0, 1.0]], vec![1.0], vec![1.0, 1.0]);
        let r = solve(&p).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.basis.as_ref().unwrap().len(), 1);
        let bf = brute_force_optimum(&p).unwrap();
        assert!((bf.objective.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_row_infeasible_with_certificate() {
        let p = lp(&[vec![1.0]], vec![-1.0], vec![1.0]);
        let r = solve(&p).unwrap();
        assert_eq!(r.status, Status::Infeasible);
        let f = r.farkas.unwrap();
        assert!(f[0] * 1.0 >= 0.0 && -f[0] < 0.0);
        assert_eq!(brute_force_optimum(&p).unwrap().status, Status::Infeasible);
    }

    #[test]
    fn one_row_unbounded() {
        let p = lp(&[vec![1.0, -1.0]], vec![0.0], vec![-1.0, 0.0]);
        assert_eq!(solve(&p).unwrap().status, Status::Unbounded);
        assert_eq!(brute_force_optimum(&p).unwrap().status, Status::Unbounded);
    }

    #[test]
    fn budget_examples() {
        let p = lp(&[vec![1.0]], vec![1.0], vec![1.0]);
        let r = solve_with_budget(&p, 10.0).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.x.as_ref().unwrap().len(), 1);
        assert!((r.x.unwrap()[0] - 1.0).abs() < 1e-12);
        assert!((r.objective.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.y.unwrap().len(), 2);
        // budget slack (column 1) is basic with value 9
        assert!(r.basis.unwrap().contains(&1));

        assert_eq!(solve_with_budget(&p, 0.5).unwrap().status, Status::Infeasible);
        assert!(solve_with_budget(&p, 0.0).is_err());
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let p = lp(
            &[vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 1.0, 1.0]],
            vec![1.0, 2.0, 1.0],
            vec![1.0, 2.0, 1.0],
        );
        let r = solve(&p).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective.unwrap() - 2.0).abs() < 1e-9);
        let bf = brute_force_optimum(&p).unwrap();
        assert!((bf.objective.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn zero_rhs() {
        let p = lp(&[vec![1.0, 2.0]], vec![0.0], vec![1.0, 1.0]);
        let r = solve(&p).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.objective.unwrap(), 0.0);
    }

    #[test]
    fn brute_force_size_limit() {
        let p = lp(&[vec![1.0; 13]], vec![1.0], vec![1.0; 13]);
        assert!(matches!(brute_force_optimum(&p), Err(Error::TooLarge(_))));
    }

    #[test]
    fn result_json_schema() {
        let p = lp(&[vec![1.0, 1.0]], vec![1.0], vec![1.0, 2.0]);
        let r = solve(&p).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["basis", "objective", "status", "x", "y"]);
    }
}
