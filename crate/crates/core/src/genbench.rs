//! Random instance generators and the benchmark harness.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::lp_model::StandardFormLp;
use crate::retrieve::{project_and_solve, PipelineConfig, RetrievalMethod};
use crate::seed::{derive_seed, derive_seed2, rng};
use crate::sketch::projected_dimension;
use crate::solver::{solve, Status};

const MAX_RESAMPLES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_feasible")]
    pub feasible: bool,
}

fn default_feasible() -> bool {
    true
}

impl GenConfig {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::InvalidInstance(format!("need 1 <= m <= n, got m = {}, n = {}", self.m, self.n)));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidInstance(format!("density must be in (0, 1], got {}", self.density)));
        }
        Ok(())
    }
}

/// Entries uniform on `[0, 1)`, each kept with probability `density`. Resamples when a
/// row or column comes out empty.
fn sample_matrix<R: Rng>(cfg: &GenConfig, rng: &mut R) -> Result<Matrix> {
    for _ in 0..MAX_RESAMPLES {
        let mut a = Matrix::zeros(cfg.m, cfg.n);
        for i in 0..cfg.m {
            for v in a.row_mut(i) {
                if rng.gen::<f64>() < cfg.density {
                    *v = rng.gen::<f64>();
                }
            }
        }
        let empty_row = (0..cfg.m).any(|i| a.row(i).iter().all(|&v| v == 0.0));
        let empty_col = (0..cfg.n).any(|j| (0..cfg.m).all(|i| a[(i, j)] == 0.0));
        if !empty_row && !empty_col {
            return Ok(a);
        }
    }
    Err(Error::DegenerateInstance(MAX_RESAMPLES))
}

/// Planted-solution instance: `x ~ U[0,1]ⁿ`, `b = A x`, `c = 1`.
pub fn gen_feasible(cfg: &GenConfig) -> Result<(StandardFormLp, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = rng(cfg.seed);
    let a = sample_matrix(cfg, &mut rng)?;
    let x: Vec<f64> = (0..cfg.n).map(|_| rng.gen::<f64>()).collect();
    let b = a.mul_vec(&x)?;
    Ok((StandardFormLp::new(vec![1.0; cfg.n], a, b)?, x))
}

/// Infeasible instance with certificate `y ~ U[0.1, 1]ᵐ` and `b = −y`: since `A ≥ 0`,
/// `yᵀA ≥ 0` while `yᵀb = −‖y‖² < 0`.
pub fn gen_infeasible(cfg: &GenConfig) -> Result<(StandardFormLp, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = rng(cfg.seed);
    let a = sample_matrix(cfg, &mut rng)?;
    let y: Vec<f64> = (0..cfg.m).map(|_| rng.gen_range(0.1..=1.0)).collect();
    let b: Vec<f64> = y.iter().map(|v| -v).collect();
    Ok((StandardFormLp::new(vec![1.0; cfg.n], a, b)?, y))
}

/// Checks `yᵀA ≥ 0` and `yᵀb < 0` directly.
pub fn is_farkas_certificate(lp: &StandardFormLp, y: &[f64], tol: f64) -> bool {
    let Ok(ya) = lp.a().tr_mul_vec(y) else { return false };
    ya.iter().all(|&v| v >= -tol) && crate::linalg::dot(y, lp.b()) < -tol
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub m: usize,
    pub n: usize,
    pub density: f64,
    pub k: usize,
    pub epsilon: f64,
    /// Empty on per-cell mean rows.
    pub seed: Option<u64>,
    pub org_time: f64,
    pub prj_time: f64,
    /// Infeasible runs: projected status equals original status.
    pub status_match: Option<bool>,
    pub feas1: Option<f64>,
    pub feas2: Option<f64>,
    pub neg1: Option<f64>,
    pub neg2: Option<f64>,
    pub obj1: Option<f64>,
    pub obj2: Option<f64>,
    /// Failure cause, if the run broke down; not written to CSV.
    #[serde(skip)]
    pub error: Option<String>,
}

pub const CSV_HEADER: [&str; 15] = [
    "m", "n", "dens", "k", "eps", "seed", "org_time", "prj_time", "status_match", "feas1", "feas2", "neg1",
    "neg2", "obj1", "obj2",
];

/// Runs every cell of `grid` with `instances_per_cell` fresh instances each and one
/// projector sample per instance. Instances run in parallel on the ambient rayon pool.
/// Per-instance failures end up in [`BenchRecord::error`] instead of aborting the sweep.
pub fn run_bench(grid: &[GenConfig], epsilon: f64, instances_per_cell: usize, master_seed: u64) -> Vec<BenchRecord> {
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..instances_per_cell).map(move |i| (c, i)))
        .collect();
    jobs.par_iter()
        .map(|&(c, i)| {
            let cell = grid[c];
            let seed = derive_seed2(derive_seed(master_seed, cell.seed), c as u64, i as u64);
            bench_instance(&cell, epsilon, seed)
        })
        .collect()
}

fn bench_instance(cell: &GenConfig, epsilon: f64, seed: u64) -> BenchRecord {
    let mut rec = BenchRecord {
        m: cell.m,
        n: cell.n,
        density: cell.density,
        k: projected_dimension(cell.n, epsilon).unwrap_or(0),
        epsilon,
        seed: Some(seed),
        ..Default::default()
    };
    if let Err(e) = fill_record(&mut rec, cell, epsilon, seed) {
        rec.error = Some(e.to_string());
    }
    rec
}

fn fill_record(rec: &mut BenchRecord, cell: &GenConfig, epsilon: f64, seed: u64) -> Result<()> {
    let cfg = GenConfig { seed, ..*cell };
    let lp = if cell.feasible { gen_feasible(&cfg)?.0 } else { gen_infeasible(&cfg)?.0 };

    let t = Instant::now();
    let original = solve(&lp)?;
    rec.org_time = t.elapsed().as_secs_f64();

    let pc = PipelineConfig::new(epsilon, RetrievalMethod::Pseudoinverse);
    let t = Instant::now();
    let projected = project_and_solve(&lp, &pc, derive_seed(seed, 1));
    let solve_time = t.elapsed().as_secs_f64();

    if !cell.feasible {
        rec.prj_time = solve_time;
        let projected_status = match projected {
            Ok(_) => Status::Optimal,
            Err(Error::InfeasibleProjection) => Status::Infeasible,
            Err(Error::UnboundedProjection) => Status::Unbounded,
            Err(e) => return Err(e),
        };
        rec.status_match = Some(projected_status == original.status);
        return Ok(());
    }

    let ps = projected?;
    let reference = original.objective;
    let (pinv, pinv_time) = ps.retrieve(&lp, RetrievalMethod::Pseudoinverse, reference)?;
    rec.prj_time = solve_time + pinv_time.as_secs_f64();
    rec.feas2 = Some(pinv.metrics.feas);
    rec.neg2 = Some(pinv.metrics.neg);
    rec.obj2 = Some(pinv.metrics.obj);
    let (alg2, _) = ps.retrieve(&lp, RetrievalMethod::BasisAlg2, reference)?;
    rec.feas1 = Some(alg2.metrics.feas);
    rec.neg1 = Some(alg2.metrics.neg);
    rec.obj1 = Some(alg2.metrics.obj);
    Ok(())
}

/// One mean row per `(m, n, density)` cell, in order of first appearance. Failed runs
/// are skipped; `status_match` is true only if every run in the cell matched.
pub fn cell_means(records: &[BenchRecord]) -> Vec<BenchRecord> {
    let mut keys: Vec<(usize, usize, u64, bool)> = Vec::new();
    for r in records {
        let key = (r.m, r.n, r.density.to_bits(), r.status_match.is_some());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|key| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| (r.m, r.n, r.density.to_bits(), r.status_match.is_some()) == key && r.error.is_none())
                .collect();
            let mean = |f: &dyn Fn(&BenchRecord) -> Option<f64>| {
                let vals: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            };
            let first = records
                .iter()
                .find(|r| (r.m, r.n, r.density.to_bits(), r.status_match.is_some()) == key)
                .expect("key came from records");
            BenchRecord {
                m: first.m,
                n: first.n,
                density: first.density,
                k: first.k,
                epsilon: first.epsilon,
                seed: None,
                org_time: mean(&|r| Some(r.org_time)).unwrap_or(0.0),
                prj_time: mean(&|r| Some(r.prj_time)).unwrap_or(0.0),
                status_match: key.3.then(|| group.iter().all(|r| r.status_match == Some(true))),
                feas1: mean(&|r| r.feas1),
                feas2: mean(&|r| r.feas2),
                neg1: mean(&|r| r.neg1),
                neg2: mean(&|r| r.neg2),
                obj1: mean(&|r| r.obj1),
                obj2: mean(&|r| r.obj2),
                error: None,
            }
        })
        .collect()
}

/// Shortest representation that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_csv_to<W: Write>(records: &[BenchRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in records {
        wr.write_record([
            r.m.to_string(),
            r.n.to_string(),
            num(r.density),
            r.k.to_string(),
            num(r.epsilon),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            num(r.org_time),
            num(r.prj_time),
            r.status_match.map(|b| b.to_string()).unwrap_or_default(),
            opt_num(r.feas1),
            opt_num(r.feas2),
            opt_num(r.neg1),
            opt_num(r.neg2),
            opt_num(r.obj1),
            opt_num(r.obj2),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv_to(records, std::io::BufWriter::new(f))
}

pub fn read_csv_from<R: Read>(r: R) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::InvalidInstance(format!("unexpected CSV header {header:?}")));
    }
    let bad = |field: &str| Error::InvalidInstance(format!("unparsable CSV field {field:?}"));
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| get(i).parse::<f64>().map_err(|_| bad(get(i)));
        let opt_num = |i: usize| -> Result<Option<f64>> {
            if get(i).is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let int = |i: usize| get(i).parse::<usize>().map_err(|_| bad(get(i)));
        out.push(BenchRecord {
            m: int(0)?,
            n: int(1)?,
            density: num(2)?,
            k: int(3)?,
            epsilon: num(4)?,
            seed: if get(5).is_empty() { None } else { Some(get(5).parse().map_err(|_| bad(get(5)))?) },
            org_time: num(6)?,
            prj_time: num(7)?,
            status_match: match get(8) {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => return Err(bad(other)),
            },
            feas1: opt_num(9)?,
            feas2: opt_num(10)?,
            neg1: opt_num(11)?,
            neg2: opt_num(12)?,
            obj1: opt_num(13)?,
            obj2: opt_num(14)?,
            error: None,
        });
    }
    Ok(out)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    read_csv_from(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(m: usize, n: usize, density: f64, seed: u64, feasible: bool) -> GenConfig {
        GenConfig { m, n, density, seed, feasible }
    }

    #[test]
    fn feasible_generator_properties() {
        let (lp, x) = gen_feasible(&cfg(8, 12, 1.0, 4, true)).unwrap();
        assert!(lp.a().as_slice().iter().all(|&v| v > 0.0));
        assert!(lp.c().iter().all(|&v| v == 1.0));
        let r = lp.residual(&x).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-12));
        let (again, x2) = gen_feasible(&cfg(8, 12, 1.0, 4, true)).unwrap();
        assert_eq!(again, lp);
        assert_eq!(x2, x);
    }

    #[test]
    fn infeasible_generator_certificate() {
        let (lp, y) = gen_infeasible(&cfg(6, 9, 0.5, 2, false)).unwrap();
        assert!(is_farkas_certificate(&lp, &y, 0.0));
        assert!(y.iter().all(|&v| (0.1..=1.0).contains(&v)));
        assert_eq!(gen_infeasible(&cfg(6, 9, 0.5, 2, false)).unwrap().0, lp);
    }

    #[test]
    fn bad_configs_rejected() {
        assert!(gen_feasible(&cfg(5, 4, 0.5, 0, true)).is_err());
        assert!(gen_feasible(&cfg(2, 4, 0.0, 0, true)).is_err());
        assert!(gen_feasible(&cfg(2, 4, 1.5, 0, true)).is_err());
    }

    #[test]
    fn sparse_density_eventually_degenerate() {
        // With density this low, every resample has an empty row or column.
        assert!(matches!(
            gen_feasible(&cfg(50, 60, 1e-4, 0, true)),
            Err(Error::DegenerateInstance(MAX_RESAMPLES))
        ));
    }

    #[test]
    fn empty_grid() {
        assert!(run_bench(&[], 0.2, 3, 1).is_empty());
    }

    #[test]
    fn csv_header_only_and_round_trip() {
        let mut buf = Vec::new();
        write_csv_to(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));

        let recs = vec![
            BenchRecord {
                m: 3,
                n: 5,
                density: 0.3,
                k: 4,
                epsilon: 0.2,
                seed: Some(u64::MAX),
                org_time: 0.1 + 0.2,
                prj_time: 1e-7,
                status_match: Some(false),
                ..Default::default()
            },
            BenchRecord {
                m: 3,
                n: 5,
                density: 0.3,
                k: 4,
                epsilon: 0.2,
                seed: None,
                feas1: Some(1.0 / 3.0),
                feas2: Some(0.0),
                neg1: Some(2f64.sqrt()),
                neg2: Some(5e-324),
                obj1: Some(123456.789),
                obj2: Some(0.5),
                ..Default::default()
            },
        ];
        let mut buf = Vec::new();
        write_csv_to(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(read_csv_from(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn means_group_by_cell() {
        let mk = |feas2: f64| BenchRecord { m: 2, n: 3, density: 0.5, feas2: Some(feas2), ..Default::default() };
        let means = cell_means(&[mk(1.0), mk(3.0)]);
        assert_eq!(means.len(), 1);
        assert_eq!(means[0].feas2, Some(2.0));
        assert_eq!(means[0].seed, None);
    }
}
