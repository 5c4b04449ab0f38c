use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lpsketch::ecc::{run_ecc_demo, BitEncoding, EccDemoConfig, NPolicy, ProjDim};
use lpsketch::genbench::{cell_means, gen_feasible, gen_infeasible, run_bench, write_csv_to, GenConfig};
use lpsketch::project::{preservation_trial, project_lp, TrialKind, TrialParams};
use lpsketch::retrieve::{full_pipeline, PipelineConfig, RetrievalMethod};
use lpsketch::seed::derive_seed;
use lpsketch::sketch::{distortion_stats, gaussian_points, projected_dimension, sample_projector, ProjectorKind};
use lpsketch::solver::solve;
use lpsketch::{Error, StandardFormLp};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "lpsketch", version, about = "Random projections for standard-form linear programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; falls back to LPSKETCH_SEED, then 0.
    #[arg(long, env = "LPSKETCH_SEED", default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ProjectorArgs {
    /// JLL distortion; sets the row count unless --k is given.
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    /// Explicit projected row count.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value_t = Kind::Sparse)]
    projector: Kind,
    /// Nonzero probability per sign for the sparse projector.
    #[arg(long)]
    q: Option<f64>,
}

impl ProjectorArgs {
    fn kind(&self) -> anyhow::Result<ProjectorKind> {
        Ok(ProjectorKind::parse(self.projector.name(), self.q)?)
    }

    fn rows(&self, n: usize) -> anyhow::Result<usize> {
        Ok(match self.k {
            Some(k) => k,
            None => projected_dimension(n, self.eps)?,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Gaussian,
    Orthogonal,
    Rademacher,
    Sparse,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Gaussian => "gaussian",
            Kind::Orthogonal => "orthogonal",
            Kind::Rademacher => "rademacher",
            Kind::Sparse => "sparse",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Alg2,
    Pinv,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrialArg {
    Cone,
    Hull,
    Feasibility,
    Infeasibility,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    Fixed7,
    Unpadded,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance as LP JSON.
    Gen {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        /// Generate a Farkas-infeasible instance.
        #[arg(long)]
        infeasible: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Solve an LP JSON file with the simplex method.
    Solve {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Project the equality constraints of an LP.
    Project {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        projector: ProjectorArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Project, solve, and retrieve a solution of the original LP.
    Retrieve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Pinv)]
        method: Method,
        #[command(flatten)]
        projector: ProjectorArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Benchmark grid of random instances; writes CSV.
    Bench {
        /// JSON list of instance configurations.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        eps: f64,
        /// Use only the first this many cells of the grid.
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long, default_value_t = 10)]
        per_cell: usize,
        #[arg(long)]
        threads: Option<usize>,
        /// Also write per-cell mean rows to this CSV file.
        #[arg(long)]
        means: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Distance and inner-product distortion of random points under a projector.
    JllCheck {
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long, default_value_t = 1000)]
        dim: usize,
        #[command(flatten)]
        projector: ProjectorArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Encode text, add sparse noise, and decode with and without projection.
    Ecc {
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 0.1)]
        rate: f64,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, conflicts_with = "eps")]
        k: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 0.01)]
        q: f64,
        /// Message-to-codeword length ratio.
        #[arg(long, default_value_t = 0.91)]
        ratio: f64,
        #[arg(long, value_enum, default_value_t = Encoding::Unpadded)]
        encoding: Encoding,
        #[command(flatten)]
        common: Common,
    },
    /// Preservation trials for membership and feasibility questions; writes CSV.
    Trial {
        #[arg(long, value_enum)]
        kind: TrialArg,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.3)]
        density: f64,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[command(flatten)]
        projector: ProjectorArgs,
        #[command(flatten)]
        common: Common,
    },
}

fn read_lp(path: &Path) -> anyhow::Result<StandardFormLp> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(StandardFormLp::from_json(&text)?)
}

fn emit_bytes(out: &Option<PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> anyhow::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit_bytes(out, s.as_bytes())
}

#[derive(Serialize)]
struct ProjectOutput<'a> {
    projector: &'a lpsketch::Projector,
    projected: &'a StandardFormLp,
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Gen { m, n, density, infeasible, common } => {
            let cfg = GenConfig { m, n, density, seed: common.seed, feasible: !infeasible };
            let lp = if infeasible { gen_infeasible(&cfg)?.0 } else { gen_feasible(&cfg)?.0 };
            emit_bytes(&common.out, format!("{}\n", lp.to_json()?).as_bytes())
        }
        Command::Solve { input, common } => {
            let lp = read_lp(&input)?;
            let result = match lp.theta() {
                Some(theta) => lpsketch::solver::solve_with_budget(&lp, theta)?,
                None => solve(&lp)?,
            };
            if common.out.is_some() {
                match result.objective {
                    Some(v) => println!("{:?}: objective {v}", result.status),
                    None => println!("{:?}", result.status),
                }
            }
            emit_json(&common.out, &result)
        }
        Command::Project { input, projector, common } => {
            let lp = read_lp(&input)?;
            let k = projector.rows(lp.n())?;
            let t = sample_projector(projector.kind()?, k, lp.m(), derive_seed(common.seed, 0))?;
            let p = project_lp(&lp, &t)?;
            emit_json(&common.out, &ProjectOutput { projector: &p.projector, projected: &p.projected })
        }
        Command::Retrieve { input, method, projector, common } => {
            let lp = read_lp(&input)?;
            let method = match method {
                Method::Alg2 => RetrievalMethod::BasisAlg2,
                Method::Pinv => RetrievalMethod::Pseudoinverse,
            };
            let reference = solve(&lp)?.objective;
            let cfg = PipelineConfig {
                epsilon: projector.eps,
                k: projector.k,
                projector: projector.kind()?,
                method,
                reference_value: reference,
            };
            let run = full_pipeline(&lp, &cfg, common.seed)?;
            emit_json(&common.out, &run.report)
        }
        Command::Bench { grid, eps, cells, per_cell, threads, means, common } => {
            let text = fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let mut grid: Vec<GenConfig> = serde_json::from_str(&text).context("parsing grid")?;
            if let Some(c) = cells {
                if c > grid.len() {
                    bail!(Error::InvalidInstance(format!("--cells {c} exceeds the {} cells in the grid", grid.len())));
                }
                grid.truncate(c);
            }
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build()?;
            let records = pool.install(|| run_bench(&grid, eps, per_cell, common.seed));
            for (i, r) in records.iter().enumerate() {
                if let Some(e) = &r.error {
                    eprintln!("warning: record {i} (m = {}, n = {}): {e}", r.m, r.n);
                }
            }
            let mut buf = Vec::new();
            write_csv_to(&records, &mut buf)?;
            emit_bytes(&common.out, &buf)?;
            if let Some(path) = means {
                let mut buf = Vec::new();
                write_csv_to(&cell_means(&records), &mut buf)?;
                fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(())
        }
        Command::JllCheck { points, dim, projector, common } => {
            let pts = gaussian_points(points, dim, derive_seed(common.seed, 0));
            let k = projector.rows(points)?;
            let t = sample_projector(projector.kind()?, k, dim, derive_seed(common.seed, 1))?;
            emit_json(&common.out, &distortion_stats(&t, &pts, projector.eps)?)
        }
        Command::Ecc { text, rate, delta, k, eps, q, ratio, encoding, common } => {
            let cfg = EccDemoConfig {
                n_policy: NPolicy::Ratio(ratio),
                encoding: match encoding {
                    Encoding::Fixed7 => BitEncoding::Fixed7,
                    Encoding::Unpadded => BitEncoding::Unpadded,
                },
                delta,
                rate,
                dim: match (k, eps) {
                    (Some(k), _) => ProjDim::K(k),
                    (None, e) => ProjDim::Epsilon(e.unwrap_or(0.3)),
                },
                projector: ProjectorKind::parse("sparse", Some(q))?,
            };
            emit_json(&common.out, &run_ecc_demo(&text, &cfg, common.seed)?)
        }
        Command::Trial { kind, m, n, density, trials, margin, projector, common } => {
            let kind = match kind {
                TrialArg::Cone => TrialKind::Cone,
                TrialArg::Hull => TrialKind::Hull,
                TrialArg::Feasibility => TrialKind::Feasibility,
                TrialArg::Infeasibility => TrialKind::Infeasibility,
            };
            let params = TrialParams {
                m,
                n,
                density,
                projector: projector.kind()?,
                k: projector.k,
                margin,
            };
            let outcome = preservation_trial(kind, &params, projector.eps, trials, common.seed)?;
            eprintln!("agreement rate {}", outcome.rate);
            let mut buf = Vec::new();
            outcome.write_csv(&mut buf)?;
            emit_bytes(&common.out, &buf)
        }
    }
}

/// 2 for failures of the numerics, 1 for everything the caller can fix.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::NumericalFailure(_)
            | Error::SolveFailure(_)
            | Error::InfeasibleProjection
            | Error::UnboundedProjection
            | Error::RankFailure(_)
            | Error::DegenerateInstance(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
