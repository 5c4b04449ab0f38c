//! Real-valued error-correcting code decoded by ℓ₁ minimization.
//!
//! A bit message `w` is encoded as `z = Q w` with a Gaussian `Q`. The parity matrix `A`
//! annihilates `Q`, so a corrupted word `z̄ = z + x̄` gives `A z̄ = A x̄` and the sparse
//! error is found by minimizing `‖x‖₁` subject to `A x = A z̄`, optionally after
//! projecting those equality rows.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq_min_norm, norm1, rank, Matrix};
use crate::lp_model::StandardFormLp;
use crate::project::project_lp;
use crate::seed::{derive_seed, rng};
use crate::sketch::{projected_dimension, sample_projector, Projector, ProjectorKind};
use crate::solver::{solve, Status};

pub const DEFAULT_DELTA: f64 = 0.5;
/// Message-to-codeword length ratio used by [`NPolicy::default`].
pub const DEFAULT_RATIO: f64 = 0.91;
const MAX_CODE_ATTEMPTS: usize = 3;
const RANK_TOL: f64 = 1e-9;
const NONZERO_TOL: f64 = 1e-9;

/// Fixed-width packing: 7 bits per character, most significant bit first.
pub fn text_to_bits(s: &str) -> Result<Vec<u8>> {
    let mut bits = Vec::with_capacity(7 * s.len());
    for ch in s.chars() {
        let code = ascii(ch)?;
        bits.extend((0..7).rev().map(|i| (code >> i) & 1));
    }
    Ok(bits)
}

pub fn bits_to_text(bits: &[u8]) -> Result<String> {
    if !bits.len().is_multiple_of(7) {
        return Err(Error::BadLength(format!("{} bits is not a multiple of 7", bits.len())));
    }
    bits.chunks(7).map(|c| Ok(char::from(pack(c)?))).collect()
}

/// Packing without leading zeros: each character takes only as many bits as its
/// highest set bit requires (one bit for NUL). Returns the bit string and the per-character
/// widths needed to split it again.
pub fn text_to_bits_unpadded(s: &str) -> Result<(Vec<u8>, Vec<usize>)> {
    let mut bits = Vec::new();
    let mut widths = Vec::new();
    for ch in s.chars() {
        let code = ascii(ch)?;
        let width = (8 - code.leading_zeros() as usize).max(1);
        bits.extend((0..width).rev().map(|i| (code >> i) & 1));
        widths.push(width);
    }
    Ok((bits, widths))
}

pub fn bits_to_text_unpadded(bits: &[u8], widths: &[usize]) -> Result<String> {
    let total: usize = widths.iter().sum();
    if total != bits.len() || widths.iter().any(|&w| w == 0 || w > 7) {
        return Err(Error::BadLength(format!("{} bits do not match the given widths", bits.len())));
    }
    let mut out = String::with_capacity(widths.len());
    let mut pos = 0;
    for &w in widths {
        out.push(char::from(pack(&bits[pos..pos + w])?));
        pos += w;
    }
    Ok(out)
}

fn ascii(ch: char) -> Result<u8> {
    if ch.is_ascii() {
        Ok(ch as u8)
    } else {
        Err(Error::NonAscii(ch))
    }
}

fn pack(bits: &[u8]) -> Result<u8> {
    bits.iter().try_fold(0u8, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b),
        _ => Err(Error::BadLength(format!("bit value {b} is not 0 or 1"))),
    })
}

/// How a text becomes a bit message.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitEncoding {
    #[default]
    Fixed7,
    Unpadded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EccCode {
    pub m: usize,
    pub n: usize,
    /// Encoder, `n × m`.
    pub q: Matrix,
    /// Parity matrix, `m × n`, with `A Q = 0`.
    pub a: Matrix,
    pub a_rank: usize,
    pub seed: u64,
}

fn gaussian(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn make_code(m: usize, n: usize, seed: u64) -> Result<EccCode> {
    if m == 0 || m >= n {
        return Err(Error::BadDimension(format!("need 1 <= m < n, got m = {m}, n = {n}")));
    }
    for attempt in 0..MAX_CODE_ATTEMPTS {
        let mut r = rng(derive_seed(seed, attempt as u64));
        let q = gaussian(n, m, &mut r);
        let sv = q.singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > RANK_TOL * smax) {
            continue;
        }
        // Completing Q with random columns and orthogonalizing the lot; the trailing
        // n − m columns of the orthogonal factor span the left null space of Q.
        let mut full = DMatrix::zeros(n, n);
        full.columns_mut(0, m).copy_from(&q);
        full.columns_mut(m, n - m).copy_from(&gaussian(n, n - m, &mut r));
        let basis = full.qr().q();
        let null = basis.columns(m, n - m).into_owned();
        let g = gaussian(m, n - m, &mut r);
        let a = Matrix::from_nalgebra(&(g * null.transpose()));
        let q = Matrix::from_nalgebra(&q);
        let a_rank = rank(&a, RANK_TOL);
        return Ok(EccCode { m, n, q, a, a_rank, seed });
    }
    Err(Error::RankFailure(MAX_CODE_ATTEMPTS))
}

pub fn encode(code: &EccCode, w: &[u8]) -> Result<Vec<f64>> {
    if w.len() != code.m {
        return Err(Error::DimensionMismatch(format!("message of {} bits for m = {}", w.len(), code.m)));
    }
    let w: Vec<f64> = w.iter().map(|&b| f64::from(b)).collect();
    code.q.mul_vec(&w)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub delta: f64,
    pub rate: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(delta: f64, rate: f64, seed: u64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInstance(format!("noise amplitude must be positive, got {delta}")));
        }
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::InvalidInstance(format!("noise rate must be in [0, 1], got {rate}")));
        }
        Ok(Self { delta, rate, seed })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Noisy {
    pub z_bar: Vec<f64>,
    /// `z_bar − z`.
    pub error: Vec<f64>,
}

/// Perturbs each entry by `U[−δ, δ]` with probability `rate`. Both draws are taken for
/// every entry, so the same seed corrupts a superset of positions at a higher rate.
pub fn add_noise(z: &[f64], noise: &NoiseModel) -> Noisy {
    let mut r = rng(noise.seed);
    let error: Vec<f64> = z
        .iter()
        .map(|_| {
            let hit = r.gen::<f64>() < noise.rate;
            let v = r.gen_range(-noise.delta..=noise.delta);
            if hit {
                v
            } else {
                0.0
            }
        })
        .collect();
    let z_bar = z.iter().zip(&error).map(|(a, e)| a + e).collect();
    Noisy { z_bar, error }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeDiagnostics {
    /// Equality rows handed to the solver (`k` when projected).
    pub rows: usize,
    pub a_rank: usize,
    pub objective: f64,
    pub l1_norm: f64,
    pub nonzeros: usize,
    /// Entries whose unrounded value fell outside `[−0.5, 1.5]`.
    pub clamped: usize,
    pub solve_time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub bits: Vec<u8>,
    /// Recovered error vector.
    pub x: Vec<f64>,
    pub diagnostics: DecodeDiagnostics,
}

/// The ℓ₁ problem in standard form: `x = x⁺ − x⁻`, `min 1ᵀ(x⁺ + x⁻)` subject to
/// `[A, −A] (x⁺, x⁻) = b`. At an optimum `x⁺ᵢ x⁻ᵢ = 0`, so the objective is `‖x‖₁`.
pub fn l1_lp(a: &Matrix, b: &[f64]) -> Result<StandardFormLp> {
    let (m, n) = a.shape();
    let mut split = Matrix::zeros(m, 2 * n);
    for i in 0..m {
        let (pos, neg) = split.row_mut(i).split_at_mut(n);
        for ((p, q), &v) in pos.iter_mut().zip(neg.iter_mut()).zip(a.row(i)) {
            *p = v;
            *q = -v;
        }
    }
    StandardFormLp::new(vec![1.0; 2 * n], split, b.to_vec())
}

pub fn decode(code: &EccCode, z_bar: &[f64], projector: Option<&Projector>) -> Result<Decoded> {
    let n = code.n;
    if z_bar.len() != n {
        return Err(Error::DimensionMismatch(format!("received word of length {} for n = {n}", z_bar.len())));
    }
    let b = code.a.mul_vec(z_bar)?;
    let lp = l1_lp(&code.a, &b)?;

    let (target, rows) = match projector {
        Some(t) => (project_lp(&lp, t)?.projected, t.k()),
        None => (lp, code.m),
    };
    let start = Instant::now();
    let result = solve(&target)?;
    let solve_time = start.elapsed();
    let (Status::Optimal, Some(sol), Some(objective)) = (result.status, &result.x, result.objective) else {
        return Err(Error::SolveFailure(format!("ℓ₁ decoding LP ended {:?}", result.status)));
    };

    let x: Vec<f64> = (0..n).map(|j| sol[j] - sol[n + j]).collect();
    let z_clean: Vec<f64> = z_bar.iter().zip(&x).map(|(z, e)| z - e).collect();
    let w_real = lstsq_min_norm(&code.q, &z_clean)?;
    let clamped = w_real.iter().filter(|&&v| !(-0.5..=1.5).contains(&v)).count();
    let bits = w_real.iter().map(|&v| u8::from(v >= 0.5)).collect();

    Ok(Decoded {
        bits,
        diagnostics: DecodeDiagnostics {
            rows,
            a_rank: code.a_rank,
            objective,
            l1_norm: norm1(&x),
            nonzeros: x.iter().filter(|v| v.abs() > NONZERO_TOL).count(),
            clamped,
            solve_time: solve_time.as_secs_f64(),
        },
        x,
    })
}

/// Codeword length for an `m`-bit message.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum NPolicy {
    /// `n = round(m / ratio)`, at least `m + 1`.
    Ratio(f64),
    Fixed(usize),
}

impl Default for NPolicy {
    fn default() -> Self {
        NPolicy::Ratio(DEFAULT_RATIO)
    }
}

impl NPolicy {
    pub fn codeword_length(self, m: usize) -> Result<usize> {
        match self {
            NPolicy::Ratio(r) if r > 0.0 && r < 1.0 => Ok(((m as f64 / r).round() as usize).max(m + 1)),
            NPolicy::Ratio(r) => Err(Error::BadDimension(format!("ratio must be in (0, 1), got {r}"))),
            NPolicy::Fixed(n) if n > m => Ok(n),
            NPolicy::Fixed(n) => Err(Error::BadDimension(format!("n = {n} must exceed m = {m}"))),
        }
    }
}

/// Projected row count, given directly or through the JLL rule on the codeword length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProjDim {
    K(usize),
    Epsilon(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EccDemoConfig {
    pub n_policy: NPolicy,
    pub encoding: BitEncoding,
    pub delta: f64,
    pub rate: f64,
    pub dim: ProjDim,
    pub projector: ProjectorKind,
}

impl Default for EccDemoConfig {
    fn default() -> Self {
        Self {
            n_policy: NPolicy::default(),
            encoding: BitEncoding::Unpadded,
            delta: DEFAULT_DELTA,
            rate: 0.1,
            dim: ProjDim::Epsilon(0.3),
            projector: ProjectorKind::Sparse { q: 0.01 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOutcome {
    pub recovered_text: String,
    pub bit_errors: usize,
    pub perfect: bool,
    pub diagnostics: DecodeDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EccReport {
    pub text: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub a_rank: usize,
    pub corrupted: usize,
    pub seed: u64,
    pub unprojected: DecodeOutcome,
    pub projected: DecodeOutcome,
}

/// Encode, corrupt, and decode `text` with and without projection. The code, the noise
/// and the projector draw from independent streams derived from `seed`.
pub fn run_ecc_demo(text: &str, cfg: &EccDemoConfig, seed: u64) -> Result<EccReport> {
    if text.is_empty() {
        return Err(Error::BadLength("empty text".into()));
    }
    let (bits, widths) = match cfg.encoding {
        BitEncoding::Fixed7 => (text_to_bits(text)?, vec![7; text.chars().count()]),
        BitEncoding::Unpadded => text_to_bits_unpadded(text)?,
    };
    let m = bits.len();
    let n = cfg.n_policy.codeword_length(m)?;
    let k = match cfg.dim {
        ProjDim::K(k) => k,
        ProjDim::Epsilon(e) => projected_dimension(n, e)?,
    };

    let code = make_code(m, n, derive_seed(seed, 0))?;
    let noise = NoiseModel::new(cfg.delta, cfg.rate, derive_seed(seed, 1))?;
    let z = encode(&code, &bits)?;
    let noisy = add_noise(&z, &noise);
    let t = sample_projector(cfg.projector, k, m, derive_seed(seed, 2))?;

    let (plain, proj) = rayon::join(|| decode(&code, &noisy.z_bar, None), || decode(&code, &noisy.z_bar, Some(&t)));
    let outcome = |d: Decoded| -> Result<DecodeOutcome> {
        let bit_errors = d.bits.iter().zip(&bits).filter(|(a, b)| a != b).count();
        Ok(DecodeOutcome {
            recovered_text: bits_to_text_unpadded(&d.bits, &widths)?,
            bit_errors,
            perfect: bit_errors == 0,
            diagnostics: d.diagnostics,
        })
    };
    Ok(EccReport {
        text: text.to_string(),
        m,
        n,
        k,
        a_rank: code.a_rank,
        corrupted: noisy.error.iter().filter(|v| **v != 0.0).count(),
        seed,
        unprojected: outcome(plain?)?,
        projected: outcome(proj?)?,
    })
}
