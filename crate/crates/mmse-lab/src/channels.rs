//! Channel-model construction, validation, and reproducible sampling of
//! random channel realizations.
//!
//! Three model families are supported, all normalized so that
//! `E[tr(H H^H)] = N_r * N_t`:
//!
//! * i.i.d. Rayleigh: entries CN(0, 1),
//! * separable (Kronecker) Rayleigh: `H = R^{1/2} G S^{1/2}`,
//! * rank-1 Rician: `H = M + sqrt(1/(K+1)) G` with a deterministic specular
//!   component `M` of squared Frobenius norm `K/(K+1) * N_r * N_t`.
//!
//! Sampling is keyed and counter-based: sample `index` under `seed` is drawn
//! from its own ChaCha8 stream, so realizations are identical no matter in
//! which order or on how many threads they are generated.

use crate::matkit::{hermitian_eig_desc, principal_minor, DIM_LIMIT};
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

/// Antenna counts with the derived min/max indices used throughout the
/// closed forms, and the load ratio `beta = N_t / N_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AntennaConfig {
    nr: usize,
    nt: usize,
}

impl AntennaConfig {
    pub fn new(nr: usize, nt: usize) -> Result<Self> {
        if nr < 1 || nt < 1 {
            return Err(Error::InvalidConfig(format!(
                "antenna counts must be >= 1, got nr={nr}, nt={nt}"
            )));
        }
        if nr > DIM_LIMIT || nt > DIM_LIMIT {
            return Err(Error::DimensionLimit(nr.max(nt), DIM_LIMIT));
        }
        Ok(AntennaConfig { nr, nt })
    }

    #[inline]
    pub fn nr(&self) -> usize {
        self.nr
    }

    #[inline]
    pub fn nt(&self) -> usize {
        self.nt
    }

    /// `n = min(N_r, N_t)`.
    #[inline]
    pub fn n(&self) -> usize {
        self.nr.min(self.nt)
    }

    /// `m = max(N_r, N_t)`.
    #[inline]
    pub fn m(&self) -> usize {
        self.nr.max(self.nt)
    }

    /// `n' = min(N_r, N_t - 1)`.
    #[inline]
    pub fn n_prime(&self) -> usize {
        self.nr.min(self.nt - 1)
    }

    /// `m' = max(N_r, N_t - 1)`.
    #[inline]
    pub fn m_prime(&self) -> usize {
        self.nr.max(self.nt - 1)
    }

    /// Load ratio `beta = N_t / N_r`.
    #[inline]
    pub fn beta(&self) -> f64 {
        self.nt as f64 / self.nr as f64
    }

    /// MMSE sum-rate operations remove one column of `H`, so they need at
    /// least two transmit antennas.
    pub fn require_multi_stream(&self) -> Result<()> {
        if self.nt < 2 {
            Err(Error::InvalidConfig(format!(
                "MMSE sum-rate operations need nt >= 2, got nt={}",
                self.nt
            )))
        } else {
            Ok(())
        }
    }
}

/// Hermitian positive-definite unit-diagonal correlation matrix with its
/// eigenvalues cached in descending order.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    entries: DMatrix<Complex64>,
    eig: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let n = entries.nrows();
        for i in 0..n {
            let d = entries[(i, i)];
            if (d.re - 1.0).abs() > 1e-12 || d.im.abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "correlation matrix diagonal entry {i} is {d}, must be 1"
                )));
            }
        }
        let eig = hermitian_eig_desc(&entries)?;
        if *eig.last().expect("nonempty") <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(CorrelationMatrix { entries, eig })
    }

    pub fn from_real(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidConfig("correlation matrix must be square".into()));
        }
        let m = DMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j], 0.0));
        Self::new(m)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim < 1 || dim > DIM_LIMIT {
            return Err(Error::InvalidConfig(format!("bad correlation dimension {dim}")));
        }
        Ok(CorrelationMatrix {
            entries: DMatrix::identity(dim, dim),
            eig: vec![1.0; dim],
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    #[inline]
    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    /// Cached eigenvalues, descending.
    #[inline]
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig
    }

    pub fn is_identity(&self) -> bool {
        let n = self.dim();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                let v = self.entries[(i, j)];
                if (v.re - want).abs() > 1e-15 || v.im.abs() > 1e-15 {
                    return false;
                }
            }
        }
        true
    }

    /// The `(i,i)`-th principal minor, itself a valid correlation matrix.
    pub fn minor(&self, i: usize) -> Result<CorrelationMatrix> {
        if self.dim() < 2 || i >= self.dim() {
            return Err(Error::InvalidConfig(format!(
                "minor index {i} out of range for dim {}",
                self.dim()
            )));
        }
        CorrelationMatrix::new(principal_minor(&self.entries, i))
    }

    /// `tr(L^2) / dim`, the dispersion of a unit-diagonal correlation matrix.
    pub fn dispersion(&self) -> f64 {
        self.eig.iter().map(|v| v * v).sum::<f64>() / self.dim() as f64
    }
}

/// Exponential correlation profile: entry `(i, j) = rho^|i-j|`. Positive
/// definite for every `0 <= rho < 1`.
pub fn build_exp_correlation(dim: usize, rho: f64) -> Result<CorrelationMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidConfig(format!(
            "exponential correlation needs 0 <= rho < 1, got {rho}"
        )));
    }
    if dim < 1 || dim > DIM_LIMIT {
        return Err(Error::InvalidConfig(format!("bad correlation dimension {dim}")));
    }
    let m = DMatrix::from_fn(dim, dim, |i, j| {
        Complex64::new(rho.powi((i as i32 - j as i32).abs()), 0.0)
    });
    CorrelationMatrix::new(m)
}

/// A validated channel model, immutable after construction.
#[derive(Debug, Clone)]
pub enum ChannelModel {
    IidRayleigh {
        cfg: AntennaConfig,
    },
    SeparableRayleigh {
        cfg: AntennaConfig,
        r: CorrelationMatrix,
        s: CorrelationMatrix,
        /// Hermitian square roots, factored once at build time.
        r_sqrt: DMatrix<Complex64>,
        s_sqrt: DMatrix<Complex64>,
    },
    RicianRank1 {
        cfg: AntennaConfig,
        k_factor: f64,
        theta_r: f64,
        theta_t: f64,
        /// Specular component `sqrt(K/(K+1)) a(theta_r) a(theta_t)^T`.
        mean: DMatrix<Complex64>,
    },
}

/// Uniform-linear-array response with half-wavelength spacing:
/// `a_k(theta) = exp(i pi k sin(theta))`, `k = 0..dim-1`. Unit-modulus
/// entries keep the channel power normalization exact for any geometry.
pub fn array_response(dim: usize, theta: f64) -> Vec<Complex64> {
    (0..dim)
        .map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 * theta.sin()))
        .collect()
}

/// Hermitian square root via eigendecomposition, eigenvalues clamped at
/// 1e-14 before the square root.
fn hermitian_sqrt(a: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let eig = nalgebra::SymmetricEigen::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or(Error::EigNonConvergence)?;
    let mut d = DMatrix::<Complex64>::zeros(a.nrows(), a.ncols());
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        d[(i, i)] = Complex64::new(v.max(1e-14).sqrt(), 0.0);
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

impl ChannelModel {
    pub fn iid(cfg: AntennaConfig) -> Self {
        ChannelModel::IidRayleigh { cfg }
    }

    pub fn separable(
        cfg: AntennaConfig,
        r: CorrelationMatrix,
        s: CorrelationMatrix,
    ) -> Result<Self> {
        if r.dim() != cfg.nr() || s.dim() != cfg.nt() {
            return Err(Error::InvalidConfig(format!(
                "correlation dimensions ({}, {}) do not match antennas ({}, {})",
                r.dim(),
                s.dim(),
                cfg.nr(),
                cfg.nt()
            )));
        }
        let r_sqrt = hermitian_sqrt(r.entries())?;
        let s_sqrt = hermitian_sqrt(s.entries())?;
        Ok(ChannelModel::SeparableRayleigh { cfg, r, s, r_sqrt, s_sqrt })
    }

    pub fn rician(cfg: AntennaConfig, k_factor: f64, theta_r: f64, theta_t: f64) -> Result<Self> {
        if !(k_factor.is_finite() && k_factor >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Rician K-factor must be finite and >= 0, got {k_factor}"
            )));
        }
        let ar = array_response(cfg.nr(), theta_r);
        let at = array_response(cfg.nt(), theta_t);
        let amp = (k_factor / (k_factor + 1.0)).sqrt();
        let mean = DMatrix::from_fn(cfg.nr(), cfg.nt(), |i, j| amp * ar[i] * at[j]);
        Ok(ChannelModel::RicianRank1 { cfg, k_factor, theta_r, theta_t, mean })
    }

    pub fn cfg(&self) -> AntennaConfig {
        match self {
            ChannelModel::IidRayleigh { cfg }
            | ChannelModel::SeparableRayleigh { cfg, .. }
            | ChannelModel::RicianRank1 { cfg, .. } => *cfg,
        }
    }

    /// Whether the columns of `H` are exchangeable, i.e. every
    /// column-deleted submatrix has the same distribution. True except
    /// under transmit-side correlation.
    pub fn columns_exchangeable(&self) -> bool {
        match self {
            ChannelModel::IidRayleigh { .. } | ChannelModel::RicianRank1 { .. } => true,
            ChannelModel::SeparableRayleigh { s, .. } => s.is_identity(),
        }
    }
}

/// One channel draw for (`seed`, `index`). Deterministic in the pair: the
/// draw lives on its own ChaCha8 stream, independent of call order.
pub fn sample_channel(model: &ChannelModel, seed: u64, index: u64) -> DMatrix<Complex64> {
    let cfg = model.cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let g = standard_complex_gaussian(&mut rng, cfg.nr(), cfg.nt());
    match model {
        ChannelModel::IidRayleigh { .. } => g,
        ChannelModel::SeparableRayleigh { r_sqrt, s_sqrt, .. } => r_sqrt * g * s_sqrt,
        ChannelModel::RicianRank1 { k_factor, mean, .. } => {
            let scale = Complex64::new((1.0 / (k_factor + 1.0)).sqrt(), 0.0);
            mean + g * scale
        }
    }
}

/// Row-major matrix of i.i.d. CN(0, 1) entries; each entry is one
/// Box-Muller pair (real and imaginary parts N(0, 1/2)).
fn standard_complex_gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            // u1 in (0, 1], u2 in [0, 1)
            let u1 = ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64;
            let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let radius = (-2.0 * u1.ln()).sqrt();
            let angle = 2.0 * std::f64::consts::PI * u2;
            // Divide by sqrt(2) for unit total variance per complex entry.
            m[(i, j)] = Complex64::new(
                radius * angle.cos() / std::f64::consts::SQRT_2,
                radius * angle.sin() / std::f64::consts::SQRT_2,
            );
        }
    }
    m
}

/// JSON channel description accepted by the CLI and `build_model`:
///
/// ```json
/// {"model": "separable", "nr": 5, "nt": 3, "rho_t": 0.5}
/// {"model": "rician", "nr": 2, "nt": 2, "k_factor": 1.0, "theta_r": 0.3, "theta_t": 0.7}
/// ```
///
/// Explicit `R`/`S` matrix entries override the `rho_r`/`rho_t` shorthand.
#[derive(Debug, Clone, Deserialize)]
pub struct ModelConfig {
    pub model: String,
    pub nr: usize,
    pub nt: usize,
    #[serde(default)]
    pub rho_r: Option<f64>,
    #[serde(default)]
    pub rho_t: Option<f64>,
    #[serde(default, rename = "R")]
    pub r: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "S")]
    pub s: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub k_factor: Option<f64>,
    #[serde(default)]
    pub theta_r: Option<f64>,
    #[serde(default)]
    pub theta_t: Option<f64>,
}

/// Validate a parsed config into a channel model.
pub fn build_model(config: &ModelConfig) -> Result<ChannelModel> {
    let cfg = AntennaConfig::new(config.nr, config.nt)?;
    match config.model.as_str() {
        "iid" => Ok(ChannelModel::iid(cfg)),
        "separable" => {
            let r = match (&config.r, config.rho_r) {
                (Some(rows), _) => CorrelationMatrix::from_real(rows)?,
                (None, Some(rho)) => build_exp_correlation(cfg.nr(), rho)?,
                (None, None) => CorrelationMatrix::identity(cfg.nr())?,
            };
            let s = match (&config.s, config.rho_t) {
                (Some(rows), _) => CorrelationMatrix::from_real(rows)?,
                (None, Some(rho)) => build_exp_correlation(cfg.nt(), rho)?,
                (None, None) => CorrelationMatrix::identity(cfg.nt())?,
            };
            ChannelModel::separable(cfg, r, s)
        }
        "rician" => ChannelModel::rician(
            cfg,
            config.k_factor.unwrap_or(0.0),
            config.theta_r.unwrap_or(0.0),
            config.theta_t.unwrap_or(0.0),
        ),
        other => Err(Error::InvalidConfig(format!("unknown model tag \"{other}\""))),
    }
}

/// Parse a JSON document into a channel model.
pub fn parse_model_json(text: &str) -> Result<ChannelModel> {
    let config: ModelConfig = serde_json::from_str(text)
        .map_err(|e| Error::InvalidConfig(format!("bad model JSON: {e}")))?;
    build_model(&config)
}
