//! High-SNR affine parameters (slope, power offset, excess offset) and
//! low-SNR parameters (minimum energy per bit, wideband slope) for all
//! three channel families, plus the affine/wideband rate approximations
//! and the Eb/N0 mapping.
//!
//! Conventions: offsets are stored in 3-dB units (log2 scale) exactly as
//! the affine expansion `I = S_inf (log2 snr - L_inf)` defines them; dB
//! conversion happens only at the CLI. `Eb/N0` values are linear and
//! transmit-referenced; the received-side quantity is `N_r` times larger.

use crate::channels::{ChannelModel, CorrelationMatrix};
use crate::closedform::EigsDescending;
use crate::matkit::{diag_of_inverse, vandermonde_coeffs};
use crate::specfun::{digamma_int, theta_2f2, EULER_GAMMA};
use crate::{Error, Result, SnrPoint, LOG2_E};

/// Which receiver a parameter set describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Receiver {
    Mmse,
    Opt,
}

/// Parameters of the high-SNR affine expansion
/// `I(snr) = slope * (log2 snr - offset) + o(1)`.
///
/// For the MMSE receiver with `N_r < N_t` the channel stays
/// interference-limited: `slope = 0` and `offset`/`excess` carry the
/// `+inf` marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighSnrAffine {
    pub receiver: Receiver,
    /// bits/s/Hz per 3 dB.
    pub slope: f64,
    /// Power offset in 3-dB units.
    pub offset: f64,
    /// Excess offset over the optimal receiver, `L_mmse - L_opt`
    /// (0 for the optimal receiver itself).
    pub excess: f64,
}

/// Low-SNR parameters: `I(Eb/N0) ~ S0 log2((Eb/N0)/(Eb/N0)_min)`.
/// Both receivers share `(Eb/N0)_min = ln2 / N_r`; the record carries both
/// wideband slopes and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowSnrParams {
    /// Minimum transmit energy per bit, linear.
    pub ebno_min: f64,
    /// MMSE wideband slope.
    pub s0: f64,
    /// Optimal-receiver wideband slope.
    pub s0_opt: f64,
    /// `s0 / s0_opt`, in (0, 1].
    pub ratio: f64,
    /// Receive antenna count, the transmit-to-received Eb/N0 conversion
    /// factor.
    pub nr: usize,
}

/// Dispersion values `zeta(M) = N E[tr M^2] / E^2[tr M]` for the full and
/// column-deleted channel Grams, with the per-component correlation
/// dispersions when the model is separable.
#[derive(Debug, Clone, PartialEq)]
pub struct DispersionSet {
    pub zeta_full: f64,
    /// One entry per removable column (length `N_t`, empty for `N_t = 1`).
    pub zeta_reduced: Vec<f64>,
    pub zeta_r: Option<f64>,
    pub zeta_s: Option<f64>,
    pub zeta_s_minors: Option<Vec<f64>>,
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// `sum_{l=0}^{count-1} psi(top - l)`.
fn digamma_sum_desc(top: usize, count: usize) -> Result<f64> {
    let mut acc = 0.0;
    for l in 0..count {
        acc += digamma_int((top - l) as u32)?;
    }
    Ok(acc)
}

/// `sum_{l=1}^{count} psi(l)`.
fn digamma_sum_asc(count: usize) -> Result<f64> {
    let mut acc = 0.0;
    for l in 1..=count {
        acc += digamma_int(l as u32)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Power-offset building blocks
// ---------------------------------------------------------------------------

/// i.i.d. MMSE offset for `N_r >= N_t`:
/// `log2 N_t - log2(e) (H_{N_r-N_t} - gamma)`; equals `log2(n e^gamma)` at
/// `N_r = N_t = n`.
fn offset_mmse_iid(nr: usize, nt: usize) -> f64 {
    (nt as f64).log2() - LOG2_E * (harmonic(nr - nt) - EULER_GAMMA)
}

/// Optimal-receiver i.i.d. offset for any antenna ordering:
/// `log2 N_t - (1/n) log2(e) sum_{l=0}^{n-1} psi(m - l)`.
fn offset_opt_iid(nr: usize, nt: usize) -> Result<f64> {
    let n = nr.min(nt);
    let m = nr.max(nt);
    Ok((nt as f64).log2() - LOG2_E / n as f64 * digamma_sum_desc(m, n)?)
}

/// `f(S) = (1/N_t) sum_k log2 [S^{-1}]_{kk}`, zero iff `S = I`.
pub fn transmit_offset_shift(s: &CorrelationMatrix) -> Result<f64> {
    if s.is_identity() {
        return Ok(0.0);
    }
    let diag = diag_of_inverse(s.entries())?;
    Ok(diag.iter().map(|d| d.log2()).sum::<f64>() / s.dim() as f64)
}

/// `sum_{j in cols} det Y_j(r) / prod_{i<j}(r_j - r_i)` where `Y_j` is the
/// Vandermonde matrix of the receive eigenvalues with column `j` carrying
/// `r^{j-1} log2 r`. Extracted as interpolation coefficients.
fn y_ratio_sum(r_eigs: &EigsDescending, cols: impl Iterator<Item = usize>) -> f64 {
    let r = r_eigs.values();
    let q = r.len();
    let mut total = 0.0;
    let mut f = vec![0.0f64; q];
    for j in cols {
        debug_assert!(j >= 1 && j <= q);
        for (s, &rs) in r.iter().enumerate() {
            f[s] = rs.powi(j as i32 - 1) * rs.log2();
        }
        vandermonde_coeffs(r, &mut f);
        total += f[j - 1];
    }
    total
}

/// Identity-spectrum limit of the full `Y` ratio sum
/// `sum_{j=N_r-N_t+1}^{N_r}`, fixed analytically through the i.i.d.
/// expectation it must reproduce.
fn y_ratio_identity(nr: usize, nt: usize) -> Result<f64> {
    Ok(LOG2_E * (digamma_sum_desc(nr, nt)? - digamma_sum_asc(nt)?))
}

/// `g(R)`: receive-correlation shift of the MMSE offset. Zero for
/// `R = I` (the formula is 0/0 there; the value is fixed by the
/// decomposition against the i.i.d. baseline).
pub fn receive_offset_shift(r: &CorrelationMatrix, nt: usize) -> Result<f64> {
    let nr = r.dim();
    if nr < nt {
        return Err(Error::Unsupported(
            "receive offset shift needs N_r >= N_t".into(),
        ));
    }
    if r.is_identity() {
        return Ok(0.0);
    }
    let eigs = EigsDescending::from_correlation(r)?;
    Ok(LOG2_E * (harmonic(nr - nt) - harmonic(nt - 1))
        - y_ratio_sum(&eigs, std::iter::once(nr - nt + 1)))
}

fn log2_det(c: &CorrelationMatrix) -> f64 {
    c.eigenvalues().iter().map(|v| v.log2()).sum()
}

fn offset_mmse(model: &ChannelModel) -> Result<f64> {
    let cfg = model.cfg();
    let (nr, nt) = (cfg.nr(), cfg.nt());
    match model {
        ChannelModel::IidRayleigh { .. } => Ok(offset_mmse_iid(nr, nt)),
        ChannelModel::SeparableRayleigh { r, s, .. } => Ok(offset_mmse_iid(nr, nt)
            + transmit_offset_shift(s)?
            + receive_offset_shift(r, nt)?),
        ChannelModel::RicianRank1 { k_factor, .. } => {
            Ok(offset_mmse_iid(nr, nt) + rician_offset_shift(nr, nt, *k_factor)?)
        }
    }
}

fn offset_opt(model: &ChannelModel) -> Result<f64> {
    let cfg = model.cfg();
    let (nr, nt) = (cfg.nr(), cfg.nt());
    match model {
        ChannelModel::IidRayleigh { .. } => offset_opt_iid(nr, nt),
        ChannelModel::SeparableRayleigh { r, s, .. } => {
            if nr < nt {
                return Err(Error::Unsupported(
                    "correlated optimal offset formula needs N_r >= N_t".into(),
                ));
            }
            let y_sum = if r.is_identity() {
                y_ratio_identity(nr, nt)?
            } else {
                let eigs = EigsDescending::from_correlation(r)?;
                y_ratio_sum(&eigs, (nr - nt + 1)..=nr)
            };
            Ok((nt as f64).log2() - LOG2_E * (harmonic(nt) - 1.0 - EULER_GAMMA)
                - (log2_det(s) + y_sum) / nt as f64)
        }
        ChannelModel::RicianRank1 { k_factor, .. } => {
            if nr < nt {
                return Err(Error::Unsupported(
                    "Rician optimal offset formula needs N_r >= N_t".into(),
                ));
            }
            Ok(offset_opt_iid(nr, nt)?
                + rician_offset_shift(nr, nt, *k_factor)?
                - rician_excess_shift(nr, nt, *k_factor)?)
        }
    }
}

/// `h1(K)`: Rician shift of the MMSE power offset,
/// `log2(K+1) - K log2(e) [N_t theta(N_r,N_t,K) - (N_t-1) theta(N_r,N_t-1,K)]`.
pub fn rician_offset_shift(nr: usize, nt: usize, k: f64) -> Result<f64> {
    let th_full = theta_2f2(nr as u32, nt as u32, k)?;
    let th_red = theta_2f2(nr as u32, (nt - 1) as u32, k)?;
    Ok((k + 1.0).log2() - k * LOG2_E * (nt as f64 * th_full - (nt - 1) as f64 * th_red))
}

/// `h2(K)`: Rician shift of the excess offset,
/// `-K (N_t-1) log2(e) [theta(N_r,N_t,K) - theta(N_r,N_t-1,K)]`.
pub fn rician_excess_shift(nr: usize, nt: usize, k: f64) -> Result<f64> {
    let th_full = theta_2f2(nr as u32, nt as u32, k)?;
    let th_red = theta_2f2(nr as u32, (nt - 1) as u32, k)?;
    Ok(-LOG2_E * k * (nt - 1) as f64 * (th_full - th_red))
}

/// High-SNR affine parameters for a model/receiver pair.
///
/// MMSE with `N_r < N_t` yields the interference-limited marker
/// (`slope = 0`, infinite offsets); correlated and Rician optimal-receiver
/// offsets are only available for `N_r >= N_t` (the regime the closed
/// forms cover).
pub fn high_snr_params(model: &ChannelModel, receiver: Receiver) -> Result<HighSnrAffine> {
    let cfg = model.cfg();
    let (nr, nt) = (cfg.nr(), cfg.nt());
    match receiver {
        Receiver::Mmse => {
            cfg.require_multi_stream()?;
            if nr < nt {
                return Ok(HighSnrAffine {
                    receiver,
                    slope: 0.0,
                    offset: f64::INFINITY,
                    excess: f64::INFINITY,
                });
            }
            let offset = offset_mmse(model)?;
            let excess = offset - offset_opt(model)?;
            Ok(HighSnrAffine { receiver, slope: nt as f64, offset, excess })
        }
        Receiver::Opt => Ok(HighSnrAffine {
            receiver,
            slope: cfg.n() as f64,
            offset: offset_opt(model)?,
            excess: 0.0,
        }),
    }
}

/// Large-system limits as antennas grow with fixed `beta = N_t/N_r <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeSystemLimits {
    /// Limit of the MMSE power offset, `log2(beta/(1-beta))`; `+inf` at
    /// `beta = 1`.
    pub offset: f64,
    /// Limit of the excess offset, `(1/beta) log2(1/(1-beta)) - log2 e`.
    pub excess: f64,
    /// Limit of `S0_mmse / S0_opt`, `(1+beta)/(1+2 beta)`.
    pub s0_ratio: f64,
}

pub fn large_system_limits(beta: f64) -> Result<LargeSystemLimits> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Domain(format!("beta must be in (0, 1], got {beta}")));
    }
    if beta == 1.0 {
        return Ok(LargeSystemLimits {
            offset: f64::INFINITY,
            excess: f64::INFINITY,
            s0_ratio: 2.0 / 3.0,
        });
    }
    Ok(LargeSystemLimits {
        offset: (beta / (1.0 - beta)).log2(),
        excess: (1.0 / (1.0 - beta)).log2() / beta - LOG2_E,
        s0_ratio: (1.0 + beta) / (1.0 + 2.0 * beta),
    })
}

/// Exact dispersion values per model.
pub fn dispersion_closed_form(model: &ChannelModel) -> DispersionSet {
    let cfg = model.cfg();
    let (nr, nt) = (cfg.nr() as f64, cfg.nt() as f64);
    let reduced_len = if cfg.nt() >= 2 { cfg.nt() } else { 0 };
    match model {
        ChannelModel::IidRayleigh { .. } => DispersionSet {
            zeta_full: (nr + nt) / nt,
            zeta_reduced: vec![(nr + nt - 1.0) / (nt - 1.0); reduced_len],
            zeta_r: None,
            zeta_s: None,
            zeta_s_minors: None,
        },
        ChannelModel::SeparableRayleigh { r, s, .. } => {
            let zr = r.dispersion();
            let zs = s.dispersion();
            let minors: Vec<f64> = (0..reduced_len)
                .map(|i| s.minor(i).expect("nt >= 2").dispersion())
                .collect();
            DispersionSet {
                zeta_full: zr + nr / nt * zs,
                zeta_reduced: minors.iter().map(|zi| zr + nr / (nt - 1.0) * zi).collect(),
                zeta_r: Some(zr),
                zeta_s: Some(zs),
                zeta_s_minors: Some(minors),
            }
        }
        ChannelModel::RicianRank1 { k_factor, .. } => {
            let k = *k_factor;
            let denom = (k + 1.0) * (k + 1.0);
            DispersionSet {
                zeta_full: (nr * k * k + (nr + nt) * (2.0 * k + 1.0) / nt) / denom,
                zeta_reduced: vec![
                    (nr * k * k + (nr + nt - 1.0) * (2.0 * k + 1.0) / (nt - 1.0)) / denom;
                    reduced_len
                ],
                zeta_r: None,
                zeta_s: None,
                zeta_s_minors: None,
            }
        }
    }
}

/// Low-SNR parameters, assembled from the dispersion values through the
/// general wideband-slope formula
/// `S0 = 2 N_r / (N_t zeta_full - ((N_t-1)/N_t)^2 sum_i zeta_reduced_i)`.
pub fn low_snr_params(model: &ChannelModel) -> LowSnrParams {
    let cfg = model.cfg();
    let (nr, nt) = (cfg.nr() as f64, cfg.nt() as f64);
    let disp = dispersion_closed_form(model);
    let reduced_sum: f64 = disp.zeta_reduced.iter().sum();
    let denom = nt * disp.zeta_full - ((nt - 1.0) / nt).powi(2) * reduced_sum;
    let s0 = 2.0 * nr / denom;
    let s0_opt = 2.0 * nr / disp.zeta_full;
    LowSnrParams {
        ebno_min: std::f64::consts::LN_2 / nr,
        s0,
        s0_opt,
        ratio: s0 / s0_opt,
        nr: cfg.nr(),
    }
}

// ---------------------------------------------------------------------------
// Rate approximations and the Eb/N0 mapping
// ---------------------------------------------------------------------------

/// High-SNR affine approximation `slope * (log2 snr - offset)`.
pub fn affine_rate(params: &HighSnrAffine, snr: SnrPoint) -> Result<f64> {
    if !params.offset.is_finite() {
        return Err(Error::Unsupported(
            "affine approximation undefined for an infinite power offset".into(),
        ));
    }
    Ok(params.slope * (snr.linear().log2() - params.offset))
}

/// Wideband approximation `S0 log2(ebno / ebno_min)` for a transmit-side
/// linear `Eb/N0 >= ebno_min`.
pub fn wideband_rate(params: &LowSnrParams, receiver: Receiver, ebno: f64) -> Result<f64> {
    if ebno < params.ebno_min {
        return Err(Error::Domain(format!(
            "Eb/N0 {ebno} below the minimum {}",
            params.ebno_min
        )));
    }
    let s0 = match receiver {
        Receiver::Mmse => params.s0,
        Receiver::Opt => params.s0_opt,
    };
    Ok(s0 * (ebno / params.ebno_min).log2())
}

/// Wideband approximation against the *received* Eb/N0 (`N_r` times the
/// transmit quantity).
pub fn wideband_rate_received(
    params: &LowSnrParams,
    receiver: Receiver,
    ebno_received: f64,
) -> Result<f64> {
    wideband_rate(params, receiver, ebno_received / params.nr as f64)
}

/// Solve `Eb/N0 = snr / I(snr)` for `snr` by bisection on
/// `[1e-12, 1e6]` (relative tolerance 1e-10, at most 200 iterations).
/// `snr/I(snr)` is increasing, so the bracket is checked once up front.
pub fn solve_snr_for_ebno<F>(rate: F, ebno: f64) -> Result<SnrPoint>
where
    F: Fn(SnrPoint) -> Result<f64>,
{
    let g = |snr: f64| -> Result<f64> {
        let p = SnrPoint::from_linear(snr)?;
        let r = rate(p)?;
        if r <= 0.0 {
            return Err(Error::Domain(format!("rate must be positive, got {r} at snr {snr}")));
        }
        Ok(snr / r)
    };
    let (mut lo, mut hi) = (1e-12f64, 1e6f64);
    if g(lo)? > ebno || g(hi)? < ebno {
        return Err(Error::NonBracketing);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if g(mid)? < ebno {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-10 * hi {
            break;
        }
    }
    SnrPoint::from_linear((lo * hi).sqrt())
}
