//! Exact finite-SNR rate formulas.
//!
//! Three families, all assembled from the same decomposition of the MMSE sum
//! rate into optimal-receiver mutual-information terms
//! ([`theorem1_compose`]):
//!
//! * i.i.d. Rayleigh ([`iid_sum_rate`], [`iid_opt_mi`]): determinant sums of
//!   factorial/exponential-integral matrices normalized by multivariate
//!   gamma functions,
//! * semi-correlated Rayleigh ([`semicorr_opt_mi`], [`rxcorr_sum_rate`],
//!   [`txcorr_sum_rate`]): eigenvalue expansions over the correlated side's
//!   spectrum, valid for correlation at either end of the link,
//! * the doubly-correlated and Rician exact rates are intentionally served
//!   by [`theorem1_compose`] with a Monte-Carlo evaluator instead of closed
//!   forms.
//!
//! The eigenvalue expansions divide by Vandermonde products of eigenvalue
//! gaps, so repeated eigenvalues are rejected ([`EigsDescending`]) rather
//! than silently perturbed; callers fall back to the quadrature or
//! Monte-Carlo path.

use crate::channels::{AntennaConfig, ChannelModel, CorrelationMatrix};
use crate::matkit::{signed_logdet, vandermonde_coeffs};
use crate::specfun::{expint_scaled, ln_factorial, log_multivariate_gamma};
use crate::{Error, Result, SnrPoint, LOG2_E};
use nalgebra::DMatrix;

/// Documented size limit for the factorial determinant sums: beyond this
/// the factorial grids exhaust f64 accuracy.
pub const IID_DIM_LIMIT: usize = 32;

/// Minimum relative eigenvalue gap `(v_k - v_{k+1}) / v_1` accepted by the
/// expansion formulas.
pub const EIGENVALUE_GAP_LIMIT: f64 = 1e-9;

/// Strictly decreasing positive eigenvalues, the admission ticket to every
/// Vandermonde-ratio expansion in this module.
#[derive(Debug, Clone)]
pub struct EigsDescending {
    values: Vec<f64>,
}

impl EigsDescending {
    /// Validates positivity, order, and the strict-gap invariant.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("need at least one eigenvalue".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain(format!("eigenvalues must be positive: {values:?}")));
        }
        let top = values[0];
        for w in values.windows(2) {
            let gap = (w[0] - w[1]) / top;
            if gap <= EIGENVALUE_GAP_LIMIT {
                return Err(Error::RepeatedEigenvalues { gap, limit: EIGENVALUE_GAP_LIMIT });
            }
        }
        Ok(EigsDescending { values })
    }

    pub fn from_correlation(c: &CorrelationMatrix) -> Result<Self> {
        Self::new(c.eigenvalues().to_vec())
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Signed `sum_i s_i exp(l_i)` without leaving the log domain until the end.
fn signed_exp_sum(terms: &[(i8, f64)]) -> f64 {
    let m = terms
        .iter()
        .filter(|(s, _)| *s != 0)
        .map(|&(_, l)| l)
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return 0.0;
    }
    let acc: f64 = terms
        .iter()
        .filter(|(s, _)| *s != 0)
        .map(|&(s, l)| s as f64 * (l - m).exp())
        .sum();
    acc * m.exp()
}

/// The normalized determinant sum behind the i.i.d. mutual information:
/// `sum_k det Psi_{n,m}(k) / (Gamma_n(m) Gamma_n(n))` with the
/// `e^{N_t/snr}` prefactor folded into the modified column, so the result
/// is finite at any SNR. `x = N_t/snr`.
///
/// `Psi_{n,m}(k)` has `(s,t)` entry `tau!` with `tau = n+m-s-t`, except in
/// column `k` where it is `tau! * sum_{h=1}^{tau+1} e^x E_h(x)`. Rows are
/// prescaled by their largest factorial before the LU factorization.
fn iid_mi_bracket(n: usize, m: usize, x: f64) -> Result<f64> {
    debug_assert!(n >= 1 && m >= n);
    let mut prefix = vec![0.0f64; n + m];
    for h in 1..=(n + m - 1) as u32 {
        prefix[h as usize] = prefix[h as usize - 1] + expint_scaled(h, x)?;
    }
    let lognorm =
        log_multivariate_gamma(n as u32, m as u32)? + log_multivariate_gamma(n as u32, n as u32)?;
    let rowscale: Vec<f64> = (1..=n).map(|s| ln_factorial(n + m - s - 1)).collect();
    let rowscale_total: f64 = rowscale.iter().sum();
    let mut terms = Vec::with_capacity(n);
    for k in 1..=n {
        let a = DMatrix::from_fn(n, n, |si, ti| {
            let (s, t) = (si + 1, ti + 1);
            let tau = n + m - s - t;
            let base = (ln_factorial(tau) - rowscale[si]).exp();
            if t == k {
                base * prefix[tau + 1]
            } else {
                base
            }
        });
        let det = signed_logdet(&a)?;
        terms.push((det.sign, det.log_abs + rowscale_total - lognorm));
    }
    Ok(signed_exp_sum(&terms))
}

fn check_iid_dims(cfg: &AntennaConfig) -> Result<()> {
    if cfg.m() > IID_DIM_LIMIT {
        return Err(Error::DimensionLimit(cfg.m(), IID_DIM_LIMIT));
    }
    Ok(())
}

/// Ergodic mutual information of the i.i.d. Rayleigh channel with optimal
/// receivers, bits/s/Hz.
pub fn iid_opt_mi(cfg: &AntennaConfig, snr: SnrPoint) -> Result<f64> {
    check_iid_dims(cfg)?;
    let x = cfg.nt() as f64 / snr.linear();
    Ok(LOG2_E * iid_mi_bracket(cfg.n(), cfg.m(), x)?)
}

/// MMSE achievable sum rate of the i.i.d. Rayleigh channel, bits/s/Hz:
/// `N_t (I_full - I_reduced)` where both terms share the argument
/// `x = N_t/snr` after the reduced system's SNR scaling cancels.
pub fn iid_sum_rate(cfg: &AntennaConfig, snr: SnrPoint) -> Result<f64> {
    cfg.require_multi_stream()?;
    check_iid_dims(cfg)?;
    let x = cfg.nt() as f64 / snr.linear();
    let full = iid_mi_bracket(cfg.n(), cfg.m(), x)?;
    let reduced = iid_mi_bracket(cfg.n_prime(), cfg.m_prime(), x)?;
    Ok(cfg.nt() as f64 * (full - reduced) * LOG2_E)
}

/// The eigenvalue-expansion sum `sum_k det E_{p,q}(k) / prod_{l<k}
/// (beta_k - beta_l)` in nats, where `E_{p,q}(k)` is the Vandermonde matrix
/// of the `q` eigenvalues with column `k` carrying
/// `beta_s^{k-1} e^{x_s} sum_{h=1}^{p-q+k} E_h(x_s)`, `x_s = 1/(c beta_s)`.
///
/// Each `det/Vandermonde` ratio is the `(k-1)`-th monomial coefficient of
/// the polynomial interpolating the modified column at the eigenvalue
/// nodes, so it is extracted by a Bjorck-Pereyra solve instead of two
/// explicit determinants; that route survives clustered eigenvalues and
/// extreme SNR far better.
fn semicorr_mi_sum(betas: &[f64], p: usize, c: f64) -> Result<f64> {
    let q = betas.len();
    let n = p.min(q);
    // Per-row prefix sums of scaled exponential integrals up to order p.
    let mut prefix = vec![vec![0.0f64; p + 1]; q];
    for (s, &beta) in betas.iter().enumerate() {
        let x = 1.0 / (c * beta);
        for h in 1..=p as u32 {
            prefix[s][h as usize] = prefix[s][h as usize - 1] + expint_scaled(h, x)?;
        }
    }
    let mut total = 0.0;
    let mut f = vec![0.0f64; q];
    for k in (q - n + 1)..=q {
        // h-sum upper limit p - q + k, written underflow-safe.
        for (s, &beta) in betas.iter().enumerate() {
            f[s] = beta.powi(k as i32 - 1) * prefix[s][p + k - q];
        }
        vandermonde_coeffs(betas, &mut f);
        total += f[k - 1];
    }
    Ok(total)
}

fn check_semicorr(eigs: &EigsDescending, p: usize, cfg: &AntennaConfig) -> Result<()> {
    let q = eigs.len();
    let (nr, nt) = (cfg.nr(), cfg.nt());
    let matches = (q == nr && p == nt) || (q == nt && p == nr);
    if !matches {
        return Err(Error::InvalidConfig(format!(
            "dimensions (q={q}, p={p}) must pair the antenna counts ({nr}, {nt})"
        )));
    }
    if q > IID_DIM_LIMIT || p > IID_DIM_LIMIT {
        return Err(Error::DimensionLimit(q.max(p), IID_DIM_LIMIT));
    }
    Ok(())
}

/// Ergodic mutual information with optimal receivers for semi-correlated
/// Rayleigh fading: correlation matrix of dimension `q` (the side carrying
/// `eigs`), `p` the antenna count of the uncorrelated side.
pub fn semicorr_opt_mi(
    eigs: &EigsDescending,
    p: usize,
    cfg: &AntennaConfig,
    snr: SnrPoint,
) -> Result<f64> {
    check_semicorr(eigs, p, cfg)?;
    let c = snr.linear() / cfg.nt() as f64;
    Ok(LOG2_E * semicorr_mi_sum(eigs.values(), p, c)?)
}

/// MMSE achievable sum rate under receive-side correlation
/// (`H ~ CN(0, L (x) I)`, `q = N_r`). All `N_t` column-deleted terms share
/// one distribution, so the reduced expansion is evaluated once:
/// `N_t [ sum(p = N_t) - sum(p = N_t - 1) ]`.
pub fn rxcorr_sum_rate(r_eigs: &EigsDescending, cfg: &AntennaConfig, snr: SnrPoint) -> Result<f64> {
    cfg.require_multi_stream()?;
    if r_eigs.len() != cfg.nr() {
        return Err(Error::InvalidConfig(format!(
            "receive eigenvalue count {} must equal nr={}",
            r_eigs.len(),
            cfg.nr()
        )));
    }
    if cfg.m() > IID_DIM_LIMIT {
        return Err(Error::DimensionLimit(cfg.m(), IID_DIM_LIMIT));
    }
    let c = snr.linear() / cfg.nt() as f64;
    let full = semicorr_mi_sum(r_eigs.values(), cfg.nt(), c)?;
    let reduced = semicorr_mi_sum(r_eigs.values(), cfg.nt() - 1, c)?;
    Ok(cfg.nt() as f64 * (full - reduced) * LOG2_E)
}

/// MMSE achievable sum rate under transmit-side correlation
/// (`H ~ CN(0, I (x) S)`, `q = N_t`). The `i`-th reduced term runs over the
/// spectrum of the principal minor `S^{ii}`; each minor must satisfy the
/// strict-gap invariant as well.
pub fn txcorr_sum_rate(s: &CorrelationMatrix, cfg: &AntennaConfig, snr: SnrPoint) -> Result<f64> {
    cfg.require_multi_stream()?;
    if s.dim() != cfg.nt() {
        return Err(Error::InvalidConfig(format!(
            "transmit correlation dimension {} must equal nt={}",
            s.dim(),
            cfg.nt()
        )));
    }
    if cfg.m() > IID_DIM_LIMIT {
        return Err(Error::DimensionLimit(cfg.m(), IID_DIM_LIMIT));
    }
    let c = snr.linear() / cfg.nt() as f64;
    let full_eigs = EigsDescending::from_correlation(s)?;
    let full = semicorr_mi_sum(full_eigs.values(), cfg.nr(), c)?;
    let mut total = cfg.nt() as f64 * full;
    for i in 0..cfg.nt() {
        let minor_eigs = EigsDescending::from_correlation(&s.minor(i)?)?;
        total -= semicorr_mi_sum(minor_eigs.values(), cfg.nr(), c)?;
    }
    Ok(total * LOG2_E)
}

/// Which expectation a [`theorem1_compose`] evaluator is asked for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiRequest {
    /// `None`: the full channel. `Some(i)`: column `i` removed.
    pub removed_column: Option<usize>,
    /// SNR at which to evaluate (already scaled by `(N_t-1)/N_t` for
    /// reduced terms).
    pub snr: SnrPoint,
    /// Transmit antenna count of the requested system.
    pub nt_effective: usize,
}

/// The sum-rate decomposition
/// `I_mmse = N_t E[I_opt(snr, H)] - sum_i E[I_opt((N_t-1)/N_t snr, H_i)]`,
/// generic over how the mutual-information expectations are produced
/// (closed form, quadrature, or Monte-Carlo).
///
/// For column-exchangeable models every reduced term is identical, so the
/// evaluator is called once for column 0 and weighted by `N_t`.
pub fn theorem1_compose<F>(model: &ChannelModel, snr: SnrPoint, mut mi: F) -> Result<f64>
where
    F: FnMut(&MiRequest) -> Result<f64>,
{
    let cfg = model.cfg();
    cfg.require_multi_stream()?;
    let nt = cfg.nt();
    let full = mi(&MiRequest {
        removed_column: None,
        snr,
        nt_effective: nt,
    })?;
    let scaled = SnrPoint::from_linear(snr.linear() * (nt - 1) as f64 / nt as f64)?;
    let mut total = nt as f64 * full;
    if model.columns_exchangeable() {
        let reduced = mi(&MiRequest {
            removed_column: Some(0),
            snr: scaled,
            nt_effective: nt - 1,
        })?;
        total -= nt as f64 * reduced;
    } else {
        for i in 0..nt {
            total -= mi(&MiRequest {
                removed_column: Some(i),
                snr: scaled,
                nt_effective: nt - 1,
            })?;
        }
    }
    Ok(total)
}
