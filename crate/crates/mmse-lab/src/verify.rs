//! Independent oracles that close the loop between the engines:
//!
//! * [`theorem1_identity_check`] — the per-realization determinant identity
//!   behind the sum-rate decomposition, an algebraic fact every sampled
//!   channel must satisfy to roundoff,
//! * [`mi_quadrature_oracle`] — the ergodic mutual information recomputed
//!   by numerically integrating the unordered-eigenvalue density (a path
//!   fully disjoint from the closed-form expansion: LU determinants, no
//!   exponential integrals),
//! * [`empirical_high_snr_fit`] / [`empirical_low_snr_fit`] — affine and
//!   wideband parameters re-derived from their defining limits by
//!   finite differences on an exact rate function.

use crate::channels::AntennaConfig;
use crate::closedform::EigsDescending;
use crate::matkit::{hpd_logdet, principal_minor, signed_logdet};
use crate::montecarlo::sum_rate_realization;
use crate::quad::adaptive_quad;
use crate::specfun::ln_factorial;
use crate::{Error, Result, SnrPoint, LOG2_E};
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Absolute residual of the per-realization identity
/// `sum_i log2(1+gamma_i) = N_t log2 det(I + c H^H H)
///  - sum_i log2 det(I + c H_i^H H_i)`, `c = snr/N_t`.
///
/// The right side uses the principal minors of `A = I + c H^H H`, which
/// coincide with the column-deleted Grams.
pub fn theorem1_identity_check(h: &DMatrix<Complex64>, snr: SnrPoint) -> Result<f64> {
    let nt = h.ncols();
    if nt < 2 {
        return Err(Error::InvalidConfig("identity check needs nt >= 2".into()));
    }
    let left = sum_rate_realization(h, snr)?;
    let c = Complex64::new(snr.linear() / nt as f64, 0.0);
    let a = DMatrix::identity(nt, nt) + h.adjoint() * h * c;
    let mut right = nt as f64 * hpd_logdet(&a)? * LOG2_E;
    for i in 0..nt {
        right -= hpd_logdet(&principal_minor(&a, i))? * LOG2_E;
    }
    Ok((left - right).abs())
}

/// Unordered-eigenvalue density of the semi-correlated Gram at `lambda`:
/// `f(lambda) = sum_k det D_k / (n prod_{l<k}(beta_k - beta_l))`, with the
/// determinants evaluated by row-scaled LU in sign/log form.
fn eigenvalue_density(lambda: f64, betas: &[f64], p: usize, q: usize) -> Result<f64> {
    let n = p.min(q);
    let mut log_vdm = 0.0f64;
    let mut sign_vdm = 1i8;
    for k in 0..q {
        for l in 0..k {
            let d = betas[k] - betas[l];
            if d < 0.0 {
                sign_vdm = -sign_vdm;
            }
            log_vdm += d.abs().ln();
        }
    }
    let mut total = 0.0;
    for k in (q - n + 1)..=q {
        let a_exp = (p + k - q - 1) as f64; // lambda exponent p - q + k - 1
        let m = DMatrix::from_fn(q, q, |si, ti| {
            let t = ti + 1;
            let beta = betas[si];
            if t == k {
                // log-domain assembly avoids overflow of lambda^a
                let lg = if lambda > 0.0 {
                    a_exp * lambda.ln()
                } else if a_exp == 0.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                };
                (lg - ln_factorial(p + k - q - 1) - lambda / beta
                    + (q as f64 - p as f64 - 1.0) * beta.ln())
                .exp()
            } else {
                beta.powi(t as i32 - 1)
            }
        });
        let det = signed_logdet(&m)?;
        if det.sign != 0 {
            total += (det.sign * sign_vdm) as f64 * (det.log_abs - log_vdm).exp();
        }
    }
    Ok(total / n as f64)
}

/// Ergodic mutual information by adaptive quadrature of the eigenvalue
/// density: `n * integral log2(1 + (snr/N_t) lambda) f(lambda) dlambda`.
///
/// The density's unit normalization is verified to 1e-8 as a side
/// condition before the rate integral is trusted.
pub fn mi_quadrature_oracle(
    eigs: &EigsDescending,
    p: usize,
    cfg: &AntennaConfig,
    snr: SnrPoint,
) -> Result<f64> {
    let q = eigs.len();
    let (nr, nt) = (cfg.nr(), cfg.nt());
    if !((q == nr && p == nt) || (q == nt && p == nr)) {
        return Err(Error::InvalidConfig(format!(
            "dimensions (q={q}, p={p}) must pair the antenna counts ({nr}, {nt})"
        )));
    }
    let betas = eigs.values();
    let n = p.min(q);
    let beta_max = betas[0];
    let a_max = (p - 1) as f64;
    let upper = beta_max * (a_max + 40.0 + 12.0 * (a_max + 1.0).sqrt());

    let density = |lambda: f64| {
        eigenvalue_density(lambda, betas, p, q).expect("density dims validated")
    };
    let mass = adaptive_quad(&density, 0.0, upper, 1e-9)?;
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::QuadratureNonConvergence((mass - 1.0).abs()));
    }
    let c = snr.linear() / nt as f64;
    let weighted = |lambda: f64| (1.0 + c * lambda).log2() * density(lambda);
    let integral = adaptive_quad(&weighted, 0.0, upper, 1e-9)?;
    Ok(n as f64 * integral)
}

/// Empirical affine parameters from a two-point fit at 50 and 60 dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighSnrFit {
    pub slope: f64,
    pub offset: f64,
}

pub fn empirical_high_snr_fit<F>(rate: F) -> Result<HighSnrFit>
where
    F: Fn(SnrPoint) -> Result<f64>,
{
    let s1 = SnrPoint::from_db(50.0)?;
    let s2 = SnrPoint::from_db(60.0)?;
    let i1 = rate(s1)?;
    let i2 = rate(s2)?;
    let slope = (i2 - i1) / (s2.linear().log2() - s1.linear().log2());
    if slope <= 0.0 {
        return Err(Error::Domain(format!("non-positive fitted slope {slope}")));
    }
    Ok(HighSnrFit { slope, offset: s2.linear().log2() - i2 / slope })
}

/// Empirical low-SNR parameters from finite differences at
/// `snr in {1e-4, 2e-4}` (the rate vanishes at zero SNR, so two
/// evaluations pin both derivatives; the first uses Richardson
/// extrapolation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowSnrFit {
    /// Fitted first derivative at zero SNR, bits per unit snr.
    pub idot: f64,
    /// Fitted second derivative at zero SNR.
    pub iddot: f64,
    /// `1 / idot`, the fitted minimum transmit Eb/N0 (linear).
    pub ebno_min: f64,
    /// `-2 idot^2 ln2 / iddot`, the fitted wideband slope.
    pub s0: f64,
}

pub fn empirical_low_snr_fit<F>(rate: F) -> Result<LowSnrFit>
where
    F: Fn(SnrPoint) -> Result<f64>,
{
    let h = 1e-4f64;
    let i1 = rate(SnrPoint::from_linear(h)?)?;
    let i2 = rate(SnrPoint::from_linear(2.0 * h)?)?;
    let idot = (4.0 * i1 - i2) / (2.0 * h);
    let iddot = (i2 - 2.0 * i1) / (h * h);
    if idot <= 0.0 || iddot >= 0.0 {
        return Err(Error::Domain(format!(
            "low-SNR fit needs idot > 0 > iddot, got ({idot}, {iddot})"
        )));
    }
    Ok(LowSnrFit {
        idot,
        iddot,
        ebno_min: 1.0 / idot,
        s0: -2.0 * idot * idot * std::f64::consts::LN_2 / iddot,
    })
}
