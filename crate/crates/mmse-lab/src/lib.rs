//! Achievable sum rate of MIMO linear-MMSE receivers.
//!
//! This crate computes the ergodic achievable sum rate of spatial-multiplexing
//! MIMO systems with per-stream linear MMSE reception, through three mutually
//! cross-checking engines:
//!
//! * exact closed forms built from exponential integrals, digamma sums and
//!   eigenvalue determinant expansions ([`closedform`]),
//! * seeded, reproducible Monte-Carlo estimation over Rayleigh and Rician
//!   channel models ([`montecarlo`], [`channels`]),
//! * high-SNR affine and low-SNR wideband expansions ([`asymptotics`]).
//!
//! The [`verify`] module holds independent oracles (a per-realization
//! determinant identity, an eigenvalue-density quadrature for the ergodic
//! mutual information, and finite-difference asymptote fits) used to close the
//! loop between the engines.
//!
//! Rates are in bits/s/Hz. SNR is carried in linear scale internally; dB
//! conversions happen only at I/O boundaries.

pub mod asymptotics;
pub mod channels;
pub mod closedform;
pub mod matkit;
pub mod montecarlo;
pub mod specfun;
pub mod verify;

pub(crate) mod quad;

use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A matrix that should be Hermitian is not, within tolerance.
    #[error("matrix is not Hermitian (relative asymmetry {0:.3e})")]
    NotHermitian(f64),
    /// A matrix that should be positive definite failed its factorization.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    /// The eigenvalue solver did not converge.
    #[error("eigenvalue solver failed to converge")]
    EigNonConvergence,
    /// Eigenvalues too close for the determinant expansions; callers fall
    /// back to the quadrature or Monte-Carlo path.
    #[error("repeated eigenvalues: relative gap {gap:.3e} below {limit:.1e}")]
    RepeatedEigenvalues { gap: f64, limit: f64 },
    /// Adaptive quadrature could not reach the requested accuracy.
    #[error("quadrature failed to converge (error estimate {0:.3e})")]
    QuadratureNonConvergence(f64),
    /// Bisection bracket does not contain the requested target.
    #[error("bisection bracket does not contain the target value")]
    NonBracketing,
    /// Invalid model or sweep configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Requested matrix dimension beyond the supported dense limit.
    #[error("dimension {0} exceeds the supported limit of {1}")]
    DimensionLimit(usize, usize),
    /// Operation not defined for the requested model/receiver combination.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// log2(e), the nats-to-bits conversion factor.
pub(crate) const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// A per-symbol SNR point in linear scale (`snr = P / N0`).
///
/// Kept strictly positive; dB conversion is provided for the I/O boundary
/// only, all internal computations stay linear.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint(f64);

impl SnrPoint {
    pub fn from_linear(snr: f64) -> Result<Self> {
        if snr.is_finite() && snr > 0.0 {
            Ok(SnrPoint(snr))
        } else {
            Err(Error::Domain(format!("snr must be finite and > 0, got {snr}")))
        }
    }

    pub fn from_db(snr_db: f64) -> Result<Self> {
        Self::from_linear(10f64.powf(snr_db / 10.0))
    }

    #[inline]
    pub fn linear(self) -> f64 {
        self.0
    }

    pub fn db(self) -> f64 {
        10.0 * self.0.log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_point_roundtrip() {
        let p = SnrPoint::from_db(10.0).unwrap();
        assert!((p.linear() - 10.0).abs() < 1e-12);
        assert!((p.db() - 10.0).abs() < 1e-12);
        assert!(SnrPoint::from_linear(0.0).is_err());
        assert!(SnrPoint::from_linear(-1.0).is_err());
        assert!(SnrPoint::from_linear(f64::NAN).is_err());
    }
}
