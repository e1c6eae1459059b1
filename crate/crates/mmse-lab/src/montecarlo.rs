//! Per-realization rate computation and seeded Monte-Carlo estimation.
//!
//! The per-stream SINR of the linear MMSE filter is
//! `gamma_i = 1 / [(I + (snr/N_t) H^H H)^{-1}]_{ii} - 1`, the achievable sum
//! rate is `sum_i log2(1 + gamma_i)`, and the optimal-receiver mutual
//! information is `log2 det(I + (snr/N_t) H H^H)`.
//!
//! Estimation is embarrassingly parallel over sample indices. Because every
//! sample index owns its RNG stream, workers only compute values; the
//! reduction itself always runs serially in index order, so the estimate is
//! bit-identical for any worker count.

use crate::channels::{sample_channel, ChannelModel};
use crate::matkit::{diag_of_inverse, hpd_logdet};
use crate::{Error, Result, SnrPoint, LOG2_E};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

/// Sample mean with its standard error, tagged by the sampling contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub nsamples: u64,
    pub seed: u64,
}

/// What `mc_estimate` averages per realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    /// MMSE achievable sum rate, bits/s/Hz.
    MmseRate,
    /// Optimal-receiver mutual information, bits/s/Hz.
    OptMi,
    /// Mutual information of `H` with column `i` removed, evaluated at
    /// `(N_t-1)/N_t * snr` exactly as the sum-rate decomposition requires.
    OptMiReduced(usize),
    /// Plug-in dispersion `N_r E[tr(HH^H)^2] / E[tr(HH^H)]^2`.
    DispersionFull,
    /// Same with column `i` removed.
    DispersionReduced(usize),
}

/// Gram matrix on the smaller side, so determinant work is `O(min^3)`.
fn gram_small(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    if h.nrows() <= h.ncols() {
        h * h.adjoint()
    } else {
        h.adjoint() * h
    }
}

/// Per-stream MMSE SINRs `gamma_i >= 0`, length `N_t`.
pub fn sinr_per_stream(h: &DMatrix<Complex64>, snr: SnrPoint) -> Result<Vec<f64>> {
    let nt = h.ncols();
    let c = Complex64::new(snr.linear() / nt as f64, 0.0);
    let a = DMatrix::identity(nt, nt) + h.adjoint() * h * c;
    let diag = diag_of_inverse(&a)?;
    Ok(diag.iter().map(|d| (1.0 / d - 1.0).max(0.0)).collect())
}

/// MMSE achievable sum rate of one realization, bits/s/Hz:
/// `sum_i log2(1 + gamma_i) = -sum_i log2 [A^{-1}]_{ii}`.
pub fn sum_rate_realization(h: &DMatrix<Complex64>, snr: SnrPoint) -> Result<f64> {
    let nt = h.ncols();
    let c = Complex64::new(snr.linear() / nt as f64, 0.0);
    let a = DMatrix::identity(nt, nt) + h.adjoint() * h * c;
    let diag = diag_of_inverse(&a)?;
    Ok(-diag.iter().map(|d| d.ln()).sum::<f64>() * LOG2_E)
}

/// Optimal-receiver mutual information of one realization, bits/s/Hz:
/// `log2 det(I + (snr/N_t) H H^H)`.
pub fn opt_mi_realization(h: &DMatrix<Complex64>, snr: SnrPoint) -> Result<f64> {
    let c = Complex64::new(snr.linear() / h.ncols() as f64, 0.0);
    let g = gram_small(h);
    let n = g.nrows();
    let a = DMatrix::identity(n, n) + g * c;
    Ok(hpd_logdet(&a)? * LOG2_E)
}

struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn new() -> Self {
        Welford { n: 0, mean: 0.0, m2: 0.0 }
    }

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn stderr_of_mean(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n as f64 * (self.n - 1) as f64)).sqrt()
    }
}

/// Two-channel Welford with cross moment, for the dispersion ratio.
struct Welford2 {
    n: u64,
    mean_a: f64,
    mean_b: f64,
    m2a: f64,
    m2b: f64,
    cab: f64,
}

impl Welford2 {
    fn new() -> Self {
        Welford2 { n: 0, mean_a: 0.0, mean_b: 0.0, m2a: 0.0, m2b: 0.0, cab: 0.0 }
    }

    fn push(&mut self, a: f64, b: f64) {
        self.n += 1;
        let nf = self.n as f64;
        let da = a - self.mean_a;
        let db = b - self.mean_b;
        self.mean_a += da / nf;
        self.mean_b += db / nf;
        self.m2a += da * (a - self.mean_a);
        self.m2b += db * (b - self.mean_b);
        self.cab += da * (b - self.mean_b);
    }
}

fn resolve_threads(explicit: Option<usize>) -> usize {
    if let Some(t) = explicit {
        return t.max(1);
    }
    std::env::var("MMSE_LAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(rayon::current_num_threads)
}

const CHUNK: usize = 8192;

/// Evaluate `eval(index)` for `0..nsamples` and fold the results in strict
/// index order. Values are generated in parallel chunks; the fold itself is
/// serial, so the result does not depend on the worker count.
fn ordered_samples<T, E, F>(nsamples: u64, threads: usize, eval: E, mut fold: F)
where
    T: Send,
    E: Fn(u64) -> T + Sync,
    F: FnMut(T),
{
    if threads <= 1 {
        for idx in 0..nsamples {
            fold(eval(idx));
        }
        return;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool construction");
    let mut buf: Vec<T> = Vec::with_capacity(CHUNK);
    let mut start = 0u64;
    while start < nsamples {
        let end = (start + CHUNK as u64).min(nsamples);
        let len = (end - start) as usize;
        pool.install(|| {
            (0..len)
                .into_par_iter()
                .map(|off| eval(start + off as u64))
                .collect_into_vec(&mut buf);
        });
        for v in buf.drain(..) {
            fold(v);
        }
        start = end;
    }
}

fn validate(model: &ChannelModel, metric: Metric, nsamples: u64) -> Result<()> {
    if nsamples < 100 {
        return Err(Error::InvalidConfig(format!(
            "need at least 100 samples, got {nsamples}"
        )));
    }
    let cfg = model.cfg();
    match metric {
        Metric::MmseRate => cfg.require_multi_stream(),
        Metric::OptMiReduced(i) | Metric::DispersionReduced(i) => {
            cfg.require_multi_stream()?;
            if i >= cfg.nt() {
                return Err(Error::InvalidConfig(format!(
                    "reduced column {i} out of range for nt={}",
                    cfg.nt()
                )));
            }
            Ok(())
        }
        Metric::OptMi | Metric::DispersionFull => Ok(()),
    }
}

/// Monte-Carlo estimate of a metric under a channel model, deterministic in
/// `(seed, nsamples)` regardless of worker count.
pub fn mc_estimate(
    model: &ChannelModel,
    snr: SnrPoint,
    metric: Metric,
    nsamples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    mc_estimate_with_threads(model, snr, metric, nsamples, seed, None)
}

/// As [`mc_estimate`], with an explicit worker count (otherwise the
/// `MMSE_LAB_THREADS` environment variable or the rayon default applies).
pub fn mc_estimate_with_threads(
    model: &ChannelModel,
    snr: SnrPoint,
    metric: Metric,
    nsamples: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<MonteCarloEstimate> {
    validate(model, metric, nsamples)?;
    let threads = resolve_threads(threads);
    let cfg = model.cfg();
    let nt = cfg.nt();
    match metric {
        Metric::MmseRate | Metric::OptMi | Metric::OptMiReduced(_) => {
            let eval = |idx: u64| -> f64 {
                let h = sample_channel(model, seed, idx);
                match metric {
                    Metric::MmseRate => {
                        sum_rate_realization(&h, snr).expect("I + c H^H H is HPD")
                    }
                    Metric::OptMi => opt_mi_realization(&h, snr).expect("I + c HH^H is HPD"),
                    Metric::OptMiReduced(i) => {
                        let hi = h.remove_column(i);
                        let scaled =
                            SnrPoint::from_linear(snr.linear() * (nt - 1) as f64 / nt as f64)
                                .expect("scaled snr stays positive");
                        opt_mi_realization(&hi, scaled).expect("I + c HH^H is HPD")
                    }
                    _ => unreachable!(),
                }
            };
            let mut acc = Welford::new();
            ordered_samples(nsamples, threads, eval, |v| acc.push(v));
            Ok(MonteCarloEstimate {
                mean: acc.mean,
                stderr: acc.stderr_of_mean(),
                nsamples,
                seed,
            })
        }
        Metric::DispersionFull | Metric::DispersionReduced(_) => {
            let eval = |idx: u64| -> (f64, f64) {
                let h = sample_channel(model, seed, idx);
                let g = match metric {
                    Metric::DispersionFull => gram_small(&h),
                    Metric::DispersionReduced(i) => gram_small(&h.remove_column(i)),
                    _ => unreachable!(),
                };
                let tr: f64 = (0..g.nrows()).map(|i| g[(i, i)].re).sum();
                let tr_sq: f64 = g.iter().map(|v| v.norm_sqr()).sum();
                (tr_sq, tr)
            };
            let mut acc = Welford2::new();
            ordered_samples(nsamples, threads, eval, |(a, b)| acc.push(a, b));
            let n = cfg.nr() as f64;
            let nf = acc.n as f64;
            let zeta = n * acc.mean_a / (acc.mean_b * acc.mean_b);
            // Delta-method standard error of the ratio of means.
            let va = acc.m2a / (nf - 1.0);
            let vb = acc.m2b / (nf - 1.0);
            let cab = acc.cab / (nf - 1.0);
            let ga = n / (acc.mean_b * acc.mean_b);
            let gb = -2.0 * n * acc.mean_a / acc.mean_b.powi(3);
            let var = (ga * ga * va + gb * gb * vb + 2.0 * ga * gb * cab) / nf;
            Ok(MonteCarloEstimate {
                mean: zeta,
                stderr: var.max(0.0).sqrt(),
                nsamples,
                seed,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{build_exp_correlation, AntennaConfig, ChannelModel};
    use nalgebra::dmatrix;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn snr(v: f64) -> SnrPoint {
        SnrPoint::from_linear(v).unwrap()
    }

    #[test]
    fn sinr_single_transmit_antenna() {
        // Nt = 1: gamma = snr * |h|^2.
        let h = dmatrix![c(0.6, 0.3); c(-0.2, 0.9)];
        let g = sinr_per_stream(&h, snr(2.5)).unwrap();
        let want = 2.5 * h.iter().map(|v| v.norm_sqr()).sum::<f64>();
        assert_eq!(g.len(), 1);
        assert!((g[0] - want).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_rates() {
        let h = DMatrix::<Complex64>::identity(2, 2);
        let g = sinr_per_stream(&h, snr(2.0)).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);
        assert!((sum_rate_realization(&h, snr(2.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((opt_mi_realization(&h, snr(2.0)).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sum_rate_vanishes_at_low_snr() {
        let h = DMatrix::<Complex64>::identity(3, 3);
        let r = sum_rate_realization(&h, snr(1e-12)).unwrap();
        assert!(r > 0.0 && r < 1e-10);
    }

    #[test]
    fn sinr_matches_explicit_mmse_filter() {
        // Direct filter-output SINR: W = H^H (H H^H + (Nt/snr) I)^{-1}.
        let cfg = AntennaConfig::new(4, 3).unwrap();
        let model = ChannelModel::iid(cfg);
        let p = snr(3.7);
        for idx in 0..10u64 {
            let h = sample_channel(&model, 21, idx);
            let gammas = sinr_per_stream(&h, p).unwrap();
            let nt = 3usize;
            let reg = Complex64::new(nt as f64 / p.linear(), 0.0);
            let w = h.adjoint()
                * (&h * h.adjoint() + DMatrix::identity(4, 4) * reg)
                    .try_inverse()
                    .unwrap();
            for i in 0..nt {
                let wi = w.row(i);
                let sig = (wi * h.column(i))[(0, 0)].norm_sqr() * p.linear() / nt as f64;
                let mut interf = 0.0;
                for j in 0..nt {
                    if j != i {
                        interf += (wi * h.column(j))[(0, 0)].norm_sqr() * p.linear() / nt as f64;
                    }
                }
                let noise: f64 = wi.iter().map(|v| v.norm_sqr()).sum();
                let want = sig / (interf + noise);
                assert!(
                    (gammas[i] - want).abs() <= 1e-9 * want.max(1.0),
                    "idx={idx} i={i}: {} vs {}",
                    gammas[i],
                    want
                );
            }
        }
    }

    #[test]
    fn rank_one_channel_single_log_term() {
        let h = dmatrix![c(1.0,0.0), c(2.0,0.0); c(0.5,0.0), c(1.0,0.0)];
        // columns proportional => HH^H has one nonzero eigenvalue = ||H||_F^2
        let p = snr(4.0);
        let want = (1.0 + 4.0 / 2.0 * h.iter().map(|v| v.norm_sqr()).sum::<f64>()).log2();
        let got = opt_mi_realization(&h, p).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn mmse_never_exceeds_optimal() {
        let cfg = AntennaConfig::new(3, 3).unwrap();
        for (m, seed) in [
            (ChannelModel::iid(cfg), 1u64),
            (
                ChannelModel::separable(
                    cfg,
                    build_exp_correlation(3, 0.8).unwrap(),
                    build_exp_correlation(3, 0.3).unwrap(),
                )
                .unwrap(),
                2,
            ),
            (ChannelModel::rician(cfg, 3.0, 0.2, 0.9).unwrap(), 3),
        ] {
            for idx in 0..200u64 {
                let h = sample_channel(&m, seed, idx);
                for sv in [0.1, 1.0, 10.0, 100.0] {
                    let mmse = sum_rate_realization(&h, snr(sv)).unwrap();
                    let opt = opt_mi_realization(&h, snr(sv)).unwrap();
                    assert!(mmse >= 0.0 && mmse <= opt + 1e-10, "mmse {mmse} opt {opt}");
                }
            }
        }
    }

    #[test]
    fn sum_rate_increases_with_snr() {
        let cfg = AntennaConfig::new(2, 2).unwrap();
        let m = ChannelModel::iid(cfg);
        for idx in 0..50u64 {
            let h = sample_channel(&m, 4, idx);
            let mut prev = -1.0;
            for db in [-10.0, -5.0, 0.0, 5.0, 10.0, 20.0, 30.0] {
                let r = sum_rate_realization(&h, SnrPoint::from_db(db).unwrap()).unwrap();
                assert!(r > prev, "rate must increase: {r} after {prev}");
                prev = r;
            }
        }
    }

    #[test]
    fn estimate_deterministic_across_thread_counts() {
        let cfg = AntennaConfig::new(2, 2).unwrap();
        let m = ChannelModel::iid(cfg);
        let p = snr(10.0);
        let a = mc_estimate_with_threads(&m, p, Metric::MmseRate, 20_000, 9, Some(1)).unwrap();
        let b = mc_estimate_with_threads(&m, p, Metric::MmseRate, 20_000, 9, Some(4)).unwrap();
        let c = mc_estimate_with_threads(&m, p, Metric::MmseRate, 20_000, 9, Some(3)).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        assert_eq!(a.mean.to_bits(), c.mean.to_bits());
    }

    #[test]
    fn dispersion_iid_2x2() {
        let cfg = AntennaConfig::new(2, 2).unwrap();
        let m = ChannelModel::iid(cfg);
        let full =
            mc_estimate_with_threads(&m, snr(1.0), Metric::DispersionFull, 400_000, 5, Some(2))
                .unwrap();
        assert!(
            (full.mean - 2.0).abs() <= 3.0 * full.stderr,
            "zeta {} +- {}",
            full.mean,
            full.stderr
        );
        let red = mc_estimate_with_threads(
            &m,
            snr(1.0),
            Metric::DispersionReduced(0),
            400_000,
            5,
            Some(2),
        )
        .unwrap();
        assert!(
            (red.mean - 3.0).abs() <= 3.0 * red.stderr,
            "zeta_red {} +- {}",
            red.mean,
            red.stderr
        );
    }

    #[test]
    fn dispersion_rician_deterministic_limit() {
        let cfg = AntennaConfig::new(3, 2).unwrap();
        let m = ChannelModel::rician(cfg, 1e6, 0.4, 0.7).unwrap();
        let est = mc_estimate(&m, snr(1.0), Metric::DispersionFull, 10_000, 8).unwrap();
        assert!((est.mean - 3.0).abs() < 1e-3, "got {}", est.mean);
    }

    #[test]
    fn invalid_combinations_rejected() {
        let cfg = AntennaConfig::new(2, 2).unwrap();
        let m = ChannelModel::iid(cfg);
        assert!(mc_estimate(&m, snr(1.0), Metric::OptMi, 50, 1).is_err());
        assert!(mc_estimate(&m, snr(1.0), Metric::OptMiReduced(2), 1000, 1).is_err());
        let single = ChannelModel::iid(AntennaConfig::new(2, 1).unwrap());
        assert!(mc_estimate(&single, snr(1.0), Metric::MmseRate, 1000, 1).is_err());
        assert!(mc_estimate(&single, snr(1.0), Metric::OptMi, 1000, 1).is_ok());
    }
}
