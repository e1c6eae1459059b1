//! The `verify` subcommand: runs one of the verification suites and emits
//! a JSON report `{suite, cases, max_residual, pass}`. Exit code 1 when
//! any tolerance fails.

use crate::output::emit;
use crate::sweep::{build_from_args, closed_sum_rate};
use crate::{Failure, VArgs};
use mmse_lab::asymptotics::{high_snr_params, low_snr_params, Receiver};
use mmse_lab::channels::{build_exp_correlation, sample_channel, AntennaConfig, ChannelModel};
use mmse_lab::closedform::theorem1_compose;
use mmse_lab::montecarlo::{mc_estimate, Metric};
use mmse_lab::specfun::{
    digamma_int, expint_scaled, log_multivariate_gamma, theta_quadrature, theta_series,
};
use mmse_lab::verify::{empirical_high_snr_fit, empirical_low_snr_fit, theorem1_identity_check};
use mmse_lab::{Error, SnrPoint};
use serde_json::json;

struct Case {
    name: String,
    residual: f64,
    tolerance: f64,
}

impl Case {
    fn pass(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tolerance
    }
}

pub fn run_verify(args: &VArgs) -> Result<(), Failure> {
    let cases = match args.suite.as_str() {
        "identity" => identity_suite(args)?,
        "specfun" => specfun_suite()?,
        "closed-vs-mc" => closed_vs_mc_suite(args)?,
        "asymptote" => asymptote_suite(args)?,
        other => {
            return Err(Failure::config(format!(
                "unknown suite \"{other}\" (identity | specfun | closed-vs-mc | asymptote)"
            )))
        }
    };
    let pass = cases.iter().all(Case::pass);
    let max_residual = cases.iter().map(|c| c.residual).fold(0.0f64, f64::max);
    let report = json!({
        "suite": args.suite,
        "cases": cases.iter().map(|c| json!({
            "name": c.name,
            "residual": c.residual,
            "tolerance": c.tolerance,
            "pass": c.pass(),
        })).collect::<Vec<_>>(),
        "max_residual": max_residual,
        "pass": pass,
    });
    emit(&format!("{}\n", serde_json::to_string_pretty(&report).expect("json")), args.out.as_ref())?;
    if pass {
        Ok(())
    } else {
        Err(Failure { code: 1, message: format!("suite {} failed tolerance", args.suite) })
    }
}

/// Per-realization determinant identity across the three model families.
fn identity_suite(args: &VArgs) -> Result<Vec<Case>, Failure> {
    let cfg = AntennaConfig::new(args.model.nr.max(2), args.model.nt.max(2))?;
    let models: Vec<(String, ChannelModel)> = vec![
        ("iid".into(), ChannelModel::iid(cfg)),
        (
            "separable".into(),
            ChannelModel::separable(
                cfg,
                build_exp_correlation(cfg.nr(), 0.7)?,
                build_exp_correlation(cfg.nt(), 0.5)?,
            )?,
        ),
        ("rician".into(), ChannelModel::rician(cfg, 2.5, 0.3, 1.0)?),
    ];
    let mut cases = Vec::new();
    for (name, model) in &models {
        let mut worst = 0.0f64;
        for idx in 0..args.trials {
            let h = sample_channel(model, args.seed, idx);
            for s in [0.1, 1.0, 10.0, 100.0] {
                worst = worst.max(theorem1_identity_check(&h, SnrPoint::from_linear(s)?)?);
            }
        }
        cases.push(Case {
            name: format!("identity-{name}-{}x{}", cfg.nr(), cfg.nt()),
            residual: worst,
            tolerance: 1e-9,
        });
    }
    Ok(cases)
}

/// Special-function identities at their stated tolerances.
fn specfun_suite() -> Result<Vec<Case>, Failure> {
    let mut cases = Vec::new();

    let mut worst = 0.0f64;
    for h in 1..=10u32 {
        let mut x = 1e-3;
        while x <= 1e3 {
            let lhs = expint_scaled(h + 1, x)?;
            let rhs = (1.0 - x * expint_scaled(h, x)?) / h as f64;
            worst = worst.max((lhs - rhs).abs() / lhs.abs());
            x *= 1.29;
        }
    }
    cases.push(Case { name: "expint-recurrence".into(), residual: worst, tolerance: 1e-12 });

    let mut worst = 0.0f64;
    for j in 1..=64u32 {
        let d = digamma_int(j + 1)? - digamma_int(j)?;
        let scale = digamma_int(j + 1)?.abs().max(1.0);
        worst = worst.max((d - 1.0 / j as f64).abs() / scale);
    }
    cases.push(Case { name: "digamma-difference".into(), residual: worst, tolerance: 2.3e-16 });

    let worst = (log_multivariate_gamma(2, 3)? - 2.0f64.ln())
        .abs()
        .max((log_multivariate_gamma(3, 5)? - 288.0f64.ln()).abs())
        .max(log_multivariate_gamma(1, 1)?.abs());
    cases.push(Case { name: "multivariate-gamma".into(), residual: worst, tolerance: 1e-13 });

    let mut worst = 0.0f64;
    for nr in [1u32, 2, 3, 6, 12] {
        let mut z = 20.0;
        while z <= 30.0 {
            let s = theta_series(nr, z);
            let q = theta_quadrature(nr, z)?;
            worst = worst.max((s - q).abs() / s.abs());
            z += 0.5;
        }
    }
    cases.push(Case { name: "hyp2f2-overlap".into(), residual: worst, tolerance: 1e-9 });

    Ok(cases)
}

/// Closed form (or the decomposition with an independently seeded
/// Monte-Carlo evaluator, for models without one) against direct
/// Monte-Carlo, in units of combined standard errors / 3.
fn closed_vs_mc_suite(args: &VArgs) -> Result<Vec<Case>, Failure> {
    let (model, tag) = build_from_args(&args.model)?;
    let mut cases = Vec::new();
    for db in [0.0f64, 10.0, 20.0] {
        let snr = SnrPoint::from_db(db)?;
        let direct = mc_estimate(&model, snr, Metric::MmseRate, args.samples, args.seed)?;
        let (reference, ref_var, route) = match closed_sum_rate(&model, snr) {
            Ok(v) => (v, 0.0, "closed"),
            Err(Error::Unsupported(_)) => {
                // no closed form: dual Monte-Carlo route through the
                // decomposition, independent seed
                let mut var = 0.0f64;
                let composed = theorem1_compose(&model, snr, |req| {
                    let metric = match req.removed_column {
                        None => Metric::OptMi,
                        Some(i) => Metric::OptMiReduced(i),
                    };
                    let est =
                        mc_estimate(&model, snr, metric, args.samples, args.seed + 1000)?;
                    let w = if model.columns_exchangeable() {
                        model.cfg().nt() as f64
                    } else {
                        1.0
                    };
                    var += (w * est.stderr).powi(2);
                    Ok(est.mean)
                })?;
                (composed, var, "composed-mc")
            }
            Err(e) => return Err(Failure::from(e)),
        };
        let combined = (ref_var + direct.stderr.powi(2)).sqrt();
        cases.push(Case {
            name: format!("{route}-vs-mc-{tag}-{db}dB"),
            residual: (reference - direct.mean).abs() / (3.0 * combined),
            tolerance: 1.0,
        });
    }
    Ok(cases)
}

/// Empirical asymptote fits against the analytic parameters, on models
/// with an exact rate function.
fn asymptote_suite(args: &VArgs) -> Result<Vec<Case>, Failure> {
    let (model, tag) = build_from_args(&args.model)?;
    let cfg = model.cfg();
    let rate = |p: SnrPoint| closed_sum_rate(&model, p);
    // probe once so unsupported models fail with a config error
    rate(SnrPoint::from_linear(1.0)?).map_err(|e| Failure::config(e.to_string()))?;

    let mut cases = Vec::new();
    let lo = empirical_low_snr_fit(rate)?;
    let params = low_snr_params(&model);
    cases.push(Case {
        name: format!("ebno-min-{tag}"),
        residual: (lo.ebno_min - params.ebno_min).abs() / params.ebno_min,
        tolerance: 0.01,
    });
    cases.push(Case {
        name: format!("wideband-slope-{tag}"),
        residual: (lo.s0 - params.s0).abs() / params.s0,
        tolerance: 0.02,
    });
    if cfg.nr() >= cfg.nt() {
        let hi = empirical_high_snr_fit(rate)?;
        let affine = high_snr_params(&model, Receiver::Mmse)?;
        cases.push(Case {
            name: format!("high-snr-slope-{tag}"),
            residual: (hi.slope - affine.slope).abs(),
            tolerance: 0.01,
        });
        cases.push(Case {
            name: format!("high-snr-offset-{tag}"),
            residual: (hi.offset - affine.offset).abs(),
            tolerance: 0.02,
        });
    }
    Ok(cases)
}
