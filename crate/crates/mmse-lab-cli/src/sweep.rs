//! The `rate` subcommand: build a model, sweep SNR, evaluate one method
//! per point with optional fallback on repeated eigenvalues.

use crate::output::{emit, parse_range, render_csv, Row};
use crate::{Failure, MArgs, RArgs};
use mmse_lab::channels::{build_model, ChannelModel, ModelConfig};
use mmse_lab::closedform::{
    iid_sum_rate, rxcorr_sum_rate, theorem1_compose, txcorr_sum_rate, EigsDescending,
};
use mmse_lab::montecarlo::{mc_estimate, Metric};
use mmse_lab::verify::mi_quadrature_oracle;
use mmse_lab::{Error, SnrPoint};

pub fn build_from_args(args: &MArgs) -> Result<(ChannelModel, String), Failure> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        let model = mmse_lab::channels::parse_model_json(&text)?;
        let d = descriptor(&model);
        return Ok((model, d));
    }
    let config = ModelConfig {
        model: args.model.clone(),
        nr: args.nr,
        nt: args.nt,
        rho_r: args.rho_r,
        rho_t: args.rho_t,
        r: None,
        s: None,
        k_factor: args.k,
        theta_r: Some(args.theta_r),
        theta_t: Some(args.theta_t),
    };
    let model = build_model(&config)?;
    let d = descriptor(&model);
    Ok((model, d))
}

pub fn descriptor(model: &ChannelModel) -> String {
    let cfg = model.cfg();
    match model {
        ChannelModel::IidRayleigh { .. } => format!("iid-{}x{}", cfg.nr(), cfg.nt()),
        ChannelModel::SeparableRayleigh { r, s, .. } => {
            let side = match (r.is_identity(), s.is_identity()) {
                (true, true) => "uncorr".to_string(),
                (false, true) => "rx".to_string(),
                (true, false) => "tx".to_string(),
                (false, false) => "rxtx".to_string(),
            };
            format!("sep-{side}-{}x{}", cfg.nr(), cfg.nt())
        }
        ChannelModel::RicianRank1 { k_factor, .. } => {
            format!("rician-{}x{}-k{k_factor}", cfg.nr(), cfg.nt())
        }
    }
}

/// The sum rate through the closed-form route available for the model.
pub fn closed_sum_rate(model: &ChannelModel, snr: SnrPoint) -> Result<f64, Error> {
    let cfg = model.cfg();
    match model {
        ChannelModel::IidRayleigh { .. } => iid_sum_rate(&cfg, snr),
        ChannelModel::SeparableRayleigh { r, s, .. } => {
            match (r.is_identity(), s.is_identity()) {
                (true, true) => iid_sum_rate(&cfg, snr),
                (false, true) => {
                    let eigs = EigsDescending::from_correlation(r)?;
                    rxcorr_sum_rate(&eigs, &cfg, snr)
                }
                (true, false) => txcorr_sum_rate(s, &cfg, snr),
                (false, false) => Err(Error::Unsupported(
                    "no closed form for doubly-correlated channels; use --method mc".into(),
                )),
            }
        }
        ChannelModel::RicianRank1 { k_factor, .. } => {
            if *k_factor == 0.0 {
                iid_sum_rate(&cfg, snr)
            } else {
                Err(Error::Unsupported(
                    "no closed form for Rician channels; use --method mc".into(),
                ))
            }
        }
    }
}

/// The sum rate through the density-quadrature route (semi-correlated
/// models only): the decomposition with the quadrature mutual-information
/// evaluator on the full and column-deleted spectra.
pub fn quad_sum_rate(model: &ChannelModel, snr: SnrPoint) -> Result<f64, Error> {
    let cfg = model.cfg();
    let (r, s) = match model {
        ChannelModel::SeparableRayleigh { r, s, .. } => (r, s),
        ChannelModel::IidRayleigh { .. } => {
            // the identity spectrum is fully degenerate
            return Err(Error::RepeatedEigenvalues { gap: 0.0, limit: 1e-9 });
        }
        ChannelModel::RicianRank1 { .. } => {
            return Err(Error::Unsupported(
                "quadrature path needs a semi-correlated Rayleigh model".into(),
            ))
        }
    };
    match (r.is_identity(), s.is_identity()) {
        (false, true) => {
            let eigs = EigsDescending::from_correlation(r)?;
            theorem1_compose(model, snr, |req| {
                let sub = mmse_lab::channels::AntennaConfig::new(cfg.nr(), req.nt_effective)?;
                mi_quadrature_oracle(&eigs, req.nt_effective, &sub, req.snr)
            })
        }
        (true, false) => {
            let full = EigsDescending::from_correlation(s)?;
            let minors: Vec<EigsDescending> = (0..cfg.nt())
                .map(|i| EigsDescending::from_correlation(&s.minor(i)?))
                .collect::<Result<_, _>>()?;
            theorem1_compose(model, snr, |req| {
                let sub = mmse_lab::channels::AntennaConfig::new(cfg.nr(), req.nt_effective)?;
                let eigs = match req.removed_column {
                    None => &full,
                    Some(i) => &minors[i],
                };
                mi_quadrature_oracle(eigs, cfg.nr(), &sub, req.snr)
            })
        }
        (true, true) => Err(Error::RepeatedEigenvalues { gap: 0.0, limit: 1e-9 }),
        (false, false) => Err(Error::Unsupported(
            "quadrature path needs correlation on one side only; use --method mc".into(),
        )),
    }
}

pub fn run_rate(args: &RArgs) -> Result<(), Failure> {
    let (model, model_tag) = build_from_args(&args.model)?;
    let grid = parse_range(&args.snr_db)?;
    let fallback = match args.fallback.as_deref() {
        None => None,
        Some("mc") => Some("mc"),
        Some("quad") => Some("quad"),
        Some(other) => {
            return Err(Failure::config(format!(
                "--fallback must be mc or quad, got \"{other}\""
            )))
        }
    };
    if !matches!(args.method.as_str(), "closed" | "mc" | "quad") {
        return Err(Failure::config(format!(
            "--method must be closed, mc, or quad, got \"{}\"",
            args.method
        )));
    }

    let mut rows = Vec::with_capacity(grid.len());
    for &db in &grid {
        let snr = SnrPoint::from_db(db)?;
        let (value, stderr, method) = eval_point(&model, snr, &args.method, fallback, args)?;
        rows.push(Row { x: db, value, stderr, method, model: model_tag.clone() });
    }
    emit(&render_csv("snr_db", &rows), args.out.as_ref())
}

fn eval_point(
    model: &ChannelModel,
    snr: SnrPoint,
    method: &str,
    fallback: Option<&str>,
    args: &RArgs,
) -> Result<(f64, Option<f64>, String), Failure> {
    let primary = match method {
        "closed" => closed_sum_rate(model, snr).map(|v| (v, None, "closed".to_string())),
        "quad" => quad_sum_rate(model, snr).map(|v| (v, None, "quad".to_string())),
        "mc" => {
            let est = mc_estimate(model, snr, Metric::MmseRate, args.samples, args.seed)?;
            return Ok((est.mean, Some(est.stderr), "mc".to_string()));
        }
        _ => unreachable!("validated above"),
    };
    match primary {
        Ok(v) => Ok(v),
        Err(e @ Error::RepeatedEigenvalues { .. }) => match fallback {
            Some("mc") => {
                let est = mc_estimate(model, snr, Metric::MmseRate, args.samples, args.seed)?;
                Ok((est.mean, Some(est.stderr), "mc(fallback)".to_string()))
            }
            Some("quad") => {
                let v = quad_sum_rate(model, snr)?;
                Ok((v, None, "quad(fallback)".to_string()))
            }
            _ => Err(Failure::from(e)),
        },
        Err(e) => Err(Failure::from(e)),
    }
}
