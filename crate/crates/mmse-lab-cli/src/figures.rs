//! The `figure` subcommand: datasets behind the reference figures.
//!
//! 1 — i.i.d. sum rate vs SNR, n in {2, 4}: closed form, Monte-Carlo, and
//!     the high-SNR affine line.
//! 2 — spectral efficiency vs received Eb/N0 for N_r = N_t = 3: exact
//!     curves (numerically mapped) and the wideband approximations, both
//!     receivers.
//! 3 — transmit-correlated sum rate (N_t = 3, N_r = 5, exp rho in
//!     {0.5, 0.9}): closed form, Monte-Carlo, affine.
//! 4 — Rician offset shifts h1(K), h2(K) in dB for N_r = N_t = 2.
//! 5 — offset shifts due to transmit/receive correlation vs rho, in dB,
//!     for n in {2, 4}.

use crate::output::{emit, render_csv, Row};
use crate::{FigArgs, Failure};
use mmse_lab::asymptotics::{
    affine_rate, high_snr_params, low_snr_params, receive_offset_shift, rician_excess_shift,
    rician_offset_shift, solve_snr_for_ebno, transmit_offset_shift, wideband_rate, Receiver,
};
use mmse_lab::channels::{build_exp_correlation, AntennaConfig, ChannelModel, CorrelationMatrix};
use mmse_lab::closedform::{iid_opt_mi, iid_sum_rate, txcorr_sum_rate};
use mmse_lab::montecarlo::{mc_estimate, Metric};
use mmse_lab::SnrPoint;

/// 3-dB units -> dB.
const DB_PER_3DB: f64 = 3.0102999566398120;

pub fn run_figure(args: &FigArgs) -> Result<(), Failure> {
    let (x_name, rows) = match args.id {
        1 => ("snr_db", figure1(args)?),
        2 => ("ebno_db", figure2()?),
        3 => ("snr_db", figure3(args)?),
        4 => ("k_factor", figure4()?),
        5 => ("rho", figure5()?),
        other => return Err(Failure::config(format!("unknown figure id {other} (1-5)"))),
    };
    emit(&render_csv(x_name, &rows), args.out.as_ref())
}

fn figure1(args: &FigArgs) -> Result<Vec<Row>, Failure> {
    let mut rows = Vec::new();
    for n in [2usize, 4] {
        let cfg = AntennaConfig::new(n, n)?;
        let model = ChannelModel::iid(cfg);
        let tag = format!("iid-{n}x{n}");
        let affine = high_snr_params(&model, Receiver::Mmse)?;
        for step in 0..=6 {
            let db = 5.0 * step as f64;
            let snr = SnrPoint::from_db(db)?;
            rows.push(Row {
                x: db,
                value: iid_sum_rate(&cfg, snr)?,
                stderr: None,
                method: "closed".into(),
                model: tag.clone(),
            });
            let est = mc_estimate(&model, snr, Metric::MmseRate, args.samples, args.seed)?;
            rows.push(Row {
                x: db,
                value: est.mean,
                stderr: Some(est.stderr),
                method: "mc".into(),
                model: tag.clone(),
            });
            rows.push(Row {
                x: db,
                value: affine_rate(&affine, snr)?,
                stderr: None,
                method: "affine".into(),
                model: tag.clone(),
            });
        }
    }
    Ok(rows)
}

fn figure2() -> Result<Vec<Row>, Failure> {
    let cfg = AntennaConfig::new(3, 3)?;
    let model = ChannelModel::iid(cfg);
    let params = low_snr_params(&model);
    let tag = "iid-3x3".to_string();
    let mut rows = Vec::new();
    let mmse_rate = |p: SnrPoint| iid_sum_rate(&cfg, p);
    let opt_rate = |p: SnrPoint| iid_opt_mi(&cfg, p);
    // received Eb/N0 grid from just above the -1.59 dB floor
    for step in 0..=40 {
        let rec_db = -1.5 + 0.25 * step as f64;
        let rec = 10f64.powf(rec_db / 10.0);
        let ebno_tx = rec / 3.0;
        if let Ok(snr) = solve_snr_for_ebno(mmse_rate, ebno_tx) {
            rows.push(Row {
                x: rec_db,
                value: mmse_rate(snr)?,
                stderr: None,
                method: "exact-mmse".into(),
                model: tag.clone(),
            });
        }
        if let Ok(snr) = solve_snr_for_ebno(opt_rate, ebno_tx) {
            rows.push(Row {
                x: rec_db,
                value: opt_rate(snr)?,
                stderr: None,
                method: "exact-opt".into(),
                model: tag.clone(),
            });
        }
        for (name, receiver) in [("wideband-mmse", Receiver::Mmse), ("wideband-opt", Receiver::Opt)]
        {
            if let Ok(v) = wideband_rate(&params, receiver, ebno_tx) {
                rows.push(Row {
                    x: rec_db,
                    value: v,
                    stderr: None,
                    method: name.into(),
                    model: tag.clone(),
                });
            }
        }
    }
    Ok(rows)
}

fn figure3(args: &FigArgs) -> Result<Vec<Row>, Failure> {
    let cfg = AntennaConfig::new(5, 3)?;
    let mut rows = Vec::new();
    for rho in [0.5f64, 0.9] {
        let s = build_exp_correlation(3, rho)?;
        let model =
            ChannelModel::separable(cfg, CorrelationMatrix::identity(5)?, s.clone())?;
        let tag = format!("sep-tx-5x3-rho{rho}");
        let affine = high_snr_params(&model, Receiver::Mmse)?;
        for step in 0..=6 {
            let db = 5.0 * step as f64;
            let snr = SnrPoint::from_db(db)?;
            rows.push(Row {
                x: db,
                value: txcorr_sum_rate(&s, &cfg, snr)?,
                stderr: None,
                method: "closed".into(),
                model: tag.clone(),
            });
            let est = mc_estimate(&model, snr, Metric::MmseRate, args.samples, args.seed)?;
            rows.push(Row {
                x: db,
                value: est.mean,
                stderr: Some(est.stderr),
                method: "mc".into(),
                model: tag.clone(),
            });
            rows.push(Row {
                x: db,
                value: affine_rate(&affine, snr)?,
                stderr: None,
                method: "affine".into(),
                model: tag.clone(),
            });
        }
    }
    Ok(rows)
}

fn figure4() -> Result<Vec<Row>, Failure> {
    let mut rows = Vec::new();
    for step in 0..=20 {
        let k = 0.5 * step as f64;
        rows.push(Row {
            x: k,
            value: rician_offset_shift(2, 2, k)? * DB_PER_3DB,
            stderr: None,
            method: "h1-db".into(),
            model: "rician-2x2".into(),
        });
        rows.push(Row {
            x: k,
            value: rician_excess_shift(2, 2, k)? * DB_PER_3DB,
            stderr: None,
            method: "h2-db".into(),
            model: "rician-2x2".into(),
        });
    }
    Ok(rows)
}

fn figure5() -> Result<Vec<Row>, Failure> {
    let mut rows = Vec::new();
    for n in [2usize, 4] {
        let tag = format!("{n}x{n}");
        for step in 0..=18 {
            let rho = 0.05 * step as f64;
            let corr = build_exp_correlation(n, rho)?;
            rows.push(Row {
                x: rho,
                value: transmit_offset_shift(&corr)? * DB_PER_3DB,
                stderr: None,
                method: "tx-shift-db".into(),
                model: tag.clone(),
            });
            let rx = if corr.is_identity() {
                0.0
            } else {
                receive_offset_shift(&corr, n)?
            };
            rows.push(Row {
                x: rho,
                value: rx * DB_PER_3DB,
                stderr: None,
                method: "rx-shift-db".into(),
                model: tag.clone(),
            });
        }
    }
    Ok(rows)
}
