//! Forward models plus measurement noise, written as CSV.

use std::f64::consts::TAU;
use std::path::Path;

use num_complex::Complex64;
use ratefit_core::chain::{
    dbm_to_photon_flux, synthesize_noisy_powers, synthesize_noisy_psd, synthesize_noisy_reflection,
    synthesize_noisy_trace,
};
use ratefit_core::dynamics::{ramsey_emission, t1_power_trace};
use ratefit_core::qed::{
    incoherent_spectrum, mollow_triplet_approx, power_balance, reflection_coefficient, DriveConfig, PowerBudget,
};
use ratefit_core::units::hz_to_angular;
use ratefit_core::Result as CoreResult;
use rayon::prelude::*;

use crate::config::{DynamicsKind, RunConfig, SpectrumModel};
use crate::error::CliError;
use crate::table::write_table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SimKind {
    Reflection,
    Spectrum,
    Powers,
    Dynamics,
}

impl SimKind {
    pub fn name(self) -> &'static str {
        match self {
            SimKind::Reflection => "reflection",
            SimKind::Spectrum => "spectrum",
            SimKind::Powers => "powers",
            SimKind::Dynamics => "dynamics",
        }
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a; n];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn need_points(n: usize, min: usize, field: &str) -> Result<(), CliError> {
    if n < min {
        return Err(CliError::Schema(format!(
            "config at `{field}`: need at least {min} points, got {n}"
        )));
    }
    Ok(())
}

pub fn simulate(kind: SimKind, cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    match kind {
        SimKind::Reflection => reflection(cfg, out),
        SimKind::Spectrum => spectrum(cfg, out),
        SimKind::Powers => powers(cfg, out),
        SimKind::Dynamics => dynamics(cfg, out),
    }
}

fn reflection(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let b = &cfg.reflection;
    need_points(b.n_points, 2, "reflection.n_points")?;
    let device = cfg.device();
    let rates = device.rates()?;
    let f01 = device.f01_hz()?;
    let wq = hz_to_angular(f01);
    let flux = dbm_to_photon_flux(b.probe_dbm, f01)?;
    let rabi = 2.0 * (rates.gamma_r() * flux).sqrt();
    let freq = linspace(f01 - 0.5 * b.span_hz, f01 + 0.5 * b.span_hz, b.n_points);
    let clean = freq
        .iter()
        .map(|&f| reflection_coefficient(&DriveConfig::new(wq, hz_to_angular(f), rabi)?, &rates, b.mode))
        .collect::<CoreResult<Vec<Complex64>>>()?;
    let re = |v: &[Complex64]| v.iter().map(|z| z.re).collect::<Vec<f64>>();
    let im = |v: &[Complex64]| v.iter().map(|z| z.im).collect::<Vec<f64>>();
    if cfg.noiseless {
        write_table(out, &["freq_hz", "re_r", "im_r"], &[&freq, &re(&clean), &im(&clean)])
    } else {
        let n = synthesize_noisy_reflection(&clean, flux, &cfg.chain.with_n_avg(b.n_avg), 0)?;
        write_table(
            out,
            &["freq_hz", "re_r", "im_r", "sigma_re", "sigma_im"],
            &[&freq, &re(&n.r), &im(&n.r), &n.sigma, &n.sigma],
        )
    }
}

fn spectrum(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let b = &cfg.spectrum;
    need_points(b.n_points, 2, "spectrum.n_points")?;
    let device = cfg.device();
    let rates = device.rates()?;
    let wq = hz_to_angular(device.f01_hz()?);
    let drive = DriveConfig::detuned(
        wq,
        hz_to_angular(cfg.drive.detuning_hz),
        hz_to_angular(cfg.drive.rabi_hz),
    )?;
    let half = hz_to_angular(b.half_span_hz);
    let omega = linspace(drive.omega_p() - half, drive.omega_p() + half, b.n_points);
    let clean = match b.model {
        SpectrumModel::Exact => incoherent_spectrum(&omega, &drive, &rates)?,
        SpectrumModel::Triplet => mollow_triplet_approx(&omega, &drive, &rates)?,
    };
    let spec = if cfg.noiseless {
        clean
    } else {
        synthesize_noisy_psd(&clean, &cfg.chain.with_n_avg(b.n_avg), 0)?
    };
    // Per unit cyclic frequency in the file.
    let det: Vec<f64> = spec.omega.iter().map(|w| (w - wq) / TAU).collect();
    let psd: Vec<f64> = spec.psd.iter().map(|p| p * TAU).collect();
    let sigma: Vec<f64> = match &spec.sigma {
        Some(s) => s.iter().map(|x| x * TAU).collect(),
        None => vec![0.0; psd.len()],
    };
    write_table(out, &["detuning_hz", "psd", "sigma"], &[&det, &psd, &sigma])
}

fn powers(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let b = &cfg.powers;
    let rabi_hz = match &b.rabi_hz {
        Some(v) => {
            if let Some(x) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(CliError::Schema(format!(
                    "config at `powers.rabi_hz`: {x} is not a valid drive"
                )));
            }
            v.clone()
        }
        None => {
            need_points(b.n_points, 2, "powers.n_points")?;
            if !(b.rabi_min_hz > 0.0 && b.rabi_max_hz > b.rabi_min_hz) {
                return Err(CliError::Schema(
                    "config at `powers`: need 0 < rabi_min_hz < rabi_max_hz".into(),
                ));
            }
            linspace(b.rabi_min_hz.ln(), b.rabi_max_hz.ln(), b.n_points)
                .into_iter()
                .map(f64::exp)
                .collect()
        }
    };
    let rates = cfg.device().rates()?;
    let chain = cfg.chain.with_n_avg(b.n_avg);
    let rows: Vec<(PowerBudget, Option<PowerBudget>)> = rabi_hz
        .par_iter()
        .enumerate()
        .map(|(k, &f)| {
            let clean = power_balance(hz_to_angular(f), &rates)?;
            if cfg.noiseless {
                Ok((clean, None))
            } else {
                let n = synthesize_noisy_powers(&clean, &chain, k as u64)?;
                Ok((n.budget, Some(n.sigma)))
            }
        })
        .collect::<CoreResult<_>>()?;
    let col = |f: fn(&PowerBudget) -> f64| rows.iter().map(|(b, _)| f(b)).collect::<Vec<f64>>();
    let cols = [col(|b| b.p_in), col(|b| b.p_coh), col(|b| b.p_incoh), col(|b| b.p_loss)];
    if cfg.noiseless {
        write_table(
            out,
            &["rabi_hz", "p_in", "p_coh", "p_incoh", "p_loss"],
            &[&rabi_hz, &cols[0], &cols[1], &cols[2], &cols[3]],
        )
    } else {
        let sig = |f: fn(&PowerBudget) -> f64| {
            rows.iter()
                .map(|(_, s)| s.as_ref().map_or(0.0, f))
                .collect::<Vec<f64>>()
        };
        let s = [sig(|b| b.p_in), sig(|b| b.p_coh), sig(|b| b.p_incoh), sig(|b| b.p_loss)];
        write_table(
            out,
            &[
                "rabi_hz",
                "p_in",
                "p_coh",
                "p_incoh",
                "p_loss",
                "sigma_in",
                "sigma_coh",
                "sigma_incoh",
                "sigma_loss",
            ],
            &[
                &rabi_hz, &cols[0], &cols[1], &cols[2], &cols[3], &s[0], &s[1], &s[2], &s[3],
            ],
        )
    }
}

fn dynamics(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let b = &cfg.dynamics;
    need_points(b.n_points, 2, "dynamics.n_points")?;
    if b.duration_s.is_nan() || b.duration_s <= 0.0 {
        return Err(CliError::Schema("config at `dynamics.duration_s`: must be > 0".into()));
    }
    let rates = cfg.device().rates()?;
    let t = linspace(0.0, b.duration_s, b.n_points);
    let clean = match b.kind {
        DynamicsKind::Ramsey => {
            ramsey_emission(hz_to_angular(b.pulse_detuning_hz), &rates, &t, rates.gamma_r().sqrt())?
        }
        DynamicsKind::T1 => t1_power_trace(&rates, &t, 1.0)?,
    };
    let trace = if cfg.noiseless {
        clean
    } else {
        let mut chain = cfg.chain.with_n_avg(b.n_avg());
        chain.bandwidth_hz = b.bandwidth_hz;
        synthesize_noisy_trace(&clean, &chain, 0)?
    };
    let sigma = trace.sigma.clone().unwrap_or_else(|| vec![0.0; trace.t.len()]);
    let re: Vec<f64> = trace.values.iter().map(|v| v.re).collect();
    match b.kind {
        DynamicsKind::Ramsey => {
            let im: Vec<f64> = trace.values.iter().map(|v| v.im).collect();
            write_table(out, &["t_s", "re_v", "im_v", "sigma"], &[&trace.t, &re, &im, &sigma])
        }
        DynamicsKind::T1 => write_table(out, &["t_s", "power", "sigma"], &[&trace.t, &re, &sigma]),
    }
}
