//! All six rate-extraction methods run on one synthetic device, in the
//! shape of a cross-method summary table.
//!
//! Configuration and report are in cyclic units (Hz) so they can be written
//! and read by the command-line front end directly. The reflection row runs
//! first because the Mollow, single-point and time-domain methods take its
//! `Γ_r` (and, for the single-point method, `Γ₂`) as a reference.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{
    dbm_to_photon_flux, drift_ensemble, synthesize_noisy_powers, synthesize_noisy_psd, synthesize_noisy_reflection,
    synthesize_noisy_trace, ChainConfig, DriftEnsemble,
};
use crate::dynamics::{ramsey_emission, t1_power_trace, ComplexTrace};
use crate::error::{ensure, Error, Result};
use crate::fit::{
    circle_fit, combine_rows, complete_rates, fit_complex_decay, fit_exponential_power, fit_full_spectrum,
    fit_gaussian_histogram, fit_mollow_triplet, fit_scattering_powers, single_point_rates, CombinedRates, Disagreement,
    FullSpectrumOptions, HistogramFit, PartialRates, PowerCurves, RateRow, SinglePointRef, SpectrumData,
    TripletOptions,
};
use crate::qed::{
    incoherent_spectrum, mollow_triplet_approx, power_balance, reflection_coefficient, transmon_frequency, DriveConfig,
    PowerBudget, ReflectionMode, Spectrum, TransmonParams,
};
use crate::rates::{Estimate, RateSet};
use crate::units::{angular_to_hz, hz_to_angular};

pub const SCHEMA_VERSION: u32 = 1;

/// Method names in table order.
pub const METHODS: [&str; 6] = [
    "Reflection",
    "On-res.MT",
    "Off-res.MT",
    "Scattering",
    "SinglePoint",
    "Dynamics",
];

/// The simulated emitter. Rates are cyclic (Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Device {
    pub gamma_r_hz: f64,
    pub gamma_n_hz: f64,
    pub gamma_phi_hz: f64,
    pub transmon: TransmonParams,
}

impl Default for Device {
    fn default() -> Self {
        Self {
            gamma_r_hz: 227e3,
            gamma_n_hz: 48e3,
            gamma_phi_hz: 3e3,
            transmon: TransmonParams {
                ej_max: 16.56e9,
                ec: 0.252e9,
                flux: 0.0,
            },
        }
    }
}

impl Device {
    pub fn rates(&self) -> Result<RateSet> {
        RateSet::new(
            hz_to_angular(self.gamma_r_hz),
            hz_to_angular(self.gamma_n_hz),
            hz_to_angular(self.gamma_phi_hz),
        )
    }

    pub fn f01_hz(&self) -> Result<f64> {
        transmon_frequency(&self.transmon)
    }
}

/// Weak-probe reflection sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectionRun {
    pub span_hz: f64,
    pub n_points: usize,
    /// Probe power at the sample.
    pub probe_dbm: f64,
    pub n_avg: f64,
}

impl Default for ReflectionRun {
    fn default() -> Self {
        Self {
            span_hz: 2e6,
            n_points: 201,
            probe_dbm: -170.0,
            n_avg: 5.0e7,
        }
    }
}

/// Resonant fluorescence spectrum with resolved sidebands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnResonanceRun {
    pub rabi_hz: f64,
    /// Extra span beyond each sideband.
    pub margin_hz: f64,
    pub n_points: usize,
    pub n_avg: f64,
    /// Simulate the exact line shape instead of the three-Lorentzian form
    /// the estimator assumes.
    pub exact_model: bool,
}

impl Default for OnResonanceRun {
    fn default() -> Self {
        Self {
            rabi_hz: 9e6,
            margin_hz: 3e6,
            n_points: 2401,
            n_avg: 5.0e6,
            exact_model: false,
        }
    }
}

/// Detuned fluorescence spectrum fitted with the full line shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OffResonanceRun {
    /// Drive minus qubit frequency.
    pub detuning_hz: f64,
    /// Drive power at the sample.
    pub drive_dbm: f64,
    /// Half-width of the frequency window around the drive.
    pub half_span_hz: f64,
    pub n_points: usize,
    pub n_avg: f64,
}

impl Default for OffResonanceRun {
    fn default() -> Self {
        Self {
            detuning_hz: -790e3,
            drive_dbm: -133.0,
            half_span_hz: 4e6,
            n_points: 1601,
            n_avg: 2.6e6,
        }
    }
}

/// Power sweep of the coherent, incoherent and lost powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringRun {
    pub rabi_min_hz: f64,
    pub rabi_max_hz: f64,
    /// Logarithmically spaced drive points.
    pub n_points: usize,
    pub n_avg: f64,
    /// Relative one-sigma error of the Rabi-frequency calibration. One
    /// common error is drawn per run and propagated into the fitted rates.
    pub rabi_scale_sigma: f64,
}

impl Default for ScatteringRun {
    fn default() -> Self {
        Self {
            rabi_min_hz: 20e3,
            rabi_max_hz: 5e6,
            n_points: 60,
            n_avg: 1.0e7,
            rabi_scale_sigma: 0.003,
        }
    }
}

/// Repeated power measurements at one saturating drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SinglePointRun {
    pub rabi_hz: f64,
    /// Number of independent data blocks; the row error is their spread.
    pub blocks: usize,
    /// Averages per block.
    pub n_avg: f64,
}

impl Default for SinglePointRun {
    fn default() -> Self {
        Self {
            rabi_hz: 1119e3,
            blocks: 4,
            n_avg: 1.0e9,
        }
    }
}

/// Ramsey emission and π-pulse power decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsRun {
    /// Detuning of the preparation pulse from the qubit.
    pub pulse_detuning_hz: f64,
    pub duration_s: f64,
    pub n_points: usize,
    pub bandwidth_hz: f64,
    pub n_avg_ramsey: f64,
    pub n_avg_power: f64,
}

impl Default for DynamicsRun {
    fn default() -> Self {
        Self {
            pulse_detuning_hz: 125e3,
            duration_s: 5e-6,
            n_points: 250,
            bandwidth_hz: 20e6,
            n_avg_ramsey: 1.4e7,
            n_avg_power: 3.0e8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub device: Device,
    /// Shared chain settings; each row overrides `n_avg` (and the dynamics
    /// row the bandwidth).
    pub chain: ChainConfig,
    /// Skip noise synthesis entirely.
    pub noiseless: bool,
    pub reflection: ReflectionRun,
    pub on_resonance: OnResonanceRun,
    pub off_resonance: OffResonanceRun,
    pub scattering: ScatteringRun,
    pub single_point: SinglePointRun,
    pub dynamics: DynamicsRun,
}

/// A rate in Hz with its one-sigma error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateHz {
    pub value_hz: f64,
    pub sigma_hz: f64,
}

impl From<Estimate> for RateHz {
    fn from(e: Estimate) -> Self {
        Self {
            value_hz: angular_to_hz(e.value),
            sigma_hz: angular_to_hz(e.sigma),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RatesHz {
    pub gamma_r: Option<RateHz>,
    pub gamma_n: Option<RateHz>,
    pub gamma_phi: Option<RateHz>,
    pub gamma_1: Option<RateHz>,
    pub gamma_2: Option<RateHz>,
}

impl From<&PartialRates> for RatesHz {
    fn from(p: &PartialRates) -> Self {
        Self {
            gamma_r: p.gamma_r.map(Into::into),
            gamma_n: p.gamma_n.map(Into::into),
            gamma_phi: p.gamma_phi.map(Into::into),
            gamma_1: p.gamma_1.map(Into::into),
            gamma_2: p.gamma_2.map(Into::into),
        }
    }
}

impl RatesHz {
    pub fn get(&self, field: &str) -> Option<RateHz> {
        match field {
            "gamma_r" => self.gamma_r,
            "gamma_n" => self.gamma_n,
            "gamma_phi" => self.gamma_phi,
            "gamma_1" => self.gamma_1,
            "gamma_2" => self.gamma_2,
            _ => None,
        }
    }
}

pub const FIELDS: [&str; 5] = ["gamma_r", "gamma_n", "gamma_phi", "gamma_1", "gamma_2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRow {
    pub method: String,
    pub ok: bool,
    pub error: Option<String>,
    /// One-sigma values, including fields taken from the reflection row.
    pub rates: RatesHz,
    /// Fields obtained from `Γ₁ = Γ_r + Γ_n` and `Γ₂ = Γ₁/2 + Γ_φ`.
    pub derived: Vec<String>,
    /// Fields copied from the reflection row; left out of comparisons.
    pub reference: Vec<String>,
    /// Factor applied to the errors in the printed table (1.96 for rows
    /// conventionally quoted at 95% confidence).
    pub table_error_scale: f64,
    /// Method-specific by-products such as the fitted Rabi frequency.
    pub extra: BTreeMap<String, RateHz>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema_version: u32,
    pub seed: u64,
    pub noiseless: bool,
    pub truth: RatesHz,
    pub rows: Vec<PipelineRow>,
    /// Inverse-variance mean over the rows that measure each field.
    pub consensus: RatesHz,
    pub disagreements: Vec<Disagreement>,
    /// Every pair of successful rows agrees within 2σ on every shared field.
    pub consistent: bool,
    pub failed: Vec<String>,
}

impl PipelineReport {
    pub fn row(&self, method: &str) -> Option<&PipelineRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Plain-text table in kHz with errors in parentheses.
    pub fn table(&self) -> String {
        let mut out = format!("{:<12}", "Method");
        for h in ["Γr", "Γn", "Γφ", "Γ1", "Γ2"] {
            out.push_str(&format!("{h:>14}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:<12}", row.method));
            if !row.ok {
                out.push_str(&format!("  failed: {}\n", row.error.as_deref().unwrap_or("")));
                continue;
            }
            for f in FIELDS {
                let cell = match row.rates.get(f) {
                    Some(r) if !row.reference.iter().any(|x| x == f) => {
                        format!(
                            "{:.1}({:.1})",
                            r.value_hz / 1e3,
                            row.table_error_scale * r.sigma_hz / 1e3
                        )
                    }
                    _ => "-".to_string(),
                };
                out.push_str(&format!("{cell:>14}"));
            }
            if row.table_error_scale != 1.0 {
                out.push_str("  [95%]");
            }
            out.push('\n');
        }
        out.push_str(&format!(
            "consistent within 2σ: {}\n",
            if self.consistent { "yes" } else { "no" }
        ));
        out
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

struct Ctx {
    rates: RateSet,
    omega_q: f64,
    f01: f64,
    noiseless: bool,
}

impl Ctx {
    fn chain(&self, base: &ChainConfig, n_avg: f64) -> ChainConfig {
        base.with_n_avg(n_avg)
    }
}

/// What one method hands on to the table.
struct RowOut {
    partial: PartialRates,
    reference: Vec<&'static str>,
    table_error_scale: f64,
    extra: BTreeMap<String, RateHz>,
    warnings: Vec<String>,
}

impl RowOut {
    fn new(partial: PartialRates) -> Self {
        Self {
            partial,
            reference: Vec::new(),
            table_error_scale: 1.0,
            extra: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }
}

/// Stream offset of each row so that rows never share random numbers.
fn stream(row: usize, k: u64) -> u64 {
    ((row as u64) << 32) + k
}

fn noisy_spectrum(ctx: &Ctx, clean: Spectrum, chain: &ChainConfig, row: usize) -> Result<Spectrum> {
    if ctx.noiseless {
        Ok(clean)
    } else {
        synthesize_noisy_psd(&clean, chain, stream(row, 0))
    }
}

fn noisy_trace(ctx: &Ctx, clean: ComplexTrace, chain: &ChainConfig, k: u64) -> Result<ComplexTrace> {
    if ctx.noiseless {
        Ok(clean)
    } else {
        synthesize_noisy_trace(&clean, chain, stream(5, k))
    }
}

fn reflection_row(ctx: &Ctx, cfg: &PipelineConfig) -> Result<RowOut> {
    let run = &cfg.reflection;
    ensure(run.n_points >= 6, "reflection.n_points", "must be >= 6")?;
    let flux = dbm_to_photon_flux(run.probe_dbm, ctx.f01)?;
    let rabi = 2.0 * (ctx.rates.gamma_r() * flux).sqrt();
    let half = hz_to_angular(0.5 * run.span_hz);
    let omega = linspace(ctx.omega_q - half, ctx.omega_q + half, run.n_points);
    let clean = omega
        .iter()
        .map(|&w| {
            reflection_coefficient(
                &DriveConfig::new(ctx.omega_q, w, rabi)?,
                &ctx.rates,
                ReflectionMode::WeakProbe,
            )
        })
        .collect::<Result<Vec<Complex64>>>()?;
    let fit = if ctx.noiseless {
        circle_fit(&omega, &clean, None)?
    } else {
        let noisy = synthesize_noisy_reflection(&clean, flux, &ctx.chain(&cfg.chain, run.n_avg), stream(0, 0))?;
        circle_fit(&omega, &noisy.r, Some(&noisy.sigma))?
    };
    let mut out = RowOut::new(PartialRates {
        gamma_r: Some(fit.estimate("gamma_r")?),
        gamma_2: Some(fit.estimate("gamma_2")?),
        ..Default::default()
    });
    out.extra.insert("f01".into(), RateHz::from(fit.estimate("omega_01")?));
    out.warnings = fit.warnings;
    Ok(out)
}

fn on_resonance_row(ctx: &Ctx, cfg: &PipelineConfig, gamma_r: Estimate) -> Result<RowOut> {
    let run = &cfg.on_resonance;
    let drive = DriveConfig::resonant(ctx.omega_q, hz_to_angular(run.rabi_hz))?;
    let half = hz_to_angular(run.rabi_hz + run.margin_hz);
    let omega = linspace(ctx.omega_q - half, ctx.omega_q + half, run.n_points);
    let clean = if run.exact_model {
        incoherent_spectrum(&omega, &drive, &ctx.rates)?
    } else {
        mollow_triplet_approx(&omega, &drive, &ctx.rates)?
    };
    let spec = noisy_spectrum(ctx, clean, &ctx.chain(&cfg.chain, run.n_avg), 1)?;
    let fit = fit_mollow_triplet(&spec, &TripletOptions::default())?;
    let mut out = RowOut::new(PartialRates {
        gamma_r: Some(gamma_r),
        gamma_1: Some(fit.estimate("gamma_1")?),
        gamma_2: Some(fit.estimate("gamma_2")?),
        ..Default::default()
    });
    out.reference.push("gamma_r");
    out.extra.insert("rabi".into(), fit.estimate("omega")?.into());
    out.warnings = fit.warnings;
    Ok(out)
}

fn off_resonance_row(ctx: &Ctx, cfg: &PipelineConfig, gamma_r: Estimate) -> Result<RowOut> {
    let run = &cfg.off_resonance;
    let flux = dbm_to_photon_flux(run.drive_dbm, ctx.f01)?;
    let rabi = 2.0 * (ctx.rates.gamma_r() * flux).sqrt();
    let drive = DriveConfig::detuned(ctx.omega_q, hz_to_angular(run.detuning_hz), rabi)?;
    let half = hz_to_angular(run.half_span_hz);
    let wp = drive.omega_p();
    let omega = linspace(wp - half, wp + half, run.n_points);
    let clean = incoherent_spectrum(&omega, &drive, &ctx.rates)?;
    let spec = noisy_spectrum(ctx, clean, &ctx.chain(&cfg.chain, run.n_avg), 2)?;
    let fit = fit_full_spectrum(
        SpectrumData {
            spectrum: &spec,
            omega_q: ctx.omega_q,
            guess: None,
        },
        gamma_r.value,
        &FullSpectrumOptions::default(),
    )?;
    let mut out = RowOut::new(PartialRates {
        gamma_r: Some(gamma_r),
        gamma_1: Some(fit.estimate("gamma_1")?),
        gamma_phi: Some(fit.estimate("gamma_phi")?),
        gamma_2: Some(fit.estimate("gamma_2")?),
        ..Default::default()
    });
    out.reference.push("gamma_r");
    out.extra.insert("rabi".into(), fit.estimate("omega")?.into());
    out.extra.insert("delta".into(), fit.estimate("delta")?.into());
    out.warnings = fit.warnings;
    Ok(out)
}

fn joint_rates(curves: &PowerCurves) -> Result<(PartialRates, Vec<String>)> {
    let fit = fit_scattering_powers(curves)?;
    let j = &fit.joint;
    let p = PartialRates {
        gamma_r: Some(j.estimate("gamma_r")?),
        gamma_n: Some(j.estimate("gamma_n")?),
        gamma_phi: Some(j.estimate("gamma_phi")?),
        gamma_1: Some(j.estimate("gamma_1")?),
        gamma_2: Some(j.estimate("gamma_2")?),
    };
    let mut warnings = fit.warnings;
    warnings.extend(j.warnings.iter().cloned());
    Ok((p, warnings))
}

fn scattering_row(ctx: &Ctx, cfg: &PipelineConfig) -> Result<RowOut> {
    let run = &cfg.scattering;
    ensure(
        run.rabi_min_hz > 0.0 && run.rabi_max_hz > run.rabi_min_hz,
        "scattering.rabi_min_hz",
        "need 0 < min < max",
    )?;
    ensure(
        run.rabi_scale_sigma.is_finite() && (0.0..0.5).contains(&run.rabi_scale_sigma),
        "scattering.rabi_scale_sigma",
        "must lie in [0, 0.5)",
    )?;
    let (a, b) = (run.rabi_min_hz.ln(), run.rabi_max_hz.ln());
    let rabi: Vec<f64> = linspace(a, b, run.n_points)
        .into_iter()
        .map(|x| hz_to_angular(x.exp()))
        .collect();
    let chain = ctx.chain(&cfg.chain, run.n_avg);
    // The applied drive differs from the calibrated one by a common factor.
    let actual = if ctx.noiseless {
        1.0
    } else {
        let z: f64 = chain.rng(stream(3, 1 << 31)).sample(rand_distr::StandardNormal);
        1.0 + run.rabi_scale_sigma * z
    };
    let points = rabi
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let clean = power_balance(w * actual, &ctx.rates)?;
            if ctx.noiseless {
                Ok((clean, None))
            } else {
                let n = synthesize_noisy_powers(&clean, &chain, stream(3, k as u64))?;
                Ok((n.budget, Some(n.sigma)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&PowerBudget) -> f64| points.iter().map(|(b, _)| f(b)).collect::<Vec<f64>>();
    let sig =
        |f: fn(&PowerBudget) -> f64| -> Option<Vec<f64>> { points.iter().map(|(_, s)| s.as_ref().map(f)).collect() };
    let curves = PowerCurves {
        rabi,
        p_coh: col(|b| b.p_coh),
        p_incoh: col(|b| b.p_incoh),
        p_loss: col(|b| b.p_loss),
        sigma_coh: sig(|b| b.p_coh),
        sigma_incoh: sig(|b| b.p_incoh),
        sigma_loss: sig(|b| b.p_loss),
    };
    let (mut p, warnings) = joint_rates(&curves)?;
    if run.rabi_scale_sigma > 0.0 && !ctx.noiseless {
        // Shift of each rate under a one-sigma calibration error, added in quadrature.
        let mut shifted = [PartialRates::default(); 2];
        for (i, sgn) in [1.0, -1.0].into_iter().enumerate() {
            let mut c = curves.clone();
            c.rabi.iter_mut().for_each(|w| *w *= 1.0 + sgn * run.rabi_scale_sigma);
            shifted[i] = joint_rates(&c)?.0;
        }
        let widen = |e: &mut Option<Estimate>, up: Option<Estimate>, dn: Option<Estimate>| {
            if let (Some(e), Some(u), Some(d)) = (e.as_mut(), up, dn) {
                e.sigma = e.sigma.hypot(0.5 * (u.value - d.value));
            }
        };
        let [up, dn] = shifted;
        widen(&mut p.gamma_r, up.gamma_r, dn.gamma_r);
        widen(&mut p.gamma_n, up.gamma_n, dn.gamma_n);
        widen(&mut p.gamma_phi, up.gamma_phi, dn.gamma_phi);
        widen(&mut p.gamma_1, up.gamma_1, dn.gamma_1);
        widen(&mut p.gamma_2, up.gamma_2, dn.gamma_2);
    }
    let mut out = RowOut::new(p);
    out.warnings = warnings;
    Ok(out)
}

fn single_point_row(ctx: &Ctx, cfg: &PipelineConfig, gamma_r: Estimate, gamma_2: Estimate) -> Result<RowOut> {
    let run = &cfg.single_point;
    ensure(run.blocks >= 1, "single_point.blocks", "must be >= 1")?;
    let rabi = hz_to_angular(run.rabi_hz);
    let clean = power_balance(rabi, &ctx.rates)?;
    let chain = ctx.chain(&cfg.chain, run.n_avg);
    let reference = SinglePointRef {
        gamma_r: gamma_r.value,
        gamma_2: gamma_2.value,
    };
    let gn = (0..run.blocks)
        .map(|k| {
            let (b, s) = if ctx.noiseless {
                (clean, None)
            } else {
                let n = synthesize_noisy_powers(&clean, &chain, stream(4, k as u64))?;
                (n.budget, Some(n.sigma))
            };
            let est = |v: f64, s: Option<f64>| Estimate::new(v, s.unwrap_or(0.0));
            let sp = single_point_rates(
                est(b.p_loss, s.map(|s| s.p_loss)),
                est(b.p_incoh, s.map(|s| s.p_incoh)),
                rabi,
                Some(reference),
            )?;
            Ok(sp.gamma_n.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = gn.len() as f64;
    let mean = gn.iter().sum::<f64>() / n;
    let std = if gn.len() > 1 {
        (gn.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut out = RowOut::new(PartialRates {
        gamma_r: Some(gamma_r),
        gamma_n: Some(Estimate::new(mean, std)),
        gamma_2: Some(gamma_2),
        ..Default::default()
    });
    out.reference = vec!["gamma_r", "gamma_2"];
    if gn.len() == 1 && !ctx.noiseless {
        out.warnings
            .push("one block only; the spread-based error is zero".into());
    }
    Ok(out)
}

fn dynamics_row(ctx: &Ctx, cfg: &PipelineConfig, gamma_r: Estimate) -> Result<RowOut> {
    let run = &cfg.dynamics;
    ensure(run.n_points >= 4, "dynamics.n_points", "must be >= 4")?;
    ensure(run.duration_s > 0.0, "dynamics.duration_s", "must be > 0")?;
    let t = linspace(0.0, run.duration_s, run.n_points);
    let mut chain = cfg.chain;
    chain.bandwidth_hz = run.bandwidth_hz;
    let delta = hz_to_angular(run.pulse_detuning_hz);
    // Field amplitude in √(photon flux): √Γ_r times the coherence.
    let ramsey = ramsey_emission(delta, &ctx.rates, &t, ctx.rates.gamma_r().sqrt())?;
    let ramsey = noisy_trace(ctx, ramsey, &chain.with_n_avg(run.n_avg_ramsey), 0)?;
    let r = fit_complex_decay(&ramsey, Some(delta))?;
    let power = t1_power_trace(&ctx.rates, &t, 1.0)?;
    let power = noisy_trace(ctx, power, &chain.with_n_avg(run.n_avg_power), 1)?;
    let p = fit_exponential_power(&power)?;
    let mut out = RowOut::new(PartialRates {
        gamma_r: Some(gamma_r),
        gamma_1: Some(p.estimate("gamma_1")?),
        gamma_2: Some(r.estimate("gamma_2")?),
        ..Default::default()
    });
    out.reference.push("gamma_r");
    out.table_error_scale = 1.96;
    out.extra
        .insert("delta_omega".into(), r.estimate("delta_omega")?.into());
    out.warnings = r.warnings;
    out.warnings.extend(p.warnings);
    Ok(out)
}

fn finish(method: &str, res: Result<RowOut>) -> (PipelineRow, Option<RateRow>) {
    match res {
        Ok(out) => {
            let row = complete_rates(method, &out.partial, None);
            let mut warnings = out.warnings;
            warnings.extend(row.warnings.iter().cloned());
            let reference: Vec<String> = out.reference.iter().map(|s| s.to_string()).collect();
            // Copied fields take no part in the comparison or the consensus.
            let mut cmp = row.clone();
            for f in &reference {
                match f.as_str() {
                    "gamma_r" => cmp.rates.gamma_r = None,
                    "gamma_2" => cmp.rates.gamma_2 = None,
                    _ => {}
                }
            }
            let derived = row.derived.iter().filter(|d| !reference.contains(d)).cloned().collect();
            (
                PipelineRow {
                    method: method.to_string(),
                    ok: true,
                    error: None,
                    rates: RatesHz::from(&row.rates),
                    derived,
                    reference,
                    table_error_scale: out.table_error_scale,
                    extra: out.extra,
                    warnings,
                },
                Some(cmp),
            )
        }
        Err(e) => (
            PipelineRow {
                method: method.to_string(),
                ok: false,
                error: Some(e.to_string()),
                rates: RatesHz::default(),
                derived: Vec::new(),
                reference: Vec::new(),
                table_error_scale: 1.0,
                extra: BTreeMap::new(),
                warnings: Vec::new(),
            },
            None,
        ),
    }
}

/// Simulates and fits every method. Failing rows are reported, not fatal;
/// only an invalid configuration is an error.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.chain.validate()?;
    let rates = cfg.device.rates()?;
    let f01 = cfg.device.f01_hz()?;
    for (name, n) in [
        ("reflection.n_avg", cfg.reflection.n_avg),
        ("on_resonance.n_avg", cfg.on_resonance.n_avg),
        ("off_resonance.n_avg", cfg.off_resonance.n_avg),
        ("scattering.n_avg", cfg.scattering.n_avg),
        ("single_point.n_avg", cfg.single_point.n_avg),
        ("dynamics.n_avg_ramsey", cfg.dynamics.n_avg_ramsey),
        ("dynamics.n_avg_power", cfg.dynamics.n_avg_power),
    ] {
        ensure(n.is_finite() && n >= 1.0, name, "must be >= 1")?;
    }
    let ctx = Ctx {
        rates,
        omega_q: hz_to_angular(f01),
        f01,
        noiseless: cfg.noiseless,
    };

    let reflection = reflection_row(&ctx, cfg);
    let refs = reflection
        .as_ref()
        .ok()
        .map(|o| (o.partial.gamma_r.unwrap(), o.partial.gamma_2.unwrap()));
    let missing = || Error::InsufficientData("no reference Γ_r: the reflection row failed".into());
    let others: Vec<Result<RowOut>> = (1..6usize)
        .into_par_iter()
        .map(|k| match (k, refs) {
            (3, _) => scattering_row(&ctx, cfg),
            (_, None) => Err(missing()),
            (1, Some((gr, _))) => on_resonance_row(&ctx, cfg, gr),
            (2, Some((gr, _))) => off_resonance_row(&ctx, cfg, gr),
            (4, Some((gr, g2))) => single_point_row(&ctx, cfg, gr, g2),
            (_, Some((gr, _))) => dynamics_row(&ctx, cfg, gr),
        })
        .collect();

    let mut rows = Vec::new();
    let mut cmp = Vec::new();
    for (method, res) in METHODS.iter().zip(std::iter::once(reflection).chain(others)) {
        let (row, c) = finish(method, res);
        rows.push(row);
        cmp.extend(c);
    }
    let combined: CombinedRates = combine_rows(cmp);
    let failed = rows.iter().filter(|r| !r.ok).map(|r| r.method.clone()).collect();
    let truth = PartialRates {
        gamma_r: Some(Estimate::exact(rates.gamma_r())),
        gamma_n: Some(Estimate::exact(rates.gamma_n())),
        gamma_phi: Some(Estimate::exact(rates.gamma_phi())),
        gamma_1: Some(Estimate::exact(rates.gamma_1())),
        gamma_2: Some(Estimate::exact(rates.gamma_2())),
    };
    Ok(PipelineReport {
        schema_version: SCHEMA_VERSION,
        seed: cfg.chain.seed,
        noiseless: cfg.noiseless,
        truth: RatesHz::from(&truth),
        rows,
        consensus: RatesHz::from(&combined.consensus),
        disagreements: combined.disagreements,
        consistent: combined.consistent,
        failed,
    })
}

/// Many short Ramsey traces with slow parameter drift between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RamseyEnsemble {
    pub n_traces: usize,
    /// Averages per trace.
    pub n_avg: f64,
    pub interval_s: f64,
    /// One-sigma trace-to-trace jitter of the qubit frequency, Hz.
    pub freq_jitter_hz: f64,
    /// One-sigma trace-to-trace jitter of each of `Γ_r`, `Γ_n`, `Γ_φ`, Hz.
    pub rate_jitter_hz: f64,
    /// Time grid, detuning and bandwidth.
    pub trace: DynamicsRun,
}

impl Default for RamseyEnsemble {
    fn default() -> Self {
        Self {
            n_traces: 975,
            n_avg: 2.3e6,
            interval_s: 438.0,
            freq_jitter_hz: 5e3,
            rate_jitter_hz: 4e3,
            trace: DynamicsRun::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub gamma_2: Vec<RateHz>,
    /// Fitted detuning of each trace, Hz.
    pub delta: Vec<RateHz>,
    /// Gaussian fit to the histogram of the fitted `Γ₂`, Hz.
    pub histogram: HistogramFit,
    /// Median single-trace error bar, Hz.
    pub typical_error_hz: f64,
    /// Width of the distribution over the typical error bar.
    pub excess: f64,
    /// Traces whose fit failed, by index.
    pub failed: Vec<usize>,
}

/// Fits every trace of a drifting Ramsey series and histograms `Γ₂`.
pub fn ramsey_ensemble(device: &Device, chain: &ChainConfig, cfg: &RamseyEnsemble) -> Result<EnsembleReport> {
    chain.validate()?;
    ensure(
        cfg.n_traces >= 30,
        "n_traces",
        "need at least 30 traces for a histogram",
    )?;
    ensure(cfg.n_avg.is_finite() && cfg.n_avg >= 1.0, "n_avg", "must be >= 1")?;
    let base = device.rates()?;
    let draws = drift_ensemble(
        &base,
        cfg.freq_jitter_hz,
        cfg.rate_jitter_hz,
        &DriftEnsemble {
            n_traces: cfg.n_traces,
            interval_s: cfg.interval_s,
        },
        chain,
    )?;
    let run = &cfg.trace;
    let t = linspace(0.0, run.duration_s, run.n_points);
    let mut tc = chain.with_n_avg(cfg.n_avg);
    tc.bandwidth_hz = run.bandwidth_hz;
    let delta0 = hz_to_angular(run.pulse_detuning_hz);
    let fits: Vec<Result<(Estimate, Estimate)>> = draws
        .par_iter()
        .map(|d| {
            let delta = delta0 + d.delta_omega;
            let clean = ramsey_emission(delta, &d.rates, &t, d.rates.gamma_r().sqrt())?;
            let noisy = synthesize_noisy_trace(&clean, &tc, stream(6, d.index as u64))?;
            let f = fit_complex_decay(&noisy, Some(delta0))?;
            Ok((f.estimate("gamma_2")?, f.estimate("delta_omega")?))
        })
        .collect();
    let mut gamma_2 = Vec::new();
    let mut delta = Vec::new();
    let mut failed = Vec::new();
    for (i, f) in fits.into_iter().enumerate() {
        match f {
            Ok((g, d)) => {
                gamma_2.push(RateHz::from(g));
                delta.push(RateHz::from(d));
            }
            Err(_) => failed.push(i),
        }
    }
    let values: Vec<f64> = gamma_2.iter().map(|g| g.value_hz).collect();
    let histogram = fit_gaussian_histogram(&values)?;
    let mut errs: Vec<f64> = gamma_2.iter().map(|g| g.sigma_hz).collect();
    errs.sort_by(f64::total_cmp);
    let typical_error_hz = errs[errs.len() / 2];
    let width = histogram.fit.value("sigma").unwrap_or(histogram.sample_std).abs();
    Ok(EnsembleReport {
        gamma_2,
        delta,
        excess: width / typical_error_hz,
        histogram,
        typical_error_hz,
        failed,
    })
}
