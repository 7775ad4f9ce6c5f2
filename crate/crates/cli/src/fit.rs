//! Estimators applied to CSV data, with results written as JSON.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use ratefit_core::dynamics::{ComplexTrace, TraceRole};
use ratefit_core::fit::{
    circle_fit, fit_complex_decay, fit_exponential_power, fit_full_spectrum, fit_mollow_triplet, fit_scattering_powers,
    single_point_rates, FullSpectrumOptions, ParamKind, PowerCurves, SinglePointRef, SpectrumData, TripletOptions,
};
use ratefit_core::units::{angular_to_hz, hz_to_angular};
use ratefit_core::{Estimate, FitResult, Spectrum};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::table::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitKind {
    Reflection,
    Triplet,
    Spectrum,
    Powers,
    SinglePoint,
    Dynamics,
}

impl FitKind {
    pub fn name(self) -> &'static str {
        match self {
            FitKind::Reflection => "reflection",
            FitKind::Triplet => "triplet",
            FitKind::Spectrum => "spectrum",
            FitKind::Powers => "powers",
            FitKind::SinglePoint => "single-point",
            FitKind::Dynamics => "dynamics",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamOut {
    pub name: String,
    pub value: f64,
    /// One-sigma error.
    pub sigma: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub kind: String,
    pub params: Vec<ParamOut>,
    /// In the units of `params`.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub reduced_chi2: f64,
    pub residual_norm: f64,
    pub n_iter: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    /// Sub-fits, such as the individual power curves.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub components: BTreeMap<String, FitReport>,
}

impl FitReport {
    pub fn from_fit(kind: &str, f: &FitResult) -> Self {
        let scale: Vec<f64> = f
            .kinds
            .iter()
            .map(|k| match k {
                ParamKind::Rate => 1.0 / TAU,
                ParamKind::RateSquared => 1.0 / (TAU * TAU),
                ParamKind::Plain => 1.0,
            })
            .collect();
        let unit = |k: &ParamKind| match k {
            ParamKind::Rate => "Hz",
            ParamKind::RateSquared => "Hz^2",
            ParamKind::Plain => "",
        };
        let params = (0..f.params.len())
            .map(|i| ParamOut {
                name: f.names[i].clone(),
                value: f.params[i] * scale[i],
                sigma: f.sigma_of(i) * scale[i],
                unit: unit(&f.kinds[i]).to_string(),
            })
            .collect();
        let covariance = f
            .covariance
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, c)| c * scale[i] * scale[j]).collect())
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            kind: kind.to_string(),
            params,
            covariance,
            chi2: f.chi2,
            dof: f.dof,
            reduced_chi2: f.reduced_chi2(),
            residual_norm: f.residual_norm,
            n_iter: f.n_iter,
            converged: f.converged,
            warnings: f.warnings.clone(),
            components: BTreeMap::new(),
        }
    }

    #[cfg(test)]
    pub fn param(&self, name: &str) -> Option<&ParamOut> {
        self.params.iter().find(|p| p.name == name)
    }

    /// True when this fit and all of its components converged.
    pub fn all_converged(&self) -> bool {
        self.converged && self.components.values().all(FitReport::all_converged)
    }
}

/// Reads `sigma` when present and strictly positive everywhere.
fn weights(t: &Table, name: &str) -> Option<Vec<f64>> {
    t.optional(name)
        .filter(|s| s.iter().all(|x| *x > 0.0))
        .map(<[f64]>::to_vec)
}

pub fn fit(kind: FitKind, data: &Table, cfg: &RunConfig) -> Result<FitReport, CliError> {
    match kind {
        FitKind::Reflection => reflection(data),
        FitKind::Triplet => triplet(data, cfg),
        FitKind::Spectrum => spectrum(data, cfg),
        FitKind::Powers => powers(data),
        FitKind::SinglePoint => single_point(data, cfg),
        FitKind::Dynamics => dynamics(data, cfg),
    }
}

fn reflection(t: &Table) -> Result<FitReport, CliError> {
    t.require(&["freq_hz", "re_r", "im_r"])?;
    let omega: Vec<f64> = t.column("freq_hz")?.iter().map(|f| hz_to_angular(*f)).collect();
    let r: Vec<Complex64> = t
        .column("re_r")?
        .iter()
        .zip(t.column("im_r")?)
        .map(|(a, b)| Complex64::new(*a, *b))
        .collect();
    let f = circle_fit(&omega, &r, weights(t, "sigma_re").as_deref())?;
    Ok(FitReport::from_fit("reflection", &f))
}

/// Spectrum on an absolute grid from the `detuning_hz` column.
fn read_spectrum(t: &Table, omega_q: f64) -> Result<Spectrum, CliError> {
    t.require(&["detuning_hz", "psd"])?;
    let omega = t
        .column("detuning_hz")?
        .iter()
        .map(|d| omega_q + hz_to_angular(*d))
        .collect();
    let psd = t.column("psd")?.iter().map(|p| p / TAU).collect();
    let sigma = weights(t, "sigma").map(|s| s.iter().map(|x| x / TAU).collect());
    Spectrum::new(omega, psd, sigma).map_err(|e| CliError::Schema(e.to_string()))
}

fn triplet(t: &Table, cfg: &RunConfig) -> Result<FitReport, CliError> {
    let wq = hz_to_angular(cfg.device().f01_hz()?);
    let spec = read_spectrum(t, wq)?;
    let opts = TripletOptions {
        joint: cfg.fit.joint_triplet,
        ..Default::default()
    };
    let mut f = fit_mollow_triplet(&spec, &opts)?;
    // Report peak positions as detunings from the qubit.
    for (i, name) in f.names.iter().enumerate() {
        if name.starts_with("center") {
            f.params[i] -= wq;
        }
    }
    Ok(FitReport::from_fit("triplet", &f))
}

fn gamma_r_ref(cfg: &RunConfig) -> Result<f64, CliError> {
    Ok(match cfg.fit.gamma_r_ref_hz {
        Some(g) => hz_to_angular(g),
        None => cfg.device().rates()?.gamma_r(),
    })
}

fn spectrum(t: &Table, cfg: &RunConfig) -> Result<FitReport, CliError> {
    let wq = hz_to_angular(cfg.device().f01_hz()?);
    let spec = read_spectrum(t, wq)?;
    let opts = FullSpectrumOptions {
        free_scale: cfg.fit.free_scale,
    };
    let f = fit_full_spectrum(
        SpectrumData {
            spectrum: &spec,
            omega_q: wq,
            guess: None,
        },
        gamma_r_ref(cfg)?,
        &opts,
    )?;
    Ok(FitReport::from_fit("spectrum", &f))
}

fn read_curves(t: &Table) -> Result<PowerCurves, CliError> {
    t.require(&["rabi_hz", "p_coh", "p_incoh", "p_loss"])?;
    Ok(PowerCurves {
        rabi: t.column("rabi_hz")?.iter().map(|f| hz_to_angular(*f)).collect(),
        p_coh: t.column("p_coh")?.to_vec(),
        p_incoh: t.column("p_incoh")?.to_vec(),
        p_loss: t.column("p_loss")?.to_vec(),
        sigma_coh: t.optional("sigma_coh").map(<[f64]>::to_vec),
        sigma_incoh: t.optional("sigma_incoh").map(<[f64]>::to_vec),
        sigma_loss: t.optional("sigma_loss").map(<[f64]>::to_vec),
    })
}

fn powers(t: &Table) -> Result<FitReport, CliError> {
    let s = fit_scattering_powers(&read_curves(t)?)?;
    let mut r = FitReport::from_fit("powers", &s.joint);
    r.warnings.extend(s.warnings.iter().cloned());
    for (name, f) in [("incoherent", &s.incoh), ("loss", &s.loss), ("coherent", &s.coh)] {
        r.components.insert(name.to_string(), FitReport::from_fit(name, f));
    }
    Ok(r)
}

/// One estimate per powers row with a nonzero drive; several rows are
/// summarized by their mean and spread.
fn single_point(t: &Table, cfg: &RunConfig) -> Result<FitReport, CliError> {
    let c = read_curves(t)?;
    let reference = match (cfg.fit.gamma_r_ref_hz, cfg.fit.gamma_2_ref_hz) {
        (Some(gr), Some(g2)) => Some(SinglePointRef {
            gamma_r: hz_to_angular(gr),
            gamma_2: hz_to_angular(g2),
        }),
        (None, None) => None,
        _ => {
            return Err(CliError::Schema(
                "config at `fit`: give both gamma_r_ref_hz and gamma_2_ref_hz, or neither".into(),
            ))
        }
    };
    let est = |v: &[f64], s: &Option<Vec<f64>>, i: usize| Estimate::new(v[i], s.as_ref().map_or(0.0, |s| s[i]));
    let mut gr = Vec::new();
    let mut gn = Vec::new();
    let mut warnings = Vec::new();
    let mut first_err = None;
    for i in 0..c.rabi.len() {
        if c.rabi[i] == 0.0 {
            continue;
        }
        let sp = match single_point_rates(
            est(&c.p_loss, &c.sigma_loss, i),
            est(&c.p_incoh, &c.sigma_incoh, i),
            c.rabi[i],
            reference,
        ) {
            Ok(sp) => sp,
            Err(e) => {
                warnings.push(format!("row {} skipped: {e}", i + 1));
                first_err.get_or_insert(e);
                continue;
            }
        };
        warnings.push(format!(
            "row {}: correction Γ₁Γ₂/Ω² = {:.4}, {} iterations",
            i + 1,
            sp.correction,
            sp.iterations
        ));
        gr.push(sp.gamma_r);
        gn.push(sp.gamma_n);
    }
    if gn.is_empty() {
        return Err(match first_err {
            Some(e) => e.into(),
            None => CliError::Schema("no row with a nonzero drive".into()),
        });
    }
    let summarize = |v: &[Estimate]| -> Estimate {
        if v.len() == 1 {
            return v[0];
        }
        let n = v.len() as f64;
        let m = v.iter().map(|e| e.value).sum::<f64>() / n;
        let var = v.iter().map(|e| (e.value - m).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate::new(m, var.sqrt())
    };
    let (r, n) = (summarize(&gr), summarize(&gn));
    let p = |name: &str, e: Estimate| ParamOut {
        name: name.to_string(),
        value: angular_to_hz(e.value),
        sigma: angular_to_hz(e.sigma),
        unit: "Hz".into(),
    };
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        kind: "single-point".into(),
        params: vec![p("gamma_r", r), p("gamma_n", n)],
        covariance: vec![
            vec![angular_to_hz(r.sigma).powi(2), 0.0],
            vec![0.0, angular_to_hz(n.sigma).powi(2)],
        ],
        chi2: 0.0,
        dof: 0,
        reduced_chi2: 0.0,
        residual_norm: 0.0,
        n_iter: 0,
        converged: true,
        warnings,
        components: BTreeMap::new(),
    })
}

fn dynamics(t: &Table, cfg: &RunConfig) -> Result<FitReport, CliError> {
    let time = t.column("t_s")?.to_vec();
    let sigma = weights(t, "sigma");
    if t.has("re_v") || t.has("im_v") {
        t.require(&["re_v", "im_v"])?;
        let v = t
            .column("re_v")?
            .iter()
            .zip(t.column("im_v")?)
            .map(|(a, b)| Complex64::new(*a, *b))
            .collect();
        let trace =
            ComplexTrace::new(time, v, sigma, TraceRole::Amplitude).map_err(|e| CliError::Schema(e.to_string()))?;
        let hint = cfg.fit.detuning_hint_hz.unwrap_or(cfg.dynamics.pulse_detuning_hz);
        let f = fit_complex_decay(&trace, Some(hz_to_angular(hint)))?;
        Ok(FitReport::from_fit("dynamics", &f))
    } else if t.has("power") {
        let v = t.column("power")?.iter().map(|p| Complex64::new(*p, 0.0)).collect();
        let trace = ComplexTrace::new(time, v, sigma, TraceRole::Power).map_err(|e| CliError::Schema(e.to_string()))?;
        let f = fit_exponential_power(&trace)?;
        Ok(FitReport::from_fit("dynamics", &f))
    } else {
        Err(CliError::Schema(format!(
            "missing column `re_v` or `power` (found: {})",
            t.headers.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, SimKind};
    use crate::table::read_table;

    fn round_trip(sim: SimKind, kind: FitKind, cfg: &RunConfig) -> FitReport {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        simulate(sim, cfg, &p).unwrap();
        fit(kind, &read_table(&p).unwrap(), cfg).unwrap()
    }

    fn noiseless() -> RunConfig {
        RunConfig {
            noiseless: true,
            ..Default::default()
        }
    }

    fn close(r: &FitReport, name: &str, want: f64, rel: f64) {
        let got = r.param(name).unwrap().value;
        assert!((got - want).abs() <= rel * want.abs(), "{name}: {got} vs {want}");
    }

    #[test]
    fn noiseless_round_trips_recover_the_device() {
        let cfg = noiseless();
        let d = cfg.device();
        let r = round_trip(SimKind::Reflection, FitKind::Reflection, &cfg);
        close(&r, "gamma_r", d.gamma_r_hz, 1e-6);
        let r = round_trip(SimKind::Spectrum, FitKind::Spectrum, &cfg);
        close(&r, "gamma_phi", d.gamma_phi_hz, 1e-4);
        close(&r, "omega", cfg.drive.rabi_hz, 1e-6);
        let r = round_trip(SimKind::Powers, FitKind::Powers, &cfg);
        close(&r, "gamma_n", d.gamma_n_hz, 1e-6);
        assert_eq!(r.components.len(), 3);
        let r = round_trip(SimKind::Dynamics, FitKind::Dynamics, &cfg);
        close(&r, "delta_omega", cfg.dynamics.pulse_detuning_hz, 1e-6);
        close(
            &r,
            "gamma_2",
            d.gamma_r_hz / 2.0 + d.gamma_n_hz / 2.0 + d.gamma_phi_hz,
            1e-6,
        );
    }

    #[test]
    fn triplet_centres_are_detunings() {
        let mut cfg = noiseless();
        cfg.spectrum.model = crate::config::SpectrumModel::Triplet;
        let r = round_trip(SimKind::Spectrum, FitKind::Triplet, &cfg);
        assert!(r.param("center").unwrap().value.abs() < 1e3);
        close(&r, "omega", cfg.drive.rabi_hz, 1e-3);
    }

    #[test]
    fn units_follow_the_parameter_kind() {
        let mut f = FitResult {
            names: vec!["g".into(), "gg".into(), "a".into()],
            kinds: vec![ParamKind::Rate, ParamKind::RateSquared, ParamKind::Plain],
            params: vec![TAU, TAU * TAU, 2.0],
            covariance: vec![vec![TAU * TAU, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 4.0]],
            residual_norm: 0.0,
            chi2: 0.0,
            dof: 1,
            n_iter: 1,
            converged: true,
            warnings: vec![],
        };
        let r = FitReport::from_fit("x", &f);
        assert_eq!(r.params[0].value, 1.0);
        assert_eq!(r.params[0].sigma, 1.0);
        assert_eq!(r.params[1].value, 1.0);
        assert_eq!(r.params[1].unit, "Hz^2");
        assert_eq!(r.params[2].sigma, 2.0);
        f.converged = false;
        assert!(!FitReport::from_fit("x", &f).all_converged());
    }
}
