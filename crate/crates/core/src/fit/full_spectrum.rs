//! Fits of the complete fluorescence line shape at a known radiative rate.

use serde::{Deserialize, Serialize};

use super::lm::{damped_least_squares, FitResult, LmOptions, ParamKind, Problem};
use super::triplet::find_peaks;
use crate::error::{Error, Result};
use crate::qed::{i3_closed, Spectrum, SPECTRUM_NORM};

/// Starting point for one spectrum; rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGuess {
    pub gamma_1: f64,
    pub gamma_phi: f64,
    pub rabi: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FullSpectrumOptions {
    /// Fit a free amplitude factor per spectrum.
    pub free_scale: bool,
}

/// One measured spectrum with the qubit frequency it refers to.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumData<'a> {
    pub spectrum: &'a Spectrum,
    pub omega_q: f64,
    pub guess: Option<SpectrumGuess>,
}

/// Rough starting point from the peak positions. The central line sits at
/// the drive, the sidebands at `±√(Ω² + Δ²)` around it.
pub fn guess_from_peaks(spectrum: &Spectrum, omega_q: f64) -> Result<SpectrumGuess> {
    let n = spectrum.len();
    let x: Vec<f64> = spectrum.omega.iter().map(|w| w - omega_q).collect();
    let mut peaks = find_peaks(&x, &spectrum.psd, (n / 400).max(1), 3);
    if peaks.is_empty() {
        return Err(Error::InsufficientData("no spectral peak to start from".into()));
    }
    let hw = peaks[0].hwhm;
    if peaks.len() == 3 {
        peaks.sort_by(|a, b| x[a.index].total_cmp(&x[b.index]));
        let delta = x[peaks[1].index];
        let split = 0.5 * (x[peaks[2].index] - x[peaks[0].index]);
        let rabi = (split * split - delta * delta).max(0.25 * split * split).sqrt();
        let g2 = peaks[1].hwhm;
        Ok(SpectrumGuess {
            gamma_1: 1.6 * g2,
            gamma_phi: 0.2 * g2,
            rabi,
            delta,
        })
    } else {
        Ok(SpectrumGuess {
            gamma_1: 1.6 * hw,
            gamma_phi: 0.2 * hw,
            rabi: hw,
            delta: x[peaks[0].index],
        })
    }
}

/// Fits `S_i(ω) = (Γ_r/π)·Re I₃` to one spectrum with `Γ_r` held at
/// `gamma_r_ref`. Free parameters are `gamma_1`, `gamma_phi` (which may be
/// negative down to `−Γ₁/4`), `omega` and `delta`; `gamma_n` and `gamma_2`
/// are derived.
pub fn fit_full_spectrum(data: SpectrumData<'_>, gamma_r_ref: f64, opts: &FullSpectrumOptions) -> Result<FitResult> {
    fit_full_spectra(&[data], gamma_r_ref, opts)
}

/// Simultaneous fit of several spectra sharing `gamma_1` and `gamma_phi`.
/// The Rabi frequency, detuning and (optionally) amplitude are free per
/// spectrum and carry the suffix `_k` when more than one spectrum is given.
pub fn fit_full_spectra(data: &[SpectrumData<'_>], gamma_r_ref: f64, opts: &FullSpectrumOptions) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::InsufficientData("no spectra".into()));
    }
    if !(gamma_r_ref.is_finite() && gamma_r_ref > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma_r_ref",
            reason: format!("must be > 0, got {gamma_r_ref}"),
        });
    }
    let mut guesses = Vec::with_capacity(data.len());
    for d in data {
        guesses.push(match d.guess {
            Some(g) => g,
            None => guess_from_peaks(d.spectrum, d.omega_q)?,
        });
    }
    // Parameters are fitted in units of Γ_r so that they are all of order one.
    let u = gamma_r_ref;
    let per = if opts.free_scale { 3 } else { 2 };
    let ns = data.len();
    let mut names: Vec<String> = vec!["gamma_1".into(), "gamma_phi".into()];
    let mut init = vec![
        guesses.iter().map(|g| g.gamma_1).sum::<f64>() / ns as f64 / u,
        guesses.iter().map(|g| g.gamma_phi).sum::<f64>() / ns as f64 / u,
    ];
    let mut kinds = vec![ParamKind::Rate, ParamKind::Rate];
    for (k, g) in guesses.iter().enumerate() {
        let sfx = if ns > 1 { format!("_{k}") } else { String::new() };
        names.push(format!("omega{sfx}"));
        names.push(format!("delta{sfx}"));
        init.push(g.rabi / u);
        init.push(g.delta / u);
        kinds.extend([ParamKind::Rate, ParamKind::Rate]);
        if opts.free_scale {
            names.push(format!("scale{sfx}"));
            init.push(1.0);
            kinds.push(ParamKind::Plain);
        }
    }
    let m: usize = data.iter().map(|d| d.spectrum.len()).sum();
    let xs: Vec<Vec<f64>> = data
        .iter()
        .map(|d| d.spectrum.omega.iter().map(|w| (w - d.omega_q) / u).collect())
        .collect();
    let residual = |p: &[f64], r: &mut [f64]| -> Result<()> {
        let (g1, gphi) = (p[0], p[1]);
        if g1 <= 0.0 || gphi <= -0.25 * g1 {
            return Err(Error::Degenerate("Γ₁ > 0 and Γ_φ > −Γ₁/4 required".into()));
        }
        let g2 = 0.5 * g1 + gphi;
        let mut off = 0;
        for (k, d) in data.iter().enumerate() {
            let base = 2 + per * k;
            let (rabi, delta) = (p[base], p[base + 1]);
            let scale = if opts.free_scale { p[base + 2] } else { 1.0 };
            let s = d.spectrum;
            for (i, x) in xs[k].iter().enumerate() {
                let i3 = i3_closed(*x, delta, rabi, g1, g2)?;
                // PSD per unit angular frequency is invariant under the
                // rescaling of both axes by `u`.
                let model = scale * SPECTRUM_NORM * i3.re;
                let w = s.sigma.as_ref().map_or(1.0, |sg| 1.0 / sg[i]);
                r[off + i] = (model - s.psd[i]) * w;
            }
            off += s.len();
        }
        Ok(())
    };
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let mut lo = vec![f64::NEG_INFINITY; init.len()];
    lo[0] = 0.0;
    let hi = vec![f64::INFINITY; init.len()];
    let problem = Problem::new(&name_refs, m, residual)
        .with_bounds(&lo, &hi)
        .with_kinds(&kinds);
    let mut fit = damped_least_squares(&problem, &init, &LmOptions::default())?;
    for (i, kind) in kinds.iter().enumerate() {
        if *kind == ParamKind::Rate {
            fit.scale_param(i, u);
        }
    }
    let n = fit.params.len();
    let mut g = vec![0.0; n];
    g[0] = 1.0;
    fit.push_derived("gamma_n", ParamKind::Rate, fit.params[0] - gamma_r_ref, &g);
    let mut g = vec![0.0; n + 1];
    g[0] = 0.5;
    g[1] = 1.0;
    fit.push_derived("gamma_2", ParamKind::Rate, 0.5 * fit.params[0] + fit.params[1], &g);
    if fit.params[n] < 0.0 {
        fit.warnings.push("fitted Γ₁ is below the reference Γ_r".into());
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{synthesize_noisy_psd, ChainConfig};
    use crate::qed::{incoherent_spectrum, DriveConfig};
    use crate::rates::RateSet;
    use crate::units::{khz, mhz};

    const WQ: f64 = 3.47e10;

    fn grid(center: f64, half: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| center - half + 2.0 * half * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn noiseless_recovery_from_perturbed_start() {
        let r = RateSet::from_khz(227.0, 48.0, 3.0).unwrap();
        let d = DriveConfig::detuned(WQ, khz(-790.0), mhz(1.27)).unwrap();
        let s = incoherent_spectrum(&grid(WQ - khz(790.0), mhz(4.0), 1201), &d, &r).unwrap();
        let guess = SpectrumGuess {
            gamma_1: 1.2 * r.gamma_1(),
            gamma_phi: 0.8 * r.gamma_phi(),
            rabi: 0.8 * d.rabi(),
            delta: 1.2 * d.delta(),
        };
        let data = SpectrumData {
            spectrum: &s,
            omega_q: WQ,
            guess: Some(guess),
        };
        let f = fit_full_spectrum(data, r.gamma_r(), &FullSpectrumOptions::default()).unwrap();
        let rel = |n: &str, v: f64| (f.value(n).unwrap() - v).abs() / v.abs();
        assert!(rel("gamma_1", r.gamma_1()) < 1e-6, "{f:?}");
        assert!(rel("gamma_phi", r.gamma_phi()) < 1e-6);
        assert!(rel("omega", d.rabi()) < 1e-6);
        assert!(rel("delta", d.delta()) < 1e-6);
        assert!(rel("gamma_n", r.gamma_n()) < 1e-6);
    }

    #[test]
    fn automatic_start_and_free_scale() {
        let r = RateSet::from_khz(227.0, 48.0, 3.0).unwrap();
        let d = DriveConfig::resonant(WQ, mhz(2.0)).unwrap();
        let s = incoherent_spectrum(&grid(WQ, mhz(4.0), 1601), &d, &r).unwrap();
        let data = SpectrumData {
            spectrum: &s,
            omega_q: WQ,
            guess: None,
        };
        let f = fit_full_spectrum(data, r.gamma_r(), &FullSpectrumOptions { free_scale: true }).unwrap();
        assert!((f.value("gamma_1").unwrap() / r.gamma_1() - 1.0).abs() < 1e-6);
        assert!((f.value("scale").unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn shared_dephasing_across_two_detunings() {
        let r = RateSet::from_khz(227.0, 48.0, 7.0).unwrap();
        let mut spectra = Vec::new();
        for dk in [-825.0, 825.0] {
            let d = DriveConfig::detuned(WQ, khz(dk), mhz(1.3)).unwrap();
            let s = incoherent_spectrum(&grid(WQ + khz(dk), mhz(4.0), 1201), &d, &r).unwrap();
            let chain = ChainConfig::default().with_n_avg(1e7);
            spectra.push(synthesize_noisy_psd(&s, &chain, (dk > 0.0) as u64).unwrap());
        }
        let data: Vec<SpectrumData> = spectra
            .iter()
            .map(|s| SpectrumData {
                spectrum: s,
                omega_q: WQ,
                guess: None,
            })
            .collect();
        let f = fit_full_spectra(&data, r.gamma_r(), &FullSpectrumOptions::default()).unwrap();
        let gphi = f.get("gamma_phi").unwrap();
        assert!((gphi.value - r.gamma_phi()).abs() < 4.0 * gphi.sigma, "{gphi:?}");
        assert!(f.index("omega_1").is_some());
    }

    #[test]
    fn collinear_at_vanishing_drive() {
        let r = RateSet::from_khz(227.0, 48.0, 3.0).unwrap();
        let d = DriveConfig::resonant(WQ, khz(1e-3)).unwrap();
        let s = incoherent_spectrum(&grid(WQ, mhz(2.0), 801), &d, &r).unwrap();
        let guess = SpectrumGuess {
            gamma_1: r.gamma_1(),
            gamma_phi: r.gamma_phi(),
            rabi: d.rabi(),
            delta: 0.0,
        };
        let data = SpectrumData {
            spectrum: &s,
            omega_q: WQ,
            guess: Some(guess),
        };
        let err = fit_full_spectrum(data, r.gamma_r(), &FullSpectrumOptions::default());
        assert!(matches!(err, Err(Error::RankDeficient { .. })), "{err:?}");
    }
}
