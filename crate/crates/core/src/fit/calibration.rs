//! Drive-line attenuation and transmon arch calibrations.

use super::lm::{fit_curve, CurveModel, FitResult, LmOptions, ParamKind};
use crate::error::{Error, Result};
use crate::qed::{transmon_frequency, TransmonParams};
use crate::units::{db_to_linear, linear_to_db, PLANCK};

/// `Ω = k·√P` with `P` the source power in watts; parameter `[slope]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SqrtLaw;

impl CurveModel for SqrtLaw {
    type X = f64;

    fn names(&self) -> Vec<&'static str> {
        vec!["slope"]
    }

    fn eval(&self, sqrt_p: f64, p: &[f64]) -> f64 {
        p[0] * sqrt_p
    }

    fn gradient(&self, sqrt_p: f64, _p: &[f64], g: &mut [f64]) -> bool {
        g[0] = sqrt_p;
        true
    }
}

/// Fits measured Rabi frequencies (rad/s) against source powers (dBm).
///
/// From `Ω = 2√(A·Γ_r·P/(h·f₀₁))` the slope `k` of `Ω` versus `√P` gives
/// `A = k²·h·f₀₁/(4Γ_r)`. Returns `slope` and the derived `attenuation_db`.
pub fn fit_rabi_calibration(
    source_dbm: &[f64],
    rabi: &[f64],
    sigma: Option<&[f64]>,
    gamma_r: f64,
    f01_hz: f64,
) -> Result<FitResult> {
    if source_dbm.len() != rabi.len() {
        return Err(Error::InvalidParameter {
            name: "rabi",
            reason: "power and Rabi columns differ in length".into(),
        });
    }
    if source_dbm.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} power points; need 3",
            source_dbm.len()
        )));
    }
    if !(gamma_r > 0.0 && f01_hz > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma_r",
            reason: "Γ_r and f01 must be > 0".into(),
        });
    }
    let sq: Vec<f64> = source_dbm.iter().map(|p| db_to_linear(p - 30.0).sqrt()).collect();
    // Rescale √P so that the slope is of order the Rabi frequencies.
    let u = sq.iter().cloned().fold(0.0, f64::max);
    let xs: Vec<f64> = sq.iter().map(|s| s / u).collect();
    let k0 = xs.iter().zip(rabi).map(|(x, y)| x * y).sum::<f64>() / xs.iter().map(|x| x * x).sum::<f64>();
    let mut fit = fit_curve(&SqrtLaw, &xs, rabi, sigma, &[k0], None, &LmOptions::default())?;
    fit.scale_param(0, 1.0 / u);
    let k = fit.params[0];
    let a = k * k * PLANCK * f01_hz / (4.0 * gamma_r);
    let db = linear_to_db(a);
    if db > 0.0 {
        return Err(Error::Sanity(format!(
            "calibration implies {db:.2} dB of gain on the input line"
        )));
    }
    // d(10·log₁₀(k²c))/dk = 20/(k ln 10)
    let g = 20.0 / (k * std::f64::consts::LN_10);
    fit.push_derived("attenuation_db", ParamKind::Plain, db, &[g]);
    Ok(fit)
}

/// `f₀₁(Φ)` for fixed `E_C`; parameter `[ej_max]` in Hz, abscissa flux in Φ₀.
#[derive(Debug, Clone, Copy)]
pub struct TransmonArch {
    pub ec: f64,
}

impl CurveModel for TransmonArch {
    type X = f64;

    fn names(&self) -> Vec<&'static str> {
        vec!["ej_max"]
    }

    fn eval(&self, flux: f64, p: &[f64]) -> f64 {
        let ej = p[0] * (std::f64::consts::PI * flux).cos().abs();
        (8.0 * ej * self.ec).max(0.0).sqrt() - self.ec
    }

    fn gradient(&self, flux: f64, p: &[f64], g: &mut [f64]) -> bool {
        let c = (std::f64::consts::PI * flux).cos().abs();
        g[0] = 0.5 * (8.0 * c * self.ec / p[0]).sqrt();
        true
    }
}

/// One-parameter fit of `E_J,max` to qubit frequencies (Hz) measured at
/// fluxes `flux` (Φ₀), with `E_C = ec_hz` fixed. Points where the transmon
/// formula cannot hold are dropped with a warning.
pub fn fit_flux_arch(flux: &[f64], f01_hz: &[f64], sigma: Option<&[f64]>, ec_hz: f64) -> Result<FitResult> {
    if flux.len() != f01_hz.len() {
        return Err(Error::InvalidParameter {
            name: "f01_hz",
            reason: "flux and frequency columns differ in length".into(),
        });
    }
    if !(ec_hz > 0.0 && ec_hz.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "ec_hz",
            reason: format!("must be > 0, got {ec_hz}"),
        });
    }
    // Each point alone determines E_J,max; the median is a robust start.
    let single = |i: usize| {
        let c = (std::f64::consts::PI * flux[i]).cos().abs();
        (f01_hz[i] + ec_hz).powi(2) / (8.0 * ec_hz * c)
    };
    let mut est: Vec<f64> = (0..flux.len())
        .filter(|&i| f01_hz[i] > 0.0 && f01_hz[i].is_finite() && flux[i].is_finite())
        .map(single)
        .filter(|v| v.is_finite())
        .collect();
    if est.is_empty() {
        return Err(Error::InsufficientData("no valid arch points".into()));
    }
    est.sort_by(f64::total_cmp);
    let ej0 = est[est.len() / 2];
    let keep: Vec<usize> = (0..flux.len())
        .filter(|&i| {
            f01_hz[i] > 0.0
                && f01_hz[i].is_finite()
                && transmon_frequency(&TransmonParams {
                    ej_max: ej0,
                    ec: ec_hz,
                    flux: flux[i],
                })
                .is_ok()
        })
        .collect();
    let dropped = flux.len() - keep.len();
    if keep.is_empty() {
        return Err(Error::InsufficientData("no valid arch points".into()));
    }
    let xs: Vec<f64> = keep.iter().map(|&i| flux[i]).collect();
    let ys: Vec<f64> = keep.iter().map(|&i| f01_hz[i]).collect();
    let ss: Option<Vec<f64>> = sigma.map(|s| keep.iter().map(|&i| s[i]).collect());
    let model = TransmonArch { ec: ec_hz };
    let mut fit = fit_curve(
        &model,
        &xs,
        &ys,
        ss.as_deref(),
        &[ej0],
        Some((&[0.0], &[f64::INFINITY])),
        &LmOptions::default(),
    )?;
    if dropped > 0 {
        fit.warnings.push(format!(
            "{dropped} points outside the valid transmon region were dropped"
        ));
    }
    let span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if span < 0.3 && xs.len() > 1 {
        fit.warnings.push(format!("points span only {span:.2} Φ₀"));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qed::rabi_from_power;
    use crate::units::khz;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    const F01: f64 = 5.52e9;

    fn rabi_points(att: f64, gr: f64) -> (Vec<f64>, Vec<f64>) {
        let p: Vec<f64> = (0..8).map(|k| -20.0 + 2.0 * k as f64).collect();
        let w = p.iter().map(|x| rabi_from_power(*x, att, gr, F01).unwrap()).collect();
        (p, w)
    }

    #[test]
    fn attenuation_recovered() {
        let gr = khz(227.0);
        let (p, w) = rabi_points(-145.0, gr);
        let f = fit_rabi_calibration(&p, &w, None, gr, F01).unwrap();
        assert!((f.value("attenuation_db").unwrap() + 145.0).abs() < 1e-9);
    }

    #[test]
    fn doubling_gamma_r_shifts_three_db() {
        let gr = khz(227.0);
        let (p, w) = rabi_points(-145.0, gr);
        let a = fit_rabi_calibration(&p, &w, None, gr, F01).unwrap();
        let b = fit_rabi_calibration(&p, &w, None, 2.0 * gr, F01).unwrap();
        let d = b.value("attenuation_db").unwrap() - a.value("attenuation_db").unwrap();
        assert!((d + 10.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn noisy_points_within_a_tenth_db() {
        let gr = khz(227.0);
        let (p, w) = rabi_points(-145.0, gr);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let w: Vec<f64> = w
            .iter()
            .map(|x| x * (1.0 + 0.005 * Normal::new(0.0, 1.0).unwrap().sample(&mut rng)))
            .collect();
        let f = fit_rabi_calibration(&p, &w, None, gr, F01).unwrap();
        assert!((f.value("attenuation_db").unwrap() + 145.0).abs() < 0.1);
    }

    #[test]
    fn gain_is_rejected() {
        let gr = khz(227.0);
        let (p, w) = rabi_points(3.0, gr);
        assert!(matches!(
            fit_rabi_calibration(&p, &w, None, gr, F01),
            Err(Error::Sanity(_))
        ));
    }

    fn arch(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let flux: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64)
            .collect();
        let f = flux
            .iter()
            .map(|&x| {
                transmon_frequency(&TransmonParams {
                    ej_max: 16.56e9,
                    ec: 0.252e9,
                    flux: x,
                })
                .unwrap_or(f64::NAN)
            })
            .collect();
        (flux, f)
    }

    #[test]
    fn arch_exact_recovery() {
        let (x, f) = arch(25, -0.3, 0.3);
        let fit = fit_flux_arch(&x, &f, None, 0.252e9).unwrap();
        assert!((fit.params[0] / 16.56e9 - 1.0).abs() < 1e-10);
        let fit = fit_flux_arch(&[0.0], &[f[12]], None, 0.252e9).unwrap();
        assert!((fit.params[0] / 16.56e9 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn arch_invalid_points_dropped() {
        let (mut x, mut f) = arch(20, -0.35, 0.35);
        x.push(0.5);
        f.push(1.0e8);
        x.push(0.1);
        f.push(-3.0);
        let fit = fit_flux_arch(&x, &f, None, 0.252e9).unwrap();
        assert!((fit.params[0] / 16.56e9 - 1.0).abs() < 1e-10);
        assert_eq!(fit.warnings.len(), 1);
    }

    #[test]
    fn arch_with_one_percent_noise() {
        let (x, f) = arch(40, -0.4, 0.4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = Normal::new(0.0, 0.01).unwrap();
        let f: Vec<f64> = f.iter().map(|v| v * (1.0 + n.sample(&mut rng))).collect();
        let fit = fit_flux_arch(&x, &f, None, 0.252e9).unwrap();
        assert!((fit.params[0] / 16.56e9 - 1.0).abs() < 0.025);
    }
}
