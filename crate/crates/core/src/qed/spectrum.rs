//! Incoherent fluorescence spectrum.
//!
//! The normalization is fixed by the sum rule
//! `∫ S_i(ω) dω = Γ_r (s̄₂ − |s̄₁|²)`, i.e. the spectrum integrates to the
//! incoherently scattered photon flux. With the one-sided transform of the
//! regression-theorem correlations this gives `S_i = (Γ_r/π)·Re I₃(ω)`.

use nalgebra::Matrix3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bloch::{bloch_matrix_raw, correlation_initial, steady_state_raw};
use super::DriveConfig;
use crate::error::{ensure, Error, Result};
use crate::rates::RateSet;

/// Prefactor `C` in `S_i = C·Γ_r·Re I₃`.
pub const SPECTRUM_NORM: f64 = std::f64::consts::FRAC_1_PI;

/// Minimum `Ω/Γ₂` for the three-Lorentzian approximation.
pub const DEFAULT_MOLLOW_VALIDITY: f64 = 5.0;

/// Power spectral density sampled on an angular-frequency grid.
///
/// `psd` is photon flux per unit angular frequency, `s⁻¹/(rad/s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub psd: Vec<f64>,
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn new(omega: Vec<f64>, psd: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self> {
        check_grid(&omega)?;
        ensure(psd.len() == omega.len(), "psd", "length differs from grid")?;
        ensure(psd.iter().all(|p| p.is_finite()), "psd", "values must be finite")?;
        if let Some(s) = &sigma {
            ensure(s.len() == omega.len(), "sigma", "length differs from grid")?;
        }
        Ok(Self { omega, psd, sigma })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    /// Trapezoidal integral over the samples with `lo <= ω <= hi`.
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let mut acc = 0.0;
        for i in 1..self.omega.len() {
            let (a, b) = (self.omega[i - 1], self.omega[i]);
            if a >= lo && b <= hi {
                acc += 0.5 * (b - a) * (self.psd[i - 1] + self.psd[i]);
            }
        }
        acc
    }

    pub fn integrate_all(&self) -> f64 {
        self.integrate(f64::NEG_INFINITY, f64::INFINITY)
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    ensure(!grid.is_empty(), "omega_grid", "grid is empty")?;
    ensure(
        grid.iter().all(|w| w.is_finite()),
        "omega_grid",
        "values must be finite",
    )?;
    ensure(
        grid.windows(2).all(|w| w[1] > w[0]),
        "omega_grid",
        "grid must be strictly increasing",
    )
}

/// Closed-form `I₃` at detection detuning `x = ω − ω_q` for raw rates.
///
/// `μ₁ = −Γ₂ + i(ω − ω_q)`, `μ₂ = −Γ₂ + i(ω + ω_q − 2ω_p)`, `μ₃ = −Γ₁ + i(ω − ω_p)`.
pub(crate) fn i3_closed(x: f64, delta: f64, rabi: f64, g1: f64, g2: f64) -> Result<Complex64> {
    let (s1, s2) = steady_state_raw(delta, rabi, g1, g2)?;
    let mu1 = Complex64::new(-g2, x);
    let mu2 = Complex64::new(-g2, x - 2.0 * delta);
    let mu3 = Complex64::new(-g1, x - delta);
    let o2 = rabi * rabi;
    let den = 2.0 * mu1 * mu2 * mu3 + o2 * (mu1 + mu2);
    if mu1.norm_sqr() == 0.0 || den.norm_sqr() == 0.0 {
        return Err(Error::Singular { omega: x });
    }
    let a = Complex64::new(s1.norm_sqr() - s2, 0.0);
    let c = s1.conj();
    let num = o2 * c * c - o2 * a * mu2 / mu1 - Complex64::new(0.0, 2.0 * rabi) * c * s2 * mu2;
    Ok(a / mu1 + num / den)
}

/// `S_i(ω)` at a single absolute angular frequency.
pub fn incoherent_psd(omega: f64, drive: &DriveConfig, rates: &RateSet) -> Result<f64> {
    let x = omega - drive.omega_q();
    let i3 = i3_closed(x, drive.delta(), drive.rabi(), rates.gamma_1(), rates.gamma_2()).map_err(|e| match e {
        Error::Singular { .. } => Error::Singular { omega },
        other => other,
    })?;
    Ok(SPECTRUM_NORM * rates.gamma_r() * i3.re)
}

pub fn incoherent_spectrum(omega_grid: &[f64], drive: &DriveConfig, rates: &RateSet) -> Result<Spectrum> {
    check_grid(omega_grid)?;
    let psd = omega_grid
        .iter()
        .map(|&w| incoherent_psd(w, drive, rates))
        .collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        omega: omega_grid.to_vec(),
        psd,
        sigma: None,
    })
}

/// Strong-drive resonant three-Lorentzian spectrum at detuning `x = ω − ω_q`.
pub(crate) fn mollow_psd_raw(x: f64, rabi: f64, gr: f64, g1: f64, g2: f64) -> f64 {
    let gs = 0.5 * (g1 + g2);
    let side = |d: f64| gs / (d * d + gs * gs);
    let center = 2.0 * g2 / (x * x + g2 * g2);
    gr / (8.0 * std::f64::consts::PI) * (side(x + rabi) + center + side(x - rabi))
}

pub fn mollow_triplet_approx(omega_grid: &[f64], drive: &DriveConfig, rates: &RateSet) -> Result<Spectrum> {
    mollow_triplet_approx_with(omega_grid, drive, rates, DEFAULT_MOLLOW_VALIDITY)
}

/// As [`mollow_triplet_approx`] with an explicit `Ω/Γ₂` validity threshold.
pub fn mollow_triplet_approx_with(
    omega_grid: &[f64],
    drive: &DriveConfig,
    rates: &RateSet,
    min_rabi_over_gamma_2: f64,
) -> Result<Spectrum> {
    check_grid(omega_grid)?;
    if drive.delta() != 0.0 {
        return Err(Error::Validity(format!(
            "Mollow triplet approximation needs Δ = 0, got {}",
            drive.delta()
        )));
    }
    if drive.rabi() <= min_rabi_over_gamma_2 * rates.gamma_2() {
        return Err(Error::Validity(format!(
            "Ω = {:.4e} is not ≫ Γ₂ = {:.4e} (threshold {min_rabi_over_gamma_2}×)",
            drive.rabi(),
            rates.gamma_2()
        )));
    }
    let psd = omega_grid
        .iter()
        .map(|&w| {
            mollow_psd_raw(
                w - drive.omega_q(),
                drive.rabi(),
                rates.gamma_r(),
                rates.gamma_1(),
                rates.gamma_2(),
            )
        })
        .collect();
    Ok(Spectrum {
        omega: omega_grid.to_vec(),
        psd,
        sigma: None,
    })
}

/// One pole of the fluorescence spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    /// Absolute angular frequency of the line centre.
    pub center: f64,
    pub hwhm: f64,
    /// Integrated photon flux carried by the line.
    pub weight: f64,
}

/// Exact decomposition of `S_i` into its three poles.
///
/// Uses the eigenvalues `λ_k` of the Bloch generator: `I₃(ω) = −Σ c_k/(λ_k + iν)`
/// with `ν = ω − ω_p`, so each line sits at `ν = −Im λ_k`, has half-width
/// `−Re λ_k` and integrates to `Γ_r Re c_k`. Lines are sorted by frequency.
pub fn line_weights(drive: &DriveConfig, rates: &RateSet) -> Result<[SpectralLine; 3]> {
    let (g1, g2) = (rates.gamma_1(), rates.gamma_2());
    let (s1, s2) = steady_state_raw(drive.delta(), drive.rabi(), g1, g2)?;
    let (_, ds0) = correlation_initial(s1, s2);
    let (m, _) = bloch_matrix_raw(drive.delta(), drive.rabi(), g1, g2);
    let (_, t) = m.schur().unpack();
    let lambda = [t[(0, 0)], t[(1, 1)], t[(2, 2)]];

    let scale = m.norm().max(f64::MIN_POSITIVE);
    let ident = Matrix3::<Complex64>::identity();
    let ds = nalgebra::Vector3::from(ds0);
    let mut lines = Vec::with_capacity(3);
    for k in 0..3 {
        let mut proj = ident;
        for j in (0..3).filter(|&j| j != k) {
            let gap = lambda[k] - lambda[j];
            if gap.norm() < 1e-9 * scale {
                return Err(Error::Degenerate(
                    "degenerate Bloch eigenvalues; spectrum lines are not separable".into(),
                ));
            }
            proj = proj * (m - ident * lambda[j]) / gap;
        }
        let c = (proj * ds)[0];
        lines.push(SpectralLine {
            center: drive.omega_p() - lambda[k].im,
            hwhm: -lambda[k].re,
            weight: rates.gamma_r() * c.re,
        });
    }
    lines.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok([lines[0], lines[1], lines[2]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qed::steady_state;
    use crate::units::{khz, mhz};

    const WQ: f64 = 3.47e10;

    fn table_rates() -> RateSet {
        RateSet::from_khz(227.0, 48.0, 3.0).unwrap()
    }

    fn symmetric_grid(center: f64, half: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| center + half * (2.0 * i as f64 / (n - 1) as f64 - 1.0))
            .collect()
    }

    #[test]
    fn resonant_spectrum_is_even() {
        let d = DriveConfig::resonant(WQ, mhz(2.0)).unwrap();
        let r = table_rates();
        for x in [1.0e3, 3.3e5, khz(900.0), mhz(2.0), mhz(7.1)] {
            let a = incoherent_psd(WQ + x, &d, &r).unwrap();
            let b = incoherent_psd(WQ - x, &d, &r).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn saturated_lines_have_expected_weights_and_widths() {
        let d = DriveConfig::resonant(WQ, mhz(9.0)).unwrap();
        let r = table_rates();
        let lines = line_weights(&d, &r).unwrap();
        let gs = 0.5 * (r.gamma_1() + r.gamma_2());
        assert!((gs / khz(1.0) - 207.75).abs() < 1e-9);
        let w: Vec<f64> = lines.iter().map(|l| l.weight / r.gamma_r()).collect();
        assert!((w[1] - 0.25).abs() < 0.25 * 5e-3);
        assert!((w[0] - 0.125).abs() < 0.125 * 5e-3);
        assert!((w[2] - 0.125).abs() < 0.125 * 5e-3);
        assert!((lines[1].hwhm - r.gamma_2()).abs() < 1e-6 * r.gamma_2());
        assert!((lines[0].hwhm - gs).abs() < 1e-3 * gs);
        assert!((lines[1].center - WQ).abs() < 1.0);
        assert!(((lines[2].center - WQ) - mhz(9.0)).abs() < 1e-4 * mhz(9.0));
        let ss = steady_state(&d, &r).unwrap();
        let total: f64 = lines.iter().map(|l| l.weight).sum();
        assert!((total - r.gamma_r() * (ss.s2 - ss.s1.norm_sqr())).abs() < 1e-10 * total);
    }

    #[test]
    fn approximation_tracks_exact_at_line_centres() {
        let d = DriveConfig::resonant(WQ, mhz(9.0)).unwrap();
        let r = table_rates();
        let grid = [WQ - mhz(9.0), WQ, WQ + mhz(9.0)];
        let exact = incoherent_spectrum(&grid, &d, &r).unwrap();
        let approx = mollow_triplet_approx(&grid, &d, &r).unwrap();
        for (e, a) in exact.psd.iter().zip(&approx.psd) {
            assert!((e - a).abs() < 0.02 * e, "{e} vs {a}");
        }
        let peak = r.gamma_r() / (4.0 * std::f64::consts::PI * r.gamma_2());
        assert!((approx.psd[1] - peak).abs() < 1e-3 * peak);
    }

    #[test]
    fn approximation_weights() {
        let r = RateSet::from_khz(227.0, 48.0, 0.0).unwrap();
        let d = DriveConfig::resonant(WQ, mhz(9.0)).unwrap();
        let grid = symmetric_grid(WQ, mhz(400.0), 400_001);
        let s = mollow_triplet_approx(&grid, &d, &r).unwrap();
        let total = s.integrate_all() / r.gamma_r();
        // Lorentzian wings beyond ±400 MHz carry ~(2/π)(Γ/L) of each line.
        assert!((total - 0.5).abs() < 1e-3, "{total}");
    }

    #[test]
    fn approximation_validity_checks() {
        let r = table_rates();
        let grid = [WQ];
        let off = DriveConfig::detuned(WQ, khz(10.0), mhz(9.0)).unwrap();
        assert!(matches!(
            mollow_triplet_approx(&grid, &off, &r),
            Err(Error::Validity(_))
        ));
        let weak = DriveConfig::resonant(WQ, khz(300.0)).unwrap();
        assert!(matches!(
            mollow_triplet_approx(&grid, &weak, &r),
            Err(Error::Validity(_))
        ));
        assert!(mollow_triplet_approx_with(&grid, &weak, &r, 1.0).is_ok());
    }

    #[test]
    fn dephasing_free_central_width_is_half_gamma_1() {
        let r = RateSet::from_khz(227.0, 48.0, 0.0).unwrap();
        assert_eq!(r.gamma_2(), 0.5 * r.gamma_1());
        let d = DriveConfig::resonant(WQ, mhz(9.0)).unwrap();
        let lines = line_weights(&d, &r).unwrap();
        assert!((lines[1].hwhm - 0.5 * r.gamma_1()).abs() < 1e-6 * r.gamma_1());
    }

    #[test]
    fn grid_must_increase() {
        let d = DriveConfig::resonant(WQ, mhz(1.0)).unwrap();
        assert!(incoherent_spectrum(&[WQ, WQ], &d, &table_rates()).is_err());
        assert!(incoherent_spectrum(&[], &d, &table_rates()).is_err());
    }

    #[test]
    fn singular_point_is_reported() {
        // Γ₂ = 0 and Ω = 0 make μ₁ vanish at ω = ω_q.
        let r = RateSet::new(0.0, 0.0, 0.0).unwrap();
        let d = DriveConfig::resonant(WQ, 1.0).unwrap();
        let err = incoherent_psd(WQ, &d, &r).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_) | Error::Singular { .. }));
    }
}
