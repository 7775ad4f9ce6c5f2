//! Power bookkeeping under resonant drive, in photon flux units.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::rates::RateSet;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p_in: f64,
    pub p_coh: f64,
    pub p_incoh: f64,
    pub p_loss: f64,
}

impl PowerBudget {
    /// `P_in − P_coh − P_incoh − P_loss`.
    pub fn residual(&self) -> f64 {
        self.p_in - self.p_coh - self.p_incoh - self.p_loss
    }
}

/// Incoming, coherently reflected, incoherently scattered and lost photon
/// flux for a resonant drive of amplitude `rabi`.
pub fn power_balance(rabi: f64, rates: &RateSet) -> Result<PowerBudget> {
    ensure(rabi.is_finite() && rabi >= 0.0, "rabi", "must be finite and >= 0")?;
    if rabi == 0.0 {
        return Ok(PowerBudget::default());
    }
    let gr = rates.gamma_r();
    if gr == 0.0 {
        return Err(Error::UndefinedRatio("input flux Ω²/(4Γ_r) needs Γ_r > 0"));
    }
    let (g1, g2) = (rates.gamma_1(), rates.gamma_2());
    let o2 = rabi * rabi;
    let d = g1 * g2 + o2;
    let p_in = o2 / (4.0 * gr);
    let refl = 1.0 - g1 * gr / d;
    Ok(PowerBudget {
        p_in,
        p_coh: p_in * refl * refl,
        p_incoh: 0.5 * gr * o2 * (g1 * rates.gamma_phi() + o2) / (d * d),
        p_loss: rates.gamma_n() * o2 / (2.0 * d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionBoundaries {
    /// Drive above which the qubit saturates, `(1 + 1/√2)Γ_r`.
    pub omega_sat: f64,
    /// Crossover `P_incoh = P_loss` at low power.
    pub omega_low: f64,
    /// Largest `Γ_n` for which the coherent reflection still crosses zero.
    pub gamma_n_crit: f64,
    /// Drive at which `P_coh` vanishes; `None` when `Γ_r ≤ Γ₂`.
    pub omega_dip: Option<f64>,
}

pub fn region_boundaries(rates: &RateSet) -> Result<RegionBoundaries> {
    let (gr, gn) = (rates.gamma_r(), rates.gamma_n());
    let (g1, g2) = (rates.gamma_1(), rates.gamma_2());
    if gr == 0.0 || g2 == 0.0 {
        return Err(Error::UndefinedRatio("region boundaries need Γ_r > 0"));
    }
    let omega_dip = (gr > g2).then(|| (g1 * (gr - g2)).sqrt());
    Ok(RegionBoundaries {
        omega_sat: (1.0 + std::f64::consts::FRAC_1_SQRT_2) * gr,
        omega_low: (g1 * g2 * gn / gr).sqrt(),
        gamma_n_crit: g1 * (gr - g2).powi(2) / (2.0 * gr * g2),
        omega_dip,
    })
}

/// Golden-section minimization of `P_coh(Ω)` on `[lo, hi]`.
pub fn coherent_power_minimum(rates: &RateSet, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    ensure(lo >= 0.0 && hi > lo, "bracket", "need 0 <= lo < hi")?;
    let f = |w: f64| power_balance(w, rates).map(|p| p.p_coh);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
