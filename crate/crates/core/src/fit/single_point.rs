//! Γ_r and Γ_n from one saturated power measurement.

use serde::{Deserialize, Serialize};

use super::combine::PartialRates;
use crate::error::{Error, Result};
use crate::rates::Estimate;

/// Reference rates used for the saturation correction instead of the
/// self-consistent `Γ_φ = 0` estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePointRef {
    pub gamma_r: f64,
    pub gamma_2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePoint {
    pub gamma_r: Estimate,
    pub gamma_n: Estimate,
    /// `Γ₁Γ₂/Ω²` at the solution.
    pub correction: f64,
    pub iterations: usize,
}

impl SinglePoint {
    pub fn partial(&self) -> PartialRates {
        PartialRates {
            gamma_r: Some(self.gamma_r),
            gamma_n: Some(self.gamma_n),
            ..Default::default()
        }
    }
}

const MAX_CORRECTION: f64 = 0.3;

fn solve(p_loss: f64, p_incoh: f64, rabi: f64, reference: Option<SinglePointRef>) -> Result<(f64, f64, f64, usize)> {
    let o2 = rabi * rabi;
    let mut gn = 2.0 * p_loss;
    let mut gr = 2.0 * p_incoh;
    for it in 1..=200 {
        let x = match reference {
            Some(r) => (r.gamma_r + gn) * r.gamma_2,
            None => {
                let g1 = gr + gn;
                0.5 * g1 * g1
            }
        };
        let c = x / o2;
        if !(c.is_finite() && c <= MAX_CORRECTION) {
            return Err(Error::SaturationViolated(format!(
                "saturation correction Γ₁Γ₂/Ω² = {c:.3} exceeds {MAX_CORRECTION}"
            )));
        }
        let gn_new = 2.0 * p_loss * (1.0 + c);
        let gr_new = 2.0 * p_incoh * (1.0 + c).powi(2);
        let done = (gn_new - gn).abs() <= 1e-15 * gn_new.abs().max(gr_new.abs())
            && (gr_new - gr).abs() <= 1e-15 * gr_new.abs();
        gn = gn_new;
        gr = gr_new;
        if done {
            return Ok((gr, gn, c, it));
        }
    }
    Err(Error::SaturationViolated("fixed-point iteration did not settle".into()))
}

/// Solves `Γ_n = 2P_loss(1 + Γ₁Γ₂/Ω²)` and `Γ_r = 2P_incoh(1 + Γ₁Γ₂/Ω²)²`
/// by fixed-point iteration from the uncorrected values. Without a
/// reference, `Γ₂ = Γ₁/2` is assumed. Errors are propagated by central
/// differences through the solver.
///
/// Without a reference the equations also have a spurious solution with a
/// small correction when the drive is far from saturation, so the
/// saturation checks are only reliable when `reference` is given.
pub fn single_point_rates(
    p_loss: Estimate,
    p_incoh: Estimate,
    rabi: f64,
    reference: Option<SinglePointRef>,
) -> Result<SinglePoint> {
    if !(rabi.is_finite() && rabi > 0.0) {
        return Err(Error::InvalidParameter {
            name: "rabi",
            reason: format!("must be > 0, got {rabi}"),
        });
    }
    if !(p_incoh.value > 0.0 && p_loss.value.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "p_incoh",
            reason: format!("must be > 0, got {}", p_incoh.value),
        });
    }
    let (gr, gn, c, iterations) = solve(p_loss.value, p_incoh.value, rabi, reference)?;
    let omega_sat = (1.0 + std::f64::consts::FRAC_1_SQRT_2) * gr;
    if rabi < omega_sat {
        return Err(Error::SaturationViolated(format!(
            "Ω = {rabi:.4e} is below the saturation drive {omega_sat:.4e}"
        )));
    }
    let mut jac = [[0.0; 2]; 2];
    for (k, (v, s)) in [(p_loss.value, p_loss.sigma), (p_incoh.value, p_incoh.sigma)]
        .into_iter()
        .enumerate()
    {
        if s == 0.0 {
            continue;
        }
        let h = (1e-6 * v.abs()).max(1e-6 * s);
        let arg = |d: f64| {
            if k == 0 {
                (v + d, p_incoh.value)
            } else {
                (p_loss.value, v + d)
            }
        };
        let (a0, a1) = arg(h);
        let (b0, b1) = arg(-h);
        let up = solve(a0, a1, rabi, reference)?;
        let dn = solve(b0, b1, rabi, reference)?;
        jac[0][k] = (up.0 - dn.0) / (2.0 * h);
        jac[1][k] = (up.1 - dn.1) / (2.0 * h);
    }
    let sig = |row: [f64; 2]| (row[0] * p_loss.sigma).hypot(row[1] * p_incoh.sigma);
    Ok(SinglePoint {
        gamma_r: Estimate::new(gr, sig(jac[0])),
        gamma_n: Estimate::new(gn, sig(jac[1])),
        correction: c,
        iterations,
    })
}
