//! Dressed-state rate picture of the off-resonant Mollow sidebands.
//!
//! In the basis `|n,±⟩` of the driven qubit, relaxation connects the
//! doublets with rates `Γ₁cos⁴θ` (`+ → −`, blue sideband), `Γ₁sin⁴θ`
//! (`− → +`, red sideband) and `Γ₁sin²θcos²θ` (no change, central line).
//! Pure dephasing adds a symmetric `± ↔ ∓` channel that carries no sideband
//! photons but shifts the populations away from detailed balance.

use serde::{Deserialize, Serialize};

use super::DriveConfig;
use crate::error::{Error, Result};
use crate::rates::RateSet;

/// Intra-doublet transition rate induced by pure dephasing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingRate {
    /// `2Γ_φ sin²θ cos²θ`, the rate generated by the Lindblad term `(Γ_φ/2)D[σ_z]`.
    #[default]
    Lindblad,
    /// `Γ_φ` unweighted.
    Literal,
    /// `4Γ_φ sin²θ cos²θ`.
    MatrixElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedModel {
    pub theta: f64,
    pub rate_pp: f64,
    pub rate_pm: f64,
    pub rate_mp: f64,
    pub rate_mm: f64,
    pub mix_rate: f64,
    pub pop_plus: f64,
    pub pop_minus: f64,
    /// Red over blue sideband photon flux, `Γ₋₊P₋ / Γ₊₋P₊`.
    pub r_asym: f64,
    delta: f64,
}

impl DressedModel {
    /// Photon flux (per unit `ħω`) in the sideband above the pump.
    pub fn blue_flux(&self) -> f64 {
        self.rate_pm * self.pop_plus
    }

    /// Photon flux in the sideband below the pump.
    pub fn red_flux(&self) -> f64 {
        self.rate_mp * self.pop_minus
    }

    /// Ratio of the sideband nearer the qubit frequency to the farther one.
    pub fn closer_to_farther(&self) -> f64 {
        if self.delta < 0.0 {
            self.blue_flux() / self.red_flux()
        } else {
            self.red_flux() / self.blue_flux()
        }
    }
}

pub fn dressed_asymmetry(drive: &DriveConfig, rates: &RateSet) -> Result<DressedModel> {
    dressed_asymmetry_with(drive, rates, MixingRate::default())
}

pub fn dressed_asymmetry_with(drive: &DriveConfig, rates: &RateSet, mixing: MixingRate) -> Result<DressedModel> {
    let (delta, rabi) = (drive.delta(), drive.rabi());
    if rabi == 0.0 {
        return Err(Error::InvalidParameter {
            name: "rabi",
            reason: "dressed basis is undefined without drive".into(),
        });
    }
    // tan 2θ = −Ω/Δ on the branch θ ∈ (0, π/2), θ → 0 as Δ → −∞.
    let theta = 0.5 * rabi.atan2(-delta);
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (s * s, c * c);
    let g1 = rates.gamma_1();
    let rate_pm = g1 * c2 * c2;
    let rate_mp = g1 * s2 * s2;
    let rate_pp = g1 * s2 * c2;
    let gphi = rates.gamma_phi();
    let mix_rate = match mixing {
        MixingRate::Lindblad => 2.0 * gphi * s2 * c2,
        MixingRate::Literal => gphi,
        MixingRate::MatrixElement => 4.0 * gphi * s2 * c2,
    };
    let out = rate_pm + mix_rate;
    let inn = rate_mp + mix_rate;
    if out + inn == 0.0 {
        return Err(Error::Degenerate("no transitions between dressed doublets".into()));
    }
    let pop_plus = inn / (out + inn);
    let pop_minus = out / (out + inn);
    let blue = rate_pm * pop_plus;
    let red = rate_mp * pop_minus;
    let r_asym = if blue == 0.0 {
        if red == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        red / blue
    };
    Ok(DressedModel {
        theta,
        rate_pp,
        rate_pm,
        rate_mp,
        rate_mm: rate_pp,
        mix_rate,
        pop_plus,
        pop_minus,
        r_asym,
        delta,
    })
}
