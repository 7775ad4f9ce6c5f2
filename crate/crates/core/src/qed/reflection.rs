use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DriveConfig;
use crate::error::{Error, Result};
use crate::rates::RateSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReflectionMode {
    /// Any drive strength and detuning.
    Full,
    /// `Ω ≪ Γ₂` limit; the Rabi amplitude is ignored.
    WeakProbe,
    /// `Δ = 0` with arbitrary drive strength.
    Resonant,
}

/// Coherent reflection coefficient `r = α_out / α_in`.
pub fn reflection_coefficient(drive: &DriveConfig, rates: &RateSet, mode: ReflectionMode) -> Result<Complex64> {
    let delta = drive.delta();
    let rabi = drive.rabi();
    let (gr, g1, g2) = (rates.gamma_r(), rates.gamma_1(), rates.gamma_2());
    let one = Complex64::new(1.0, 0.0);
    match mode {
        ReflectionMode::Full => {
            let den = rabi * rabi * g2 + g1 * (delta * delta + g2 * g2);
            if den == 0.0 {
                return Err(Error::Degenerate("Ω²Γ₂ + Γ₁(Δ² + Γ₂²) vanishes".into()));
            }
            let num = Complex64::new(0.0, gr * g1) * Complex64::new(delta, -g2);
            Ok(one - num / den)
        }
        ReflectionMode::WeakProbe => {
            if delta == 0.0 && g2 == 0.0 {
                return Err(Error::Degenerate("Δ + iΓ₂ vanishes".into()));
            }
            Ok(one - Complex64::new(0.0, gr) / Complex64::new(delta, g2))
        }
        ReflectionMode::Resonant => {
            if delta != 0.0 {
                return Err(Error::InvalidParameter {
                    name: "drive",
                    reason: format!("resonant mode requires Δ = 0, got {delta}"),
                });
            }
            if gr == 0.0 {
                return Ok(one);
            }
            if g1 == 0.0 {
                return Err(Error::Degenerate("resonant form needs Γ₁ > 0".into()));
            }
            let x = rabi * rabi / (g1 * gr) + g2 / gr;
            if x == 0.0 {
                return Err(Error::Degenerate("Ω²/(Γ₁Γ_r) + Γ₂/Γ_r vanishes".into()));
            }
            Ok(Complex64::new(1.0 - 1.0 / x, 0.0))
        }
    }
}
