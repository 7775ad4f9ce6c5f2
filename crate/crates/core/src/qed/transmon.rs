use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Flux-tunable transmon. Energies are given as frequencies in Hz
/// (`E/h`); `flux` is in units of the flux quantum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonParams {
    pub ej_max: f64,
    pub ec: f64,
    pub flux: f64,
}

impl TransmonParams {
    pub fn josephson_energy(&self) -> f64 {
        self.ej_max * (std::f64::consts::PI * self.flux).cos().abs()
    }
}

/// `f01 = √(8 E_J(Φ) E_C) − E_C` in Hz.
pub fn transmon_frequency(params: &TransmonParams) -> Result<f64> {
    ensure(
        params.ej_max > 0.0 && params.ej_max.is_finite(),
        "ej_max",
        "must be > 0",
    )?;
    ensure(params.ec > 0.0 && params.ec.is_finite(), "ec", "must be > 0")?;
    ensure(params.flux.is_finite(), "flux", "must be finite")?;
    let ej = params.josephson_energy();
    if 8.0 * ej * params.ec <= params.ec * params.ec {
        return Err(Error::Validity(format!(
            "E_J(Φ={}) = {ej:.4e} Hz is below E_C/8; transmon formula does not apply",
            params.flux
        )));
    }
    Ok((8.0 * ej * params.ec).sqrt() - params.ec)
}
