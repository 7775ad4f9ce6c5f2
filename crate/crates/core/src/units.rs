//! Unit conversions used at the I/O boundary.
//!
//! Everything inside the crate is angular frequency (rad/s) and photon flux
//! (s⁻¹). Cyclic frequencies in Hz only appear in configs and data files.

use std::f64::consts::TAU;

/// Planck constant, J·s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;

#[inline]
pub fn hz_to_angular(f: f64) -> f64 {
    TAU * f
}

#[inline]
pub fn angular_to_hz(w: f64) -> f64 {
    w / TAU
}

/// Cyclic kHz to rad/s; convenient for the values quoted as Γ/2π.
#[inline]
pub fn khz(f_khz: f64) -> f64 {
    TAU * f_khz * 1e3
}

#[inline]
pub fn mhz(f_mhz: f64) -> f64 {
    TAU * f_mhz * 1e6
}

#[inline]
pub fn to_khz(w: f64) -> f64 {
    w / TAU / 1e3
}

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Photon flux (s⁻¹) carried by a tone of power `p_dbm` at frequency `f_hz`.
pub fn dbm_to_photon_flux(p_dbm: f64, f_hz: f64) -> crate::Result<f64> {
    crate::error::ensure(
        p_dbm.is_finite() || p_dbm == f64::NEG_INFINITY,
        "p_dbm",
        "must be finite",
    )?;
    crate::error::ensure(f_hz.is_finite() && f_hz > 0.0, "f_hz", "must be > 0")?;
    Ok(db_to_linear(p_dbm - 30.0) / (PLANCK * f_hz))
}

/// Inverse of [`dbm_to_photon_flux`].
pub fn photon_flux_to_dbm(flux: f64, f_hz: f64) -> crate::Result<f64> {
    crate::error::ensure(flux.is_finite() && flux >= 0.0, "flux", "must be finite and >= 0")?;
    crate::error::ensure(f_hz.is_finite() && f_hz > 0.0, "f_hz", "must be > 0")?;
    Ok(linear_to_db(flux * PLANCK * f_hz) + 30.0)
}
