use crate::error::{ensure, Result};
use crate::units::{dbm_to_photon_flux, photon_flux_to_dbm};

/// Rabi amplitude `Ω = 2√(Γ_r Φ)` (rad/s) produced by a source at `p_dbm`
/// behind `attenuation_db` (negative for loss), where `Φ` is the photon flux
/// arriving at the qubit.
pub fn rabi_from_power(p_dbm: f64, attenuation_db: f64, gamma_r: f64, f01_hz: f64) -> Result<f64> {
    ensure(attenuation_db.is_finite(), "attenuation_db", "must be finite")?;
    ensure(gamma_r.is_finite() && gamma_r > 0.0, "gamma_r", "must be > 0")?;
    let flux = dbm_to_photon_flux(p_dbm + attenuation_db, f01_hz)?;
    Ok(2.0 * (gamma_r * flux).sqrt())
}

/// Source power in dBm that yields Rabi amplitude `rabi` at the qubit.
pub fn power_for_rabi(rabi: f64, attenuation_db: f64, gamma_r: f64, f01_hz: f64) -> Result<f64> {
    ensure(rabi.is_finite() && rabi >= 0.0, "rabi", "must be finite and >= 0")?;
    ensure(attenuation_db.is_finite(), "attenuation_db", "must be finite")?;
    ensure(gamma_r.is_finite() && gamma_r > 0.0, "gamma_r", "must be > 0")?;
    let flux = rabi * rabi / (4.0 * gamma_r);
    Ok(photon_flux_to_dbm(flux, f01_hz)? - attenuation_db)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{khz, mhz};

    #[test]
    fn mollow_drive_is_about_nine_mhz() {
        let omega = rabi_from_power(-116.0, 0.0, khz(227.0), 5.52e9).unwrap();
        let f = omega / mhz(1.0);
        assert!((f - 9.5).abs() < 9.5 * 0.15, "{f}");
        let again = rabi_from_power(29.0, -145.0, khz(227.0), 5.52e9).unwrap();
        assert!((again / omega - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_root_law() {
        let a = rabi_from_power(-120.0, 0.0, khz(227.0), 5.5e9).unwrap();
        let b = rabi_from_power(-120.0 + 10.0 * 2f64.log10(), 0.0, khz(227.0), 5.5e9).unwrap();
        assert!((b / a - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_flux_gives_zero_rabi() {
        assert_eq!(rabi_from_power(f64::NEG_INFINITY, 0.0, khz(227.0), 5.5e9).unwrap(), 0.0);
    }

    #[test]
    fn inverse_round_trip() {
        let omega = mhz(1.4);
        let p = power_for_rabi(omega, -145.0, khz(227.0), 5.5e9).unwrap();
        let back = rabi_from_power(p, -145.0, khz(227.0), 5.5e9).unwrap();
        assert!((back / omega - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_power_is_an_error() {
        assert!(rabi_from_power(f64::NAN, 0.0, khz(227.0), 5.5e9).is_err());
    }
}
