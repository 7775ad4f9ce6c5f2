use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qed::{bloch_matrix, correlation_initial, steady_state, DriveConfig, SPECTRUM_NORM};
use crate::rates::RateSet;

/// `I(ω) = −[M + i(ω − ω_p)]⁻¹ δS(0)`, all three components.
pub fn resolvent(omega: f64, drive: &DriveConfig, rates: &RateSet) -> Result<Vector3<Complex64>> {
    let s = steady_state(drive, rates)?;
    let (_, ds0) = correlation_initial(s.s1, s.s2);
    let (m, _) = bloch_matrix(drive, rates);
    let a = m + Matrix3::identity() * Complex64::new(0.0, omega - drive.omega_p());
    let x = a.lu().solve(&Vector3::from(ds0)).ok_or(Error::Singular { omega })?;
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Singular { omega });
    }
    Ok(-x)
}

/// Incoherent PSD from a direct linear solve; independent of the closed form.
pub fn spectrum_numeric(omega: f64, drive: &DriveConfig, rates: &RateSet) -> Result<f64> {
    let i = resolvent(omega, drive, rates)?;
    Ok(SPECTRUM_NORM * rates.gamma_r() * i[0].re)
}
