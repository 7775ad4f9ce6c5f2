use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DriveConfig;
use crate::error::{Error, Result};
use crate::rates::RateSet;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Reduced qubit state in the frame rotating at the pump frequency:
/// `s1 = ρ₁₀` (coherence) and `s2 = ρ₁₁` (excited population).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub s1: Complex64,
    pub s2: f64,
}

impl BlochVector {
    pub const GROUND: Self = Self {
        s1: Complex64::new(0.0, 0.0),
        s2: 0.0,
    };

    pub const EXCITED: Self = Self {
        s1: Complex64::new(0.0, 0.0),
        s2: 1.0,
    };

    /// Positivity of the 2×2 density matrix, up to `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.s2 >= -tol && self.s2 <= 1.0 + tol && self.s1.norm_sqr() <= self.s2 * (1.0 - self.s2) + tol
    }

    /// `(s1, s1*, s2)` as used by the linear equations of motion.
    pub fn to_vector(&self) -> [Complex64; 3] {
        [self.s1, self.s1.conj(), Complex64::new(self.s2, 0.0)]
    }

    pub fn from_vector(v: &[Complex64; 3]) -> Self {
        Self { s1: v[0], s2: v[2].re }
    }

    /// `⟨σ_z⟩ = 2ρ₁₁ − 1`.
    pub fn sigma_z(&self) -> f64 {
        2.0 * self.s2 - 1.0
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (self.s1 - other.s1).norm().max((self.s2 - other.s2).abs())
    }
}

/// Stationary `(s̄₁, s̄₂)` for raw rates. `gamma_2` may be any value that
/// keeps the denominator nonzero, which lets fitters explore Γ_φ < 0.
pub(crate) fn steady_state_raw(delta: f64, rabi: f64, gamma_1: f64, gamma_2: f64) -> Result<(Complex64, f64)> {
    let den = rabi * rabi * gamma_2 + gamma_1 * (delta * delta + gamma_2 * gamma_2);
    if den == 0.0 || !den.is_finite() {
        return Err(Error::Degenerate(
            "Ω²Γ₂ + Γ₁(Δ² + Γ₂²) vanishes; steady state undefined".into(),
        ));
    }
    let s1 = Complex64::new(delta, -gamma_2) * (rabi * gamma_1 / (2.0 * den));
    let s2 = rabi * rabi * gamma_2 / (2.0 * den);
    Ok((s1, s2))
}

pub fn steady_state(drive: &DriveConfig, rates: &RateSet) -> Result<BlochVector> {
    let (s1, s2) = steady_state_raw(drive.delta(), drive.rabi(), rates.gamma_1(), rates.gamma_2())?;
    Ok(BlochVector { s1, s2 })
}

/// Generator `M` and inhomogeneity `B` of `d/dt (s1, s1*, s2) = M·(…) + B`.
pub fn bloch_matrix(drive: &DriveConfig, rates: &RateSet) -> (Matrix3<Complex64>, Vector3<Complex64>) {
    bloch_matrix_raw(drive.delta(), drive.rabi(), rates.gamma_1(), rates.gamma_2())
}

pub(crate) fn bloch_matrix_raw(
    delta: f64,
    rabi: f64,
    gamma_1: f64,
    gamma_2: f64,
) -> (Matrix3<Complex64>, Vector3<Complex64>) {
    let c = |re: f64| Complex64::new(re, 0.0);
    let m = Matrix3::new(
        I * delta - gamma_2,
        c(0.0),
        I * rabi,
        c(0.0),
        -I * delta - gamma_2,
        -I * rabi,
        I * (rabi / 2.0),
        -I * (rabi / 2.0),
        c(-gamma_1),
    );
    let b = Vector3::new(-I * (rabi / 2.0), I * (rabi / 2.0), c(0.0));
    (m, b)
}

/// Stationary correlations `(s̄₃, s̄₄, s̄₅) = s̄₁*·(s̄₁, s̄₁*, s̄₂)` and the initial
/// offsets `δS(0) = (s̄₂ − |s̄₁|², −(s̄₁*)², −s̄₁*s̄₂)`.
pub(crate) fn correlation_initial(s1: Complex64, s2: f64) -> ([Complex64; 3], [Complex64; 3]) {
    let c = s1.conj();
    let stationary = [c * s1, c * c, c * s2];
    let ds0 = [Complex64::new(s2, 0.0) - stationary[0], -stationary[1], -stationary[2]];
    (stationary, ds0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{khz, mhz};

    fn table_rates() -> RateSet {
        RateSet::from_khz(227.0, 48.0, 3.0).unwrap()
    }

    #[test]
    fn undriven_is_ground() {
        let d = DriveConfig::resonant(mhz(5500.0), 0.0).unwrap();
        let s = steady_state(&d, &table_rates()).unwrap();
        assert_eq!(s.s1, Complex64::new(0.0, 0.0));
        assert_eq!(s.s2, 0.0);
    }

    #[test]
    fn strong_drive_saturates() {
        let d = DriveConfig::resonant(mhz(5500.0), mhz(1e4)).unwrap();
        let s = steady_state(&d, &table_rates()).unwrap();
        assert!((s.s2 - 0.5).abs() < 1e-8);
    }

    #[test]
    fn population_at_160_khz() {
        // Ω²/(2(Γ₁Γ₂ + Ω²)) with Γ₁ = 275, Γ₂ = 140.5, Ω = 160 (kHz·2π)
        let expected = 160.0f64.powi(2) / (2.0 * (275.0 * 140.5 + 160.0f64.powi(2)));
        let d = DriveConfig::resonant(mhz(5500.0), khz(160.0)).unwrap();
        let s = steady_state(&d, &table_rates()).unwrap();
        assert!((s.s2 - expected).abs() < 1e-14);
        assert!((s.s2 - 0.199_260_556_528_5).abs() < 1e-12);
    }

    #[test]
    fn steady_state_is_fixed_point_of_generator() {
        let d = DriveConfig::detuned(mhz(5500.0), khz(-790.0), mhz(1.4)).unwrap();
        let r = table_rates();
        let s = steady_state(&d, &r).unwrap();
        let (m, b) = bloch_matrix(&d, &r);
        let v = Vector3::from(s.to_vector());
        let rhs = m * v + b;
        assert!(rhs.norm() < 1e-9 * r.gamma_1());
        assert!(s.is_physical(1e-14));
    }

    #[test]
    fn degenerate_denominator() {
        let d = DriveConfig::resonant(mhz(5500.0), 0.0).unwrap();
        let r = RateSet::new(0.0, 0.0, 0.0).unwrap();
        assert!(matches!(steady_state(&d, &r), Err(Error::Degenerate(_))));
    }
}
