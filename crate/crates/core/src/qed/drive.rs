use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Coherent drive applied to the emitter. All fields in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    omega_q: f64,
    omega_p: f64,
    rabi: f64,
}

impl DriveConfig {
    pub fn new(omega_q: f64, omega_p: f64, rabi: f64) -> Result<Self> {
        ensure(
            omega_q.is_finite() && omega_q > 0.0,
            "omega_q",
            "qubit frequency must be > 0",
        )?;
        ensure(omega_p.is_finite(), "omega_p", "pump frequency must be finite")?;
        ensure(rabi.is_finite() && rabi >= 0.0, "rabi", "Rabi amplitude must be >= 0")?;
        Ok(Self { omega_q, omega_p, rabi })
    }

    /// Pump at `omega_q + delta`.
    pub fn detuned(omega_q: f64, delta: f64, rabi: f64) -> Result<Self> {
        Self::new(omega_q, omega_q + delta, rabi)
    }

    pub fn resonant(omega_q: f64, rabi: f64) -> Result<Self> {
        Self::new(omega_q, omega_q, rabi)
    }

    pub fn omega_q(&self) -> f64 {
        self.omega_q
    }

    pub fn omega_p(&self) -> f64 {
        self.omega_p
    }

    pub fn rabi(&self) -> f64 {
        self.rabi
    }

    /// Pump detuning `Δ = ω_p − ω_q`.
    pub fn delta(&self) -> f64 {
        self.omega_p - self.omega_q
    }

    pub fn with_rabi(&self, rabi: f64) -> Result<Self> {
        Self::new(self.omega_q, self.omega_p, rabi)
    }

    /// Generalized Rabi frequency `√(Δ² + Ω²)`.
    pub fn generalized_rabi(&self) -> f64 {
        self.delta().hypot(self.rabi)
    }
}
