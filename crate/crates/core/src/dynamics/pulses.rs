//! Pulsed protocols: state preparation, Ramsey-type emission and the
//! power decay after a π pulse.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::bloch::check_times;
use super::ode::{integrate, OdeOptions, State};
use crate::error::{ensure, Result};
use crate::qed::{bloch_matrix_raw, BlochVector};
use crate::rates::RateSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PulseMode {
    Instantaneous,
    /// Square resonant pulse of the given length in seconds.
    Finite {
        duration: f64,
    },
}

/// What the samples of a [`ComplexTrace`] represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceRole {
    /// Emitted field amplitude `⟨σ₋⟩` (times a scale factor).
    Amplitude,
    /// Emitted photon flux; imaginary parts are zero.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTrace {
    pub t: Vec<f64>,
    pub values: Vec<Complex64>,
    #[serde(default)]
    pub sigma: Option<Vec<f64>>,
    pub role: TraceRole,
}

impl ComplexTrace {
    pub fn new(t: Vec<f64>, values: Vec<Complex64>, sigma: Option<Vec<f64>>, role: TraceRole) -> Result<Self> {
        check_times(&t, "t_grid")?;
        ensure(values.len() == t.len(), "values", "length differs from time grid")?;
        if let Some(s) = &sigma {
            ensure(s.len() == t.len(), "sigma", "length differs from time grid")?;
        }
        Ok(Self { t, values, sigma, role })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// State reached from the ground state by a resonant rotation of `angle`.
///
/// The drive `(Ω/2)σ_x` rotates the ground state to
/// `s1 = −(i/2) sin(angle)`, `s2 = sin²(angle/2)`. The finite mode integrates
/// the Bloch equations with `Ω = angle/duration` and includes decay during
/// the pulse.
pub fn pulse_prepare(angle: f64, mode: PulseMode, rates: &RateSet) -> Result<BlochVector> {
    ensure(
        (0.0..=std::f64::consts::PI).contains(&angle),
        "angle",
        "rotation angle must lie in [0, π]",
    )?;
    match mode {
        PulseMode::Instantaneous => Ok(BlochVector {
            s1: Complex64::new(0.0, -0.5 * angle.sin()),
            s2: (0.5 * angle).sin().powi(2),
        }),
        PulseMode::Finite { duration } => {
            ensure(duration.is_finite() && duration > 0.0, "duration", "must be > 0")?;
            let rabi = angle / duration;
            let (m, b) = bloch_matrix_raw(0.0, rabi, rates.gamma_1(), rates.gamma_2());
            let rhs = |_t: f64, y: &State| m * y + b;
            let y0 = State::from(BlochVector::GROUND.to_vector());
            let ys = integrate(rhs, &[0.0, duration], y0, &OdeOptions::default())?;
            let y = ys[1];
            Ok(BlochVector::from_vector(&[y[0], y[1], y[2]]))
        }
    }
}

/// Free-decay emission after a π/2 pulse detuned by `delta_pulse`:
/// `(scale/2)·e^{−Γ₂τ}·e^{−iδτ}`.
pub fn ramsey_emission(delta_pulse: f64, rates: &RateSet, t_grid: &[f64], scale: f64) -> Result<ComplexTrace> {
    check_times(t_grid, "t_grid")?;
    ensure(delta_pulse.is_finite(), "delta_pulse", "must be finite")?;
    let g2 = rates.gamma_2();
    let values = t_grid
        .iter()
        .map(|&t| Complex64::from_polar(0.5 * scale * (-g2 * t).exp(), -delta_pulse * t))
        .collect();
    Ok(ComplexTrace {
        t: t_grid.to_vec(),
        values,
        sigma: None,
        role: TraceRole::Amplitude,
    })
}

/// Emitted photon flux `(Γ_r/2)(1 + ⟨σ_z⟩₀)e^{−Γ₁τ}`.
pub fn t1_power_trace(rates: &RateSet, t_grid: &[f64], initial_sz: f64) -> Result<ComplexTrace> {
    check_times(t_grid, "t_grid")?;
    ensure((-1.0..=1.0).contains(&initial_sz), "initial_sz", "must lie in [-1, 1]")?;
    let p0 = 0.5 * rates.gamma_r() * (1.0 + initial_sz);
    let g1 = rates.gamma_1();
    let values = t_grid
        .iter()
        .map(|&t| Complex64::new(p0 * (-g1 * t).exp(), 0.0))
        .collect();
    Ok(ComplexTrace {
        t: t_grid.to_vec(),
        values,
        sigma: None,
        role: TraceRole::Power,
    })
}
