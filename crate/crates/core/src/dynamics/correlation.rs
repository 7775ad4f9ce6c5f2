//! Two-time correlations `⟨σ₊(t)σ₋(t+τ)⟩` by the quantum regression theorem,
//! and their one-sided Fourier transform.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::bloch::check_times;
use super::ode::{integrate, OdeOptions, State};
use crate::error::{ensure, Result};
use crate::qed::{bloch_matrix, correlation_initial, steady_state, DriveConfig, Spectrum, SPECTRUM_NORM};
use crate::rates::RateSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTrajectory {
    pub tau: Vec<f64>,
    /// `⟨σ₊(0)σ₋(τ)⟩`
    pub s3: Vec<Complex64>,
    /// `⟨σ₊(0)σ₊(τ)⟩`
    pub s4: Vec<Complex64>,
    /// `⟨σ₊(0)σ₊σ₋(τ)⟩`
    pub s5: Vec<Complex64>,
    /// Limits for `τ → ∞`.
    pub stationary: [Complex64; 3],
}

/// Integrates the correlation equations from `(s̄₂, 0, 0)` at `τ = tau_grid[0] = 0`.
pub fn correlation_trajectory(drive: &DriveConfig, rates: &RateSet, tau_grid: &[f64]) -> Result<CorrelationTrajectory> {
    check_times(tau_grid, "tau_grid")?;
    ensure(tau_grid[0] == 0.0, "tau_grid", "must start at 0")?;
    let s = steady_state(drive, rates)?;
    let (stationary, _) = correlation_initial(s.s1, s.s2);
    let (m, b) = bloch_matrix(drive, rates);
    let b = b * s.s1.conj();
    let rhs = |_t: f64, y: &State| m * y + b;
    let zero = Complex64::new(0.0, 0.0);
    let y0 = State::new(Complex64::new(s.s2, 0.0), zero, zero);
    let ys = integrate(rhs, tau_grid, y0, &OdeOptions::default())?;
    Ok(CorrelationTrajectory {
        tau: tau_grid.to_vec(),
        s3: ys.iter().map(|y| y[0]).collect(),
        s4: ys.iter().map(|y| y[1]).collect(),
        s5: ys.iter().map(|y| y[2]).collect(),
        stationary,
    })
}

/// Fluctuating part `δs₃(τ) = s₃(τ) − |s̄₁|²` sampled uniformly, ready for
/// Fourier transformation.
#[derive(Debug, Clone)]
pub struct CorrelationSamples {
    pub dt: f64,
    pub delta_s3: Vec<Complex64>,
    omega_p: f64,
    gamma_r: f64,
}

/// Samples `δs₃` on `n` points up to `τ_max = 50/min(Γ₁, Γ₂)`, where it has
/// decayed below double precision.
pub fn sample_correlation(drive: &DriveConfig, rates: &RateSet, n: usize) -> Result<CorrelationSamples> {
    ensure(n >= 16, "n", "need at least 16 samples")?;
    let slow = rates.gamma_1().min(rates.gamma_2());
    ensure(slow > 0.0, "rates", "correlations do not decay")?;
    let tau_max = 50.0 / slow;
    let dt = tau_max / n as f64;
    let grid: Vec<f64> = (0..n).map(|j| j as f64 * dt).collect();
    let tr = correlation_trajectory(drive, rates, &grid)?;
    let base = tr.stationary[0];
    Ok(CorrelationSamples {
        dt,
        delta_s3: tr.s3.iter().map(|v| v - base).collect(),
        omega_p: drive.omega_p(),
        gamma_r: rates.gamma_r(),
    })
}

/// Weights of piecewise-linear Filon quadrature for `∫₀^∞ f e^{iθτ/h}`:
/// interior weight `W(θ) = sinc²(θ/2)` and the half-hat weight at `τ = 0`.
fn filon_weights(theta: f64) -> (f64, Complex64) {
    if theta.abs() < 1e-2 {
        let t2 = theta * theta;
        let w = 1.0 - t2 / 12.0 + t2 * t2 / 360.0;
        let a0 = Complex64::new(0.5 - t2 / 24.0 + t2 * t2 / 720.0, theta / 6.0 - theta * t2 / 120.0);
        (w, a0)
    } else {
        let w = 2.0 * (1.0 - theta.cos()) / (theta * theta);
        let e = Complex64::new(0.0, theta).exp();
        let a0 = Complex64::new(0.0, 1.0 / theta) + (Complex64::new(1.0, 0.0) - e) / (theta * theta);
        (w, a0)
    }
}

impl CorrelationSamples {
    /// `I₃(ω)` by direct quadrature.
    pub fn transform_at(&self, omega: f64) -> Complex64 {
        let theta = (omega - self.omega_p) * self.dt;
        let (w, a0) = filon_weights(theta);
        let step = Complex64::new(0.0, theta).exp();
        let mut phase = Complex64::new(1.0, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, f) in self.delta_s3.iter().enumerate() {
            acc += f * phase;
            phase *= step;
            if j % 1024 == 1023 {
                phase = Complex64::new(0.0, theta * (j + 1) as f64).exp();
            }
        }
        let f0 = self.delta_s3[0];
        (acc * w - f0 * w + f0 * a0) * self.dt
    }

    pub fn psd_at(&self, omega: f64) -> f64 {
        SPECTRUM_NORM * self.gamma_r * self.transform_at(omega).re
    }

    /// Spectrum on the FFT grid `ω_p + 2πk/τ_max`, `k = −n/2 … n/2 − 1`.
    pub fn spectrum(&self) -> Spectrum {
        let n = self.delta_s3.len();
        let mut buf = self.delta_s3.clone();
        // Positive exponent e^{+iντ}.
        FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
        let dnu = TAU / (n as f64 * self.dt);
        let f0 = self.delta_s3[0];
        let half = n / 2;
        let mut omega = Vec::with_capacity(n);
        let mut psd = Vec::with_capacity(n);
        for i in 0..n {
            let k = i as i64 - half as i64;
            let idx = k.rem_euclid(n as i64) as usize;
            let nu = k as f64 * dnu;
            let (w, a0) = filon_weights(nu * self.dt);
            let val = (buf[idx] * w - f0 * w + f0 * a0) * self.dt;
            omega.push(self.omega_p + nu);
            psd.push(SPECTRUM_NORM * self.gamma_r * val.re);
        }
        Spectrum {
            omega,
            psd,
            sigma: None,
        }
    }
}
