use serde::{Deserialize, Serialize};

use super::ode::{integrate, OdeOptions, State};
use crate::error::{ensure, Result};
use crate::qed::{bloch_matrix, BlochVector, DriveConfig};
use crate::rates::RateSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlochTrajectory {
    pub t: Vec<f64>,
    pub states: Vec<BlochVector>,
}

impl BlochTrajectory {
    pub fn last(&self) -> Option<&BlochVector> {
        self.states.last()
    }
}

pub(crate) fn check_times(t: &[f64], name: &'static str) -> Result<()> {
    ensure(!t.is_empty(), name, "time grid is empty")?;
    ensure(t.iter().all(|x| x.is_finite()), name, "times must be finite")?;
    ensure(
        t.windows(2).all(|w| w[1] > w[0]),
        name,
        "times must be strictly increasing",
    )
}

pub fn bloch_integrate(
    initial: BlochVector,
    drive: &DriveConfig,
    rates: &RateSet,
    t_grid: &[f64],
) -> Result<BlochTrajectory> {
    bloch_integrate_with(initial, drive, rates, t_grid, &OdeOptions::default())
}

/// Integrates `d/dt (s1, s1*, s2) = M·(s1, s1*, s2) + B` from `initial` at
/// `t_grid[0]`.
pub fn bloch_integrate_with(
    initial: BlochVector,
    drive: &DriveConfig,
    rates: &RateSet,
    t_grid: &[f64],
    opts: &OdeOptions,
) -> Result<BlochTrajectory> {
    check_times(t_grid, "t_grid")?;
    ensure(initial.is_physical(1e-12), "initial", "not a valid qubit state")?;
    let (m, b) = bloch_matrix(drive, rates);
    let rhs = |_t: f64, y: &State| m * y + b;
    let ys = integrate(rhs, t_grid, State::from(initial.to_vector()), opts)?;
    Ok(BlochTrajectory {
        t: t_grid.to_vec(),
        states: ys
            .iter()
            .map(|y| BlochVector::from_vector(&[y[0], y[1], y[2]]))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ode::integrate_fixed;
    use crate::qed::steady_state;
    use crate::units::{khz, mhz};
    use num_complex::Complex64;

    const WQ: f64 = 3.47e10;

    fn table_rates() -> RateSet {
        RateSet::from_khz(227.0, 48.0, 3.0).unwrap()
    }

    fn linspace(t1: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| t1 * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn steady_state_is_stationary() {
        let d = DriveConfig::detuned(WQ, khz(-790.0), mhz(1.4)).unwrap();
        let r = table_rates();
        let s = steady_state(&d, &r).unwrap();
        let tr = bloch_integrate(s, &d, &r, &linspace(2e-5, 200)).unwrap();
        for st in &tr.states {
            assert!(st.distance(&s) < 1e-9);
        }
    }

    #[test]
    fn free_relaxation() {
        let d = DriveConfig::resonant(WQ, 0.0).unwrap();
        let r = table_rates();
        let tr = bloch_integrate(BlochVector::EXCITED, &d, &r, &linspace(1e-5, 101)).unwrap();
        for (t, st) in tr.t.iter().zip(&tr.states) {
            assert!((st.s2 - (-r.gamma_1() * t).exp()).abs() < 1e-9);
            assert_eq!(st.s1, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn damped_rabi_reaches_steady_state() {
        let d = DriveConfig::resonant(WQ, mhz(9.0)).unwrap();
        let r = table_rates();
        let t_max = 30.0 / r.gamma_2().min(r.gamma_1());
        let tr = bloch_integrate(BlochVector::GROUND, &d, &r, &linspace(t_max, 2001)).unwrap();
        let s = steady_state(&d, &r).unwrap();
        assert!(tr.last().unwrap().distance(&s) < 1e-8);
        assert!((s.s2 - 0.5).abs() < 1e-3);
        assert!(tr.states.iter().all(|st| st.is_physical(1e-10)));
    }

    #[test]
    fn observed_order_on_damped_rabi() {
        let d = DriveConfig::resonant(WQ, mhz(9.0)).unwrap();
        let r = table_rates();
        let (m, b) = bloch_matrix(&d, &r);
        let rhs = |_t: f64, y: &State| m * y + b;
        let y0 = State::from(BlochVector::GROUND.to_vector());
        let t1 = 1e-6;
        let reference = integrate_fixed(rhs, 0.0, y0, t1, 8192);
        let e1 = (integrate_fixed(rhs, 0.0, y0, t1, 128) - reference).norm();
        let e2 = (integrate_fixed(rhs, 0.0, y0, t1, 256) - reference).norm();
        assert!((e1 / e2).log2() >= 4.5, "{}", (e1 / e2).log2());
    }

    #[test]
    fn rejects_bad_grid() {
        let d = DriveConfig::resonant(WQ, 0.0).unwrap();
        assert!(bloch_integrate(BlochVector::GROUND, &d, &table_rates(), &[0.0, 0.0]).is_err());
        let bad = BlochVector {
            s1: Complex64::new(0.6, 0.0),
            s2: 0.5,
        };
        assert!(bloch_integrate(bad, &d, &table_rates(), &[0.0, 1.0]).is_err());
    }
}
