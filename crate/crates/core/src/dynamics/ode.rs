//! Dormand–Prince 5(4) integrator for small complex linear systems.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type State = Vector3<Complex64>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; chosen from the derivative scale when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: None,
            max_steps: 10_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Fifth-order weights are the last row of A (FSAL).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Step {
    y: State,
    err: State,
    k_last: State,
}

fn dp_step<F>(f: &F, t: f64, y: &State, k1: &State, h: f64) -> Step
where
    F: Fn(f64, &State) -> State,
{
    let mut k = [State::zeros(); 7];
    k[0] = *k1;
    for s in 1..7 {
        let mut yi = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            if A[s][j] != 0.0 {
                yi += kj * Complex64::new(h * A[s][j], 0.0);
            }
        }
        k[s] = f(t + C[s] * h, &yi);
    }
    let mut y5 = *y;
    for j in 0..6 {
        y5 += k[j] * Complex64::new(h * A[6][j], 0.0);
    }
    let mut err = State::zeros();
    for j in 0..7 {
        err += k[j] * Complex64::new(h * E[j], 0.0);
    }
    Step {
        y: y5,
        err,
        k_last: k[6],
    }
}

fn error_norm(err: &State, y0: &State, y1: &State, opts: &OdeOptions) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for (e, a, b) in [(err[i].re, y0[i].re, y1[i].re), (err[i].im, y0[i].im, y1[i].im)] {
            let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
            acc += (e / sc).powi(2);
        }
    }
    (acc / 6.0).sqrt()
}

fn initial_step(f0: &State, y0: &State, span: f64, opts: &OdeOptions) -> f64 {
    let d0 = y0.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let d1 = f0.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let h = if d1 > 0.0 { 0.01 * (d0 + opts.atol) / d1 } else { span };
    h.min(span.abs()).max(f64::MIN_POSITIVE)
}

/// Adaptive integration reporting the state at every point of `t_grid`.
///
/// The first grid point is the initial time. Steps are shortened to land
/// exactly on each output time.
pub fn integrate<F>(f: F, t_grid: &[f64], y0: State, opts: &OdeOptions) -> Result<Vec<State>>
where
    F: Fn(f64, &State) -> State,
{
    let Some(&t0) = t_grid.first() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(y0);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let span = t_grid.last().unwrap() - t0;
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&k1, &y, span.max(f64::MIN_POSITIVE), opts));
    let mut steps = 0usize;

    for &target in &t_grid[1..] {
        while t < target {
            if steps >= opts.max_steps {
                return Err(Error::Integration {
                    t_last: t,
                    reason: format!("exceeded {} steps", opts.max_steps),
                });
            }
            let remaining = target - t;
            let clamp = h >= remaining;
            let h_try = if clamp { remaining } else { h };
            if h_try <= 4.0 * f64::EPSILON * t.abs().max(remaining) {
                if clamp {
                    // Output point closer than rounding; treat as reached.
                    t = target;
                    break;
                }
                return Err(Error::Integration {
                    t_last: t,
                    reason: format!("step size underflow (h = {h_try:e})"),
                });
            }
            let step = dp_step(&f, t, &y, &k1, h_try);
            let en = error_norm(&step.err, &y, &step.y, opts);
            steps += 1;
            if !en.is_finite() {
                h = 0.2 * h_try;
                continue;
            }
            if en <= 1.0 {
                t = if clamp { target } else { t + h_try };
                y = step.y;
                k1 = step.k_last;
                let fac = if en == 0.0 {
                    5.0
                } else {
                    (0.9 * en.powf(-0.2)).clamp(0.2, 5.0)
                };
                // A step cut short by an output point says nothing about the
                // step the controller would have taken.
                h = if clamp { h.max(h_try * fac) } else { h_try * fac };
            } else {
                h = h_try * (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        out.push(y);
    }
    Ok(out)
}

/// Fixed-step integration over `[t0, t1]` with `n` equal steps.
pub fn integrate_fixed<F>(f: F, t0: f64, y0: State, t1: f64, n: usize) -> State
where
    F: Fn(f64, &State) -> State,
{
    let h = (t1 - t0) / n as f64;
    let mut y = y0;
    let mut k1 = f(t0, &y);
    for i in 0..n {
        let step = dp_step(&f, t0 + i as f64 * h, &y, &k1, h);
        y = step.y;
        k1 = step.k_last;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exponential_and_rotation() {
        let f = |_t: f64, y: &State| State::new(y[0] * c(-1.0, 0.0), y[1] * c(0.0, 2.0), y[2] * c(-0.5, -3.0));
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let y0 = State::new(c(1.0, 0.0), c(0.0, 1.0), c(2.0, -1.0));
        let ys = integrate(f, &grid, y0, &OdeOptions::default()).unwrap();
        for (t, y) in grid.iter().zip(&ys) {
            assert!((y[0] - c(1.0, 0.0) * (-t).exp()).norm() < 1e-9);
            assert!((y[1] - c(0.0, 1.0) * c(0.0, 2.0 * t).exp()).norm() < 1e-9);
            assert!((y[2] - y0[2] * (c(-0.5, -3.0) * *t).exp()).norm() < 1e-9);
        }
    }

    #[test]
    fn fixed_step_order() {
        let f = |_t: f64, y: &State| State::new(y[1], -y[0], y[2] * c(-1.0, 1.0));
        let y0 = State::new(c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let exact = State::new(c(2f64.cos(), 0.0), c(-(2f64.sin()), 0.0), (c(-1.0, 1.0) * 2.0).exp());
        let e1 = (integrate_fixed(f, 0.0, y0, 2.0, 10) - exact).norm();
        let e2 = (integrate_fixed(f, 0.0, y0, 2.0, 20) - exact).norm();
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "{order}");
    }

    #[test]
    fn underflow_reports_time() {
        // Finite-time blow-up at t = 1.
        let f = |_t: f64, y: &State| State::new(y[0] * y[0], c(0.0, 0.0), c(0.0, 0.0));
        let y0 = State::new(c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        let opts = OdeOptions {
            max_steps: 100_000,
            ..OdeOptions::default()
        };
        match integrate(f, &[0.0, 2.0], y0, &opts) {
            Err(Error::Integration { t_last, .. }) => assert!(t_last < 1.0 && t_last > 0.9),
            other => panic!("expected failure, got {other:?}"),
        }
    }
}
