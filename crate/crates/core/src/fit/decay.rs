//! Time-domain fits: complex Ramsey-type decay and exponential power decay.

use num_complex::Complex64;

use super::circle::{unwrap, Quadrature};
use super::lm::{fit_curve, CurveModel, FitResult, LmOptions, ParamKind};
use crate::dynamics::ComplexTrace;
use crate::error::{Error, Result};

/// `A·e^{−Γ₂τ}·e^{i(φ₀ − δω·τ)}` split into quadratures; parameters
/// `[gamma_2, delta_omega, amplitude, phase0]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ComplexDecay;

impl ComplexDecay {
    fn value(t: f64, p: &[f64]) -> Complex64 {
        Complex64::from_polar(p[2] * (-p[0] * t).exp(), p[3] - p[1] * t)
    }
}

impl CurveModel for ComplexDecay {
    type X = (f64, Quadrature);

    fn names(&self) -> Vec<&'static str> {
        vec!["gamma_2", "delta_omega", "amplitude", "phase0"]
    }

    fn eval(&self, (t, q): Self::X, p: &[f64]) -> f64 {
        let v = Self::value(t, p);
        match q {
            Quadrature::Re => v.re,
            Quadrature::Im => v.im,
        }
    }

    fn gradient(&self, (t, q): Self::X, p: &[f64], g: &mut [f64]) -> bool {
        let v = Self::value(t, p);
        let i = Complex64::new(0.0, 1.0);
        let parts = [-t * v, -i * t * v, v / p[2], i * v];
        for (gk, d) in g.iter_mut().zip(parts) {
            *gk = match q {
                Quadrature::Re => d.re,
                Quadrature::Im => d.im,
            };
        }
        true
    }
}

/// `P₀·e^{−Γ₁τ}`, parameters `[gamma_1, p0]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExponentialDecay;

impl CurveModel for ExponentialDecay {
    type X = f64;

    fn names(&self) -> Vec<&'static str> {
        vec!["gamma_1", "p0"]
    }

    fn eval(&self, t: f64, p: &[f64]) -> f64 {
        p[1] * (-p[0] * t).exp()
    }

    fn gradient(&self, t: f64, p: &[f64], g: &mut [f64]) -> bool {
        let e = (-p[0] * t).exp();
        g[0] = -t * p[1] * e;
        g[1] = e;
        true
    }
}

/// Straight-line least squares `y = a + b·x`.
fn line(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64) {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Joint fit of a complex emission trace to `A·e^{−Γ₂τ}·e^{i(φ₀ − δω·τ)}`.
///
/// A log-linear fit of the magnitude and a linear fit of the unwrapped
/// phase give the starting point. `delta_hint` is the expected detuning in
/// rad/s, if known; the trace is rejected as aliased when the detuning
/// advances the phase by more than π per sample.
pub fn fit_complex_decay(trace: &ComplexTrace, delta_hint: Option<f64>) -> Result<FitResult> {
    let n = trace.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("{n} samples; need at least 4")));
    }
    let t0 = trace.t[0];
    let t: Vec<f64> = trace.t.iter().map(|x| x - t0).collect();
    let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
    if let Some(d) = delta_hint {
        if d.abs() * dt > std::f64::consts::PI {
            return Err(Error::Aliasing(d.abs() * dt));
        }
    }
    let floor = trace
        .sigma
        .as_ref()
        .map_or(0.0, |s| 3.0 * s.iter().sum::<f64>() / n as f64);
    let use_pt: Vec<usize> = (0..n).filter(|&i| trace.values[i].norm() > floor).collect();
    if use_pt.len() < 3 {
        return Err(Error::InsufficientData("signal is below the noise everywhere".into()));
    }
    // Keep only the leading run above the noise so that the unwrap is
    // meaningful.
    let mut lead = vec![use_pt[0]];
    for &i in &use_pt[1..] {
        if i == lead[lead.len() - 1] + 1 {
            lead.push(i);
        } else {
            break;
        }
    }
    if lead.len() < 3 {
        lead = use_pt.clone();
    }
    let mut phase: Vec<f64> = lead.iter().map(|&i| trace.values[i].arg()).collect();
    let steps: Vec<f64> = phase
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            (d + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
        })
        .collect();
    let mut sorted: Vec<f64> = steps.iter().map(|s| s.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if delta_hint.is_none() && median > 0.9 * std::f64::consts::PI {
        return Err(Error::Aliasing(median));
    }
    unwrap(&mut phase);
    let lt: Vec<f64> = lead.iter().map(|&i| t[i]).collect();
    let mag: Vec<f64> = lead.iter().map(|&i| trace.values[i].norm()).collect();
    let lmag: Vec<f64> = mag.iter().map(|m| m.ln()).collect();
    let wts: Vec<f64> = mag.iter().map(|m| m * m).collect();
    let (la, lb) = line(&lt, &lmag, &wts);
    let (pa, pb) = line(&lt, &phase, &wts);
    let span = t[n - 1];
    let g2_0 = (-lb).max(0.1 / span);
    let init = [g2_0, -pb, la.exp(), pa];

    let xs: Vec<(f64, Quadrature)> = t
        .iter()
        .flat_map(|&x| [(x, Quadrature::Re), (x, Quadrature::Im)])
        .collect();
    let ys: Vec<f64> = trace.values.iter().flat_map(|v| [v.re, v.im]).collect();
    let sig: Option<Vec<f64>> = trace.sigma.as_ref().map(|s| s.iter().flat_map(|v| [*v, *v]).collect());
    let inf = f64::INFINITY;
    let mut fit = fit_curve(
        &ComplexDecay,
        &xs,
        &ys,
        sig.as_deref(),
        &init,
        Some((&[-inf, -inf, 0.0, -inf], &[inf, inf, inf, inf])),
        &LmOptions::default(),
    )?;
    // Refer the phase back to the first sample time.
    let (g2, dw) = (fit.params[0], fit.params[1]);
    fit.params[3] = (fit.params[3] + dw * t0).rem_euclid(std::f64::consts::TAU);
    fit.params[2] *= (g2 * t0).exp();
    // Covariance of the shifted amplitude and phase follows by linearity.
    let k = (g2 * t0).exp();
    let cov = fit.covariance_matrix();
    let jac = nalgebra::Matrix4::new(
        1.0,
        0.0,
        0.0,
        0.0, //
        0.0,
        1.0,
        0.0,
        0.0, //
        t0 * fit.params[2],
        0.0,
        k,
        0.0, //
        0.0,
        t0,
        0.0,
        1.0,
    );
    let c4 = nalgebra::Matrix4::from_fn(|i, j| cov[(i, j)]);
    let c4 = jac * c4 * jac.transpose();
    for i in 0..4 {
        for j in 0..4 {
            fit.covariance[i][j] = c4[(i, j)];
        }
    }
    fit.kinds = vec![ParamKind::Rate, ParamKind::Rate, ParamKind::Plain, ParamKind::Plain];
    if fit.params[0] * span < 2.0 {
        fit.warnings.push(format!(
            "trace covers {:.2}/Γ₂; at least 2/Γ₂ is recommended",
            fit.params[0] * span
        ));
    }
    Ok(fit)
}

/// Fits an emitted-power trace to `P₀e^{−Γ₁τ}`. Points significantly
/// below zero indicate a bad background subtraction and produce a warning.
pub fn fit_exponential_power(trace: &ComplexTrace) -> Result<FitResult> {
    let n = trace.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} samples; need at least 3")));
    }
    let t0 = trace.t[0];
    let t: Vec<f64> = trace.t.iter().map(|x| x - t0).collect();
    let y: Vec<f64> = trace.values.iter().map(|v| v.re).collect();
    let sigma = trace.sigma.as_deref();
    let mut warnings = Vec::new();
    let below = (0..n).filter(|&i| y[i] < -3.0 * sigma.map_or(0.0, |s| s[i])).count();
    if below > 0 {
        warnings.push(format!(
            "{below} samples are negative beyond 3σ; the exponential model does not describe them"
        ));
    }
    let pos: Vec<usize> = (0..n).filter(|&i| y[i] > sigma.map_or(0.0, |s| s[i])).collect();
    if pos.len() < 2 {
        return Err(Error::InsufficientData("no samples above the noise".into()));
    }
    let lt: Vec<f64> = pos.iter().map(|&i| t[i]).collect();
    let ly: Vec<f64> = pos.iter().map(|&i| y[i].ln()).collect();
    let wts: Vec<f64> = pos.iter().map(|&i| y[i] * y[i]).collect();
    let (a, b) = line(&lt, &ly, &wts);
    let span = t[n - 1].max(f64::MIN_POSITIVE);
    let init = [(-b).max(0.1 / span), a.exp()];
    let mut fit = fit_curve(&ExponentialDecay, &t, &y, sigma, &init, None, &LmOptions::default())?;
    let k = (fit.params[0] * t0).exp();
    fit.params[1] *= k;
    let (c00, c01, c11) = (fit.covariance[0][0], fit.covariance[0][1], fit.covariance[1][1]);
    let d0 = t0 * fit.params[1];
    fit.covariance[0][1] = c01 * k + c00 * d0;
    fit.covariance[1][0] = fit.covariance[0][1];
    fit.covariance[1][1] = k * k * c11 + 2.0 * k * d0 * c01 + d0 * d0 * c00;
    fit.kinds = vec![ParamKind::Rate, ParamKind::Plain];
    fit.warnings.extend(warnings);
    Ok(fit)
}
