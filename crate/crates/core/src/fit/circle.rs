//! Circle fit of weak-probe reflection data.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lm::{fit_curve, CurveModel, FitResult, LmOptions, ParamKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
    /// RMS distance of the points from the circle.
    pub rms: f64,
}

/// Algebraic (Pratt) circle fit, solved by Newton iteration on the
/// characteristic polynomial of the centred moment matrix.
pub fn fit_circle_algebraic(points: &[Complex64]) -> Result<Circle> {
    let n = points.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} points for a circle")));
    }
    let nf = n as f64;
    let mean = points.iter().sum::<Complex64>() / nf;
    let (mut mxx, mut myy, mut mxy, mut mxz, mut myz, mut mzz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let x = p.re - mean.re;
        let y = p.im - mean.im;
        let z = x * x + y * y;
        mxx += x * x;
        myy += y * y;
        mxy += x * y;
        mxz += x * z;
        myz += y * z;
        mzz += z * z;
    }
    mxx /= nf;
    myy /= nf;
    mxy /= nf;
    mxz /= nf;
    myz /= nf;
    mzz /= nf;
    let spread = (mxx + myy).sqrt();
    if spread == 0.0 {
        return Err(Error::Geometry("all points coincide".into()));
    }

    let mz = mxx + myy;
    let cov_xy = mxx * myy - mxy * mxy;
    let a2 = 4.0 * cov_xy - 3.0 * mz * mz - mzz;
    let a1 = mzz * mz + 4.0 * cov_xy * mz - mxz * mxz - myz * myz - mz * mz * mz;
    let a0 = mxz * mxz * myy + myz * myz * mxx - mzz * cov_xy - 2.0 * mxz * myz * mxy + mz * mz * cov_xy;
    let mut x = 0.0f64;
    let mut y_old = f64::INFINITY;
    for _ in 0..100 {
        let y = a0 + x * (a1 + x * (a2 + 4.0 * x * x));
        if y.abs() > y_old.abs() {
            x = 0.0;
            break;
        }
        y_old = y;
        let dy = a1 + x * (2.0 * a2 + 16.0 * x * x);
        if dy == 0.0 {
            break;
        }
        let x_new = x - y / dy;
        if x_new == x || ((x_new - x) / x_new).abs() < 1e-14 {
            x = x_new;
            break;
        }
        if x_new < 0.0 {
            x = 0.0;
            break;
        }
        x = x_new;
    }
    let det = x * x - x * mz + cov_xy;
    if det.abs() <= 1e-12 * spread.powi(4) {
        return Err(Error::Geometry("points are collinear; no resonance in span".into()));
    }
    let cx = (mxz * (myy - x) - myz * mxy) / det / 2.0;
    let cy = (myz * (mxx - x) - mxz * mxy) / det / 2.0;
    let radius = (cx * cx + cy * cy + mz + 2.0 * x).sqrt();
    if !radius.is_finite() || radius > 1e6 * spread {
        return Err(Error::Geometry("points are collinear; no resonance in span".into()));
    }
    let center = mean + Complex64::new(cx, cy);
    let rms = (points
        .iter()
        .map(|p| ((p - center).norm() - radius).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(Circle { center, radius, rms })
}

/// Phase of `r − c` around the circle: `φ₀ − 2·atan2(Γ₂, ω − ω₀₁)`.
pub struct CirclePhase;

impl CurveModel for CirclePhase {
    type X = f64;

    fn names(&self) -> Vec<&'static str> {
        vec!["phase0", "omega_01", "gamma_2"]
    }

    fn eval(&self, w: f64, p: &[f64]) -> f64 {
        p[0] - 2.0 * p[2].atan2(w - p[1])
    }

    fn gradient(&self, w: f64, p: &[f64], g: &mut [f64]) -> bool {
        let d = w - p[1];
        let q = d * d + p[2] * p[2];
        g[0] = 1.0;
        g[1] = -2.0 * p[2] / q;
        g[2] = -2.0 * d / q;
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Re,
    Im,
}

/// Weak-probe reflection `1 − iΓ_r/(ω − ω₀₁ + iΓ₂)` split into quadratures.
pub struct WeakProbeReflection;

impl WeakProbeReflection {
    fn complex(w: f64, p: &[f64]) -> Complex64 {
        Complex64::new(1.0, 0.0) - Complex64::new(0.0, p[1]) / Complex64::new(w - p[0], p[2])
    }
}

impl CurveModel for WeakProbeReflection {
    type X = (f64, Quadrature);

    fn names(&self) -> Vec<&'static str> {
        vec!["omega_01", "gamma_r", "gamma_2"]
    }

    fn eval(&self, (w, q): Self::X, p: &[f64]) -> f64 {
        let r = Self::complex(w, p);
        match q {
            Quadrature::Re => r.re,
            Quadrature::Im => r.im,
        }
    }

    fn gradient(&self, (w, q): Self::X, p: &[f64], g: &mut [f64]) -> bool {
        let i = Complex64::new(0.0, 1.0);
        let den = Complex64::new(w - p[0], p[2]);
        let d2 = den * den;
        // r = 1 − iΓ_r/den
        let parts = [-i * p[1] / d2, -i / den, -p[1] / d2];
        for (k, c) in parts.iter().enumerate() {
            g[k] = match q {
                Quadrature::Re => c.re,
                Quadrature::Im => c.im,
            };
        }
        true
    }
}

pub(crate) fn unwrap(phases: &mut [f64]) {
    use std::f64::consts::{PI, TAU};
    for k in 1..phases.len() {
        let d = phases[k] - phases[k - 1];
        phases[k] -= TAU * ((d + PI) / TAU).floor();
    }
}

/// Circle fit of weak-probe reflection samples `r(ω)`.
///
/// Stages: algebraic circle, phase-versus-frequency fit for `ω₀₁` and `Γ₂`,
/// `Γ_r` from the diameter `Γ_r/Γ₂`, then a joint refinement of both
/// quadratures that supplies the covariance. `sigma` is per quadrature.
pub fn circle_fit(omega: &[f64], r: &[Complex64], sigma: Option<&[f64]>) -> Result<FitResult> {
    if omega.len() != r.len() {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: "grid and samples differ in length".into(),
        });
    }
    if r.len() < 6 {
        return Err(Error::InsufficientData(format!("{} points; need at least 6", r.len())));
    }
    let mut idx: Vec<usize> = (0..omega.len()).collect();
    idx.sort_by(|&a, &b| omega[a].total_cmp(&omega[b]));
    // Work relative to the band centre so that ω₀₁ is of the order of the
    // line width.
    let w_ref = 0.5 * (omega[idx[0]] + omega[idx[idx.len() - 1]]);
    let w: Vec<f64> = idx.iter().map(|&i| omega[i] - w_ref).collect();
    let z: Vec<Complex64> = idx.iter().map(|&i| r[i]).collect();
    let sig: Option<Vec<f64>> = sigma.map(|s| idx.iter().map(|&i| s[i]).collect());

    let circle = fit_circle_algebraic(&z)?;
    let mut phase: Vec<f64> = z.iter().map(|p| (p - circle.center).arg()).collect();
    unwrap(&mut phase);

    // Resonance: steepest phase change.
    let mut best = 1;
    let mut best_slope = 0.0;
    for k in 1..w.len() {
        let s = (phase[k] - phase[k - 1]).abs() / (w[k] - w[k - 1]);
        if s > best_slope {
            best_slope = s;
            best = k;
        }
    }
    let w01 = 0.5 * (w[best] + w[best - 1]);
    let g2 = if best_slope > 0.0 {
        2.0 / best_slope
    } else {
        (w[w.len() - 1] - w[0]) / 4.0
    };
    let span = w[w.len() - 1] - w[0];
    let g2 = g2.clamp(span * 1e-6, span);
    let phase0 = {
        let m = CirclePhase;
        let off: f64 = w
            .iter()
            .zip(&phase)
            .map(|(x, ph)| ph - m.eval(*x, &[0.0, w01, g2]))
            .sum::<f64>()
            / w.len() as f64;
        off
    };
    let phase_sigma: Option<Vec<f64>> = sig.as_ref().map(|s| s.iter().map(|v| v / circle.radius).collect());
    let opts = LmOptions::default();
    let ph = fit_curve(
        &CirclePhase,
        &w,
        &phase,
        phase_sigma.as_deref(),
        &[phase0, w01, g2],
        Some((
            &[f64::NEG_INFINITY, w[0] - span, 0.0],
            &[f64::INFINITY, w[w.len() - 1] + span, f64::INFINITY],
        )),
        &opts,
    )?;
    let w01 = ph.params[1];
    let g2 = ph.params[2].abs();
    let gr = 2.0 * circle.radius * g2;

    let xs: Vec<(f64, Quadrature)> = w
        .iter()
        .flat_map(|&x| [(x, Quadrature::Re), (x, Quadrature::Im)])
        .collect();
    let ys: Vec<f64> = z.iter().flat_map(|c| [c.re, c.im]).collect();
    let s2: Option<Vec<f64>> = sig.map(|s| s.iter().flat_map(|v| [*v, *v]).collect());
    let mut fit = fit_curve(
        &WeakProbeReflection,
        &xs,
        &ys,
        s2.as_deref(),
        &[w01, gr, g2],
        None,
        &opts,
    )?;
    fit.params[0] += w_ref;
    fit.kinds = vec![ParamKind::Rate; 3];
    if circle.rms > 0.2 * circle.radius {
        fit.warnings.push(format!(
            "points scatter {:.2} radii about the fitted circle",
            circle.rms / circle.radius
        ));
    }
    Ok(fit)
}
