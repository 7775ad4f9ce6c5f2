//! Fits of coherent, incoherent and lost power versus resonant drive.

use serde::{Deserialize, Serialize};

use super::lm::{fit_curve, CurveModel, FitResult, LmOptions, ParamKind};
use crate::error::{Error, Result};

/// `P_incoh = (Γ_r/2)·Ω²(Y + Ω²)/(X + Ω²)²` with `X = Γ₁Γ₂`, `Y = Γ₁Γ_φ`.
/// Parameters `[gamma_r, x, y]`, abscissa `Ω`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IncoherentPowerModel;

impl CurveModel for IncoherentPowerModel {
    type X = f64;

    fn names(&self) -> Vec<&'static str> {
        vec!["gamma_r", "g1g2", "g1gphi"]
    }

    fn eval(&self, w: f64, p: &[f64]) -> f64 {
        let o2 = w * w;
        0.5 * p[0] * o2 * (p[2] + o2) / (p[1] + o2).powi(2)
    }

    fn gradient(&self, w: f64, p: &[f64], g: &mut [f64]) -> bool {
        let o2 = w * w;
        let d = p[1] + o2;
        g[0] = 0.5 * o2 * (p[2] + o2) / (d * d);
        g[1] = -p[0] * o2 * (p[2] + o2) / (d * d * d);
        g[2] = 0.5 * p[0] * o2 / (d * d);
        true
    }
}

/// `P_loss = Γ_n·Ω²/(2(X + Ω²))`, parameters `[gamma_n, x]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossPowerModel;

impl CurveModel for LossPowerModel {
    type X = f64;

    fn names(&self) -> Vec<&'static str> {
        vec!["gamma_n", "g1g2"]
    }

    fn eval(&self, w: f64, p: &[f64]) -> f64 {
        let o2 = w * w;
        p[0] * o2 / (2.0 * (p[1] + o2))
    }

    fn gradient(&self, w: f64, p: &[f64], g: &mut [f64]) -> bool {
        let o2 = w * w;
        let d = p[1] + o2;
        g[0] = o2 / (2.0 * d);
        g[1] = -p[0] * o2 / (2.0 * d * d);
        true
    }
}

/// `P_coh = Ω²/(4Γ_r)·(1 − Γ₁Γ_r/(Ω² + Γ₁Γ₂))²`, parameters
/// `[gamma_r, gamma_n, gamma_phi]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoherentPowerModel;

impl CurveModel for CoherentPowerModel {
    type X = f64;

    fn names(&self) -> Vec<&'static str> {
        vec!["gamma_r", "gamma_n", "gamma_phi"]
    }

    fn eval(&self, w: f64, p: &[f64]) -> f64 {
        let (gr, gn, gphi) = (p[0], p[1], p[2]);
        let g1 = gr + gn;
        let d = w * w + g1 * (0.5 * g1 + gphi);
        let r = 1.0 - g1 * gr / d;
        w * w / (4.0 * gr) * r * r
    }

    fn gradient(&self, w: f64, p: &[f64], g: &mut [f64]) -> bool {
        let (gr, gn, gphi) = (p[0], p[1], p[2]);
        let o2 = w * w;
        let g1 = gr + gn;
        let g2 = 0.5 * g1 + gphi;
        let d = o2 + g1 * g2;
        let r = 1.0 - g1 * gr / d;
        let pin = o2 / (4.0 * gr);
        // ∂D/∂Γ_r = ∂D/∂Γ_n = Γ₂ + Γ₁/2, ∂D/∂Γ_φ = Γ₁.
        let dd = g2 + 0.5 * g1;
        let dr_gr = -((g1 + gr) * d - g1 * gr * dd) / (d * d);
        let dr_gn = -(gr * d - g1 * gr * dd) / (d * d);
        let dr_gphi = g1 * gr * g1 / (d * d);
        g[0] = -pin * r * r / gr + 2.0 * pin * r * dr_gr;
        g[1] = 2.0 * pin * r * dr_gn;
        g[2] = 2.0 * pin * r * dr_gphi;
        true
    }
}

/// Joint model over all three curves; abscissa `(Ω, curve)` with curve 0 =
/// coherent, 1 = incoherent, 2 = loss. Parameters `[gamma_r, gamma_n, gamma_phi]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScatteringModel;

impl CurveModel for ScatteringModel {
    type X = (f64, u8);

    fn names(&self) -> Vec<&'static str> {
        vec!["gamma_r", "gamma_n", "gamma_phi"]
    }

    fn eval(&self, (w, c): Self::X, p: &[f64]) -> f64 {
        let g1 = p[0] + p[1];
        let x = g1 * (0.5 * g1 + p[2]);
        match c {
            0 => CoherentPowerModel.eval(w, p),
            1 => IncoherentPowerModel.eval(w, &[p[0], x, g1 * p[2]]),
            _ => LossPowerModel.eval(w, &[p[1], x]),
        }
    }

    fn gradient(&self, (w, c): Self::X, p: &[f64], g: &mut [f64]) -> bool {
        let g1 = p[0] + p[1];
        let x = g1 * (0.5 * g1 + p[2]);
        // ∂X/∂Γ_{r,n} = Γ₁ + Γ_φ, ∂X/∂Γ_φ = Γ₁; ∂Y/∂Γ_{r,n} = Γ_φ, ∂Y/∂Γ_φ = Γ₁.
        let dx = [g1 + p[2], g1 + p[2], g1];
        match c {
            0 => {
                CoherentPowerModel.gradient(w, p, g);
            }
            1 => {
                let mut h = [0.0; 3];
                IncoherentPowerModel.gradient(w, &[p[0], x, g1 * p[2]], &mut h);
                let dy = [p[2], p[2], g1];
                for k in 0..3 {
                    g[k] = h[1] * dx[k] + h[2] * dy[k];
                }
                g[0] += h[0];
            }
            _ => {
                let mut h = [0.0; 2];
                LossPowerModel.gradient(w, &[p[1], x], &mut h);
                for k in 0..3 {
                    g[k] = h[1] * dx[k];
                }
                g[1] += h[0];
            }
        }
        true
    }
}

/// Power curves versus resonant Rabi frequency (rad/s), in photon flux.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerCurves {
    pub rabi: Vec<f64>,
    pub p_coh: Vec<f64>,
    pub p_incoh: Vec<f64>,
    pub p_loss: Vec<f64>,
    pub sigma_coh: Option<Vec<f64>>,
    pub sigma_incoh: Option<Vec<f64>>,
    pub sigma_loss: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringFit {
    /// `[gamma_r, g1g2, g1gphi]` from `P_incoh`.
    pub incoh: FitResult,
    /// `[gamma_n, g1g2]` from `P_loss`.
    pub loss: FitResult,
    /// `[gamma_r, gamma_n, gamma_phi]` from `P_coh`.
    pub coh: FitResult,
    /// All three curves together, with derived `gamma_1`, `gamma_2`,
    /// `g1g2` and `g1gphi`.
    pub joint: FitResult,
    pub warnings: Vec<String>,
}

/// Fits each curve separately and all three jointly.
///
/// Rows with `Ω = 0` or a non-positive sigma carry no information and are
/// dropped. Separate fits that disagree with each other by more than five
/// standard deviations produce a warning.
pub fn fit_scattering_powers(curves: &PowerCurves) -> Result<ScatteringFit> {
    let n = curves.rabi.len();
    let cols = [&curves.p_coh, &curves.p_incoh, &curves.p_loss];
    if cols.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParameter {
            name: "curves",
            reason: "columns differ in length".into(),
        });
    }
    let sigmas = [&curves.sigma_coh, &curves.sigma_incoh, &curves.sigma_loss];
    for s in sigmas.iter().copied().flatten() {
        if s.len() != n {
            return Err(Error::InvalidParameter {
                name: "curves",
                reason: "sigma column length differs".into(),
            });
        }
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&i| {
            curves.rabi[i] > 0.0
                && sigmas
                    .iter()
                    .all(|s| s.as_ref().map_or(true, |v| v[i] > 0.0 && v[i].is_finite()))
        })
        .collect();
    if keep.len() < 4 {
        return Err(Error::InsufficientData(format!("{} usable power rows", keep.len())));
    }
    // Everything rate-like is fitted in units of `u`.
    let u = {
        let l: f64 = keep.iter().map(|&i| curves.rabi[i].ln()).sum::<f64>() / keep.len() as f64;
        l.exp()
    };
    let w: Vec<f64> = keep.iter().map(|&i| curves.rabi[i] / u).collect();
    let pick = |v: &Vec<f64>| -> Vec<f64> { keep.iter().map(|&i| v[i] / u).collect() };
    let ys = [pick(cols[0]), pick(cols[1]), pick(cols[2])];
    let ss: Vec<Option<Vec<f64>>> = sigmas.iter().map(|s| s.as_ref().map(pick)).collect();

    // Starting point: saturation levels and the half-saturation drive of P_loss.
    let top = w.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    let x_sat = 1.0 + 1.0 / w[top].powi(2);
    let gr0 = (2.0 * ys[1][top] * x_sat).max(1e-6);
    let gn0 = (2.0 * ys[2][top] * x_sat).max(1e-3 * gr0);
    let x0 = {
        let g1 = gr0 + gn0;
        0.5 * g1 * g1
    };
    let opts = LmOptions::default();
    let inf = f64::INFINITY;

    let mut incoh = fit_curve(
        &IncoherentPowerModel,
        &w,
        &ys[1],
        ss[1].as_deref(),
        &[gr0, x0, 0.02 * x0],
        Some((&[0.0, 0.0, -inf], &[inf, inf, inf])),
        &opts,
    )?;
    let mut loss = fit_curve(
        &LossPowerModel,
        &w,
        &ys[2],
        ss[2].as_deref(),
        &[gn0, incoh.params[1]],
        Some((&[-inf, 0.0], &[inf, inf])),
        &opts,
    )?;
    let g1 = incoh.params[0] + loss.params[0];
    // Γ_φ is barely constrained by P_incoh alone, and a noisy sweep can
    // push it far past Γ₁; a start near zero dephasing is tried as well.
    let gphi0 = (incoh.params[2] / g1.max(1e-12)).clamp(0.0, g1.abs());
    let mut coh = [gphi0, 1e-2 * g1.abs()]
        .into_iter()
        .map(|gphi| {
            fit_curve(
                &CoherentPowerModel,
                &w,
                &ys[0],
                ss[0].as_deref(),
                &[incoh.params[0], loss.params[0], gphi],
                Some((&[1e-12, -inf, -inf], &[inf, inf, inf])),
                &opts,
            )
        })
        .reduce(|a, b| match (a, b) {
            (Ok(a), Ok(b)) => Ok(if b.chi2 < a.chi2 { b } else { a }),
            (Ok(a), Err(_)) | (Err(_), Ok(a)) => Ok(a),
            (Err(e), Err(_)) => Err(e),
        })
        .expect("two starts")?;

    let xs: Vec<(f64, u8)> = (0..3u8).flat_map(|c| w.iter().map(move |&x| (x, c))).collect();
    let yj: Vec<f64> = ys.iter().flatten().copied().collect();
    let sj: Option<Vec<f64>> = if ss.iter().all(|s| s.is_some()) {
        Some(ss.iter().flat_map(|s| s.as_ref().unwrap().iter().copied()).collect())
    } else {
        None
    };
    let mut joint = fit_curve(
        &ScatteringModel,
        &xs,
        &yj,
        sj.as_deref(),
        &coh.params,
        Some((&[1e-12, -inf, -inf], &[inf, inf, inf])),
        &opts,
    )?;

    for f in [&mut incoh, &mut loss, &mut coh, &mut joint] {
        for i in 0..f.params.len() {
            let k = if f.names[i].starts_with("g1g") { u * u } else { u };
            f.scale_param(i, k);
            f.kinds[i] = if k == u {
                ParamKind::Rate
            } else {
                ParamKind::RateSquared
            };
        }
    }
    let p = joint.params.clone();
    let (gr, gn, gphi) = (p[0], p[1], p[2]);
    let g1 = gr + gn;
    joint.push_derived("gamma_1", ParamKind::Rate, g1, &[1.0, 1.0, 0.0]);
    joint.push_derived("gamma_2", ParamKind::Rate, 0.5 * g1 + gphi, &[0.5, 0.5, 1.0, 0.0]);
    let dx = g1 + gphi;
    joint.push_derived(
        "g1g2",
        ParamKind::RateSquared,
        g1 * (0.5 * g1 + gphi),
        &[dx, dx, g1, 0.0, 0.0],
    );
    joint.push_derived(
        "g1gphi",
        ParamKind::RateSquared,
        g1 * gphi,
        &[gphi, gphi, g1, 0.0, 0.0, 0.0],
    );

    let mut warnings = Vec::new();
    let mut compare = |what: &str, a: &FitResult, an: &str, b: &FitResult, bn: &str| {
        if let (Some(x), Some(y)) = (a.get(an), b.get(bn)) {
            let s = x.sigma.hypot(y.sigma);
            if (x.value - y.value).abs() > 5.0 * s {
                warnings.push(format!(
                    "{what}: {:.6e} and {:.6e} differ by more than 5σ ({:.3e})",
                    x.value, y.value, s
                ));
            }
        }
    };
    compare("gamma_r (incoherent vs coherent)", &incoh, "gamma_r", &coh, "gamma_r");
    compare("gamma_n (loss vs coherent)", &loss, "gamma_n", &coh, "gamma_n");
    compare("g1g2 (incoherent vs loss)", &incoh, "g1g2", &loss, "g1g2");
    Ok(ScatteringFit {
        incoh,
        loss,
        coh,
        joint,
        warnings,
    })
}
