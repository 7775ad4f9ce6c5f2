//! Algebraic combination of rate estimates from different methods.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rates::{Estimate, RateSet, RateSigmas};

/// Whatever subset of the five rates a method measures, in rad/s.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PartialRates {
    pub gamma_r: Option<Estimate>,
    pub gamma_n: Option<Estimate>,
    pub gamma_phi: Option<Estimate>,
    pub gamma_1: Option<Estimate>,
    pub gamma_2: Option<Estimate>,
}

/// One method's rates after completion, one-sigma errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub method: String,
    pub rates: PartialRates,
    /// Names of the fields obtained by combination rather than measured.
    pub derived: Vec<String>,
    pub warnings: Vec<String>,
}

fn sum(a: Estimate, b: Estimate, ka: f64, kb: f64) -> Estimate {
    Estimate::new(ka * a.value + kb * b.value, (ka * a.sigma).hypot(kb * b.sigma))
}

/// Fills in missing rates from `Γ₁ = Γ_r + Γ_n` and `Γ₂ = Γ₁/2 + Γ_φ`,
/// propagating errors as if the inputs were independent. `gamma_r_ref` is
/// used when the method does not measure `Γ_r` itself.
pub fn complete_rates(method: &str, partial: &PartialRates, gamma_r_ref: Option<Estimate>) -> RateRow {
    let mut p = *partial;
    let mut derived = Vec::new();
    if p.gamma_r.is_none() {
        if let Some(r) = gamma_r_ref {
            p.gamma_r = Some(r);
            derived.push("gamma_r".to_string());
        }
    }
    // Two passes cover every chain of dependencies.
    for _ in 0..2 {
        if p.gamma_1.is_none() {
            if let (Some(r), Some(n)) = (p.gamma_r, p.gamma_n) {
                p.gamma_1 = Some(sum(r, n, 1.0, 1.0));
                derived.push("gamma_1".into());
            } else if let (Some(g2), Some(phi)) = (p.gamma_2, p.gamma_phi) {
                p.gamma_1 = Some(sum(g2, phi, 2.0, -2.0));
                derived.push("gamma_1".into());
            }
        }
        if p.gamma_n.is_none() {
            if let (Some(g1), Some(r)) = (p.gamma_1, p.gamma_r) {
                p.gamma_n = Some(sum(g1, r, 1.0, -1.0));
                derived.push("gamma_n".into());
            }
        }
        if p.gamma_r.is_none() {
            if let (Some(g1), Some(n)) = (p.gamma_1, p.gamma_n) {
                p.gamma_r = Some(sum(g1, n, 1.0, -1.0));
                derived.push("gamma_r".into());
            }
        }
        if p.gamma_phi.is_none() {
            if let (Some(g2), Some(g1)) = (p.gamma_2, p.gamma_1) {
                p.gamma_phi = Some(sum(g2, g1, 1.0, -0.5));
                derived.push("gamma_phi".into());
            }
        }
        if p.gamma_2.is_none() {
            if let (Some(g1), Some(phi)) = (p.gamma_1, p.gamma_phi) {
                p.gamma_2 = Some(sum(g1, phi, 0.5, 1.0));
                derived.push("gamma_2".into());
            }
        }
    }
    let mut warnings = Vec::new();
    for (name, v) in fields(&p) {
        if let Some(e) = v {
            if e.value < -2.0 * e.sigma {
                warnings.push(format!(
                    "{name} = {:.4e} ± {:.1e} is negative beyond 2σ",
                    e.value, e.sigma
                ));
            }
        }
    }
    RateRow {
        method: method.to_string(),
        rates: p,
        derived,
        warnings,
    }
}

fn fields(p: &PartialRates) -> [(&'static str, Option<Estimate>); 5] {
    [
        ("gamma_r", p.gamma_r),
        ("gamma_n", p.gamma_n),
        ("gamma_phi", p.gamma_phi),
        ("gamma_1", p.gamma_1),
        ("gamma_2", p.gamma_2),
    ]
}

/// A pair of methods whose values of one rate differ by more than `2σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disagreement {
    pub field: String,
    pub a: String,
    pub b: String,
    /// `|a − b|/√(σ_a² + σ_b²)`.
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRates {
    pub rows: Vec<RateRow>,
    /// Inverse-variance weighted mean of each field over the rows that have it.
    pub consensus: PartialRates,
    pub disagreements: Vec<Disagreement>,
    /// True when every pair of rows agrees within `2σ` on every shared field.
    pub consistent: bool,
}

impl CombinedRates {
    /// The consensus as a [`RateSet`]; negative means are clamped to zero.
    pub fn rate_set(&self) -> Result<RateSet> {
        let c = &self.consensus;
        let v = |e: Option<Estimate>| e.map_or(0.0, |e| e.value.max(0.0));
        let s = |e: Option<Estimate>| e.map(|e| e.sigma);
        Ok(
            RateSet::new(v(c.gamma_r), v(c.gamma_n), v(c.gamma_phi))?.with_sigma(RateSigmas {
                gamma_r: s(c.gamma_r),
                gamma_n: s(c.gamma_n),
                gamma_phi: s(c.gamma_phi),
            }),
        )
    }
}

fn weighted_mean(values: &[Estimate]) -> Option<Estimate> {
    if values.is_empty() {
        return None;
    }
    let exact: Vec<f64> = values.iter().filter(|e| e.sigma == 0.0).map(|e| e.value).collect();
    if !exact.is_empty() {
        return Some(Estimate::exact(exact.iter().sum::<f64>() / exact.len() as f64));
    }
    let w: f64 = values.iter().map(|e| e.sigma.powi(-2)).sum();
    let m = values.iter().map(|e| e.value * e.sigma.powi(-2)).sum::<f64>() / w;
    Some(Estimate::new(m, w.powf(-0.5)))
}

/// Completes every method's rates and compares them pairwise.
pub fn combine_rates(outputs: &[(String, PartialRates)], gamma_r_ref: Option<Estimate>) -> CombinedRates {
    let rows: Vec<RateRow> = outputs.iter().map(|(m, p)| complete_rates(m, p, gamma_r_ref)).collect();
    combine_rows(rows)
}

/// Pairwise comparison and consensus of rows that are already complete.
pub fn combine_rows(rows: Vec<RateRow>) -> CombinedRates {
    let mut disagreements = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (fa, fb) = (fields(&rows[i].rates), fields(&rows[j].rates));
            for k in 0..5 {
                if let (Some(a), Some(b)) = (fa[k].1, fb[k].1) {
                    let s = a.sigma.hypot(b.sigma);
                    let d = (a.value - b.value).abs();
                    // The relative slack keeps rounding from flagging exact inputs.
                    if d > 2.0 * s + 1e-9 * a.value.abs().max(b.value.abs()) {
                        disagreements.push(Disagreement {
                            field: fa[k].0.to_string(),
                            a: rows[i].method.clone(),
                            b: rows[j].method.clone(),
                            z: if s > 0.0 { d / s } else { f64::INFINITY },
                        });
                    }
                }
            }
        }
    }
    let collect = |k: usize| -> Option<Estimate> {
        let v: Vec<Estimate> = rows.iter().filter_map(|r| fields(&r.rates)[k].1).collect();
        weighted_mean(&v)
    };
    let consensus = PartialRates {
        gamma_r: collect(0),
        gamma_n: collect(1),
        gamma_phi: collect(2),
        gamma_1: collect(3),
        gamma_2: collect(4),
    };
    CombinedRates {
        consistent: disagreements.is_empty(),
        rows,
        consensus,
        disagreements,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{khz, to_khz};

    fn e(v: f64, s: f64) -> Estimate {
        Estimate::new(khz(v), khz(s))
    }

    #[test]
    fn mollow_row_completion() {
        let p = PartialRates {
            gamma_1: Some(e(275.0, 7.0)),
            gamma_2: Some(e(141.0, 2.0)),
            ..Default::default()
        };
        let row = complete_rates("On-res.MT", &p, Some(e(227.0, 1.0)));
        let gn = row.rates.gamma_n.unwrap();
        assert!((to_khz(gn.value) - 48.0).abs() < 1e-9);
        assert!((to_khz(gn.sigma) - 7.0).abs() < 0.1);
        let gphi = row.rates.gamma_phi.unwrap();
        assert!((to_khz(gphi.value) - 3.5).abs() < 1e-9);
        assert!((to_khz(gphi.sigma) - 4.0).abs() < 0.1);
        assert!(row.derived.contains(&"gamma_r".to_string()));
    }

    #[test]
    fn exact_inputs_stay_exact() {
        let p = PartialRates {
            gamma_r: Some(e(227.0, 0.0)),
            gamma_n: Some(e(48.0, 0.0)),
            gamma_phi: Some(e(3.0, 0.0)),
            ..Default::default()
        };
        let row = complete_rates("x", &p, None);
        assert_eq!(row.rates.gamma_1.unwrap().sigma, 0.0);
        assert_eq!(row.rates.gamma_2.unwrap().sigma, 0.0);
        assert!((to_khz(row.rates.gamma_2.unwrap().value) - 140.5).abs() < 1e-9);
    }

    #[test]
    fn negative_rate_warned() {
        let p = PartialRates {
            gamma_1: Some(e(200.0, 1.0)),
            ..Default::default()
        };
        let row = complete_rates("x", &p, Some(e(227.0, 1.0)));
        assert_eq!(row.warnings.len(), 1);
    }

    #[test]
    fn consensus_and_flags() {
        let a = PartialRates {
            gamma_r: Some(e(227.0, 1.0)),
            ..Default::default()
        };
        let b = PartialRates {
            gamma_r: Some(e(229.0, 1.0)),
            ..Default::default()
        };
        let c = PartialRates {
            gamma_r: Some(e(240.0, 1.0)),
            ..Default::default()
        };
        let ok = combine_rates(&[("a".into(), a), ("b".into(), b)], None);
        assert!(ok.consistent);
        let m = ok.consensus.gamma_r.unwrap();
        assert!((to_khz(m.value) - 228.0).abs() < 1e-9);
        assert!((to_khz(m.sigma) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        let bad = combine_rates(&[("a".into(), a), ("c".into(), c)], None);
        assert!(!bad.consistent);
        assert_eq!(bad.disagreements[0].field, "gamma_r");
    }
}
