//! Gaussian fits of histogrammed samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::statistics::{Data, OrderStatistics, Statistics};

use super::lm::{fit_curve, CurveModel, FitResult, LmOptions};
use crate::error::{Error, Result};

/// `a·exp(−(x − μ)²/(2σ²))`, parameters `[mean, sigma, amplitude]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianCounts;

impl CurveModel for GaussianCounts {
    type X = f64;

    fn names(&self) -> Vec<&'static str> {
        vec!["mean", "sigma", "amplitude"]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        let z = (x - p[0]) / p[1];
        p[2] * (-0.5 * z * z).exp()
    }

    fn gradient(&self, x: f64, p: &[f64], g: &mut [f64]) -> bool {
        let z = (x - p[0]) / p[1];
        let e = (-0.5 * z * z).exp();
        g[0] = p[2] * e * z / p[1];
        g[1] = p[2] * e * z * z / p[1];
        g[2] = e;
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit {
    pub fit: FitResult,
    pub bin_centers: Vec<f64>,
    pub counts: Vec<f64>,
    pub sample_mean: f64,
    pub sample_std: f64,
    /// Upper-tail probability of the fit's chi-square.
    pub p_value: f64,
    /// True when `p_value < 0.01`: the counts are not Gaussian.
    pub rejected: bool,
}

/// Freedman–Diaconis bin width `2·IQR·n^{−1/3}`, falling back to Scott's
/// rule when the interquartile range vanishes.
pub fn freedman_diaconis_width(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let iqr = Data::new(values.to_vec()).interquartile_range();
    if iqr > 0.0 {
        2.0 * iqr * n.powf(-1.0 / 3.0)
    } else {
        3.49 * values.std_dev() * n.powf(-1.0 / 3.0)
    }
}

/// Histograms `values` and fits a Gaussian to the counts, weighting each
/// bin by `1/√max(count, 1)`.
pub fn fit_gaussian_histogram(values: &[f64]) -> Result<HistogramFit> {
    let n = values.len();
    if n < 30 {
        return Err(Error::InsufficientData(format!("{n} samples; need at least 30")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "values",
            reason: "samples must be finite".into(),
        });
    }
    let mean = values.mean();
    let std = values.std_dev();
    if std.is_nan() || std <= 0.0 {
        return Err(Error::Degenerate("all samples are equal; the width is zero".into()));
    }
    let lo = values.min();
    let hi = values.max();
    let width = freedman_diaconis_width(values);
    let nbins = (((hi - lo) / width).ceil() as usize).clamp(3, 10_000);
    let width = (hi - lo) / nbins as f64;
    let mut counts = vec![0.0; nbins];
    for v in values {
        let k = (((v - lo) / width) as usize).min(nbins - 1);
        counts[k] += 1.0;
    }
    let centers: Vec<f64> = (0..nbins).map(|k| lo + (k as f64 + 0.5) * width).collect();
    let sigma: Vec<f64> = counts.iter().map(|c: &f64| c.max(1.0).sqrt()).collect();
    let amp0 = n as f64 * width / (std * (2.0 * std::f64::consts::PI).sqrt());
    // Work in standardized units for conditioning.
    let z: Vec<f64> = centers.iter().map(|c| (c - mean) / std).collect();
    let mut fit = fit_curve(
        &GaussianCounts,
        &z,
        &counts,
        Some(&sigma),
        &[0.0, 1.0, amp0],
        Some((
            &[f64::NEG_INFINITY, 1e-6, 0.0],
            &[f64::INFINITY, f64::INFINITY, f64::INFINITY],
        )),
        &LmOptions {
            scale_covariance: false,
            ..Default::default()
        },
    )?;
    fit.params[0] = mean + std * fit.params[0];
    fit.scale_param(1, std);
    // The mean shift adds a constant, so its variance only scales.
    for row in fit.covariance.iter_mut() {
        row[0] *= std;
    }
    for c in fit.covariance[0].iter_mut() {
        *c *= std;
    }
    let p_value = if fit.dof > 0 {
        ChiSquared::new(fit.dof as f64)
            .map(|d| d.sf(fit.chi2))
            .unwrap_or(f64::NAN)
    } else {
        1.0
    };
    let rejected = p_value < 0.01;
    if rejected {
        fit.warnings.push(format!(
            "chi-square p = {p_value:.2e}; the distribution is not Gaussian"
        ));
    }
    Ok(HistogramFit {
        fit,
        bin_centers: centers,
        counts,
        sample_mean: mean,
        sample_std: std,
        p_value,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::lm::gradient_mismatch;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn draws(n: usize, mu: f64, s: f64, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mu, s).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn recovers_width() {
        let v = draws(10_000, 145e3, 4e3, 7);
        let h = fit_gaussian_histogram(&v).unwrap();
        let s = h.fit.value("sigma").unwrap();
        assert!((s / 4e3 - 1.0).abs() < 0.03, "{s}");
        assert!((h.fit.value("mean").unwrap() - 145e3).abs() < 200.0);
        assert!(!h.rejected);
    }

    #[test]
    fn bimodal_is_flagged() {
        let mut v = draws(3000, -3.0, 1.0, 1);
        v.extend(draws(3000, 3.0, 1.0, 2));
        let h = fit_gaussian_histogram(&v).unwrap();
        assert!(h.rejected);
        assert!(h.p_value < 0.01);
    }

    #[test]
    fn degenerate_input() {
        assert!(matches!(fit_gaussian_histogram(&[1.0; 40]), Err(Error::Degenerate(_))));
        assert!(matches!(
            fit_gaussian_histogram(&[1.0; 10]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fd_width() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let w = freedman_diaconis_width(&v);
        assert!((w - 2.0 * 500.0 / 10.0).abs() < 2.0);
    }

    #[test]
    fn analytic_gradients() {
        for x in [-1.3, 0.2, 2.5] {
            assert!(gradient_mismatch(&GaussianCounts, x, &[0.1, 0.9, 120.0]).unwrap() < 1e-6);
        }
    }
}
