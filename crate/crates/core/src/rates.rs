//! Decay and decoherence rates of the emitter.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// A value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }

    pub fn scaled(self, k: f64) -> Self {
        Self {
            value: self.value * k,
            sigma: self.sigma * k.abs(),
        }
    }
}

/// Optional one-sigma uncertainties attached to a [`RateSet`] (rad/s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RateSigmas {
    pub gamma_r: Option<f64>,
    pub gamma_n: Option<f64>,
    pub gamma_phi: Option<f64>,
}

/// Radiative, non-radiative and pure-dephasing rates in rad/s.
///
/// `Γ₁ = Γ_r + Γ_n` and `Γ₂ = Γ₁/2 + Γ_φ` are always recomputed from the
/// three primitive rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    gamma_r: f64,
    gamma_n: f64,
    gamma_phi: f64,
    #[serde(default)]
    pub sigma: RateSigmas,
}

impl RateSet {
    pub fn new(gamma_r: f64, gamma_n: f64, gamma_phi: f64) -> Result<Self> {
        for (name, v) in [("gamma_r", gamma_r), ("gamma_n", gamma_n), ("gamma_phi", gamma_phi)] {
            ensure(
                v.is_finite() && v >= 0.0,
                name,
                format!("rate must be finite and >= 0, got {v}"),
            )?;
        }
        Ok(Self {
            gamma_r,
            gamma_n,
            gamma_phi,
            sigma: RateSigmas::default(),
        })
    }

    /// Rates given as cyclic frequencies Γ/2π in kHz.
    pub fn from_khz(gamma_r: f64, gamma_n: f64, gamma_phi: f64) -> Result<Self> {
        use crate::units::khz;
        Self::new(khz(gamma_r), khz(gamma_n), khz(gamma_phi))
    }

    pub fn with_sigma(mut self, sigma: RateSigmas) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn gamma_r(&self) -> f64 {
        self.gamma_r
    }

    pub fn gamma_n(&self) -> f64 {
        self.gamma_n
    }

    pub fn gamma_phi(&self) -> f64 {
        self.gamma_phi
    }

    pub fn gamma_1(&self) -> f64 {
        self.gamma_r + self.gamma_n
    }

    pub fn gamma_2(&self) -> f64 {
        0.5 * self.gamma_1() + self.gamma_phi
    }

    /// Multiply every rate (and uncertainty) by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        let s = |o: Option<f64>| o.map(|v| v * k);
        Self {
            gamma_r: self.gamma_r * k,
            gamma_n: self.gamma_n * k,
            gamma_phi: self.gamma_phi * k,
            sigma: RateSigmas {
                gamma_r: s(self.sigma.gamma_r),
                gamma_n: s(self.sigma.gamma_n),
                gamma_phi: s(self.sigma.gamma_phi),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    pub gamma_1: f64,
    pub gamma_2: f64,
    /// Fraction of spontaneous emission captured by the waveguide.
    pub beta: f64,
    /// `Γ_r / (Γ_n + 2Γ_φ)`; infinite for a lossless, dephasing-free emitter.
    pub purcell: f64,
}

pub fn derive_rates(rates: &RateSet) -> Result<DerivedRates> {
    let gamma_1 = rates.gamma_1();
    if gamma_1 == 0.0 {
        return Err(Error::UndefinedRatio("beta requires gamma_r + gamma_n > 0"));
    }
    let loss = rates.gamma_n + 2.0 * rates.gamma_phi;
    let purcell = if loss == 0.0 {
        f64::INFINITY
    } else {
        rates.gamma_r / loss
    };
    Ok(DerivedRates {
        gamma_1,
        gamma_2: rates.gamma_2(),
        beta: rates.gamma_r / gamma_1,
        purcell,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::to_khz;

    #[test]
    fn table_one_rates() {
        let r = RateSet::from_khz(227.0, 48.0, 3.0).unwrap();
        let d = derive_rates(&r).unwrap();
        assert!((to_khz(d.gamma_1) - 275.0).abs() < 1e-9);
        assert!((to_khz(d.gamma_2) - 140.5).abs() < 1e-9);
        assert!((d.beta - 227.0 / 275.0).abs() < 1e-12);
        assert!((d.beta - 0.825).abs() < 1e-3);
        assert!((d.purcell - 227.0 / 54.0).abs() < 1e-12);
        assert!((d.purcell - 4.20).abs() < 5e-3);
    }

    #[test]
    fn lossless_dephasing_free() {
        let r = RateSet::from_khz(100.0, 0.0, 0.0).unwrap();
        let d = derive_rates(&r).unwrap();
        assert_eq!(d.beta, 1.0);
        assert_eq!(d.gamma_2, 0.5 * r.gamma_r());
        assert!(d.purcell.is_infinite());
    }

    #[test]
    fn zero_total_decay_is_an_error() {
        let r = RateSet::new(0.0, 0.0, 1.0).unwrap();
        assert!(matches!(derive_rates(&r), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn negative_rate_rejected() {
        assert!(RateSet::new(1.0, -1.0, 0.0).is_err());
        assert!(RateSet::new(f64::NAN, 0.0, 0.0).is_err());
    }
}
