use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ChainConfig;
use crate::error::{ensure, Result};
use crate::rates::RateSet;
use crate::units::hz_to_angular;

/// Repetition structure of a long series of identical measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftEnsemble {
    pub n_traces: usize,
    /// Time between consecutive traces, seconds.
    pub interval_s: f64,
}

/// Parameters in force during one trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftDraw {
    pub index: usize,
    /// Start time of the trace, seconds.
    pub time_s: f64,
    pub rates: RateSet,
    /// Qubit frequency offset, rad/s.
    pub delta_omega: f64,
}

/// Independent Gaussian draws per trace around `base`.
///
/// Each of `Γ_r`, `Γ_n`, `Γ_φ` is jittered by `rate_jitter_sigma` and
/// truncated at zero; the frequency offset by `freq_jitter_sigma`. Both
/// sigmas are cyclic (Hz). Trace `i` draws from stream `i` of the chain seed.
pub fn drift_ensemble(
    base: &RateSet,
    freq_jitter_sigma: f64,
    rate_jitter_sigma: f64,
    spec: &DriftEnsemble,
    chain: &ChainConfig,
) -> Result<Vec<DriftDraw>> {
    ensure(
        freq_jitter_sigma.is_finite() && freq_jitter_sigma >= 0.0,
        "freq_jitter_sigma",
        "must be >= 0",
    )?;
    ensure(
        rate_jitter_sigma.is_finite() && rate_jitter_sigma >= 0.0,
        "rate_jitter_sigma",
        "must be >= 0",
    )?;
    let sf = hz_to_angular(freq_jitter_sigma);
    let sr = hz_to_angular(rate_jitter_sigma);
    (0..spec.n_traces)
        .map(|i| {
            let mut rng = chain.rng(i as u64);
            let mut jitter = |v: f64, s: f64| {
                let z: f64 = rng.sample(StandardNormal);
                (v + s * z).max(0.0)
            };
            let rates = RateSet::new(
                jitter(base.gamma_r(), sr),
                jitter(base.gamma_n(), sr),
                jitter(base.gamma_phi(), sr),
            )?;
            let z: f64 = rng.sample(StandardNormal);
            Ok(DriftDraw {
                index: i,
                time_s: i as f64 * spec.interval_s,
                rates,
                delta_omega: sf * z,
            })
        })
        .collect()
}
