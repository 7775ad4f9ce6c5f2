//! Synthetic measurement chain: attenuation and gain bookkeeping, a white
//! system-noise floor, averaging, and slow parameter drift between traces.
//!
//! Every random draw comes from a ChaCha8 stream selected by
//! `(seed, stream index)`, so traces generated in parallel are identical to
//! those generated serially.

mod drift;
mod noise;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::units::db_to_linear;
pub use crate::units::{dbm_to_photon_flux, photon_flux_to_dbm};

pub use drift::{drift_ensemble, DriftDraw, DriftEnsemble};
pub use noise::{
    synthesize_noisy_powers, synthesize_noisy_psd, synthesize_noisy_reflection, synthesize_noisy_trace, NoisyPowers,
    NoisyReflection,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    /// Input-line attenuation in dB (negative for loss).
    pub attenuation_db: f64,
    /// Output-line gain in dB.
    pub gain_db: f64,
    /// System noise in photons per second per Hz of bandwidth.
    pub noise_photons: f64,
    pub n_avg: f64,
    /// Detection bandwidth of time-domain and power measurements, Hz.
    pub bandwidth_hz: f64,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            attenuation_db: -145.0,
            gain_db: 115.0,
            noise_photons: 49.0,
            n_avg: 1.0,
            bandwidth_hz: 5e6,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.n_avg.is_finite() && self.n_avg >= 1.0, "n_avg", "must be >= 1")?;
        ensure(
            self.noise_photons.is_finite() && self.noise_photons >= 0.0,
            "noise_photons",
            "must be finite and >= 0",
        )?;
        ensure(
            self.bandwidth_hz.is_finite() && self.bandwidth_hz > 0.0,
            "bandwidth_hz",
            "must be > 0",
        )?;
        ensure(self.attenuation_db.is_finite(), "attenuation_db", "must be finite")?;
        ensure(self.gain_db.is_finite(), "gain_db", "must be finite")
    }

    pub fn with_n_avg(mut self, n_avg: f64) -> Self {
        self.n_avg = n_avg;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Source power (dBm) delivered to the qubit.
    pub fn power_at_qubit(&self, source_dbm: f64) -> f64 {
        source_dbm + self.attenuation_db
    }

    /// Photon flux at the digitizer for a flux leaving the sample.
    pub fn flux_at_output(&self, flux: f64) -> f64 {
        flux * db_to_linear(self.gain_db)
    }

    /// Total source-to-digitizer scaling in dB.
    pub fn net_db(&self) -> f64 {
        self.attenuation_db + self.gain_db
    }

    /// Noise power `N·B` in photon flux.
    pub fn noise_flux(&self) -> f64 {
        self.noise_photons * self.bandwidth_hz
    }

    /// Deterministic generator for stream `index` of this run.
    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}
