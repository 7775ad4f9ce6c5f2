use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ChainConfig;
use crate::dynamics::{ComplexTrace, TraceRole};
use crate::error::{ensure, Result};
use crate::qed::{PowerBudget, Spectrum};

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Adds white Gaussian noise with `σ = (S + N/2π)/√n_avg` per point.
///
/// `N/2π` is the system-noise floor expressed per unit angular frequency.
pub fn synthesize_noisy_psd(clean: &Spectrum, chain: &ChainConfig, stream: u64) -> Result<Spectrum> {
    chain.validate()?;
    let floor = chain.noise_photons / std::f64::consts::TAU;
    let scale = chain.n_avg.sqrt().recip();
    let mut rng = chain.rng(stream);
    let sigma: Vec<f64> = clean.psd.iter().map(|p| (p.abs() + floor) * scale).collect();
    let psd = clean
        .psd
        .iter()
        .zip(&sigma)
        .map(|(p, s)| p + s * normal(&mut rng))
        .collect();
    Spectrum::new(clean.omega.clone(), psd, Some(sigma))
}

/// Adds averaged system noise to a time trace.
///
/// Amplitude traces (in √(photon flux)) get circular complex noise with
/// per-quadrature `σ = √(N·B/(2 n_avg))`. Power traces get real noise with
/// `σ = (P + N·B)/√n_avg`, the background mean already subtracted.
pub fn synthesize_noisy_trace(clean: &ComplexTrace, chain: &ChainConfig, stream: u64) -> Result<ComplexTrace> {
    chain.validate()?;
    let nb = chain.noise_flux();
    let mut rng = chain.rng(stream);
    let (values, sigma): (Vec<Complex64>, Vec<f64>) = match clean.role {
        TraceRole::Amplitude => {
            let s = (nb / (2.0 * chain.n_avg)).sqrt();
            clean
                .values
                .iter()
                .map(|v| {
                    let re = normal(&mut rng);
                    let im = normal(&mut rng);
                    (v + Complex64::new(re, im) * s, s)
                })
                .unzip()
        }
        TraceRole::Power => clean
            .values
            .iter()
            .map(|v| {
                let s = (v.re.abs() + nb) / chain.n_avg.sqrt();
                (Complex64::new(v.re + s * normal(&mut rng), 0.0), s)
            })
            .unzip(),
    };
    ComplexTrace::new(clean.t.clone(), values, Some(sigma), clean.role)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyReflection {
    pub r: Vec<Complex64>,
    /// Per-quadrature standard deviation.
    pub sigma: Vec<f64>,
}

/// Reflection coefficients measured with a probe of `probe_flux` photons/s:
/// per-quadrature `σ = √(N·B/(2 n_avg)) / √probe_flux`.
pub fn synthesize_noisy_reflection(
    clean: &[Complex64],
    probe_flux: f64,
    chain: &ChainConfig,
    stream: u64,
) -> Result<NoisyReflection> {
    chain.validate()?;
    ensure(probe_flux.is_finite() && probe_flux > 0.0, "probe_flux", "must be > 0")?;
    let s = (chain.noise_flux() / (2.0 * chain.n_avg)).sqrt() / probe_flux.sqrt();
    let mut rng = chain.rng(stream);
    let r = clean
        .iter()
        .map(|v| {
            let re = normal(&mut rng);
            let im = normal(&mut rng);
            v + Complex64::new(re, im) * s
        })
        .collect();
    Ok(NoisyReflection {
        r,
        sigma: vec![s; clean.len()],
    })
}

/// Measured powers with one-sigma errors, as produced by the first and
/// second voltage moments with the qubit detuned (`off`) and on resonance (`on`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyPowers {
    pub budget: PowerBudget,
    pub sigma: PowerBudget,
}

/// Simulates one power point:
///
/// * `P_in = |⟨V⟩_off|²`, `P_coh = |⟨V⟩_on|²`
/// * `P_loss = ⟨V²⟩_off − ⟨V²⟩_on` (the noise floor cancels)
/// * `P_incoh = P_in − P_coh − P_loss`
pub fn synthesize_noisy_powers(clean: &PowerBudget, chain: &ChainConfig, stream: u64) -> Result<NoisyPowers> {
    chain.validate()?;
    let nb = chain.noise_flux();
    let n = chain.n_avg;
    let sq = (nb / (2.0 * n)).sqrt();
    let mut rng = chain.rng(stream);
    let mut amp = |a: f64| {
        let re = normal(&mut rng);
        let im = normal(&mut rng);
        (Complex64::new(a, 0.0) + Complex64::new(re, im) * sq).norm_sqr()
    };
    let p_in = amp(clean.p_in.sqrt());
    let p_coh = amp(clean.p_coh.sqrt());
    // Variance of the mean of |s + noise|² for a coherent part s on top of
    // Gaussian fluctuations of power q: (q² + 2|s|²q)/n.
    let second = |coh: f64, q: f64| ((q * q + 2.0 * coh * q) / n).sqrt();
    let s_off = second(clean.p_in, nb);
    let fluct_on = nb + clean.p_incoh;
    let s_on = second(clean.p_coh, fluct_on);
    let v2_off = clean.p_in + nb + s_off * normal(&mut rng);
    let v2_on = clean.p_coh + clean.p_incoh + nb + s_on * normal(&mut rng);
    let p_loss = v2_off - v2_on;
    let p_incoh = p_in - p_coh - p_loss;

    let s_in = (4.0 * clean.p_in * sq * sq + 2.0 * sq.powi(4)).sqrt();
    let s_coh = (4.0 * clean.p_coh * sq * sq + 2.0 * sq.powi(4)).sqrt();
    let s_loss = s_off.hypot(s_on);
    let s_incoh = (s_in * s_in + s_coh * s_coh + s_loss * s_loss).sqrt();
    Ok(NoisyPowers {
        budget: PowerBudget {
            p_in,
            p_coh,
            p_incoh,
            p_loss,
        },
        sigma: PowerBudget {
            p_in: s_in,
            p_coh: s_coh,
            p_incoh: s_incoh,
            p_loss: s_loss,
        },
    })
}
