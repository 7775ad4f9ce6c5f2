//! JSON run configuration. Frequencies are cyclic (Hz); dBm appears only in
//! chain-related fields.

use std::path::Path;

use ratefit_core::pipeline::{
    Device, DynamicsRun, OffResonanceRun, OnResonanceRun, PipelineConfig, RamseyEnsemble, ReflectionRun, ScatteringRun,
    SinglePointRun,
};
use ratefit_core::qed::ReflectionMode;
use ratefit_core::ChainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Required by the pipeline; the other commands fall back to the
    /// default device.
    #[serde(default)]
    pub device: Option<Device>,
    #[serde(default)]
    pub drive: DriveBlock,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub reflection: ReflectionBlock,
    #[serde(default)]
    pub spectrum: SpectrumBlock,
    #[serde(default)]
    pub powers: PowersBlock,
    #[serde(default)]
    pub dynamics: DynamicsBlock,
    #[serde(default)]
    pub fit: FitBlock,
    #[serde(default)]
    pub pipeline: PipelineBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            device: Some(Device::default()),
            drive: DriveBlock::default(),
            chain: ChainConfig::default(),
            noiseless: false,
            reflection: ReflectionBlock::default(),
            spectrum: SpectrumBlock::default(),
            powers: PowersBlock::default(),
            dynamics: DynamicsBlock::default(),
            fit: FitBlock::default(),
            pipeline: PipelineBlock::default(),
        }
    }
}

/// Coherent drive for spectra, relative to the qubit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriveBlock {
    pub rabi_hz: f64,
    /// Drive minus qubit frequency.
    pub detuning_hz: f64,
}

impl Default for DriveBlock {
    fn default() -> Self {
        Self {
            rabi_hz: 9e6,
            detuning_hz: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReflectionBlock {
    pub span_hz: f64,
    pub n_points: usize,
    pub probe_dbm: f64,
    pub mode: ReflectionMode,
    /// Number of averages; replaces `chain.n_avg`, as in every block below.
    pub n_avg: f64,
}

impl Default for ReflectionBlock {
    fn default() -> Self {
        let r = ReflectionRun::default();
        Self {
            span_hz: r.span_hz,
            n_points: r.n_points,
            probe_dbm: r.probe_dbm,
            mode: ReflectionMode::WeakProbe,
            n_avg: r.n_avg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumModel {
    /// Full line shape at any drive.
    Exact,
    /// Three Lorentzians, resonant strong drive only.
    Triplet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumBlock {
    /// Half-width of the window around the drive.
    pub half_span_hz: f64,
    pub n_points: usize,
    pub model: SpectrumModel,
    pub n_avg: f64,
}

impl Default for SpectrumBlock {
    fn default() -> Self {
        Self {
            half_span_hz: 12e6,
            n_points: 2401,
            model: SpectrumModel::Exact,
            n_avg: OnResonanceRun::default().n_avg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowersBlock {
    /// Explicit drive points; when absent a logarithmic grid is used.
    pub rabi_hz: Option<Vec<f64>>,
    pub rabi_min_hz: f64,
    pub rabi_max_hz: f64,
    pub n_points: usize,
    pub n_avg: f64,
}

impl Default for PowersBlock {
    fn default() -> Self {
        let s = ScatteringRun::default();
        Self {
            rabi_hz: None,
            rabi_min_hz: s.rabi_min_hz,
            rabi_max_hz: s.rabi_max_hz,
            n_points: s.n_points,
            n_avg: s.n_avg,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    /// Field emitted after a detuned π/2 pulse.
    Ramsey,
    /// Power emitted after a π pulse.
    T1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsBlock {
    pub kind: DynamicsKind,
    pub pulse_detuning_hz: f64,
    pub duration_s: f64,
    pub n_points: usize,
    pub bandwidth_hz: f64,
    /// Defaults to a value suited to the trace kind.
    pub n_avg: Option<f64>,
}

impl DynamicsBlock {
    pub fn n_avg(&self) -> f64 {
        let d = DynamicsRun::default();
        self.n_avg.unwrap_or(match self.kind {
            DynamicsKind::Ramsey => d.n_avg_ramsey,
            DynamicsKind::T1 => d.n_avg_power,
        })
    }
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        let d = DynamicsRun::default();
        Self {
            kind: DynamicsKind::Ramsey,
            pulse_detuning_hz: d.pulse_detuning_hz,
            duration_s: d.duration_s,
            n_points: d.n_points,
            bandwidth_hz: d.bandwidth_hz,
            n_avg: None,
        }
    }
}

/// Inputs to the estimators that the data files do not carry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitBlock {
    /// Known radiative rate for the full line-shape fit and the single-point
    /// correction; defaults to the device value.
    pub gamma_r_ref_hz: Option<f64>,
    /// Known `Γ₂` for the single-point correction.
    pub gamma_2_ref_hz: Option<f64>,
    /// Expected Ramsey detuning, used to check for aliasing.
    pub detuning_hint_hz: Option<f64>,
    /// Free amplitude factor in the full line-shape fit.
    pub free_scale: bool,
    /// Joint nine-parameter triplet fit instead of individual peaks.
    pub joint_triplet: bool,
}

/// Per-method settings of the cross-method pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineBlock {
    pub reflection: ReflectionRun,
    pub on_resonance: OnResonanceRun,
    pub off_resonance: OffResonanceRun,
    pub scattering: ScatteringRun,
    pub single_point: SinglePointRun,
    pub dynamics: DynamicsRun,
    /// Optional drifting single-trace Ramsey series.
    pub ensemble: Option<RamseyEnsemble>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Schema(format!("config at `{path}`: {}", e.into_inner()))
        })?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "config at `schema_version`: expected {SCHEMA_VERSION}, got {}",
                cfg.schema_version
            )));
        }
        cfg.chain
            .validate()
            .map_err(|e| CliError::Schema(format!("config at `chain`: {e}")))?;
        for (field, n) in [
            ("reflection.n_avg", cfg.reflection.n_avg),
            ("spectrum.n_avg", cfg.spectrum.n_avg),
            ("powers.n_avg", cfg.powers.n_avg),
            ("dynamics.n_avg", cfg.dynamics.n_avg()),
        ] {
            if !(n.is_finite() && n >= 1.0) {
                return Err(CliError::Schema(format!("config at `{field}`: must be >= 1, got {n}")));
            }
        }
        Ok(cfg)
    }

    pub fn device(&self) -> Device {
        self.device.unwrap_or_default()
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, CliError> {
        let device = self
            .device
            .ok_or_else(|| CliError::Schema("config at `device`: the pipeline needs a device block".into()))?;
        let p = &self.pipeline;
        Ok(PipelineConfig {
            device,
            chain: self.chain,
            noiseless: self.noiseless,
            reflection: p.reflection,
            on_resonance: p.on_resonance,
            off_resonance: p.off_resonance,
            scattering: p.scattering,
            single_point: p.single_point,
            dynamics: p.dynamics,
        })
    }
}
