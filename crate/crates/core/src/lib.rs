//! Forward models and rate estimators for a driven two-level emitter at the
//! end of a one-dimensional waveguide.
//!
//! All rates and frequencies are angular (rad/s) and all powers are photon
//! fluxes (s⁻¹). Conversions to cyclic Hz and dBm live in [`units`].

pub mod chain;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod pipeline;
pub mod qed;
pub mod rates;
pub mod units;

pub use chain::ChainConfig;
pub use dynamics::{BlochTrajectory, ComplexTrace, TraceRole};
pub use error::{Error, Result};
pub use fit::{FitResult, PartialRates};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport};
pub use qed::{BlochVector, DriveConfig, PowerBudget, Spectrum, TransmonParams};
pub use rates::{derive_rates, DerivedRates, Estimate, RateSet, RateSigmas};
