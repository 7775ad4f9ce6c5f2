//! Closed-form physics of the driven emitter at the end of a waveguide.

mod bloch;
mod dressed;
mod drive;
mod power;
mod rabi;
mod reflection;
mod spectrum;
mod transmon;

pub use bloch::{bloch_matrix, steady_state, BlochVector};
pub(crate) use bloch::{bloch_matrix_raw, correlation_initial};
pub use dressed::{dressed_asymmetry, dressed_asymmetry_with, DressedModel, MixingRate};
pub use drive::DriveConfig;
pub use power::{coherent_power_minimum, power_balance, region_boundaries, PowerBudget, RegionBoundaries};
pub use rabi::{power_for_rabi, rabi_from_power};
pub use reflection::{reflection_coefficient, ReflectionMode};
pub(crate) use spectrum::i3_closed;
#[cfg(test)]
pub(crate) use spectrum::mollow_psd_raw;
pub use spectrum::{
    incoherent_psd, incoherent_spectrum, line_weights, mollow_triplet_approx, mollow_triplet_approx_with, SpectralLine,
    Spectrum, DEFAULT_MOLLOW_VALIDITY, SPECTRUM_NORM,
};
pub use transmon::{transmon_frequency, TransmonParams};
