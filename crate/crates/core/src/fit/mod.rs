//! Estimators that turn measured curves into rates.

mod calibration;
mod circle;
mod combine;
mod decay;
mod full_spectrum;
mod histogram;
mod lm;
mod powers;
mod single_point;
mod triplet;

pub use calibration::{fit_flux_arch, fit_rabi_calibration, SqrtLaw, TransmonArch};
pub use circle::{circle_fit, fit_circle_algebraic, Circle, CirclePhase, Quadrature, WeakProbeReflection};
pub use combine::{combine_rates, combine_rows, complete_rates, CombinedRates, Disagreement, PartialRates, RateRow};
pub use decay::{fit_complex_decay, fit_exponential_power, ComplexDecay, ExponentialDecay};
pub use full_spectrum::{
    fit_full_spectra, fit_full_spectrum, guess_from_peaks, FullSpectrumOptions, SpectrumData, SpectrumGuess,
};
pub use histogram::{fit_gaussian_histogram, freedman_diaconis_width, GaussianCounts, HistogramFit};
pub use lm::{
    damped_least_squares, fit_curve, gradient_mismatch, ridders_derivative, CurveModel, FitResult, LmOptions,
    ParamKind, Problem,
};
pub use powers::{
    fit_scattering_powers, CoherentPowerModel, IncoherentPowerModel, LossPowerModel, PowerCurves, ScatteringFit,
    ScatteringModel,
};
pub use single_point::{single_point_rates, SinglePoint, SinglePointRef};
pub use triplet::{find_peaks, fit_mollow_triplet, Lorentzian, Peak, TripletModel, TripletOptions};
