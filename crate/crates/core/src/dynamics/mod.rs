//! Time-domain Bloch dynamics, correlation functions and pulsed protocols.

mod bloch;
mod correlation;
pub mod ode;
mod pulses;
mod resolvent;

pub use bloch::{bloch_integrate, bloch_integrate_with, BlochTrajectory};
pub use correlation::{correlation_trajectory, sample_correlation, CorrelationSamples, CorrelationTrajectory};
pub use pulses::{pulse_prepare, ramsey_emission, t1_power_trace, ComplexTrace, PulseMode, TraceRole};
pub use resolvent::{resolvent, spectrum_numeric};
