//! Evolution operators for tomography pre-rotations and the measurement
//! projectors they induce.

mod analytic;
mod numeric;
mod prerotation;

pub use analytic::analytic_propagator;
pub use numeric::{numeric_propagator, polar_unitary, Integrator};
pub use prerotation::{
    build_prerotation_set, cache_key, enumerate_settings, modified_projectors, sequence_propagator,
    setting_pulses, single_qubit_rotation, PreRotationSet, PrerotationOptions, ProjectorSet, PulseTemplate,
    QubitPulse, Setting, SettingToken,
};
