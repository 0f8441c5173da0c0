//! Configuration, state preparation and the sweep drivers behind the `cct`
//! command-line tool.

mod config;
mod drivers;
mod manifest;
mod states;

pub use config::{
    AxisConfig, ExperimentConfig, PulseConfig, Shots, StateConfig, SweepConfig, SweepParameter, SystemConfig,
    EXACT_SHOT_SCALE,
};
pub use drivers::{
    dataset_seed, default_angle_grid, default_axis_grid, default_coupling_grid, read_results_csv, run_3q,
    run_angle_sweep, run_axes_sweep, run_fig1b, write_results_csv, ResultRow,
};
pub use manifest::RunManifest;
pub use states::{named_state, prepare_state, GateToken, PreparationSpec, Target, STATE_NAMES};
