//! Reach, fetch and shoot cases, parameter sweeps and the wave analysis of
//! optimal controls.

pub mod config;
pub mod initial;
pub mod output;
pub mod runner;
pub mod wave;

pub use config::{
    AnalysisConfig, Bump, Case, Channel, ExperimentConfig, Material, Profile, SweepConfig, Tracking,
};
pub use initial::{bump_curvature, initial_bent_state};
pub use runner::{
    chi1_sweep, material_sweep, run_case, wave_speed_of, wavespeed_from_dir, CaseRun,
};
pub use wave::{
    estimate_wave_speed, fit_line, track_peaks, wave_directions, Direction, DirectionReport,
    SampledField, WaveFit, WaveSpeedRow,
};
