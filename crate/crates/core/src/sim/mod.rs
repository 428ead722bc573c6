//! Euler–Maruyama integration of the two-scale particle system and of its
//! averaged counterpart.

mod config;
mod control;
mod ensemble;
mod initial;
mod rng;
mod run;
mod step;

pub use config::{Mode, SimConfig, DEFAULT_C_STIFF};
pub use control::FeedbackControl;
pub use ensemble::ParticleEnsemble;
pub use initial::InitialCondition;
pub use rng::{particle_rng, INITIAL_STREAM};
pub use run::{
    read_trajectory_csv, run, run_ensemble, version_string, Dynamics, RunSummary, Snapshot,
    SnapshotSummary, TrajectoryRecord, SUMMARY_QUANTILES,
};
pub use step::{step_averaged, step_multiscale};
