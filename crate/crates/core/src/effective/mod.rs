//! Averaged coefficients of the slow dynamics.

mod cache;
mod local;
mod model;
mod potentials;
mod separable;
mod sqrt;

pub use local::{average, average_all, local_coefficients, LocalFields, XDerivatives};
pub use model::{
    root_residual, write_effective_table, CellAverages, ClampEvent, EffectiveModel, Provenance,
};
pub use potentials::{ConfiningPotential, Interaction, RoughPotentialSystem};
pub use separable::{gamma_separable, GammaTable, Harmonic, PeriodicProfile, SeparablePotential};
pub use sqrt::{matrix_sqrt_psd, matrix_sqrt_psd_counted, NEGATIVE_EIGEN_FLOOR, SYMMETRY_TOLERANCE};
