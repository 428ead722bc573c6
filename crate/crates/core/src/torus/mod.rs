//! The frozen fast process on the unit torus: generator assembly, invariant
//! density and cell corrector.

mod cell;
mod coeffs;
mod generator;
mod grid;
mod invariant;
mod stencil;

pub use cell::{
    check_centering, derivative, fast_drift_field, solve_cell_problem, solve_fast_problem,
    write_cell_csv, CellSolution, CenteringPolicy, CELL_TOLERANCE,
};
pub use coeffs::{
    min_eigenvalue, periodicity_defect, sampled_ellipticity, ClosureCoefficients, Dependence,
    FastCoefficients,
};
pub use generator::{assemble_generator, AssemblyOptions, SparseOperator};
pub use grid::{TorusGrid, MAX_DIM};
pub use invariant::{
    solve_invariant_measure, InvariantMeasure, ADJOINT_TOLERANCE, NEGATIVE_DENSITY_FLOOR,
};
pub use stencil::StencilOrder;
