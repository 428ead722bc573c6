//! Finite-dictionary evaluation of the large-deviation rate of measure paths.

mod dictionary;
mod functional;

pub use dictionary::{AnalyticFunction, HermiteTensor, TestDictionary, TestFunction, DEFAULT_PER_AXIS};
pub use functional::{
    apply_generator, control_cost_bound, evaluate_jdg, refinement_curve, CostBound, RateOptions,
    RateReport, DEFAULT_COST_ABS_TOL, DEFAULT_COST_SLACK,
};
