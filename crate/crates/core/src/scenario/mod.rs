//! Shipped scenarios, experiment plans and their orchestration.

mod config;
mod experiment;
mod registry;

pub use config::{
    default_ladder, default_metrics, load_config, parse_config, ExperimentPlan, GridSettings,
    Metric, RateSettings, ReferenceRun, Rung, SimulationSettings, DEFAULT_LADDER, DEFAULT_SEEDS,
};
pub use experiment::{
    gamma_rows, run_experiment, table_points, write_gamma_csv, ExperimentReport, GammaRow,
    Manifest, RungResult, SeedTrend, MANIFEST_FILE,
};
pub use registry::{
    bessel_i0, build_effective_model, find_scenario, list_scenarios, registry, Assumption,
    Reference, Route, Scenario, ScenarioCoefficients, CENTERING_TOLERANCE, GAMMA_QUAD_POINTS,
    PERIODICITY_TOLERANCE,
};
