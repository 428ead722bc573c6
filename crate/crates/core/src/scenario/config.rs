use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::registry::{find_scenario, Route, Scenario};
use crate::error::{Error, Result};
use crate::sim::{Mode, SimConfig, DEFAULT_C_STIFF};
use crate::torus::StencilOrder;

/// One `(N, ε, dt, seed)` rung of a ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rung {
    pub n: usize,
    pub epsilon: f64,
    /// Defaults to the largest step the stiffness rule allows.
    #[serde(default)]
    pub dt: Option<f64>,
    pub seed: u64,
}

impl Rung {
    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(DEFAULT_C_STIFF * self.epsilon * self.epsilon)
    }
}

pub const DEFAULT_LADDER: [(usize, f64); 3] = [(250, 0.2), (1000, 0.1), (4000, 0.05)];
pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];

pub fn default_ladder() -> Vec<Rung> {
    DEFAULT_LADDER
        .iter()
        .flat_map(|&(n, epsilon)| {
            DEFAULT_SEEDS.iter().map(move |&seed| Rung {
                n,
                epsilon,
                dt: None,
                seed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    W2Ladder,
    Rate,
    GammaTable,
    EffectiveTable,
}

pub fn default_metrics() -> Vec<Metric> {
    vec![Metric::W2Ladder, Metric::Rate, Metric::GammaTable, Metric::EffectiveTable]
}

/// High-resolution averaged run the ladder is measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceRun {
    pub n: usize,
    pub dt: f64,
    pub seed: u64,
}

impl Default for ReferenceRun {
    fn default() -> Self {
        Self {
            n: 20_000,
            dt: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateSettings {
    pub per_axis: usize,
    pub cutoff: f64,
    pub smoothing: bool,
    pub bandwidth: Option<f64>,
    /// `W₂` tolerance between `θ(0)` and the scenario's initial law.
    pub initial_tolerance: f64,
}

impl Default for RateSettings {
    fn default() -> Self {
        Self {
            per_axis: crate::rate::DEFAULT_PER_AXIS,
            cutoff: 1e-9,
            smoothing: false,
            bandwidth: None,
            initial_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub points_per_axis: usize,
    pub order: StencilOrder,
}

/// Single run used by `simulate` and `rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    pub mode: Mode,
    pub n: usize,
    pub epsilon: f64,
    pub dt: Option<f64>,
    pub seed: u64,
    /// Constant feedback control `u`, one entry per noise component.
    pub control: Option<Vec<f64>>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            mode: Mode::Multiscale,
            n: 2000,
            epsilon: 0.05,
            dt: None,
            seed: 1,
            control: None,
        }
    }
}

/// Everything an experiment needs, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub scenario: String,
    #[serde(default = "default_ladder")]
    pub ladder: Vec<Rung>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "one")]
    pub t_end: f64,
    /// Equally spaced snapshot count on `[0, t_end]`, endpoints included.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default)]
    pub reference: ReferenceRun,
    #[serde(default)]
    pub rate: RateSettings,
    #[serde(default)]
    pub grid: Option<GridSettings>,
    #[serde(default)]
    pub route: Route,
    /// Required for scenarios with unbounded coefficients.
    #[serde(default)]
    pub allow_unbounded: bool,
    #[serde(default)]
    pub simulation: SimulationSettings,
    /// Slow point for `solve-cell`; the origin by default.
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    /// Trajectory CSV evaluated by `rate` instead of a fresh simulation.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> f64 {
    1.0
}

fn default_snapshots() -> usize {
    21
}

impl ExperimentPlan {
    pub fn scenario(&self) -> Result<Scenario> {
        find_scenario(&self.scenario)
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        let k = self.snapshots - 1;
        (0..=k).map(|i| self.t_end * i as f64 / k as f64).collect()
    }

    pub fn grid_override(&self) -> Option<(usize, StencilOrder)> {
        self.grid.map(|g| (g.points_per_axis, g.order))
    }

    pub fn rung_config(&self, rung: &Rung) -> SimConfig {
        SimConfig::new(rung.epsilon, rung.n, rung.seed)
            .with_dt(rung.dt())
            .with_t_end(self.t_end)
            .with_snapshots(self.snapshot_times())
            .with_moment_cap(self.scenario().ok().and_then(|s| s.moment_cap))
    }

    pub fn simulation_config(&self) -> SimConfig {
        let s = &self.simulation;
        let mut cfg = SimConfig::new(s.epsilon, s.n, s.seed)
            .with_t_end(self.t_end)
            .with_snapshots(self.snapshot_times())
            .with_moment_cap(self.scenario().ok().and_then(|s| s.moment_cap));
        if let Some(dt) = s.dt {
            cfg = cfg.with_dt(dt);
        }
        cfg
    }

    pub fn reference_config(&self) -> SimConfig {
        SimConfig::new(1.0, self.reference.n, self.reference.seed)
            .with_dt(self.reference.dt)
            .with_t_end(self.t_end)
            .with_snapshots(self.snapshot_times())
            .with_moment_cap(self.scenario().ok().and_then(|s| s.moment_cap))
    }

    /// Checks that do not need a scenario solve.
    pub fn validate(&self) -> Result<()> {
        let scenario = self.scenario()?;
        let invalid = |path: &str, message: String| Error::Config {
            path: path.into(),
            message,
        };
        if !scenario.bounded && !self.allow_unbounded {
            return Err(invalid(
                "allow_unbounded",
                format!(
                    "scenario {} has unbounded coefficients; set allow_unbounded to run it under \
                     the fourth-moment monitor",
                    scenario.name
                ),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid("t_end", format!("must be positive, got {}", self.t_end)));
        }
        if self.snapshots < 3 {
            return Err(invalid("snapshots", format!("need at least 3, got {}", self.snapshots)));
        }
        let mut seen = BTreeSet::new();
        for (k, rung) in self.ladder.iter().enumerate() {
            if !seen.insert((rung.n, rung.epsilon.to_bits(), rung.seed)) {
                return Err(invalid(
                    &format!("ladder[{k}].seed"),
                    format!("seed {} repeats for (N={}, eps={})", rung.seed, rung.n, rung.epsilon),
                ));
            }
            self.rung_config(rung)
                .validate(Mode::Multiscale)
                .map_err(|e| e.context(format!("ladder[{k}]")))?;
        }
        self.simulation_config()
            .validate(self.simulation.mode)
            .map_err(|e| e.context("simulation"))?;
        self.reference_config()
            .validate(Mode::Averaged)
            .map_err(|e| e.context("reference"))?;
        if let Some(u) = &self.simulation.control {
            if u.len() != scenario.fast().noise_dim() {
                return Err(invalid(
                    "simulation.control",
                    format!("expected {} components, got {}", scenario.fast().noise_dim(), u.len()),
                ));
            }
        }
        if let Some(x) = &self.x {
            if x.len() != scenario.dim {
                return Err(invalid("x", format!("expected {} components, got {}", scenario.dim, x.len())));
            }
        }
        if self.rate.per_axis < 2 {
            return Err(invalid("rate.per_axis", "need at least 2 functions per axis".into()));
        }
        scenario.validate()
    }
}

/// Parse and validate a plan; schema errors carry the offending field path.
pub fn parse_config(text: &str) -> Result<ExperimentPlan> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let plan: ExperimentPlan = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    plan.validate()?;
    Ok(plan)
}

pub fn load_config(path: &Path) -> Result<ExperimentPlan> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ladder_has_three_seeds_per_rung() {
        let l = default_ladder();
        assert_eq!(l.len(), 9);
        assert!((l[8].dt() - 0.1 * 0.05 * 0.05).abs() < 1e-18);
    }

    #[test]
    fn schema_error_names_the_field() {
        let err = parse_config(r#"{"scenario": "free_brownian", "ladder": [{"n": 10, "epsilonn": 0.1, "seed": 1}]}"#)
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ladder[0]") && msg.contains("epsilonn"), "{msg}");
        assert!(err.is_validation());
    }
}
