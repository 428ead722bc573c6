use std::f64::consts::TAU;
use std::sync::Arc;

use serde::Serialize;

use crate::effective::{
    ConfiningPotential, EffectiveModel, Interaction, PeriodicProfile, RoughPotentialSystem,
    SeparablePotential,
};
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::sim::InitialCondition;
use crate::torus::{
    check_centering, periodicity_defect, sampled_ellipticity, solve_invariant_measure,
    assemble_generator, AssemblyOptions, ClosureCoefficients, Dependence, FastCoefficients,
    StencilOrder, TorusGrid,
};

/// Structural assumptions a scenario declares about its coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Assumption {
    /// Deterministic, well-separated initial data.
    A1,
    /// Coefficients periodic in the fast variable.
    A2,
    /// Uniform ellipticity of the fast diffusion.
    A3,
    /// Regularity in `x` and the measure argument.
    A4,
    /// Centering of the fast drift against the invariant measure.
    A5,
    /// Nondegenerate averaged diffusion.
    A6,
    /// Fast drift of gradient type.
    B1,
    /// Fast drift of general, non-gradient type.
    B2,
}

/// A tabulated value the scenario is expected to reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    pub name: String,
    pub value: f64,
    /// How the value was obtained, in plain words.
    pub source: &'static str,
}

#[derive(Clone)]
pub enum ScenarioCoefficients {
    /// Rough-potential system; both the closed-form and the corrector route apply.
    RoughPotential(RoughPotentialSystem),
    /// General coefficients; corrector route only.
    General(Arc<dyn FastCoefficients>),
}

#[derive(Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub dim: usize,
    pub flags: Vec<Assumption>,
    /// Whether `b`, `f`, `σ` are globally bounded.
    pub bounded: bool,
    /// Fourth-moment cap used as a blowup monitor.
    pub moment_cap: Option<f64>,
    /// Declared bound on `sup_t (1/N)Σ|X_i|²` for bounded scenarios.
    pub second_moment_bound: Option<f64>,
    pub initial: InitialCondition,
    pub grid_points: usize,
    pub stencil: StencilOrder,
    pub coefficients: ScenarioCoefficients,
    pub references: Vec<Reference>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("flags", &self.flags)
            .field("bounded", &self.bounded)
            .finish_non_exhaustive()
    }
}

/// `I₀(z)` by its power series.
pub fn bessel_i0(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Closed-form diffusion factor of `Q(y) = a cos(2πy + φ)` with noise `σ`.
fn cosine_gamma(a: f64, sigma: f64) -> f64 {
    1.0 / bessel_i0(2.0 * a / (sigma * sigma)).powi(2)
}

fn rough(
    profiles: Vec<PeriodicProfile>,
    sigma: f64,
    confining: ConfiningPotential,
    interaction: Interaction,
) -> RoughPotentialSystem {
    RoughPotentialSystem::new(
        SeparablePotential::new(profiles, sigma).expect("registry potentials are valid"),
        confining,
        interaction,
    )
    .expect("registry systems are valid")
}

fn gamma_refs(axes: &[(f64, f64)]) -> Vec<Reference> {
    axes.iter()
        .enumerate()
        .map(|(k, &(a, s))| Reference {
            name: format!("gamma_{}", k + 1),
            value: cosine_gamma(a, s),
            source: "1/I0(2a/sigma^2)^2 by power series",
        })
        .collect()
}

fn skew_coefficients() -> ClosureCoefficients {
    ClosureCoefficients::constant_noise(2, 1.0)
        .with_fast_drift(|_, y, _, o| {
            o[0] = (TAU * y[1]).sin() + 0.3 * (TAU * y[0]).sin();
            o[1] = 0.5 * (TAU * y[0]).sin();
        })
        .with_slow_drift(|x, _, _, o| {
            o[0] = -x[0].sin();
            o[1] = -x[1].sin();
        })
        .with_sigma(2, |_, y, _, o| {
            o[0] = 1.0 + 0.3 * (TAU * y[0]).cos();
            o[1] = 0.25;
            o[2] = 0.0;
            o[3] = 1.0 + 0.3 * (TAU * y[1]).cos();
        })
        .with_dependence(Dependence {
            cell_on_x: false,
            cell_on_measure: false,
            slow_drift_on_y: false,
        })
}

use Assumption::*;

/// Every shipped scenario, in listing order.
pub fn registry() -> Vec<Scenario> {
    let quantiles = |d: usize, std: f64| InitialCondition::GaussianQuantiles {
        mean: vec![0.0; d],
        std,
    };
    vec![
        Scenario {
            name: "free_brownian",
            description: "flat potential in 1-D: averaged drift 0, diffusion 1",
            dim: 1,
            flags: vec![A1, A2, A3, A4, A5, A6, B1],
            bounded: true,
            moment_cap: None,
            second_moment_bound: Some(5.0),
            initial: InitialCondition::Point { x: vec![0.0] },
            grid_points: 256,
            stencil: StencilOrder::Fourth,
            coefficients: ScenarioCoefficients::RoughPotential(rough(
                vec![PeriodicProfile::zero()],
                1.0,
                ConfiningPotential::Zero,
                Interaction::None,
            )),
            references: vec![Reference {
                name: "gamma_1".into(),
                value: 1.0,
                source: "no fast potential",
            }],
        },
        Scenario {
            name: "cos_rough_1d",
            description: "rough potential cos(2*pi*y) with sigma^2 = 2 and periodic confinement",
            dim: 1,
            flags: vec![A1, A2, A3, A4, A5, A6, B1],
            bounded: true,
            moment_cap: None,
            second_moment_bound: Some(10.0),
            initial: quantiles(1, 0.5),
            grid_points: 1024,
            stencil: StencilOrder::Fourth,
            coefficients: ScenarioCoefficients::RoughPotential(rough(
                vec![PeriodicProfile::cosine(1.0)],
                2f64.sqrt(),
                ConfiningPotential::Cosine { c: 1.0 },
                Interaction::None,
            )),
            references: gamma_refs(&[(1.0, 2f64.sqrt())]),
        },
        Scenario {
            name: "dawson_rough",
            description: "double well x^4/4 - x^2/2 with quadratic attraction (kappa 0.5) and a \
                          0.25 cos(2*pi*y) rough layer; unbounded drift, admitted through its \
                          one-sided Lipschitz property under a fourth-moment cap",
            dim: 1,
            flags: vec![A1, A2, A3, A5, A6, B1],
            bounded: false,
            moment_cap: Some(1e4),
            second_moment_bound: None,
            initial: quantiles(1, 0.5),
            grid_points: 1024,
            stencil: StencilOrder::Fourth,
            coefficients: ScenarioCoefficients::RoughPotential(rough(
                vec![PeriodicProfile::cosine(0.25)],
                1.0,
                ConfiningPotential::DoubleWell { a: 1.0, b: 1.0 },
                Interaction::Quadratic { kappa: 0.5 },
            )),
            references: gamma_refs(&[(0.25, 1.0)]),
        },
        Scenario {
            name: "separable_2d",
            description: "separable rough potential cos(2*pi*y1) + sin(2*pi*y2), sigma^2 = 2, \
                          periodic confinement",
            dim: 2,
            flags: vec![A1, A2, A3, A4, A5, A6, B1],
            bounded: true,
            moment_cap: None,
            second_moment_bound: Some(10.0),
            initial: quantiles(2, 0.5),
            grid_points: 128,
            stencil: StencilOrder::Sixth,
            coefficients: ScenarioCoefficients::RoughPotential(rough(
                vec![PeriodicProfile::cosine(1.0), PeriodicProfile::sine(1.0)],
                2f64.sqrt(),
                ConfiningPotential::Cosine { c: 1.0 },
                Interaction::None,
            )),
            references: gamma_refs(&[(1.0, 2f64.sqrt()), (1.0, 2f64.sqrt())]),
        },
        Scenario {
            name: "skew_2d",
            description: "non-gradient odd fast drift with variable, correlated noise in 2-D",
            dim: 2,
            flags: vec![A1, A2, A3, A4, A5, A6, B2],
            bounded: true,
            moment_cap: None,
            second_moment_bound: Some(10.0),
            initial: quantiles(2, 0.5),
            grid_points: 64,
            stencil: StencilOrder::Sixth,
            coefficients: ScenarioCoefficients::General(Arc::new(skew_coefficients())),
            references: Vec::new(),
        },
    ]
}

pub fn find_scenario(name: &str) -> Result<Scenario> {
    registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// One line per scenario: name, dimension, flags, description.
pub fn list_scenarios() -> Vec<String> {
    registry()
        .iter()
        .map(|s| {
            let flags: Vec<String> = s.flags.iter().map(|f| format!("{f:?}")).collect();
            format!(
                "{:<14} d={} bounded={:<5} [{}] {}",
                s.name,
                s.dim,
                s.bounded,
                flags.join(","),
                s.description
            )
        })
        .collect()
}

pub const PERIODICITY_TOLERANCE: f64 = 1e-12;
pub const CENTERING_TOLERANCE: f64 = 1e-8;
const VALIDATION_POINTS: usize = 64;

impl Scenario {
    pub fn fast(&self) -> Arc<dyn FastCoefficients> {
        match &self.coefficients {
            ScenarioCoefficients::RoughPotential(s) => Arc::new(s.clone()),
            ScenarioCoefficients::General(c) => c.clone(),
        }
    }

    pub fn rough_potential(&self) -> Option<&RoughPotentialSystem> {
        match &self.coefficients {
            ScenarioCoefficients::RoughPotential(s) => Some(s),
            ScenarioCoefficients::General(_) => None,
        }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.dim, self.grid_points)
    }

    /// Smallest JSON config that loads this scenario.
    pub fn minimal_config(&self) -> String {
        if self.bounded {
            format!(r#"{{"scenario": "{}"}}"#, self.name)
        } else {
            format!(r#"{{"scenario": "{}", "allow_unbounded": true}}"#, self.name)
        }
    }

    /// Periodicity seam, ellipticity and centering, each checked only when
    /// the matching flag is declared.
    pub fn validate(&self) -> Result<()> {
        let coeffs = self.fast();
        let ctx = |e: Error| e.context(format!("scenario {}", self.name));
        let x = vec![0.3; self.dim];
        let mu = EmpiricalMeasure::uniform(self.dim, vec![0.1; self.dim]).map_err(ctx)?;
        if self.flags.contains(&A2) {
            let defect = periodicity_defect(coeffs.as_ref(), &x, &mu);
            if !(defect <= PERIODICITY_TOLERANCE) {
                return Err(ctx(Error::InvalidArgument(format!(
                    "declared periodic but seam defect is {defect:.3e}"
                ))));
            }
        }
        let grid = TorusGrid::new(self.dim, VALIDATION_POINTS).map_err(ctx)?;
        if self.flags.contains(&A3) || self.flags.contains(&A6) {
            let lam = sampled_ellipticity(coeffs.as_ref(), &x, &mu, &grid).map_err(ctx)?;
            if !(lam > 0.0) {
                return Err(ctx(Error::Ellipticity {
                    node: 0,
                    min_eig: lam,
                    threshold: 0.0,
                }));
            }
        }
        if self.flags.contains(&A5) {
            let opts = AssemblyOptions {
                order: StencilOrder::Sixth,
                ..AssemblyOptions::default()
            };
            let op = assemble_generator(coeffs.as_ref(), &x, &mu, &grid, &opts).map_err(ctx)?;
            let pi = solve_invariant_measure(&op).map_err(ctx)?;
            let c = check_centering(coeffs.as_ref(), &pi, &x, &mu);
            if let Some(v) = c.iter().find(|v| !(v.abs() <= CENTERING_TOLERANCE)) {
                return Err(ctx(Error::Centering {
                    residual: v.abs(),
                    tolerance: CENTERING_TOLERANCE,
                }));
            }
        }
        Ok(())
    }
}

/// Which averaged coefficients to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// Closed form for rough potentials, corrector otherwise.
    #[default]
    Auto,
    /// Always through the corrector.
    CellProblem,
}

pub const GAMMA_QUAD_POINTS: usize = 256;

pub fn build_effective_model(
    scenario: &Scenario,
    route: Route,
    grid: Option<(usize, StencilOrder)>,
) -> Result<EffectiveModel> {
    let (n, order) = grid.unwrap_or((scenario.grid_points, scenario.stencil));
    match (&scenario.coefficients, route) {
        (ScenarioCoefficients::RoughPotential(s), Route::Auto) => {
            EffectiveModel::from_rough_potential(s.clone(), GAMMA_QUAD_POINTS)
        }
        _ => EffectiveModel::homogenized(
            scenario.fast(),
            TorusGrid::new(scenario.dim, n)?,
            AssemblyOptions {
                order,
                ..AssemblyOptions::default()
            },
        ),
    }
}
