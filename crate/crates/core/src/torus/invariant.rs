use super::generator::{PinnedLu, SparseOperator};
use super::TorusGrid;
use crate::error::{Error, Result};

/// Relative adjoint residual accepted from the linear solve, scaled by `‖L‖_∞`.
pub const ADJOINT_TOLERANCE: f64 = 1e-8;
/// Negative values above this are roundoff; they are clamped to zero.
pub const NEGATIVE_DENSITY_FLOOR: f64 = -1e-10;

/// Stationary density of the frozen fast process on the torus grid.
#[derive(Debug, Clone)]
pub struct InvariantMeasure {
    grid: TorusGrid,
    density: Vec<f64>,
    residual: f64,
    clamped: usize,
}

impl InvariantMeasure {
    pub fn uniform(grid: TorusGrid) -> Self {
        Self {
            grid,
            density: vec![1.0; grid.len()],
            residual: 0.0,
            clamped: 0,
        }
    }

    /// Wrap nodal density values; they are normalized to unit integral.
    pub fn from_density(grid: TorusGrid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} density values for {} nodes",
                density.len(),
                grid.len()
            )));
        }
        if let Some((node, &value)) = density
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0))
        {
            return Err(Error::NegativeDensity { node, value });
        }
        let mass: f64 = density.iter().sum::<f64>() * grid.cell_volume();
        Ok(Self {
            grid,
            density: density.into_iter().map(|v| v / mass).collect(),
            residual: 0.0,
            clamped: 0,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// `‖Lᵀ π̃‖_∞` at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Number of small negative values clamped to zero.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Nodal quadrature weights `π̃_i h^d`; they sum to one.
    pub fn weights(&self) -> Vec<f64> {
        let v = self.grid.cell_volume();
        self.density.iter().map(|p| p * v).collect()
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// `∫ g π(dy)` for nodal values `g`.
    pub fn average(&self, g: &[f64]) -> f64 {
        self.density.iter().zip(g).map(|(p, v)| p * v).sum::<f64>() * self.grid.cell_volume()
    }
}

pub fn solve_invariant_measure(op: &SparseOperator) -> Result<InvariantMeasure> {
    let lu = op.factor_pinned(0)?;
    invariant_from_factors(op, &lu)
}

/// `Lᵀ π = 0` with `π_pin = 1`: the pinned equation is implied by the
/// others because the rows of `L` sum to zero.
pub(crate) fn invariant_from_factors(op: &SparseOperator, lu: &PinnedLu) -> Result<InvariantMeasure> {
    let grid = *op.grid();
    let n = op.len();
    let pin = lu.pin();
    // right-hand side: −(row `pin` of L)ᵀ restricted to the free nodes
    let mut rhs = vec![0.0; n];
    for (j, c) in op.row_entries(pin) {
        rhs[j] -= c;
    }
    let mut pi = lu.solve_transpose(&rhs);
    pi[pin] = 1.0;
    super::cell::refine(
        &mut pi,
        |p| op.apply_adjoint(p).iter().map(|v| -v).collect(),
        |r| lu.solve_transpose(r),
    );
    let scale = pi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut clamped = 0;
    for (node, p) in pi.iter_mut().enumerate() {
        if *p < 0.0 {
            if *p / scale < NEGATIVE_DENSITY_FLOOR {
                return Err(Error::NegativeDensity { node, value: *p / scale });
            }
            *p = 0.0;
            clamped += 1;
        }
    }
    let mass: f64 = pi.iter().sum::<f64>() * grid.cell_volume();
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::SolverFailure {
            what: "invariant measure",
            residual: f64::NAN,
        });
    }
    pi.iter_mut().for_each(|p| *p /= mass);
    let residual = op
        .apply_adjoint(&pi)
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if !(residual <= ADJOINT_TOLERANCE * op.norm_inf().max(1.0)) {
        return Err(Error::SolverFailure {
            what: "invariant measure",
            residual,
        });
    }
    Ok(InvariantMeasure {
        grid,
        density: pi,
        residual,
        clamped,
    })
}
