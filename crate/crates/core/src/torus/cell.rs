use log::warn;

use super::coeffs::FastCoefficients;
use super::generator::{PinnedLu, SparseOperator};
use super::invariant::{invariant_from_factors, InvariantMeasure};
use super::{StencilOrder, TorusGrid};
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

/// Tolerances on `|∫ f π|` relative to `‖f‖_∞` before a cell solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteringPolicy {
    /// Below this the right-hand side is projected silently.
    pub warn: f64,
    /// Above this the solve is refused.
    pub refuse: f64,
}

impl Default for CenteringPolicy {
    fn default() -> Self {
        Self {
            warn: 1e-6,
            refuse: 1e-3,
        }
    }
}

/// Residual bound `‖LΦ_l + f_l‖_∞ ≤ CELL_TOLERANCE · max(1, ‖f‖_∞)`.
pub const CELL_TOLERANCE: f64 = 1e-8;

/// Cell corrector `Φ` and its `y`-gradient on the grid.
#[derive(Debug, Clone)]
pub struct CellSolution {
    grid: TorusGrid,
    /// `phi[l][node]`
    phi: Vec<Vec<f64>>,
    /// `grad[l * d + j][node] = ∂Φ_l/∂y_j`
    grad: Vec<Vec<f64>>,
    pi: InvariantMeasure,
    residual: f64,
    centering: Vec<f64>,
}

impl CellSolution {
    /// Trivial corrector for `f ≡ 0`.
    pub fn zero(pi: InvariantMeasure) -> Self {
        let grid = *pi.grid();
        let d = grid.dim();
        Self {
            grid,
            phi: vec![vec![0.0; grid.len()]; d],
            grad: vec![vec![0.0; grid.len()]; d * d],
            pi,
            residual: 0.0,
            centering: vec![0.0; d],
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn phi(&self, l: usize) -> &[f64] {
        &self.phi[l]
    }

    /// `∂Φ_l/∂y_j` at every node.
    pub fn grad(&self, l: usize, j: usize) -> &[f64] {
        &self.grad[l * self.grid.dim() + j]
    }

    pub fn pi(&self) -> &InvariantMeasure {
        &self.pi
    }

    /// `max_l ‖LΦ_l + (f_l − ⟨f_l⟩_π)‖_∞`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `∫ f π dy` measured before the solve.
    pub fn centering(&self) -> &[f64] {
        &self.centering
    }

    /// `(∇_yΦ)` at one node as a row-major `d × d` matrix.
    pub fn grad_at(&self, node: usize, out: &mut [f64]) {
        let d = self.grid.dim();
        for l in 0..d {
            for j in 0..d {
                out[l * d + j] = self.grad[l * d + j][node];
            }
        }
    }
}

/// Nodal values of each component of `f(x, ·, μ)`.
pub fn fast_drift_field(
    coeffs: &dyn FastCoefficients,
    x: &[f64],
    mu: &EmpiricalMeasure,
    grid: &TorusGrid,
) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let mut fields = vec![vec![0.0; grid.len()]; d];
    let (mut y, mut f) = (vec![0.0; d], vec![0.0; d]);
    for node in 0..grid.len() {
        grid.coords(node, &mut y);
        coeffs.fast_drift(x, &y, mu, &mut f);
        for l in 0..d {
            fields[l][node] = f[l];
        }
    }
    fields
}

/// `∫ f(x, y, μ) π(dy)` by nodal quadrature.
pub fn check_centering(
    coeffs: &dyn FastCoefficients,
    pi: &InvariantMeasure,
    x: &[f64],
    mu: &EmpiricalMeasure,
) -> Vec<f64> {
    fast_drift_field(coeffs, x, mu, pi.grid())
        .iter()
        .map(|f| pi.average(f))
        .collect()
}

/// Centered periodic derivative of nodal values along `axis`.
pub fn derivative(grid: &TorusGrid, order: StencilOrder, g: &[f64], axis: usize) -> Vec<f64> {
    let h = grid.spacing();
    (0..grid.len())
        .map(|i| {
            order
                .first()
                .iter()
                .map(|&(k, c)| c * (g[grid.shift(i, axis, k)] - g[grid.shift(i, axis, -k)]))
                .sum::<f64>()
                / h
        })
        .collect()
}

pub fn solve_cell_problem(
    op: &SparseOperator,
    coeffs: &dyn FastCoefficients,
    x: &[f64],
    mu: &EmpiricalMeasure,
    pi: &InvariantMeasure,
) -> Result<CellSolution> {
    let lu = op.factor_pinned(0)?;
    cell_from_factors(op, &lu, coeffs, x, mu, pi, &CenteringPolicy::default())
}

/// Assemble once, factor once, and return `(L, π, Φ)`.
pub fn solve_fast_problem(
    coeffs: &dyn FastCoefficients,
    x: &[f64],
    mu: &EmpiricalMeasure,
    grid: &TorusGrid,
    opts: &super::AssemblyOptions,
    policy: &CenteringPolicy,
) -> Result<(SparseOperator, CellSolution)> {
    let op = super::assemble_generator(coeffs, x, mu, grid, opts)?;
    let lu = op.factor_pinned(0)?;
    let pi = invariant_from_factors(&op, &lu)?;
    let cell = cell_from_factors(&op, &lu, coeffs, x, mu, &pi, policy)?;
    Ok((op, cell))
}

pub(crate) fn cell_from_factors(
    op: &SparseOperator,
    lu: &PinnedLu,
    coeffs: &dyn FastCoefficients,
    x: &[f64],
    mu: &EmpiricalMeasure,
    pi: &InvariantMeasure,
    policy: &CenteringPolicy,
) -> Result<CellSolution> {
    let grid = *op.grid();
    if pi.grid() != &grid {
        return Err(Error::GridMismatch("invariant measure and operator differ".into()));
    }
    let d = grid.dim();
    let f = fast_drift_field(coeffs, x, mu, &grid);
    let f_sup = f
        .iter()
        .flat_map(|c| c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let centering: Vec<f64> = f.iter().map(|c| pi.average(c)).collect();
    if f_sup == 0.0 {
        let mut sol = CellSolution::zero(pi.clone());
        sol.centering = centering;
        return Ok(sol);
    }
    let worst = centering.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if worst > policy.refuse * f_sup {
        return Err(Error::Centering {
            residual: worst,
            tolerance: policy.refuse * f_sup,
        });
    }
    if worst > policy.warn * f_sup {
        warn!(
            "centering residual {worst:.3e} exceeds {:.3e}; projecting the cell right-hand side",
            policy.warn * f_sup
        );
    }
    let mut phi = Vec::with_capacity(d);
    let mut residual = 0.0f64;
    for l in 0..d {
        let rhs: Vec<f64> = f[l].iter().map(|v| -(v - centering[l])).collect();
        let mut u = lu.solve(&rhs);
        refine(&mut u, |u| {
            op.apply(u).iter().zip(&rhs).map(|(a, b)| b - a).collect()
        }, |r| lu.solve(r));
        let mean = pi.average(&u);
        u.iter_mut().for_each(|v| *v -= mean);
        let res = op
            .apply(&u)
            .iter()
            .zip(&rhs)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        residual = residual.max(res);
        phi.push(u);
    }
    if !(residual <= CELL_TOLERANCE * f_sup.max(1.0)) {
        return Err(Error::SolverFailure {
            what: "cell problem",
            residual,
        });
    }
    let mut grad = Vec::with_capacity(d * d);
    for p in &phi {
        for j in 0..d {
            grad.push(derivative(&grid, op.order(), p, j));
        }
    }
    Ok(CellSolution {
        grid,
        phi,
        grad,
        pi: pi.clone(),
        residual,
        centering,
    })
}

/// Write `y_1..y_d, pi, phi_1..phi_d` rows for every node.
pub fn write_cell_csv(sol: &CellSolution, mut w: impl std::io::Write) -> Result<()> {
    let grid = sol.grid();
    let d = grid.dim();
    let mut header: Vec<String> = (1..=d).map(|k| format!("y{k}")).collect();
    header.push("pi".into());
    header.extend((1..=d).map(|k| format!("phi{k}")));
    writeln!(w, "{}", header.join(","))?;
    let mut y = vec![0.0; d];
    for node in 0..grid.len() {
        grid.coords(node, &mut y);
        let mut fields: Vec<String> = y.iter().map(|v| format!("{v:.17e}")).collect();
        fields.push(format!("{:.17e}", sol.pi().density()[node]));
        fields.extend((0..d).map(|l| format!("{:.17e}", sol.phi(l)[node])));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Iterative refinement: apply corrections while the residual keeps
/// shrinking by at least half, at most eight rounds.
pub(crate) fn refine(
    u: &mut [f64],
    residual: impl Fn(&[f64]) -> Vec<f64>,
    correct: impl Fn(&[f64]) -> Vec<f64>,
) {
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut r = residual(u);
    let mut best = norm(&r);
    for _ in 0..8 {
        if best == 0.0 {
            break;
        }
        let c = correct(&r);
        let trial: Vec<f64> = u.iter().zip(&c).map(|(a, b)| a + b).collect();
        let r_new = residual(&trial);
        let n_new = norm(&r_new);
        if !(n_new < best) {
            break;
        }
        u.copy_from_slice(&trial);
        let done = n_new > 0.5 * best;
        best = n_new;
        r = r_new;
        if done {
            break;
        }
    }
}
