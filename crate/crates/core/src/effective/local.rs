use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::torus::{CellSolution, FastCoefficients, InvariantMeasure, TorusGrid};

/// Parameter derivatives of the corrector in the slow variable.
#[derive(Debug, Clone)]
pub struct XDerivatives {
    d: usize,
    /// `dphi_dx[l * d + i][node] = ∂Φ_l/∂x_i`
    dphi_dx: Vec<Vec<f64>>,
    /// `mixed[(l * d + i) * d + j][node] = ∂²Φ_l/∂x_i∂y_j`
    mixed: Vec<Vec<f64>>,
}

impl XDerivatives {
    /// Central differences from corrector solves at `x ± h e_i`; `plus[i]`
    /// and `minus[i]` hold those solves and `h[i]` the steps.
    pub fn from_central_differences(
        plus: &[CellSolution],
        minus: &[CellSolution],
        h: &[f64],
    ) -> Result<Self> {
        let d = h.len();
        if plus.len() != d || minus.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: plus.len().min(minus.len()),
            });
        }
        let n = plus[0].grid().len();
        let mut dphi_dx = vec![vec![0.0; n]; d * d];
        let mut mixed = vec![vec![0.0; n]; d * d * d];
        for i in 0..d {
            let (p, m) = (&plus[i], &minus[i]);
            if p.grid() != m.grid() {
                return Err(Error::GridMismatch("parameter solves on different grids".into()));
            }
            for l in 0..d {
                let out = &mut dphi_dx[l * d + i];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = (p.phi(l)[k] - m.phi(l)[k]) / (2.0 * h[i]);
                }
                for j in 0..d {
                    let out = &mut mixed[(l * d + i) * d + j];
                    for (k, o) in out.iter_mut().enumerate() {
                        *o = (p.grad(l, j)[k] - m.grad(l, j)[k]) / (2.0 * h[i]);
                    }
                }
            }
        }
        Ok(Self { d, dphi_dx, mixed })
    }

    /// Step used for the parameter difference at `x`.
    pub fn step(x: &[f64]) -> f64 {
        1e-4 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    pub fn dphi_dx(&self, l: usize, i: usize) -> &[f64] {
        &self.dphi_dx[l * self.d + i]
    }

    pub fn mixed(&self, l: usize, i: usize, j: usize) -> &[f64] {
        &self.mixed[(l * self.d + i) * self.d + j]
    }
}

/// Pointwise `β`, `D` and `D̃` over the grid, matrices row-major.
#[derive(Debug, Clone)]
pub struct LocalFields {
    pub grid: TorusGrid,
    /// `beta[l][node]`
    pub beta: Vec<Vec<f64>>,
    /// `d[a * dim + b][node]`
    pub d: Vec<Vec<f64>>,
    pub d_tilde: Vec<Vec<f64>>,
}

pub fn local_coefficients(
    cell: &CellSolution,
    coeffs: &dyn FastCoefficients,
    x: &[f64],
    mu: &EmpiricalMeasure,
    xd: Option<&XDerivatives>,
) -> Result<LocalFields> {
    let grid = *cell.grid();
    let d = grid.dim();
    if coeffs.dim() != d || x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if coeffs.dim() != d { coeffs.dim() } else { x.len() },
        });
    }
    if coeffs.dependence().cell_on_x && xd.is_none() {
        return Err(Error::MissingXDerivatives);
    }
    let n = grid.len();
    let mut beta = vec![vec![0.0; n]; d];
    let mut dd = vec![vec![0.0; n]; d * d];
    let mut dt = vec![vec![0.0; n]; d * d];
    let (mut y, mut f, mut b) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let (mut a, mut g, mut ig) = (vec![0.0; d * d], vec![0.0; d * d], vec![0.0; d * d]);
    let mut ga = vec![0.0; d * d];
    let mut phi = vec![0.0; d];
    for node in 0..n {
        grid.coords(node, &mut y);
        coeffs.fast_drift(x, &y, mu, &mut f);
        coeffs.slow_drift(x, &y, mu, &mut b);
        coeffs.diffusion(x, &y, mu, &mut a);
        cell.grad_at(node, &mut g);
        for l in 0..d {
            phi[l] = cell.phi(l)[node];
        }
        for r in 0..d {
            for c in 0..d {
                ig[r * d + c] = g[r * d + c] + if r == c { 1.0 } else { 0.0 };
            }
        }
        for l in 0..d {
            let mut v: f64 = (0..d).map(|j| ig[l * d + j] * b[j]).sum();
            if let Some(xd) = xd {
                for i in 0..d {
                    v += xd.dphi_dx(l, i)[node] * f[i];
                    for j in 0..d {
                        v += a[i * d + j] * xd.mixed(l, i, j)[node];
                    }
                }
            }
            beta[l][node] = v;
        }
        // ga = ∇Φ A
        for r in 0..d {
            for c in 0..d {
                ga[r * d + c] = (0..d).map(|k| g[r * d + k] * a[k * d + c]).sum();
            }
        }
        for r in 0..d {
            for c in 0..d {
                dd[r * d + c][node] = ga[r * d + c]
                    + ga[c * d + r]
                    + f[r] * phi[c]
                    + phi[r] * f[c]
                    + a[r * d + c];
                dt[r * d + c][node] = (0..d)
                    .map(|k| {
                        ig[r * d + k] * (0..d).map(|m| a[k * d + m] * ig[c * d + m]).sum::<f64>()
                    })
                    .sum();
            }
        }
    }
    Ok(LocalFields {
        grid,
        beta,
        d: dd,
        d_tilde: dt,
    })
}

/// `∫ g π(dy)` by the periodic nodal rule.
pub fn average(field: &[f64], pi: &InvariantMeasure) -> Result<f64> {
    if field.len() != pi.grid().len() {
        return Err(Error::GridMismatch(format!(
            "field has {} values, grid {} nodes",
            field.len(),
            pi.grid().len()
        )));
    }
    Ok(pi.average(field))
}

/// Componentwise average of a vector- or matrix-valued field.
pub fn average_all(fields: &[Vec<f64>], pi: &InvariantMeasure) -> Result<Vec<f64>> {
    fields.iter().map(|f| average(f, pi)).collect()
}
