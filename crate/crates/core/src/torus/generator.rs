//! Finite-difference discretization of the frozen fast generator
//! `L g = f·∇g + ½ A:∇∇g` on the torus.
//!
//! Only off-diagonal couplings are stored. The diagonal is minus their row
//! sum, and [`SparseOperator::apply`] evaluates `Σ_j c_ij (g_j − g_i)`, so
//! constants are annihilated exactly in floating point.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, MatMut};

use super::coeffs::{min_eigenvalue, FastCoefficients};
use super::{StencilOrder, TorusGrid};
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub order: StencilOrder,
    /// Smallest admissible eigenvalue of `A` at any node.
    pub ellipticity_floor: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            order: StencilOrder::Fourth,
            ellipticity_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseOperator {
    grid: TorusGrid,
    order: StencilOrder,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

pub fn assemble_generator(
    coeffs: &dyn FastCoefficients,
    x: &[f64],
    mu: &EmpiricalMeasure,
    grid: &TorusGrid,
    opts: &AssemblyOptions,
) -> Result<SparseOperator> {
    let d = grid.dim();
    if coeffs.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: coeffs.dim(),
        });
    }
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let h = grid.spacing();
    let (first, second) = (opts.order.first(), opts.order.second());
    let n_nodes = grid.len();
    let mut y = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut a = vec![0.0; d * d];
    let mut row: Vec<(usize, f64)> = Vec::new();
    let mut row_ptr = Vec::with_capacity(n_nodes + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut diag = Vec::with_capacity(n_nodes);
    row_ptr.push(0);
    for i in 0..n_nodes {
        grid.coords(i, &mut y);
        coeffs.fast_drift(x, &y, mu, &mut f);
        coeffs.diffusion(x, &y, mu, &mut a);
        if let Some(bad) = f.iter().chain(&a).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coefficient {bad} at node {i}")));
        }
        let lam = min_eigenvalue(&a, d);
        if !(lam >= opts.ellipticity_floor) {
            return Err(Error::Ellipticity {
                node: i,
                min_eig: lam,
                threshold: opts.ellipticity_floor,
            });
        }
        row.clear();
        for ax in 0..d {
            for &(k, c) in first {
                let w = f[ax] * c / h;
                row.push((grid.shift(i, ax, k), w));
                row.push((grid.shift(i, ax, -k), -w));
            }
            for &(k, c) in second {
                let w = 0.5 * a[ax * d + ax] * c / (h * h);
                row.push((grid.shift(i, ax, k), w));
                row.push((grid.shift(i, ax, -k), w));
            }
            for bx in ax + 1..d {
                let a_ab = 0.5 * (a[ax * d + bx] + a[bx * d + ax]);
                if a_ab == 0.0 {
                    continue;
                }
                for &(k, ck) in first {
                    for &(l, cl) in first {
                        let w = a_ab * ck * cl / (h * h);
                        let pp = grid.shift(grid.shift(i, ax, k), bx, l);
                        let pm = grid.shift(grid.shift(i, ax, k), bx, -l);
                        let mp = grid.shift(grid.shift(i, ax, -k), bx, l);
                        let mm = grid.shift(grid.shift(i, ax, -k), bx, -l);
                        row.extend([(pp, w), (pm, -w), (mp, -w), (mm, w)]);
                    }
                }
            }
        }
        row.sort_by_key(|e| e.0);
        let mut off_sum = 0.0;
        let mut k = 0;
        while k < row.len() {
            let col = row[k].0;
            let mut v = 0.0;
            while k < row.len() && row[k].0 == col {
                v += row[k].1;
                k += 1;
            }
            if col != i && v != 0.0 {
                cols.push(col);
                vals.push(v);
                off_sum += v;
            }
        }
        diag.push(-off_sum);
        row_ptr.push(cols.len());
    }
    Ok(SparseOperator {
        grid: *grid,
        order: opts.order,
        row_ptr,
        cols,
        vals,
        diag,
    })
}

impl SparseOperator {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len() + self.diag.len()
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    /// `(L g)_i = Σ_j c_ij (g_j − g_i)`.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.row(i).map(|(j, c)| c * (g[j] - g[i])).sum())
            .collect()
    }

    /// `Lᵀ p`, the discrete adjoint with respect to the uniform node weights.
    pub fn apply_adjoint(&self, p: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = self.diag.iter().zip(p).map(|(d, v)| d * v).collect();
        for i in 0..self.len() {
            for (j, c) in self.row(i) {
                out[j] += c * p[i];
            }
        }
        out
    }

    /// Sum of the stored row entries including the diagonal.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.diag[i] + self.row(i).map(|(_, c)| c).sum::<f64>()
    }

    /// Max absolute row sum, `‖L‖_∞`.
    pub fn norm_inf(&self) -> f64 {
        (0..self.len())
            .map(|i| self.diag[i].abs() + self.row(i).map(|(_, c)| c.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Dense copy, for small grids and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = self.diag[i];
            for (j, c) in self.row(i) {
                row[j] += c;
            }
        }
        m
    }

    /// LU factors of `L` with the row and column of `pin` removed. The
    /// reduced matrix is nonsingular when the kernel of `L` is the constants.
    pub(crate) fn factor_pinned(&self, pin: usize) -> Result<PinnedLu> {
        let n = self.len();
        let map = |k: usize| if k < pin { k } else { k - 1 };
        let mut trip = Vec::with_capacity(self.nnz());
        for i in (0..n).filter(|&i| i != pin) {
            trip.push(Triplet::new(map(i), map(i), self.diag[i]));
            for (j, c) in self.row(i) {
                if j != pin {
                    trip.push(Triplet::new(map(i), map(j), c));
                }
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n - 1, n - 1, &trip)
            .map_err(|_| Error::SolverFailure {
                what: "sparse assembly",
                residual: f64::NAN,
            })?;
        let lu = mat.sp_lu().map_err(|_| Error::IllConditioned {
            what: "pinned generator LU",
            condition: f64::INFINITY,
        })?;
        Ok(PinnedLu { lu, pin, n })
    }

    pub(crate) fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        let mut r: Vec<(usize, f64)> = self.row(i).collect();
        r.push((i, self.diag[i]));
        r
    }
}

pub(crate) struct PinnedLu {
    lu: Lu<usize, f64>,
    pin: usize,
    n: usize,
}

impl PinnedLu {
    fn reduce(&self, v: &[f64]) -> Col<f64> {
        Col::from_fn(self.n - 1, |k| v[if k < self.pin { k } else { k + 1 }])
    }

    fn expand(&self, c: &Col<f64>, pinned_value: f64) -> Vec<f64> {
        (0..self.n)
            .map(|k| match k.cmp(&self.pin) {
                std::cmp::Ordering::Less => c[k],
                std::cmp::Ordering::Equal => pinned_value,
                std::cmp::Ordering::Greater => c[k - 1],
            })
            .collect()
    }

    /// Solve `L_red u = rhs_red` and return `u` with `u_pin = 0`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut c = self.reduce(rhs);
        self.lu.solve_in_place(MatMut::from(c.as_mat_mut()));
        self.expand(&c, 0.0)
    }

    /// Solve `L_redᵀ u = rhs_red` and return `u` with `u_pin = 0`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        let mut c = self.reduce(rhs);
        self.lu.solve_transpose_in_place(MatMut::from(c.as_mat_mut()));
        self.expand(&c, 0.0)
    }

    pub fn pin(&self) -> usize {
        self.pin
    }
}
