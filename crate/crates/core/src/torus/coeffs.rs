use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use super::TorusGrid;
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

/// What the coefficients of the multiscale system depend on, beyond `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dependence {
    /// `f` or `σ` vary with the slow variable `x`.
    pub cell_on_x: bool,
    /// `f` or `σ` vary with the measure argument.
    pub cell_on_measure: bool,
    /// `b` varies with the fast variable `y`.
    pub slow_drift_on_y: bool,
}

impl Dependence {
    pub const ALL: Dependence = Dependence {
        cell_on_x: true,
        cell_on_measure: true,
        slow_drift_on_y: true,
    };
}

/// Coefficients `f`, `b`, `σ` of the multiscale system. All three are
/// 1-periodic in `y`. `σ` is written row-major as `dim × noise_dim`.
pub trait FastCoefficients: Send + Sync {
    fn dim(&self) -> usize;

    fn noise_dim(&self) -> usize {
        self.dim()
    }

    fn fast_drift(&self, x: &[f64], y: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]);

    fn slow_drift(&self, x: &[f64], y: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]);

    fn sigma(&self, x: &[f64], y: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]);

    /// `A = σσᵀ`, row-major `dim × dim`.
    fn diffusion(&self, x: &[f64], y: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        let (d, m) = (self.dim(), self.noise_dim());
        let mut s = vec![0.0; d * m];
        self.sigma(x, y, mu, &mut s);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..m).map(|k| s[i * m + k] * s[j * m + k]).sum();
            }
        }
    }

    fn dependence(&self) -> Dependence {
        Dependence::ALL
    }
}

type VecField = dyn Fn(&[f64], &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync;

/// Coefficients assembled from closures; handy for ad-hoc problems and tests.
#[derive(Clone)]
pub struct ClosureCoefficients {
    dim: usize,
    noise_dim: usize,
    f: Arc<VecField>,
    b: Arc<VecField>,
    sigma: Arc<VecField>,
    dependence: Dependence,
}

impl ClosureCoefficients {
    /// `f ≡ 0`, `b ≡ 0`, `σ ≡ s·I`.
    pub fn constant_noise(dim: usize, s: f64) -> Self {
        Self {
            dim,
            noise_dim: dim,
            f: Arc::new(|_, _, _, out| out.fill(0.0)),
            b: Arc::new(|_, _, _, out| out.fill(0.0)),
            sigma: Arc::new(move |_, _, _, out: &mut [f64]| {
                out.fill(0.0);
                for i in 0..dim {
                    out[i * dim + i] = s;
                }
            }),
            dependence: Dependence {
                cell_on_x: false,
                cell_on_measure: false,
                slow_drift_on_y: false,
            },
        }
    }

    pub fn with_fast_drift(
        mut self,
        f: impl Fn(&[f64], &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.f = Arc::new(f);
        self
    }

    pub fn with_slow_drift(
        mut self,
        b: impl Fn(&[f64], &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.b = Arc::new(b);
        self
    }

    pub fn with_sigma(
        mut self,
        noise_dim: usize,
        sigma: impl Fn(&[f64], &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        self.noise_dim = noise_dim;
        self.sigma = Arc::new(sigma);
        self
    }

    pub fn with_dependence(mut self, dependence: Dependence) -> Self {
        self.dependence = dependence;
        self
    }
}

impl FastCoefficients for ClosureCoefficients {
    fn dim(&self) -> usize {
        self.dim
    }
    fn noise_dim(&self) -> usize {
        self.noise_dim
    }
    fn fast_drift(&self, x: &[f64], y: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        (self.f)(x, y, mu, out)
    }
    fn slow_drift(&self, x: &[f64], y: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        (self.b)(x, y, mu, out)
    }
    fn sigma(&self, x: &[f64], y: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        (self.sigma)(x, y, mu, out)
    }
    fn dependence(&self) -> Dependence {
        self.dependence
    }
}

/// Smallest eigenvalue of a symmetric row-major `d × d` matrix.
pub fn min_eigenvalue(a: &[f64], d: usize) -> f64 {
    match d {
        1 => a[0],
        2 => {
            let (p, q, r) = (a[0], 0.5 * (a[1] + a[2]), a[3]);
            let mid = 0.5 * (p + r);
            let rad = (0.25 * (p - r).powi(2) + q * q).sqrt();
            mid - rad
        }
        _ => {
            let m = DMatrix::from_row_slice(d, d, a);
            let m = 0.5 * (&m + m.transpose());
            SymmetricEigen::new(m).eigenvalues.min()
        }
    }
}

/// Largest mismatch of `f`, `b`, `σ` between `y` and `y + e_a` over a few
/// sampled seam points.
pub fn periodicity_defect(
    coeffs: &dyn FastCoefficients,
    x: &[f64],
    mu: &EmpiricalMeasure,
) -> f64 {
    let (d, m) = (coeffs.dim(), coeffs.noise_dim());
    let samples = [0.0, 0.137, 0.5, 0.731];
    let (mut u, mut v) = (vec![0.0; d * m.max(1)], vec![0.0; d * m.max(1)]);
    let mut worst: f64 = 0.0;
    let mut y0 = vec![0.0; d];
    for &s in &samples {
        y0.iter_mut()
            .enumerate()
            .for_each(|(k, c)| *c = (s + 0.311 * k as f64).fract());
        for axis in 0..d {
            let mut y1 = y0.clone();
            y1[axis] += 1.0;
            let mut cmp = |eval: &dyn Fn(&[f64], &mut [f64]), len: usize| {
                eval(&y0, &mut u[..len]);
                eval(&y1, &mut v[..len]);
                for (p, q) in u[..len].iter().zip(&v[..len]) {
                    worst = worst.max((p - q).abs());
                }
            };
            cmp(&|y, o| coeffs.fast_drift(x, y, mu, o), d);
            cmp(&|y, o| coeffs.slow_drift(x, y, mu, o), d);
            cmp(&|y, o| coeffs.sigma(x, y, mu, o), d * m);
        }
    }
    worst
}

/// Minimum over grid nodes of the smallest eigenvalue of `A(x, y, μ)`.
pub fn sampled_ellipticity(
    coeffs: &dyn FastCoefficients,
    x: &[f64],
    mu: &EmpiricalMeasure,
    grid: &TorusGrid,
) -> Result<f64> {
    let d = coeffs.dim();
    if d != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: d,
        });
    }
    let mut y = vec![0.0; d];
    let mut a = vec![0.0; d * d];
    let mut worst = f64::INFINITY;
    for node in 0..grid.len() {
        grid.coords(node, &mut y);
        coeffs.diffusion(x, &y, mu, &mut a);
        worst = worst.min(min_eigenvalue(&a, d));
    }
    Ok(worst)
}
