//! Gaussian kernel smoothing of empirical measures.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use super::EmpiricalMeasure;
use crate::error::{Error, Result};

/// Per-axis Gaussian bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    Scalar(f64),
    PerAxis(Vec<f64>),
    /// `1.06 · std · N^{-1/5}` on each axis.
    Silverman,
}

/// Density `x ↦ Σ w_i Π_a N(x_a; x_{i,a}, h_a²)`.
#[derive(Debug, Clone)]
pub struct GaussianKde {
    measure: EmpiricalMeasure,
    h: Vec<f64>,
}

pub fn silverman_bandwidth(m: &EmpiricalMeasure) -> Vec<f64> {
    let d = m.dim();
    let cov = m.covariance();
    let n = m.len() as f64;
    (0..d)
        .map(|a| {
            let sd = cov[a * d + a].sqrt();
            // degenerate axis: fall back to a unit-scale kernel
            let sd = if sd > 0.0 { sd } else { 1.0 };
            1.06 * sd * n.powf(-0.2)
        })
        .collect()
}

pub fn smooth(m: &EmpiricalMeasure, bandwidth: &Bandwidth) -> Result<GaussianKde> {
    let d = m.dim();
    let h = match bandwidth {
        Bandwidth::Scalar(h) => vec![*h; d],
        Bandwidth::PerAxis(h) => {
            if h.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: h.len(),
                });
            }
            h.clone()
        }
        Bandwidth::Silverman => silverman_bandwidth(m),
    };
    if h.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {h:?}")));
    }
    Ok(GaussianKde {
        measure: m.clone(),
        h,
    })
}

impl GaussianKde {
    pub fn bandwidth(&self) -> &[f64] {
        &self.h
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        let norm: f64 = self.h.iter().map(|h| (2.0 * PI).sqrt() * h).product();
        self.measure
            .iter()
            .map(|(p, w)| {
                let q: f64 = p
                    .iter()
                    .zip(x)
                    .zip(&self.h)
                    .map(|((c, v), h)| ((v - c) / h).powi(2))
                    .sum();
                w * (-0.5 * q).exp()
            })
            .sum::<f64>()
            / norm
    }

    /// Axis-aligned box covering every atom ± 6h.
    pub fn support_box(&self) -> Vec<(f64, f64)> {
        let d = self.measure.dim();
        (0..d)
            .map(|a| {
                let (lo, hi) = self
                    .measure
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (p, _)| {
                        (lo.min(p[a]), hi.max(p[a]))
                    });
                (lo - 6.0 * self.h[a], hi + 6.0 * self.h[a])
            })
            .collect()
    }

    /// Trapezoidal integral of `g · density` over the support box.
    pub fn integrate_on_box(&self, g: impl Fn(&[f64]) -> f64, points_per_axis: usize) -> f64 {
        let bx = self.support_box();
        let d = bx.len();
        let n = points_per_axis.max(2);
        let steps: Vec<f64> = bx.iter().map(|(lo, hi)| (hi - lo) / (n - 1) as f64).collect();
        let total = n.pow(d as u32);
        let mut x = vec![0.0; d];
        let mut acc = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut weight = 1.0;
            for a in 0..d {
                let i = rem % n;
                rem /= n;
                x[a] = bx[a].0 + i as f64 * steps[a];
                let end = i == 0 || i == n - 1;
                weight *= if end { 0.5 } else { 1.0 } * steps[a];
            }
            acc += weight * g(&x) * self.density(&x);
        }
        acc
    }

    /// `⟨smooth(m), φ⟩` by tensor Gauss–Hermite quadrature around each atom.
    /// Exact for polynomial φ of degree < 2·`nodes`.
    pub fn expect(&self, phi: impl Fn(&[f64]) -> f64, nodes: usize) -> f64 {
        let (z, wz) = gauss_hermite(nodes);
        let d = self.measure.dim();
        let total = nodes.pow(d as u32);
        let mut x = vec![0.0; d];
        let mut acc = 0.0;
        for (p, w) in self.measure.iter() {
            for flat in 0..total {
                let mut rem = flat;
                let mut weight = w;
                for a in 0..d {
                    let k = rem % nodes;
                    rem /= nodes;
                    x[a] = p[a] + self.h[a] * z[k];
                    weight *= wz[k];
                }
                acc += weight * phi(&x);
            }
        }
        acc
    }
}

/// Nodes and weights for `E[g(Z)]`, `Z ~ N(0,1)`, via the Golub–Welsch
/// eigenproblem of the probabilists' Hermite Jacobi matrix.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_unit_bandwidth() {
        let m = EmpiricalMeasure::uniform(1, vec![0.0]).unwrap();
        let k = smooth(&m, &Bandwidth::Scalar(1.0)).unwrap();
        assert!((k.density(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        let m = EmpiricalMeasure::uniform(1, vec![0.0]).unwrap();
        assert!(smooth(&m, &Bandwidth::Scalar(0.0)).is_err());
        assert!(smooth(&m, &Bandwidth::Scalar(-1.0)).is_err());
    }

    #[test]
    fn hermite_rule_moments() {
        let (z, w) = gauss_hermite(6);
        let m = |p: i32| z.iter().zip(&w).map(|(z, w)| w * z.powi(p)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-14);
        assert!(m(1).abs() < 1e-14);
        assert!((m(2) - 1.0).abs() < 1e-13);
        assert!((m(4) - 3.0).abs() < 1e-12);
        assert!((m(10) - 945.0).abs() < 1e-8);
    }

    #[test]
    fn mass_and_mean_on_box() {
        let m = EmpiricalMeasure::uniform(1, vec![-1.0, 0.2, 0.5, 3.0]).unwrap();
        let k = smooth(&m, &Bandwidth::Silverman).unwrap();
        let mass = k.integrate_on_box(|_| 1.0, 4001);
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
        let mean = k.expect(|x| x[0], 4);
        assert!((mean - m.mean()[0]).abs() < 1e-14);
    }

    #[test]
    fn mass_in_two_dimensions() {
        let m = EmpiricalMeasure::uniform(2, vec![0.0, 0.0, 1.0, -0.5, 0.3, 0.8]).unwrap();
        let k = smooth(&m, &Bandwidth::PerAxis(vec![0.4, 0.7])).unwrap();
        let mass = k.integrate_on_box(|_| 1.0, 301);
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
    }
}
