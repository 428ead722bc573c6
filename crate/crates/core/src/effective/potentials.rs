use serde::{Deserialize, Serialize};

use super::separable::SeparablePotential;
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::torus::{Dependence, FastCoefficients};

/// Slow confining potential `V₁`, applied axis by axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConfiningPotential {
    #[default]
    Zero,
    /// `k x²/2`
    Quadratic { k: f64 },
    /// `a x⁴/4 − b x²/2`
    DoubleWell { a: f64, b: f64 },
    /// `c (1 − cos x)`
    Cosine { c: f64 },
}

impl ConfiningPotential {
    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|&v| match *self {
                Self::Zero => 0.0,
                Self::Quadratic { k } => 0.5 * k * v * v,
                Self::DoubleWell { a, b } => 0.25 * a * v.powi(4) - 0.5 * b * v * v,
                Self::Cosine { c } => c * (1.0 - v.cos()),
            })
            .sum()
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = self.derivative(v);
        }
    }

    /// Derivative of the per-axis profile.
    pub fn derivative(&self, v: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Quadratic { k } => k * v,
            Self::DoubleWell { a, b } => a * v.powi(3) - b * v,
            Self::Cosine { c } => c * v.sin(),
        }
    }

    /// Whether `∇V₁` is globally bounded.
    pub fn bounded_gradient(&self) -> bool {
        matches!(self, Self::Zero | Self::Cosine { .. })
    }
}

/// Pairwise interaction potential `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Interaction {
    #[default]
    None,
    /// `κ|z|²/2`; `⟨μ, ∇W(x − ·)⟩ = κ(x − mean μ)`.
    Quadratic { kappa: f64 },
    /// `−s exp(−|z|²/(2w²))`, an attractive bounded kernel.
    Gaussian { strength: f64, width: f64 },
}

impl Interaction {
    /// `∇W(z)`.
    pub fn gradient(&self, z: &[f64], out: &mut [f64]) {
        match *self {
            Self::None => out.fill(0.0),
            Self::Quadratic { kappa } => {
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = kappa * v;
                }
            }
            Self::Gaussian { strength, width } => {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                let s = strength * (-0.5 * r2 / (width * width)).exp() / (width * width);
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = s * v;
                }
            }
        }
    }

    /// `⟨μ, ∇W(x − ·)⟩`. Quadratic kernels use the mean; others sum over atoms.
    pub fn mean_gradient(&self, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        match *self {
            Self::None => out.fill(0.0),
            Self::Quadratic { kappa } => {
                for ((o, &v), &m) in out.iter_mut().zip(x).zip(mu.mean()) {
                    *o = kappa * (v - m);
                }
            }
            Self::Gaussian { .. } => {
                let d = x.len();
                let (mut z, mut g) = (vec![0.0; d], vec![0.0; d]);
                out.fill(0.0);
                for (a, w) in mu.iter() {
                    for k in 0..d {
                        z[k] = x[k] - a[k];
                    }
                    self.gradient(&z, &mut g);
                    for k in 0..d {
                        out[k] += w * g[k];
                    }
                }
            }
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Self::None | Self::Quadratic { .. })
    }

    pub fn bounded_gradient(&self) -> bool {
        matches!(self, Self::None | Self::Gaussian { .. })
    }
}

/// Rough-potential system: `f = −∇V₂(y)`, `b = −∇V₁(x) − ⟨μ, ∇W(x − ·)⟩`,
/// `σ` constant times the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoughPotentialSystem {
    pub fast: SeparablePotential,
    #[serde(default)]
    pub confining: ConfiningPotential,
    #[serde(default)]
    pub interaction: Interaction,
}

impl RoughPotentialSystem {
    pub fn new(
        fast: SeparablePotential,
        confining: ConfiningPotential,
        interaction: Interaction,
    ) -> Result<Self> {
        if !(fast.sigma > 0.0 && fast.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {}", fast.sigma)));
        }
        Ok(Self {
            fast,
            confining,
            interaction,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.fast.sigma
    }

    /// `−∇V₁(x) − ⟨μ, ∇W(x − ·)⟩`.
    pub fn slow_force(&self, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        self.interaction.mean_gradient(x, mu, out);
        for (o, &v) in out.iter_mut().zip(x) {
            *o = -*o - self.confining.derivative(v);
        }
    }
}

impl FastCoefficients for RoughPotentialSystem {
    fn dim(&self) -> usize {
        self.fast.dim()
    }

    fn fast_drift(&self, _x: &[f64], y: &[f64], _mu: &EmpiricalMeasure, out: &mut [f64]) {
        for ((o, q), &v) in out.iter_mut().zip(&self.fast.q).zip(y) {
            *o = -q.derivative(v);
        }
    }

    fn slow_drift(&self, x: &[f64], _y: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        self.slow_force(x, mu, out);
    }

    fn sigma(&self, _x: &[f64], _y: &[f64], _mu: &EmpiricalMeasure, out: &mut [f64]) {
        let d = self.dim();
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = self.fast.sigma;
        }
    }

    fn dependence(&self) -> Dependence {
        Dependence {
            cell_on_x: false,
            cell_on_measure: false,
            slow_drift_on_y: false,
        }
    }
}
