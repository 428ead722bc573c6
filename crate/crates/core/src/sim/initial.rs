use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::rng::{particle_rng, INITIAL_STREAM};
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;

/// Initial particle placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// Deterministic Gaussian quantiles: midpoint quantiles in 1-D, a Halton
    /// sequence pushed through the normal quantile function in higher `d`.
    GaussianQuantiles { mean: Vec<f64>, std: f64 },
    /// Every particle at `x`.
    Point { x: Vec<f64> },
    /// I.i.d. Gaussian draws from the run seed.
    GaussianDraws { mean: Vec<f64>, std: f64 },
}

fn halton(mut i: usize, base: usize) -> f64 {
    let (mut f, mut r) = (1.0, 0.0);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const HALTON_BASES: [usize; 3] = [2, 3, 5];

impl InitialCondition {
    pub fn dim(&self) -> usize {
        match self {
            Self::GaussianQuantiles { mean, .. } | Self::GaussianDraws { mean, .. } => mean.len(),
            Self::Point { x } => x.len(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.dim() == 0 || self.dim() > HALTON_BASES.len() {
            return Err(Error::InvalidArgument(format!(
                "initial condition dimension {} not in 1..=3",
                self.dim()
            )));
        }
        match self {
            Self::GaussianQuantiles { std, .. } | Self::GaussianDraws { std, .. }
                if !(*std >= 0.0 && std.is_finite()) =>
            {
                Err(Error::InvalidArgument(format!("std must be nonnegative, got {std}")))
            }
            _ => Ok(()),
        }
    }

    /// Row-major `n × d` positions.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        self.check()?;
        let d = self.dim();
        let mut out = Vec::with_capacity(n * d);
        match self {
            Self::Point { x } => (0..n).for_each(|_| out.extend_from_slice(x)),
            Self::GaussianQuantiles { mean, std } => {
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                for i in 0..n {
                    for (k, m) in mean.iter().enumerate() {
                        let u = if d == 1 {
                            (i as f64 + 0.5) / n as f64
                        } else {
                            halton(i + 1, HALTON_BASES[k])
                        };
                        out.push(m + std * normal.inverse_cdf(u));
                    }
                }
            }
            Self::GaussianDraws { mean, std } => {
                let mut rng = particle_rng(seed, INITIAL_STREAM);
                for _ in 0..n {
                    for m in mean {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        out.push(m + std * z);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Large deterministic sample standing in for the initial law.
    pub fn reference_measure(&self, n: usize) -> Result<EmpiricalMeasure> {
        let law = match self {
            Self::GaussianDraws { mean, std } => Self::GaussianQuantiles {
                mean: mean.clone(),
                std: *std,
            },
            other => other.clone(),
        };
        EmpiricalMeasure::uniform(self.dim(), law.sample(n, 0)?)
    }
}
