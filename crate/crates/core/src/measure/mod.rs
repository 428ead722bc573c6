//! Empirical measures, measure-valued paths and the metrics on them.

mod empirical;
mod kde;
mod wasserstein;

pub use empirical::{EmpiricalMeasure, MeasureFingerprint};
pub use kde::{gauss_hermite, silverman_bandwidth, smooth, Bandwidth, GaussianKde};
pub use wasserstein::{wasserstein2, wasserstein2_with, SlicedConfig};

use crate::error::{Error, Result};

/// `⟨θ, φ⟩ = Σ w_i φ(x_i)`.
pub fn pair(theta: &EmpiricalMeasure, phi: impl Fn(&[f64]) -> f64) -> Result<f64> {
    let mut acc = 0.0;
    for (i, (x, w)) in theta.iter().enumerate() {
        let v = phi(x);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("test function at atom {i}")));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Time-indexed sequence of measures with a common atom count.
#[derive(Debug, Clone)]
pub struct MeasurePath {
    times: Vec<f64>,
    measures: Vec<EmpiricalMeasure>,
    bandwidth: Option<f64>,
}

impl MeasurePath {
    pub fn new(times: Vec<f64>, measures: Vec<EmpiricalMeasure>) -> Result<Self> {
        if times.len() != measures.len() {
            return Err(Error::InvalidArgument(format!(
                "{} times for {} measures",
                times.len(),
                measures.len()
            )));
        }
        if measures.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("path times must be strictly increasing".into()));
        }
        let (n, d) = (measures[0].len(), measures[0].dim());
        for m in &measures[1..] {
            if m.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.dim(),
                });
            }
            if m.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "atom count changes along the path ({n} vs {})",
                    m.len()
                )));
            }
        }
        Ok(Self {
            times,
            measures,
            bandwidth: None,
        })
    }

    /// Pairings against each snapshot are replaced by pairings against the
    /// Gaussian-smoothed snapshot.
    pub fn with_bandwidth(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("bandwidth must be > 0, got {h}")));
        }
        self.bandwidth = Some(h);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn measures(&self) -> &[EmpiricalMeasure] {
        &self.measures
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.measures[0].dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}
