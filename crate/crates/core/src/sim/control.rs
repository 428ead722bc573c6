use std::fmt;
use std::sync::Arc;

use crate::measure::EmpiricalMeasure;

type ControlFn = dyn Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync;

/// Feedback control `u(t, X_i, μ)` added to the drift as `σu` (multiscale)
/// or `B̄u` (averaged). Its running cost `½∫|u|²dt` is accumulated per
/// particle by the steppers.
#[derive(Clone)]
pub struct FeedbackControl {
    dim: usize,
    u: Arc<ControlFn>,
}

impl fmt::Debug for FeedbackControl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FeedbackControl").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl FeedbackControl {
    pub fn new(
        dim: usize,
        u: impl Fn(f64, &[f64], &EmpiricalMeasure, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            u: Arc::new(u),
        }
    }

    /// `u ≡ c`.
    pub fn constant(c: Vec<f64>) -> Self {
        Self::new(c.len(), move |_, _, _, out| out.copy_from_slice(&c))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64, x: &[f64], mu: &EmpiricalMeasure, out: &mut [f64]) {
        (self.u)(t, x, mu, out)
    }
}
