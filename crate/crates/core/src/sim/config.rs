use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which dynamics a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The two-scale system with fast drift `f/ε`.
    Multiscale,
    /// Particles driven by the averaged coefficients, on any time step.
    Averaged,
    /// Averaged coefficients on the time grid and noise streams of the
    /// matching multiscale run, so the two share Brownian increments.
    PreAveraged,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Multiscale => "multiscale",
            Self::Averaged => "averaged",
            Self::PreAveraged => "pre_averaged",
        }
    }
}

pub const DEFAULT_C_STIFF: f64 = 0.1;

fn default_t_end() -> f64 {
    1.0
}

fn default_c_stiff() -> f64 {
    DEFAULT_C_STIFF
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub epsilon: f64,
    pub n_particles: usize,
    pub dt: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_c_stiff")]
    pub c_stiff: f64,
    /// Abort when the empirical fourth moment exceeds this.
    #[serde(default)]
    pub moment_cap: Option<f64>,
}

impl SimConfig {
    /// `dt = c_stiff ε²`, snapshots at 0 and `t_end`.
    pub fn new(epsilon: f64, n_particles: usize, seed: u64) -> Self {
        Self {
            epsilon,
            n_particles,
            dt: DEFAULT_C_STIFF * epsilon * epsilon,
            t_end: 1.0,
            snapshot_times: vec![0.0, 1.0],
            seed,
            c_stiff: DEFAULT_C_STIFF,
            moment_cap: None,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_moment_cap(mut self, cap: Option<f64>) -> Self {
        self.moment_cap = cap;
        self
    }

    /// Largest step allowed for the multiscale system.
    pub fn max_dt(&self) -> f64 {
        self.c_stiff * self.epsilon * self.epsilon
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
            }
        };
        positive("epsilon", self.epsilon)?;
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        positive("c_stiff", self.c_stiff)?;
        if self.n_particles == 0 {
            return Err(Error::InvalidArgument("n_particles must be at least 1".into()));
        }
        if self.dt > self.t_end {
            return Err(Error::InvalidArgument(format!(
                "dt {} exceeds t_end {}",
                self.dt, self.t_end
            )));
        }
        if mode != Mode::Averaged && self.dt > self.max_dt() * (1.0 + 1e-12) {
            return Err(Error::Stiffness {
                dt: self.dt,
                epsilon: self.epsilon,
                c_stiff: self.c_stiff,
                suggested: self.max_dt(),
            });
        }
        if self.snapshot_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument(
                "snapshot_times must be strictly increasing".into(),
            ));
        }
        if let Some(t) = self
            .snapshot_times
            .iter()
            .find(|&&t| !(0.0..=self.t_end).contains(&t))
        {
            return Err(Error::InvalidArgument(format!(
                "snapshot time {t} outside [0, {}]",
                self.t_end
            )));
        }
        if let Some(c) = self.moment_cap {
            positive("moment_cap", c)?;
        }
        Ok(())
    }

    /// Step count and the step actually used: `t_end / dt` rounded up.
    pub fn time_grid(&self) -> (usize, f64) {
        let steps = ((self.t_end / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_end / steps as f64)
    }
}
