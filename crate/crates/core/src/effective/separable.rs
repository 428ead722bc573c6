use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `a cos(2π k y + φ)` of a periodic profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub amplitude: f64,
    pub wavenumber: u32,
    #[serde(default)]
    pub phase: f64,
}

/// 1-periodic trigonometric polynomial `Q(y) = Σ a cos(2π k y + φ)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PeriodicProfile {
    pub terms: Vec<Harmonic>,
}

impl PeriodicProfile {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `a cos(2πy)`.
    pub fn cosine(a: f64) -> Self {
        Self {
            terms: vec![Harmonic {
                amplitude: a,
                wavenumber: 1,
                phase: 0.0,
            }],
        }
    }

    /// `a sin(2πy)`.
    pub fn sine(a: f64) -> Self {
        Self {
            terms: vec![Harmonic {
                amplitude: a,
                wavenumber: 1,
                phase: -std::f64::consts::FRAC_PI_2,
            }],
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        self.terms
            .iter()
            .map(|h| h.amplitude * (tau * h.wavenumber as f64 * y + h.phase).cos())
            .sum()
    }

    pub fn derivative(&self, y: f64) -> f64 {
        let tau = std::f64::consts::TAU;
        self.terms
            .iter()
            .map(|h| {
                let k = tau * h.wavenumber as f64;
                -h.amplitude * k * (k * y + h.phase).sin()
            })
            .sum()
    }

    pub fn is_constant(&self) -> bool {
        self.terms
            .iter()
            .all(|h| h.amplitude == 0.0 || h.wavenumber == 0)
    }
}

/// `V₂(y) = Σ_k Q_k(y_k)` with additive noise `σ I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparablePotential {
    pub q: Vec<PeriodicProfile>,
    pub sigma: f64,
}

impl SeparablePotential {
    pub fn new(q: Vec<PeriodicProfile>, sigma: f64) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidArgument("separable potential needs at least one axis".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { q, sigma })
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.q.iter().zip(y).map(|(q, &v)| q.value(v)).sum()
    }
}

/// Per-axis partition functions and the resulting `Γ` diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaTable {
    pub z: Vec<f64>,
    pub z_hat: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// `Γ_kk = 1/(Z_k Ẑ_k)`, `Z_k = ∫ exp(−2Q_k/σ²)`, `Ẑ_k = ∫ exp(2Q_k/σ²)`, by
/// the periodic midpoint rule.
pub fn gamma_separable(p: &SeparablePotential, quad_points: usize) -> Result<GammaTable> {
    if quad_points < 64 {
        return Err(Error::InvalidArgument(format!(
            "quad_points must be at least 64, got {quad_points}"
        )));
    }
    let s2 = p.sigma * p.sigma;
    let mut table = GammaTable {
        z: Vec::new(),
        z_hat: Vec::new(),
        gamma: Vec::new(),
    };
    for (k, q) in p.q.iter().enumerate() {
        let (mut z, mut zh) = (0.0, 0.0);
        for i in 0..quad_points {
            let y = (i as f64 + 0.5) / quad_points as f64;
            let e = 2.0 * q.value(y) / s2;
            z += (-e).exp();
            zh += e.exp();
        }
        z /= quad_points as f64;
        zh /= quad_points as f64;
        if !(z.is_finite() && zh.is_finite() && z > 0.0 && zh > 0.0) {
            return Err(Error::NonFinite(format!("partition function on axis {k}")));
        }
        table.z.push(z);
        table.z_hat.push(zh);
        table.gamma.push(1.0 / (z * zh));
    }
    Ok(table)
}
